#pragma once

#include <array>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "biasflag/common.hpp"
#include "biasflag/corpus.hpp"
#include "biasflag/lexicon.hpp"
#include "biasflag/random.hpp"

namespace biasflag {

// Knobs for a planted-signal corpus. Positives pair a bias-type identifier
// with a biased cue template; hard negatives (EN / IN) use the same
// identifiers and diseases in neutral, evidence-framed templates.
struct SyntheticSpec {
  std::size_t n_docs = 10;
  std::size_t n_pages = 100;
  std::size_t filler_per_page = 8;
  // Fraction of filler sentences that mention an identifier (XN candidates).
  double identifier_density = 0.5;
  std::array<std::size_t, kNumBiasTypes> positives{};
  // Two-type positives: (s, t, count).
  std::vector<std::tuple<BiasType, BiasType, std::size_t>> overlaps;
  std::array<std::size_t, kNumBiasTypes> explicit_negatives{};
  std::array<std::size_t, kNumBiasTypes> implicit_negatives{};
  std::size_t remaining_negatives = 0;
  // Share of positives and hard negatives drawn from the ambiguous phrasings.
  double ambiguous_rate = 0.0;
  // Share of positives and hard negatives wrapped in a debunking frame.
  double debunk_rate = 0.0;
};

struct SyntheticCorpus {
  std::vector<DocumentPage> pages;
  std::vector<AnnotatedQuote> quotes;
  Lexicon lexicon;
  // Generator bookkeeping.
  std::array<std::size_t, kNumBiasTypes> planted_type_positives{};
  std::array<std::array<std::size_t, kNumBiasTypes>, kNumBiasTypes> planted_cooccurrence{};
  std::size_t planted_identifier_fillers = 0;
};

namespace synth {

inline const std::vector<std::string>& group_phrases(BiasType t) {
  static const std::array<std::vector<std::string>, kNumBiasTypes> kGroups = {{
      {"women", "men", "girls", "boys", "mothers", "fathers", "transgender patients"},
      {"females", "males", "female patients", "male patients", "people with ovaries",
       "intersex patients"},
      {"black patients", "white patients", "african americans", "caucasians", "people of color",
       "native americans"},
      {"hispanic patients", "latino patients", "ashkenazi jewish patients", "arab patients",
       "indigenous patients", "latina mothers"},
      {"elderly patients", "adolescents", "infants", "older adults", "patients over 65",
       "neonates"},
      {"patients from sub-saharan africa", "patients from rural areas",
       "patients from the middle east", "patients from southeast asia",
       "mediterranean patients", "patients from latin america"},
  }};
  return kGroups[index_of(t)];
}

inline const std::vector<std::string>& diseases() {
  static const std::vector<std::string> kDiseases = {
      "hypertension",   "diabetes",        "osteoporosis", "asthma",        "depression",
      "lupus",          "glaucoma",        "heart failure", "migraine",     "kidney disease",
      "obesity",        "anemia",          "tuberculosis", "hepatitis",     "sickle cell disease",
      "gout",           "psoriasis",       "stroke",       "prostate cancer", "breast cancer",
      "endometriosis",  "schizophrenia",   "dementia",     "chronic pain",  "thyroid disease"};
  return kDiseases;
}

// Sentence = opener + core + closer. Openers and closers are shared by both
// classes, so the label rides on the core's cue words alone. {G} is the
// identity group, {D} the condition.
inline const std::vector<std::string>& openers() {
  static const std::vector<std::string> kT = {
      "", "", "", "", "In practice, ", "On the ward, ", "As the lecture notes put it, ",
      "For the exam, remember that ", "In clinic, ", "According to the course handout, ",
      "Students should note that ", "During rounds it was stated that ", "Historically, ",
      "In this module, "};
  return kT;
}

inline const std::vector<std::string>& closers() {
  static const std::vector<std::string> kT = {
      "", "", "", "", " in most clinical settings", " according to the slide deck",
      " when taking a history", " in primary care", " on admission", " during the follow-up period",
      " in the outpatient setting", " as discussed in the seminar"};
  return kT;
}

inline const std::vector<std::string>& biased_cores() {
  static const std::vector<std::string> kT = {
      "{G} are inherently more prone to {D}",
      "{D} is essentially a disease of {G}",
      "{G} tend to exaggerate the symptoms of {D}",
      "{G} naturally feel less pain from {D} than other patients",
      "clinicians should assume that {G} will not comply with {D} therapy",
      "{G} have a genetically weaker constitution that invites {D}",
      "because of their biology {G} rarely develop {D} at all",
      "{G} need a separate {D} protocol simply because of who they are",
      "{G} are lazy about managing their {D}",
      "{G} are biologically predisposed to {D} because of their heritage",
      "doctors can safely ignore complaints of {D} coming from {G}",
      "{D} in {G} is usually caused by their own lifestyle choices",
      "{G} are typically too emotional to report {D} accurately",
      "one should never suspect {D} in {G} since it does not happen to them",
      "{G} always present with the classic form of {D}",
      "{G} carry an innate tendency toward severe {D}",
      "{G} cannot be trusted to describe their {D}",
      "{D} should be dismissed as hysteria when reported by {G}",
      "{G} are simply hardwired to get {D}",
      "the thicker skin of {G} protects them from {D}",
      "{G} overuse the clinic for minor {D} complaints",
      "{G} are naturally resistant to {D}",
      "{D} progresses faster in {G} because they are less careful",
      "{G} do not really suffer from {D} the way others do",
      "testing {G} for {D} is usually a waste of resources",
      "{G} are genetically destined to develop {D}",
      "{G} somehow never get {D}",
      "{D} drugs work worse in {G} because of their race alone",
      "{G} are more dramatic when describing {D}",
      "{G} have stronger bones so {D} is not a concern",
      "{G} are wired to tolerate {D} without complaint",
      "{G} invent {D} symptoms to obtain sick notes",
      "{G} metabolize {D} drugs differently purely by ancestry",
      "{D} in {G} reflects a primitive constitution",
      "{G} feign {D} flares to seek attention",
      "{G} possess sturdier organs that ward off {D}",
      "{G} get {D} because they are careless by nature",
      "{G} are too fragile to endure {D} treatment",
      "{G} inherently mishandle their {D} medication",
      "{G} are temperamentally unsuited to {D} self-care",
      "{G} magnify trivial {D} discomfort",
      "{G} are immune to {D} owing to their blood",
      "{D} rarely troubles {G} thanks to hardier physiology",
      "{G} whine about {D} more than anyone",
      "{G} provoke their own {D} through ignorance",
      "{G} are constitutionally doomed to {D}",
      "{G} misreport {D} because they are unreliable narrators",
      "{G} shrug off {D} because of tougher nerves",
      "{G} cause their {D} by refusing to listen",
      "{D} is a hallmark weakness of {G}",
      "{G} somehow outgrow {D} thanks to vigor",
      "{G} exaggerate {D} to skip work",
      "{G} are born with a flawed {D} response",
      "{G} unconsciously mimic {D} to gain sympathy",
      "{G} deserve less urgent {D} workups",
      "{G} are predestined by bloodline to suffer {D}",
      "{G} rarely bother treating {D} properly",
      "{G} naturally shrug off {D} pain",
      "{G} are prone to {D} due to an uncivilized diet",
      "{G} are stoic so their {D} can be disregarded",
  };
  return kT;
}

inline const std::vector<std::string>& neutral_cores() {
  static const std::vector<std::string> kT = {
      "a cited cohort study reported a higher incidence of {D} among {G}",
      "screening for {D} is recommended for {G} under current published guidelines",
      "{G} with {D} should receive the same first-line therapy as any other patient",
      "registry data show that access to {D} care differs for {G}, reflecting structural barriers",
      "published trials enrolled {G} with {D} and found comparable treatment responses",
      "clinicians should confirm {D} in {G} with the standard diagnostic criteria",
      "survey data suggest {G} face longer wait times for {D} referrals",
      "randomized trials support identical {D} dosing for {G}",
      "the cited meta-analysis found no intrinsic difference in {D} outcomes for {G}",
      "guidelines recommend shared decision making with {G} who have {D}",
      "a national audit measured {D} prevalence among {G}",
      "{G} were underrepresented in the pivotal {D} trials",
      "the reference range used for {D} was validated in {G}",
      "{D} may present atypically, so clinicians should examine {G} carefully",
      "social determinants help explain differences in {D} outcomes for {G}",
      "insurance coverage affects how {G} obtain {D} medication",
      "the evidence on {D} in {G} remains limited and more studies are needed",
      "{G} reported {D} symptoms at rates similar to the comparison group",
      "an observational study linked neighborhood pollution to {D} in {G}",
      "the guideline panel reviewed {D} screening data for {G}",
      "interpreters improved {D} follow-up for {G} in one trial",
      "after adjusting for income, {D} rates for {G} were similar",
      "{G} should be offered the same {D} counselling as everyone else",
      "the study cohort included {G} with confirmed {D}",
      "exposure history matters when evaluating {D} in {G}",
      "community outreach increased {D} screening uptake among {G}",
      "the validated {D} questionnaire performed equally well in {G}",
      "pharmacokinetic data for {D} treatment in {G} are summarized in the table",
      "{D} diagnosis in {G} relies on the same imaging findings",
      "case reports describe {D} in {G} treated with standard therapy",
      "a prospective registry tracked {D} incidence among {G}",
      "the consensus statement lists {D} risk factors relevant to {G}",
      "a pragmatic trial evaluated telehealth {D} follow-up for {G}",
      "{G} were enrolled proportionally in the {D} cohort",
      "authors caution that {D} data for {G} come from small samples",
      "{D} prevalence estimates for {G} vary between surveys",
      "transport barriers delayed {D} appointments for {G}",
      "a systematic review pooled {D} outcomes across {G}",
      "{G} benefited equally from the {D} intervention",
      "clinic hours were extended so {G} could attend {D} visits",
      "the {D} calculator was recalibrated using data from {G}",
      "costs of {D} medication burden {G} with low income",
      "culturally adapted {D} education was piloted with {G}",
      "biopsy confirmed {D} in {G} as in other groups",
      "uncertainty remains about {D} screening intervals for {G}",
      "{G} in the trial had {D} remission rates matching controls",
      "referral patterns for {D} among {G} were audited",
      "environmental exposure partly accounts for {D} among {G}",
      "the laboratory assay for {D} was verified on samples from {G}",
      "peer navigators supported {G} through {D} treatment",
      "{D} mortality among {G} declined after policy changes",
      "diagnostic delays for {D} in {G} were documented in audits",
      "longitudinal data chart {D} trajectories among {G}",
      "guidance urges equitable {D} access for {G}",
      "{G} participated in the {D} quality improvement project",
      "the {D} nurse clinic served {G} across several districts",
      "{D} trial investigators stratified enrollment of {G}",
      "vaccination programs lowered {D} complications among {G}",
      "epidemiologists model {D} spread among {G} using census data",
      "follow-up imaging for {D} was scheduled for {G} per protocol",
  };
  return kT;
}

// Debunking frames flip a core's polarity: a debunked stereotype is sound
// teaching, a "debunked" evidence-based statement is itself biased.
inline const std::vector<std::string>& debunk_frames() {
  static const std::vector<std::string> kT = {
      "It is a myth that ", "Contrary to popular belief, it is false that ",
      "Outdated textbooks wrongly claimed that ", "It is incorrect to say that ",
      "Students often wrongly assume that ", "There is no evidence that "};
  return kT;
}

// Phrasings annotators split on: used by both classes.
inline const std::vector<std::string>& ambiguous_cores() {
  static const std::vector<std::string> kT = {
      "{G} are more likely to have {D}",
      "{D} is more common in {G}",
      "{G} often present late with {D}",
      "{G} should be screened early for {D}",
      "consider {D} first when assessing {G}",
      "{G} have worse outcomes from {D}",
  };
  return kT;
}

// Identifier-bearing filler: text nobody annotated (XN candidates).
inline const std::vector<std::string>& identifier_filler_templates() {
  static const std::vector<std::string> kT = {
      "The clinic scheduled {G} with {D} for their routine follow-up visit.",
      "Consent forms about {D} were translated so that {G} could review them.",
      "The case discussion featured {G} attending the {D} outpatient clinic.",
      "Interpreters were available for {G} during the {D} education session.",
      "The nurse explained the {D} medication schedule to {G} and their families.",
      "Students interviewed {G} living with {D} as part of the communication workshop.",
      "The community program offered transport to {G} receiving {D} care.",
      "A pharmacist reviewed the {D} prescriptions of {G} before discharge.",
      "The waiting room survey on {D} included responses from {G} this month.",
      "Volunteers helped {G} complete the {D} registration paperwork.",
      "The slide shows a photograph of {G} at a {D} support group.",
      "Case 4 describes {G} admitted with an exacerbation of {D}.",
      "The simulation exercise casts an actor as one of the {G} with {D}.",
      "Table 2 lists {D} clinic attendance by {G} over the year.",
      "The podcast episode interviews {G} about daily life with {D}.",
      "Handouts on {D} diet were printed for {G} in large type.",
      "The admission note records that {G} brought their {D} inhaler or tablets.",
      "A video demonstrates how {G} use the {D} home monitoring kit.",
  };
  return kT;
}

inline const std::vector<std::string>& plain_filler() {
  static const std::vector<std::string> kT = {
      "The patient was discharged after three days of observation.",
      "Blood pressure should be measured twice at each visit.",
      "Review the laboratory values before the ward round begins.",
      "The module concludes with a short quiz on pharmacology.",
      "Always document allergies in the electronic record.",
      "The lecture covers renal physiology and fluid balance.",
      "Students should wash their hands before every examination.",
      "The attending physician reviewed the imaging with the team.",
      "Chest radiographs were ordered for the admitted patient.",
      "This section summarizes the learning objectives for the week.",
      "Hydration and rest were advised until the fever resolved.",
      "The dosage was adjusted according to renal function.",
  };
  return kT;
}

// Language-use examples (RN): flagged for wording, not for a disease claim.
inline const std::vector<std::string>& remaining_templates() {
  static const std::vector<std::string> kT = {
      "The old case notes described {G} as difficult and uncooperative.",
      "The slide refers to {G} with a label the committee considers outdated.",
      "A caption on this page uses an informal nickname for {G}.",
      "The handout lists {G} under a heading that uses dated terminology.",
  };
  return kT;
}

inline std::string fill(std::string_view tmpl, std::string_view group, std::string_view disease) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl.substr(i, 3) == "{G}") {
      out += group;
      i += 2;
    } else if (tmpl.substr(i, 3) == "{D}") {
      out += disease;
      i += 2;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

// Label-free context vocabulary, as in real course material.
inline const std::vector<std::string>& courses() {
  static const std::vector<std::string> kT = {
      "cardiology", "nephrology", "dermatology", "pharmacology", "physiology", "endocrinology",
      "rheumatology", "neurology", "psychiatry", "oncology", "hematology", "pulmonology",
      "gastroenterology", "infectious disease", "emergency medicine", "family medicine",
      "radiology", "pathology", "immunology", "epidemiology", "biostatistics", "anatomy",
      "biochemistry", "genetics", "ophthalmology", "urology", "orthopedics", "anesthesiology",
      "microbiology", "public health", "nutrition", "palliative care"};
  return kT;
}

inline const std::vector<std::string>& settings() {
  static const std::vector<std::string> kT = {
      "the teaching hospital", "the district clinic", "the university ward", "the skills lab",
      "the simulation centre", "the community health centre", "the county hospital",
      "the tutorial room", "the grand rounds", "the morning huddle", "the journal club",
      "the bedside teaching session", "the problem-based learning group", "the case conference",
      "the residency seminar", "the clerkship orientation", "the audit meeting",
      "the quality committee", "the board review course", "the online module",
      "the lecture theatre", "the night shift handover", "the discharge meeting",
      "the pharmacy huddle"};
  return kT;
}

inline std::string context_opener(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return "";
    case 1: return "In the " + rng.pick(courses()) + " block, ";
    case 2: return "At " + rng.pick(settings()) + ", ";
    default: return rng.pick(openers());
  }
}

inline std::string context_closer(Rng& rng) {
  switch (rng.below(4)) {
    case 0: return "";
    case 1: return ", as taught in " + rng.pick(courses());
    case 2: return ", per " + rng.pick(settings());
    default: return rng.pick(closers());
  }
}

inline std::string compose(Rng& rng, const std::vector<std::string>& cores, std::string_view group,
                           std::string_view disease, bool debunk = false) {
  std::string t = debunk ? rng.pick(debunk_frames()) : context_opener(rng);
  t += rng.pick(cores);
  t += context_closer(rng);
  t.push_back('.');
  return fill(t, group, disease);
}

}  // namespace synth

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n_pages == 0 || spec.n_docs == 0) throw ConfigError("synthetic corpus needs pages and documents");
  Rng rng(seed);
  SyntheticCorpus out;
  out.lexicon = default_lexicon();

  struct Planted {
    std::string text;
    std::vector<std::string> codes;
  };
  std::vector<Planted> planted;
  static const std::vector<std::string> kPositiveCodes = {"bias", "potential bias", "review"};

  auto positive = [&](std::vector<BiasType> types) {
    std::string group;
    for (std::size_t i = 0; i < types.size(); ++i) {
      if (i) group += " and ";
      group += rng.pick(synth::group_phrases(types[i]));
    }
    Planted p;
    const bool amb = rng.bernoulli(spec.ambiguous_rate);
    const bool debunk = !amb && rng.bernoulli(spec.debunk_rate);
    p.text = synth::compose(rng,
                            amb ? synth::ambiguous_cores()
                                : (debunk ? synth::neutral_cores() : synth::biased_cores()),
                            group, rng.pick(synth::diseases()), debunk);
    // "review" is rarer than the two bias codes.
    const auto r = rng.below(10);
    p.codes.push_back(kPositiveCodes[r < 5 ? 0 : (r < 9 ? 1 : 2)]);
    for (BiasType t : types) {
      p.codes.push_back(type_code(t));
      ++out.planted_type_positives[index_of(t)];
    }
    for (BiasType s : types)
      for (BiasType t : types) ++out.planted_cooccurrence[index_of(s)][index_of(t)];
    planted.push_back(std::move(p));
  };

  for (BiasType t : kBiasTypes)
    for (std::size_t i = 0; i < spec.positives[index_of(t)]; ++i) positive({t});
  for (const auto& [s, t, n] : spec.overlaps)
    for (std::size_t i = 0; i < n; ++i) positive({s, t});

  for (BiasType t : kBiasTypes) {
    const auto& groups = synth::group_phrases(t);
    auto hard = [&] {
      const bool amb = rng.bernoulli(spec.ambiguous_rate);
      const bool debunk = !amb && rng.bernoulli(spec.debunk_rate);
      return synth::compose(rng,
                            amb ? synth::ambiguous_cores()
                                : (debunk ? synth::biased_cores() : synth::neutral_cores()),
                            rng.pick(groups), rng.pick(synth::diseases()), debunk);
    };
    for (std::size_t i = 0; i < spec.explicit_negatives[index_of(t)]; ++i)
      planted.push_back({hard(), {"non-bias", type_code(t)}});
    for (std::size_t i = 0; i < spec.implicit_negatives[index_of(t)]; ++i)
      planted.push_back({hard(), {type_code(t)}});
  }
  static const std::vector<std::string> kRemainingCodes = {"inappropriate use of language",
                                                           "sex misuse", "gender misuse"};
  for (std::size_t i = 0; i < spec.remaining_negatives; ++i) {
    const BiasType t = kBiasTypes[rng.below(kNumBiasTypes)];
    planted.push_back({synth::fill(rng.pick(synth::remaining_templates()),
                                   rng.pick(synth::group_phrases(t)), ""),
                       {rng.pick(kRemainingCodes)}});
  }
  rng.shuffle(planted);

  // Spread planted quotes round-robin over pages, then pad with filler.
  std::vector<std::vector<std::size_t>> page_quotes(spec.n_pages);
  for (std::size_t i = 0; i < planted.size(); ++i) page_quotes[i % spec.n_pages].push_back(i);

  const std::size_t pages_per_doc = (spec.n_pages + spec.n_docs - 1) / spec.n_docs;
  std::size_t quote_seq = 0;
  for (std::size_t p = 0; p < spec.n_pages; ++p) {
    DocumentPage page;
    page.doc_id = "D" + std::to_string(p / pages_per_doc + 1);
    page.page_no = static_cast<int>(p % pages_per_doc + 1);
    std::vector<std::pair<std::string, std::optional<std::size_t>>> sentences;
    for (std::size_t i = 0; i < spec.filler_per_page; ++i) {
      if (rng.bernoulli(spec.identifier_density)) {
        const BiasType t = kBiasTypes[rng.below(kNumBiasTypes)];
        sentences.emplace_back(synth::fill(rng.pick(synth::identifier_filler_templates()),
                                           rng.pick(synth::group_phrases(t)), rng.pick(synth::diseases())),
                               std::nullopt);
        ++out.planted_identifier_fillers;
      } else {
        sentences.emplace_back(rng.pick(synth::plain_filler()), std::nullopt);
      }
    }
    for (std::size_t qi : page_quotes[p]) {
      const std::size_t at = static_cast<std::size_t>(rng.below(sentences.size() + 1));
      sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(at),
                       {planted[qi].text, qi});
    }
    for (const auto& [text, qi] : sentences) {
      if (!page.text.empty()) page.text.push_back(' ');
      page.text += text;
      if (!qi) continue;
      AnnotatedQuote q;
      q.quote_id = "q" + std::to_string(++quote_seq);
      q.doc_id = page.doc_id;
      q.page_no = page.page_no;
      q.text = text;
      q.codes = planted[*qi].codes;
      q.annotator_id = "A" + std::to_string(1 + rng.below(4));
      out.quotes.push_back(std::move(q));
    }
    out.pages.push_back(std::move(page));
  }
  return out;
}

// ~2,000 examples over six types: the default desk-scale substrate.
inline SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.n_docs = 12;
  s.n_pages = 120;
  s.filler_per_page = 10;
  s.identifier_density = 0.8;
  s.positives = {55, 55, 55, 55, 55, 55};
  s.overlaps = {{BiasType::sex, BiasType::age, 12},
                {BiasType::ethnicity, BiasType::race, 12},
                {BiasType::gender, BiasType::age, 10}};
  s.explicit_negatives = {25, 25, 25, 25, 25, 25};
  s.implicit_negatives = {20, 20, 20, 20, 20, 20};
  s.remaining_negatives = 60;
  s.ambiguous_rate = 0.1;
  s.debunk_rate = 0.1;
  return s;
}

}  // namespace biasflag
