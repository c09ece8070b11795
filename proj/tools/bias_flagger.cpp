// bias_flagger: command-line front of the pipeline and the review service.
//
// Everything lives under a data home ($BIAS_FLAGGER_HOME or ./biasflag-data):
//   corpus/documents.jsonl, corpus/annotations.jsonl   written by ingest / synth
//   datasets/<task>_<variation>.jsonl                  build-dataset
//   models/<task>_<arch>.bfm                           train
//   reports/<task>_<arch>_<variation>/, reports/<task>/ train, evaluate
//   queue.jsonl                                        serve, flag --enqueue, export-labels

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "biasflag/biasflag.hpp"
#include "biasflag/service_http.hpp"

using namespace biasflag;
namespace fs = std::filesystem;

namespace {

struct Home {
  fs::path root;
  fs::path corpus() const { return root / "corpus"; }
  fs::path documents() const { return corpus() / "documents.jsonl"; }
  fs::path annotations() const { return corpus() / "annotations.jsonl"; }
  fs::path datasets() const { return root / "datasets"; }
  fs::path models() const { return root / "models"; }
  fs::path reports() const { return root / "reports"; }
  fs::path queue() const { return root / "queue.jsonl"; }
};

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

Lexicon lexicon_from(const std::string& path) {
  if (path.empty()) return default_lexicon();
  auto in = open_in(path);
  return load_lexicon(in);
}

Task task_from(const std::string& s) {
  auto t = parse_task(s);
  if (!t) throw ConfigError("unknown task '" + s + "'");
  return *t;
}

VariationKind variation_from(const std::string& s) {
  auto v = parse_variation(s);
  if (!v) throw ConfigError("unknown variation '" + s + "' (xn, an, an-rn)");
  return *v;
}

Method method_from(const std::string& s) {
  auto m = parse_method(s);
  if (!m) throw ConfigError("unknown arch '" + s + "'");
  return *m;
}

struct Loaded {
  std::vector<DocumentPage> pages;
  std::vector<AnnotatedQuote> quotes;
};

Loaded load_corpus(const Home& h) {
  Loaded c;
  {
    auto in = open_in(h.documents());
    c.pages = ingest_documents(in);
  }
  {
    auto in = open_in(h.annotations());
    c.quotes = ingest_annotations(in);
  }
  return c;
}

void save_corpus(const Home& h, const std::vector<DocumentPage>& pages, const std::vector<AnnotatedQuote>& quotes) {
  {
    auto out = open_out(h.documents());
    write_jsonl(out, pages);
  }
  auto out = open_out(h.annotations());
  write_jsonl(out, quotes);
}

void print_stats(const std::vector<DocumentPage>& pages, const std::vector<AnnotatedQuote>& quotes,
                 const Lexicon& lex) {
  const auto xn = extract_xn(pages, quotes, lex);
  std::cout << to_json(corpus_stats(pages, quotes, xn.size())).dump(2) << '\n';
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

std::pair<std::string, int> split_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--addr must be host:port");
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw ConfigError("bad port in '" + addr + "'");
  return {addr.substr(0, colon), port};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flags biased sentences in medical teaching material and runs the expert review queue."};
  app.require_subcommand(1);

  std::string home_opt, config_path, lexicon_path;
  app.add_option("--home", home_opt, "data directory (default $BIAS_FLAGGER_HOME or ./biasflag-data)");
  app.add_option("--config", config_path, "key = value config file (default <home>/config.txt if present)");
  app.add_option("--lexicon", lexicon_path, "identifier lexicon TSV (default: built-in)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate and normalize a document/annotation export");
  std::string docs_in, notes_in;
  ingest->add_option("--documents", docs_in, "pages JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--annotations", notes_in, "annotated quotes JSONL")->required()->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "write a planted synthetic corpus into the data home");
  std::uint64_t synth_seed = 1;
  synth->add_option("--seed", synth_seed);

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "write the labeled dataset of one task and variation");
  std::string task_s = "general", var_s = "an";
  build->add_option("--task", task_s)->check(CLI::IsMember({"general", "gender", "sex", "race", "ethnicity", "age", "geography"}));
  build->add_option("--variation", var_s)->check(CLI::IsMember({"xn", "an", "an-rn"}));
  std::string build_out;
  build->add_option("-o,--out", build_out, "output file (default <home>/datasets/<task>_<variation>.jsonl)");

  // train
  auto* trn = app.add_subcommand("train", "cross-validate one architecture, then fit and save a final model");
  std::string arch = "binary";
  int folds = -1;
  std::optional<std::uint64_t> seed;
  std::string model_out;
  trn->add_option("--arch", arch)->check(CLI::IsMember({"binary", "mtl", "ensemble", "baseline"}));
  trn->add_option("--task", task_s)->check(CLI::IsMember({"general", "gender", "sex", "race", "ethnicity", "age", "geography"}));
  trn->add_option("--variation", var_s)->check(CLI::IsMember({"xn", "an", "an-rn"}));
  trn->add_option("--folds", folds, "number of folds; 0 skips cross-validation");
  trn->add_option("--seed", seed);
  trn->add_option("-o,--out", model_out, "model path (default <home>/models/<task>_<arch>.bfm)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "every method x variation for a task; writes a report");
  std::string report_dir;
  std::vector<std::string> eval_methods = {"binary", "ensemble", "baseline"};
  eval->add_option("--task", task_s)->check(CLI::IsMember({"general", "gender", "sex", "race", "ethnicity", "age", "geography"}));
  eval->add_option("--methods", eval_methods)->check(CLI::IsMember({"binary", "mtl", "ensemble", "baseline"}));
  eval->add_option("--folds", folds);
  eval->add_option("--seed", seed);
  eval->add_option("-o,--out", report_dir, "report directory (default <home>/reports/<task>)");

  // flag
  auto* flag = app.add_subcommand("flag", "flag sentences of new pages");
  std::string model_path, pages_path;
  std::vector<std::string> type_models;
  double threshold = 0.5;
  bool high_recall = false, enqueue = false;
  flag->add_option("--model", model_path, "general model")->required()->check(CLI::ExistingFile);
  flag->add_option("--type-model", type_models, "extra models carrying type heads")->check(CLI::ExistingFile);
  flag->add_option("--documents", pages_path, "pages JSONL")->required()->check(CLI::ExistingFile);
  auto* th = flag->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  flag->add_flag("--high-recall", high_recall, "threshold 0.3")->excludes(th);
  flag->add_flag("--enqueue", enqueue, "also append the flags to the review queue");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP review service");
  std::string addr = "127.0.0.1:8080", token, store_path;
  serve->add_option("--addr", addr, "host:port");
  serve->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  serve->add_option("--type-model", type_models)->check(CLI::ExistingFile);
  auto* sth = serve->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  serve->add_flag("--high-recall", high_recall)->excludes(sth);
  serve->add_option("--token", token, "static bearer token (or $BIAS_FLAGGER_TOKEN)")->envname("BIAS_FLAGGER_TOKEN");
  serve->add_option("--store", store_path, "queue log (default <home>/queue.jsonl)");

  // export-labels
  auto* exp = app.add_subcommand("export-labels", "write reviewed flags as a labeled dataset");
  std::string export_out;
  exp->add_option("--store", store_path);
  exp->add_option("-o,--out", export_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const Home home{home_opt.empty() ? data_home() : fs::path(home_opt)};
    ExperimentConfig cfg;
    if (config_path.empty() && fs::exists(home.root / "config.txt")) config_path = (home.root / "config.txt").string();
    if (!config_path.empty()) apply_config(load_config(config_path), cfg);
    if (folds >= 0) cfg.folds = folds;
    if (seed) cfg.seed = *seed;
    if (high_recall) threshold = 0.3;
    const Lexicon lex = lexicon_from(lexicon_path);

    if (*ingest) {
      std::vector<DocumentPage> pages;
      std::vector<AnnotatedQuote> quotes;
      {
        auto in = open_in(docs_in);
        pages = ingest_documents(in);
      }
      {
        auto in = open_in(notes_in);
        quotes = ingest_annotations(in);
      }
      save_corpus(home, pages, quotes);
      print_stats(pages, quotes, lex);
    } else if (*synth) {
      const auto sc = generate_synthetic_corpus(default_synthetic_spec(), synth_seed);
      save_corpus(home, sc.pages, sc.quotes);
      print_stats(sc.pages, sc.quotes, sc.lexicon);
    } else if (*build) {
      const auto c = load_corpus(home);
      const auto corpus = build_labeled_corpus(c.pages, c.quotes, lex);
      const auto ds = task_dataset(task_from(task_s), corpus, variation_from(var_s));
      const fs::path out_path = build_out.empty() ? home.datasets() / (task_s + "_" + var_s + ".jsonl") : fs::path(build_out);
      auto out = open_out(out_path);
      write_labeled(out, ds.examples);
      std::size_t pos = 0;
      for (const auto& e : ds.examples) pos += e.labels.task(ds.task);
      std::cout << out_path.string() << ": " << ds.examples.size() << " examples, " << pos << " positive\n";
    } else if (*trn) {
      const Task task = task_from(task_s);
      const Method method = method_from(arch);
      const VariationKind v = variation_from(var_s);
      const auto c = load_corpus(home);
      const auto corpus = build_labeled_corpus(c.pages, c.quotes, lex);
      if (cfg.folds > 0) {
        Experiment ex(corpus, cfg);
        const auto run = ex.run(task, method, v);
        const auto dir = home.reports() / (task_s + "_" + arch + "_" + var_s);
        emit_report({run.aggregate()}, {run.curves()}, dir);
        const auto agg = run.aggregate();
        for (MetricName m : kMetricNames)
          std::cout << to_string(m) << ' ' << detail::fmt_metric(agg[m].mean) << " +- " << detail::fmt_metric(agg[m].std) << '\n';
        std::cout << "report: " << dir.string() << '\n';
      }
      if (method == Method::ensemble) {
        // One model per type; the ensemble is their OR at flag time.
        for (BiasType t : kBiasTypes) {
          const auto fit = fit_final(task_dataset(t, corpus, v), {task_of(t)}, cfg);
          const auto p = home.models() / (std::string(to_string(t)) + "_binary.bfm");
          fs::create_directories(p.parent_path());
          save_model(fit.model, p);
          std::cout << "model: " << p.string() << '\n';
        }
      } else {
        TrainedFold fit;
        if (method == Method::baseline) {
          // Same data as the binary model; only the training differs.
          const auto ds = task_dataset(task, corpus, v);
          detail::FeatureCache cache(cfg.featurizer);
          FoldSplit all;
          all.train = ds.examples;
          fit = train_baseline_split(all, task, cfg, Rng::derive(cfg.seed, 0xF1AA).next(), cache);
        } else if (method == Method::mtl) {
          fit = fit_final(mtl_dataset(corpus, v), std::vector<Task>(kAllTasks.begin(), kAllTasks.end()), cfg);
        } else {
          fit = fit_final(task_dataset(task, corpus, v), {task}, cfg);
        }
        const fs::path p = model_out.empty() ? home.models() / (task_s + "_" + arch + ".bfm") : fs::path(model_out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        save_model(fit.model, p);
        std::cout << "model: " << p.string() << '\n';
      }
    } else if (*eval) {
      const Task task = task_from(task_s);
      const auto c = load_corpus(home);
      const auto corpus = build_labeled_corpus(c.pages, c.quotes, lex);
      if (cfg.folds < 2) throw ConfigError("evaluate needs at least 2 folds");
      Experiment ex(corpus, cfg);
      std::vector<FoldAggregate> aggs;
      std::vector<CurveSet> curves;
      for (const auto& ms : eval_methods) {
        const Method m = method_from(ms);
        if (m == Method::ensemble && task != Task::general) continue;
        for (VariationKind v : kVariations) {
          const auto t0 = std::chrono::steady_clock::now();
          const auto run = ex.run(task, m, v);
          aggs.push_back(run.aggregate());
          curves.push_back(run.curves());
          const auto& a = aggs.back();
          std::cerr << ms << ' ' << to_string(v) << ": auc " << detail::fmt_metric(a[MetricName::auc].mean)
                    << " recall " << detail::fmt_metric(a[MetricName::recall].mean) << " precision "
                    << detail::fmt_metric(a[MetricName::precision].mean) << " ("
                    << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "s)\n";
        }
      }
      const fs::path dir = report_dir.empty() ? home.reports() / task_s : fs::path(report_dir);
      emit_report(aggs, curves, dir);
      std::cout << "report: " << dir.string() << '\n';
    } else if (*flag) {
      std::vector<Model> models{load_model(fs::path(model_path))};
      for (const auto& p : type_models) models.push_back(load_model(fs::path(p)));
      FlagModels fm;
      fm.general = &models.front();
      for (std::size_t i = 1; i < models.size(); ++i)
        for (BiasType t : kBiasTypes)
          if (models[i].head_of(task_of(t))) fm.types[t] = &models[i];
      auto in = open_in(pages_path);
      auto flags = flag_document(fm, ingest_documents(in), lex, threshold);
      if (enqueue) {
        QueueStore store(store_path.empty() ? home.queue() : fs::path(store_path));
        flags = store.add_flags(std::move(flags));
      }
      for (const auto& f : flags) std::cout << to_json(f).dump() << '\n';
    } else if (*serve) {
      const auto [host, port] = split_addr(addr);
      std::vector<Model> models{load_model(fs::path(model_path))};
      for (const auto& p : type_models) models.push_back(load_model(fs::path(p)));
      const fs::path log = store_path.empty() ? home.queue() : fs::path(store_path);
      if (log.has_parent_path()) fs::create_directories(log.parent_path());
      QueueStore store(log);
      ServiceOptions opt;
      opt.threshold = threshold;
      if (!token.empty()) opt.bearer_token = token;
      ReviewService svc(store, std::move(models), lex, opt);
      int bound = port;
      if (port == 0) {
        bound = svc.bind_any(host);
        if (bound < 0) throw IoError("cannot bind " + host);
      } else if (!svc.bind(host, port)) {
        throw IoError("cannot bind " + addr + " (port busy?)");
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        svc.stop();
      });
      std::cerr << "serving on " << host << ':' << bound << " (model " << svc.version() << ", log " << log.string()
                << ")\n";
      svc.listen_after_bind();
      g_stop = true;
      watcher.join();
    } else if (*exp) {
      QueueStore store(store_path.empty() ? home.queue() : fs::path(store_path));
      if (export_out.empty()) {
        store.export_labels(std::cout);
      } else {
        auto out = open_out(export_out);
        store.export_labels(out);
      }
    }
  } catch (const IngestError& e) {
    std::cerr << "error: line " << e.line() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
