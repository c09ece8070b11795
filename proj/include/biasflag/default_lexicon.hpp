#pragma once

#include <string_view>

namespace biasflag {

// Mirror of data/lexicon/default.tsv (a test keeps the two identical).
inline constexpr std::string_view kDefaultLexiconTsv = R"TSV(# Default social-identifier lexicon.
# Columns: bias type <TAB> phrase (1-4 words, matched case-insensitively on word boundaries).
# Numeric age expressions ("over 40", "45-year-old", "65 years") are matched by rule, not listed here.
gender	man
gender	men
gender	woman
gender	women
gender	boy
gender	boys
gender	girl
gender	girls
gender	transgender
gender	nonbinary
gender	non-binary
gender	mother
gender	mothers
gender	father
gender	fathers
gender	husband
gender	wife
sex	female
sex	females
sex	male
sex	males
sex	amab
sex	afab
sex	intersex
sex	people with ovaries
sex	people with testes
race	black
race	white
race	african american
race	african americans
race	caucasian
race	caucasians
race	asian american
race	asian americans
race	patients of color
race	people of color
race	native american
race	native americans
race	racial
ethnicity	hispanic
ethnicity	hispanics
ethnicity	latino
ethnicity	latina
ethnicity	latinx
ethnicity	ashkenazi jewish
ethnicity	jewish
ethnicity	arab
ethnicity	ethnic
ethnicity	ethnicity
ethnicity	indigenous
age	elderly
age	older adults
age	older adult
age	infant
age	infants
age	neonate
age	neonates
age	newborn
age	newborns
age	pediatric
age	adolescent
age	adolescents
age	teenager
age	teenagers
age	geriatric
age	young adults
age	middle-aged
geography	africa
geography	sub-saharan africa
geography	mediterranean
geography	middle east
geography	middle eastern
geography	southeast asia
geography	south asian
geography	east asian
geography	latin america
geography	northern european
geography	rural
geography	developing countries
geography	tropical regions
)TSV";

}  // namespace biasflag
