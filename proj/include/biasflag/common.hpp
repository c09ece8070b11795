#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace biasflag {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record; carries the 1-based line number.
class IngestError : public Error {
 public:
  IngestError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyClassError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Bias types and tasks
// ---------------------------------------------------------------------------

enum class BiasType : std::uint8_t { gender = 0, sex, race, ethnicity, age, geography };

inline constexpr std::size_t kNumBiasTypes = 6;

inline constexpr std::array<BiasType, kNumBiasTypes> kBiasTypes = {
    BiasType::gender, BiasType::sex,       BiasType::race,
    BiasType::ethnicity, BiasType::age, BiasType::geography};

inline constexpr std::size_t index_of(BiasType t) noexcept {
  return static_cast<std::size_t>(t);
}

inline std::string_view to_string(BiasType t) noexcept {
  switch (t) {
    case BiasType::gender: return "gender";
    case BiasType::sex: return "sex";
    case BiasType::race: return "race";
    case BiasType::ethnicity: return "ethnicity";
    case BiasType::age: return "age";
    case BiasType::geography: return "geography";
  }
  return "unknown";
}

inline std::optional<BiasType> parse_bias_type(std::string_view s) noexcept {
  for (BiasType t : kBiasTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

// The seven classification tasks: general bias plus one per bias type.
enum class Task : std::uint8_t { general = 0, gender, sex, race, ethnicity, age, geography };

inline constexpr std::size_t kNumTasks = kNumBiasTypes + 1;

inline constexpr std::array<Task, kNumTasks> kAllTasks = {
    Task::general, Task::gender,    Task::sex,      Task::race,
    Task::ethnicity, Task::age, Task::geography};

inline constexpr Task task_of(BiasType t) noexcept {
  return static_cast<Task>(static_cast<std::uint8_t>(t) + 1);
}

inline constexpr std::optional<BiasType> bias_type_of(Task t) noexcept {
  if (t == Task::general) return std::nullopt;
  return static_cast<BiasType>(static_cast<std::uint8_t>(t) - 1);
}

inline std::string_view to_string(Task t) noexcept {
  if (t == Task::general) return "general";
  return to_string(*bias_type_of(t));
}

inline std::optional<Task> parse_task(std::string_view s) noexcept {
  if (s == "general") return Task::general;
  if (auto b = parse_bias_type(s)) return task_of(*b);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// String helpers (ASCII semantics; non-ASCII bytes pass through untouched)
// ---------------------------------------------------------------------------

inline constexpr bool is_ascii_alnum(unsigned char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline constexpr char ascii_lower(char c) noexcept {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

inline bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Lowercase and collapse whitespace; used wherever two texts are compared for
// identity rather than displayed.
inline std::string normalize_for_match(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (auto w : split_whitespace(s)) {
    if (!out.empty()) out.push_back(' ');
    out += to_lower_ascii(w);
  }
  return out;
}

}  // namespace biasflag
