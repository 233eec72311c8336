#pragma once

#include <cstdint>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace claimcraft {

// Average month / year lengths used for age arithmetic throughout.
inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kDaysPerMonth = kDaysPerYear / 12.0;  // 30.4375

// ---------------------------------------------------------------------------
// Errors. The CLI maps ConfigError to exit code 2 and everything else to 3.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Token-stream parse failure; carries the offending token index.
struct ParseError : Error {
  std::size_t token_index;
  ParseError(std::size_t index, const std::string& what)
      : Error("token " + std::to_string(index) + ": " + what), token_index(index) {}
};

struct NumericError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Calendar dates. Day-level arithmetic uses the civil-calendar algorithms.

struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;

  // Months since year 0, used for month-resolution grouping.
  int month_index() const { return year * 12 + (month - 1); }
};

// Days since 1970-01-01 (proleptic Gregorian).
long days_from_civil(const Date& d);

inline long days_between(const Date& a, const Date& b) {
  return days_from_civil(b) - days_from_civil(a);
}

std::string to_string(const Date& d);             // YYYY-MM-DD
Date parse_date(const std::string& s);            // throws DataError

inline int month_year(int month_index) { return month_index / 12; }
inline int month_of_year(int month_index) { return month_index % 12 + 1; }  // 1..12

// ---------------------------------------------------------------------------
// Deterministic float formatting for CSV/SVG output. Never locale dependent.

std::string format_double(double v, int decimals);   // fixed
std::string format_general(double v);                // %.9g, canonical nan/inf

std::vector<std::string> split(const std::string& s, char sep);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

std::string read_text_file(const std::string& path);                   // throws DataError
void write_text_file(const std::string& path, const std::string& text);

}  // namespace claimcraft
