#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace claimcraft {

// ---------------------------------------------------------------------------
// Diagnosis code grammar. Codes look like "E11.9", "I10", "R13.10", "S00.83XS":
// a major (letter + two alphanumerics), an optional minor (digits after the
// dot), and an optional trailing letter suffix. Anything else fails to parse.

struct DxParts {
  std::string major;
  std::string minor;   // empty when absent
  std::string suffix;  // empty when absent
};

std::optional<DxParts> parse_dx(const std::string& code);
std::string dx_to_string(const DxParts& parts);

// ---------------------------------------------------------------------------
// Source-to-standard code mapping (stand-in for vocabulary crosswalks).
// Procedure sources map to one or more standard concept codes; drug sources
// (NDC-style) map to one or more ingredient codes. One-to-many entries are
// what combination tokens exist for.
//
// Unlisted sources: procedure codes that already look standard (all digits)
// or retained fee-schedule codes ("CPT4" + digits) pass through unchanged;
// drug codes of at most 7 digits are treated as ingredient-level already.
// Everything else is unmappable and becomes a NOMAP token downstream.

enum class MapDomain { proc, rx };

struct MappedCode {
  std::vector<std::string> targets;  // empty means unmappable
};

class CodeMap {
 public:
  void add(MapDomain domain, const std::string& source, std::vector<std::string> targets);
  MappedCode map(MapDomain domain, const std::string& source) const;

  void save(const std::string& path) const;
  static CodeMap load(const std::string& path);

  std::size_t size() const { return proc_.size() + rx_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> proc_;
  std::unordered_map<std::string, std::vector<std::string>> rx_;
};

bool is_all_digits(const std::string& s);
bool is_retained_proc_code(const std::string& s);  // "CPT4" + digits

}  // namespace claimcraft
