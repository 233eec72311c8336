#include "claimcraft/codes.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "claimcraft/common.hpp"

namespace claimcraft {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

std::optional<DxParts> parse_dx(const std::string& code) {
  if (code.size() < 3) return std::nullopt;
  if (!is_upper(code[0]) || !is_digit(code[1]) || !(is_digit(code[2]) || is_upper(code[2]))) {
    return std::nullopt;
  }
  DxParts parts;
  parts.major = code.substr(0, 3);
  std::size_t i = 3;
  if (i == code.size()) return parts;
  if (code[i] != '.') return std::nullopt;
  ++i;
  while (i < code.size() && is_digit(code[i])) parts.minor += code[i++];
  while (i < code.size() && is_upper(code[i])) parts.suffix += code[i++];
  if (i != code.size()) return std::nullopt;         // stray characters
  if (parts.minor.empty() && parts.suffix.empty()) return std::nullopt;  // bare dot
  if (parts.minor.empty()) return std::nullopt;      // suffix requires a minor
  return parts;
}

std::string dx_to_string(const DxParts& parts) {
  std::string out = parts.major;
  if (!parts.minor.empty()) out += "." + parts.minor;
  out += parts.suffix;
  return out;
}

bool is_all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return is_digit(c); });
}

bool is_retained_proc_code(const std::string& s) {
  return s.size() > 4 && s.compare(0, 4, "CPT4") == 0 &&
         std::all_of(s.begin() + 4, s.end(), [](char c) { return is_digit(c); });
}

void CodeMap::add(MapDomain domain, const std::string& source, std::vector<std::string> targets) {
  auto& table = domain == MapDomain::proc ? proc_ : rx_;
  table[source] = std::move(targets);
}

MappedCode CodeMap::map(MapDomain domain, const std::string& source) const {
  const auto& table = domain == MapDomain::proc ? proc_ : rx_;
  if (auto it = table.find(source); it != table.end()) return {it->second};
  if (domain == MapDomain::proc) {
    if (is_all_digits(source) || is_retained_proc_code(source)) return {{source}};
  } else {
    if (is_all_digits(source) && source.size() <= 7) return {{source}};
  }
  return {};
}

void CodeMap::save(const std::string& path) const {
  // Sorted for byte-stable output.
  std::map<std::string, const std::vector<std::string>*> rows;
  for (const auto& [src, tgt] : proc_) rows["proc\t" + src] = &tgt;
  for (const auto& [src, tgt] : rx_) rows["rx\t" + src] = &tgt;
  std::string text;
  for (const auto& [key, tgt] : rows) {
    text += key;
    text += '\t';
    text += join(*tgt, ",");
    text += '\n';
  }
  write_text_file(path, text);
}

CodeMap CodeMap::load(const std::string& path) {
  CodeMap out;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw DataError(path + ":" + std::to_string(lineno) + ": want 3 columns");
    MapDomain domain;
    if (cols[0] == "proc") {
      domain = MapDomain::proc;
    } else if (cols[0] == "rx") {
      domain = MapDomain::rx;
    } else {
      throw DataError(path + ":" + std::to_string(lineno) + ": unknown domain " + cols[0]);
    }
    out.add(domain, cols[1], cols[2].empty() ? std::vector<std::string>{} : split(cols[2], ','));
  }
  return out;
}

}  // namespace claimcraft
