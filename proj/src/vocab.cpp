#include "claimcraft/vocab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "claimcraft/codes.hpp"
#include "claimcraft/common.hpp"

namespace claimcraft {

namespace {

struct CategoryName {
  TokenCategory cat;
  const char* name;
};

constexpr std::array<CategoryName, 19> kCategoryNames{{
    {TokenCategory::special, "special"},
    {TokenCategory::sex, "sex"},
    {TokenCategory::instruct, "instruct"},
    {TokenCategory::dobyr, "dobyr"},
    {TokenCategory::age, "age"},
    {TokenCategory::ny, "ny"},
    {TokenCategory::att, "att"},
    {TokenCategory::erlst, "erlst"},
    {TokenCategory::plantyp, "plantyp"},
    {TokenCategory::cap, "cap"},
    {TokenCategory::egeoloc, "egeoloc"},
    {TokenCategory::erled, "erled"},
    {TokenCategory::dx, "dx"},
    {TokenCategory::proc, "proc"},
    {TokenCategory::rx, "rx"},
    {TokenCategory::cost, "cost"},
    {TokenCategory::vt, "vt"},
    {TokenCategory::ds, "ds"},
    {TokenCategory::ls, "ls"},
}};

bool has_prefix(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

const char* category_name(TokenCategory c) {
  for (const auto& e : kCategoryNames) {
    if (e.cat == c) return e.name;
  }
  return "?";
}

std::optional<TokenCategory> category_from_name(const std::string& name) {
  for (const auto& e : kCategoryNames) {
    if (name == e.name) return e.cat;
  }
  return std::nullopt;
}

std::optional<TokenCategory> classify_token(const std::string& text) {
  if (text == tok::sos || text == tok::eos) return TokenCategory::special;
  if (text == tok::ny) return TokenCategory::ny;
  if (text.size() < 3 || text.front() != '<' || text.back() != '>') return std::nullopt;
  if (has_prefix(text, "<SEX-")) return TokenCategory::sex;
  if (has_prefix(text, "<INSTRUCT-")) return TokenCategory::instruct;
  if (has_prefix(text, "<DOBYR-")) return TokenCategory::dobyr;
  if (has_prefix(text, "<AGE-")) return TokenCategory::age;
  if (has_prefix(text, "<ATT-")) return TokenCategory::att;
  if (has_prefix(text, "<ERLST-")) return TokenCategory::erlst;
  if (has_prefix(text, "<PLANTYP-")) return TokenCategory::plantyp;
  if (has_prefix(text, "<CAP-")) return TokenCategory::cap;
  if (has_prefix(text, "<EGEOLOC-")) return TokenCategory::egeoloc;
  if (has_prefix(text, "<ERLED-")) return TokenCategory::erled;
  if (has_prefix(text, "<DX-")) return TokenCategory::dx;
  if (has_prefix(text, "<PROC-")) return TokenCategory::proc;
  if (has_prefix(text, "<RX-")) return TokenCategory::rx;
  if (has_prefix(text, "<COST-")) return TokenCategory::cost;
  if (has_prefix(text, "<VT-")) return TokenCategory::vt;
  if (has_prefix(text, "<DS-")) return TokenCategory::ds;
  if (has_prefix(text, "<LS-")) return TokenCategory::ls;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cost codec. Exact integer arithmetic on cents; half-up rounding to one
// significant digit in dollars.

int encode_cost(double amount_dollars) {
  if (!(amount_dollars > 0.0)) return 0;  // zero, negative, NaN
  // 9.5e9 dollars and above clamp to the top code.
  if (amount_dollars >= 9.5e9) return kMaxCostCode;
  const long long cents = std::llround(amount_dollars * 100.0);
  if (cents <= 0) return 0;
  long long base = 100;  // cents per 10^e dollars
  for (int e = 0; e <= 9; ++e) {
    const long long d = (cents + base / 2) / base;  // half-up
    if (d == 0) return 0;                           // below half a dollar
    if (d <= 9) return 10 * static_cast<int>(d) + e;
    base *= 10;
  }
  return kMaxCostCode;
}

double decode_cost(int code) {
  if (code == 0) return 0.0;
  const int d = code / 10;
  const int e = code % 10;
  if (code < 0 || code > kMaxCostCode || d == 0) {
    throw DataError("invalid cost code " + std::to_string(code));
  }
  double v = d;
  for (int i = 0; i < e; ++i) v *= 10.0;
  return v;
}

// ---------------------------------------------------------------------------

std::vector<std::string> decompose_dx(const std::string& code) {
  const auto parts = parse_dx(code);
  if (!parts) return {tok::dx_nomap};
  std::vector<std::string> out;
  out.push_back("<DX-MAJOR_" + parts->major + ">");
  if (!parts->minor.empty()) out.push_back("<DX-MINOR_" + parts->minor + ">");
  if (!parts->suffix.empty()) out.push_back("<DX-SUFFIX_" + parts->suffix + ">");
  return out;
}

std::vector<std::string> canonicalize_combo(const std::string& category,
                                            std::vector<std::string> codes) {
  if (codes.empty()) throw DataError("empty code group for " + category);
  std::sort(codes.begin(), codes.end());
  std::vector<std::string> out;
  if (codes.size() == 1) {
    out.push_back(tok::clinical(category, codes[0]));
    return out;
  }
  out.push_back(tok::comb_start(category));
  for (const auto& c : codes) out.push_back(tok::clinical(category, c));
  out.push_back(tok::comb_end(category));
  return out;
}

// ---------------------------------------------------------------------------
// Token text constructors.

namespace tok {

std::string sex(const std::string& v) { return "<SEX-" + v + ">"; }
std::string dobyr(int year) { return "<DOBYR-" + std::to_string(year) + ">"; }
std::string age(int years) { return "<AGE-" + std::to_string(years) + ">"; }
std::string att(int months) { return "<ATT-" + std::to_string(months) + ">"; }
std::string erlst(const std::string& payer) { return "<ERLST-" + payer + ">"; }
std::string erled(const std::string& payer) { return "<ERLED-" + payer + ">"; }
std::string plantyp(const std::string& v) { return "<PLANTYP-" + v + ">"; }
std::string cap(const std::string& v) { return "<CAP-" + v + ">"; }
std::string egeoloc(const std::string& v) { return "<EGEOLOC-" + v + ">"; }
std::string vt(const std::string& v) { return "<VT-" + v + ">"; }
std::string ds(const std::string& v) { return "<DS-" + v + ">"; }
std::string ls(const std::string& v) { return "<LS-" + v + ">"; }
std::string cost(int code) { return "<COST-" + std::to_string(code) + ">"; }
std::string dx_major(const std::string& major) { return "<DX-MAJOR_" + major + ">"; }
std::string comb_start(const std::string& category) { return "<" + category + "-COMBSTART>"; }
std::string comb_end(const std::string& category) { return "<" + category + "-COMBEND>"; }
std::string clinical(const std::string& category, const std::string& code) {
  return "<" + category + "-" + code + ">";
}

}  // namespace tok

namespace {

std::optional<int> int_after_prefix(const std::string& text, const char* prefix) {
  const std::size_t plen = std::char_traits<char>::length(prefix);
  if (text.rfind(prefix, 0) != 0 || text.size() < plen + 2 || text.back() != '>') {
    return std::nullopt;
  }
  const std::string body = text.substr(plen, text.size() - plen - 1);
  if (!is_all_digits(body)) return std::nullopt;
  return std::stoi(body);
}

}  // namespace

std::optional<int> att_value(const std::string& text) { return int_after_prefix(text, "<ATT-"); }
std::optional<int> cost_value(const std::string& text) { return int_after_prefix(text, "<COST-"); }
std::optional<int> age_value(const std::string& text) { return int_after_prefix(text, "<AGE-"); }
std::optional<int> dobyr_value(const std::string& text) { return int_after_prefix(text, "<DOBYR-"); }

std::optional<std::string> dx_major_value(const std::string& text) {
  static const std::string prefix = "<DX-MAJOR_";
  if (text.rfind(prefix, 0) != 0 || text.size() <= prefix.size() + 1 || text.back() != '>') {
    return std::nullopt;
  }
  return text.substr(prefix.size(), text.size() - prefix.size() - 1);
}

// ---------------------------------------------------------------------------
// Vocabulary.

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  // Enumerable categories are exhaustive and corpus independent; clinical
  // codes and birth years come from observation.
  std::set<std::string> per_cat[19];
  auto add = [&](TokenCategory c, const std::string& text) {
    per_cat[static_cast<int>(c)].insert(text);
  };

  add(TokenCategory::special, tok::sos);
  add(TokenCategory::special, tok::eos);
  for (const char* v : {"1", "2", "MISSING"}) add(TokenCategory::sex, tok::sex(v));
  add(TokenCategory::instruct, tok::instruct_dx);
  for (int a = 10; a <= 110; ++a) add(TokenCategory::age, tok::age(a));
  add(TokenCategory::ny, tok::ny);
  for (int m = 0; m <= 12; ++m) add(TokenCategory::att, tok::att(m));
  for (const char* p : {"CCAE", "MDCD", "MDCR", "MISSING"}) {
    add(TokenCategory::erlst, tok::erlst(p));
    add(TokenCategory::erled, tok::erled(p));
  }
  for (int v = 1; v <= 9; ++v) add(TokenCategory::plantyp, tok::plantyp(std::to_string(v)));
  add(TokenCategory::plantyp, tok::plantyp("MISSING"));
  for (const char* v : {"0", "1", "MISSING"}) add(TokenCategory::cap, tok::cap(v));
  for (int v = 1; v <= 67; ++v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    add(TokenCategory::egeoloc, tok::egeoloc(buf));
  }
  add(TokenCategory::egeoloc, tok::egeoloc("MISSING"));
  add(TokenCategory::dx, tok::dx_principal);
  add(TokenCategory::dx, tok::dx_secondary);
  add(TokenCategory::dx, tok::dx_nomap);
  add(TokenCategory::proc, tok::proc_principal);
  add(TokenCategory::proc, tok::proc_secondary);
  add(TokenCategory::proc, tok::comb_start("PROC"));
  add(TokenCategory::proc, tok::comb_end("PROC"));
  add(TokenCategory::proc, tok::proc_nomap);
  add(TokenCategory::rx, tok::comb_start("RX"));
  add(TokenCategory::rx, tok::comb_end("RX"));
  add(TokenCategory::rx, tok::rx_nomap);
  for (int c = 0; c <= kMaxCostCode; ++c) add(TokenCategory::cost, tok::cost(c));
  add(TokenCategory::cost, "<COST-MISSING>");
  for (const char* v : {"inpatient", "outpatient", "pharmacy", "MISSING"}) {
    add(TokenCategory::vt, tok::vt(v));
  }
  for (int v = 1; v <= 5; ++v) add(TokenCategory::ds, tok::ds(std::to_string(v)));
  add(TokenCategory::ds, tok::ds("MISSING"));
  for (const char* v : {"0", "1", "MISSING"}) add(TokenCategory::ls, tok::ls(v));

  for (const auto& seq : corpus) {
    for (const auto& text : seq) {
      const auto cat = classify_token(text);
      if (!cat) throw DataError("unclassifiable token \"" + text + "\"");
      switch (*cat) {
        case TokenCategory::dx:
        case TokenCategory::proc:
        case TokenCategory::rx:
        case TokenCategory::dobyr:
          add(*cat, text);
          break;
        default:
          // Enumerable category: the token must already be present.
          if (!per_cat[static_cast<int>(*cat)].count(text)) {
            throw DataError("token outside enumerated category: \"" + text + "\"");
          }
      }
    }
  }

  Vocabulary v;
  std::int32_t id = 0;
  for (const auto& e : kCategoryNames) {
    for (const auto& text : per_cat[static_cast<int>(e.cat)]) {
      v.tokens_.push_back({text, e.cat, id++});
    }
  }
  v.index();
  return v;
}

void Vocabulary::index() {
  by_text_.clear();
  by_text_.reserve(tokens_.size() * 2);
  for (const auto& t : tokens_) {
    if (!by_text_.emplace(t.text, t.id).second) {
      throw DataError("duplicate token \"" + t.text + "\"");
    }
  }
  sos_ = require(tok::sos);
  eos_ = require(tok::eos);
}

const Token& Vocabulary::at(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<std::int32_t> Vocabulary::find(const std::string& text) const {
  if (auto it = by_text_.find(text); it != by_text_.end()) return it->second;
  return std::nullopt;
}

std::int32_t Vocabulary::require(const std::string& text) const {
  if (auto id = find(text)) return *id;
  throw DataError("token not in vocabulary: \"" + text + "\"");
}

std::vector<std::int32_t> Vocabulary::encode(const std::vector<std::string>& texts) const {
  std::vector<std::int32_t> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(require(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<std::int32_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(at(id).text);
  return out;
}

std::size_t Vocabulary::category_count(TokenCategory c) const {
  std::size_t n = 0;
  for (const auto& t : tokens_) n += t.category == c;
  return n;
}

void Vocabulary::save(const std::string& path) const {
  std::string text;
  for (const auto& t : tokens_) {
    text += t.text;
    text += '\t';
    text += std::to_string(t.id);
    text += '\t';
    text += category_name(t.category);
    text += '\n';
  }
  write_text_file(path, text);
}

Vocabulary Vocabulary::load(const std::string& path) {
  Vocabulary v;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 3) {
      throw DataError(path + ":" + std::to_string(lineno) + ": want 3 columns");
    }
    const auto cat = category_from_name(cols[2]);
    if (!cat) throw DataError(path + ":" + std::to_string(lineno) + ": bad category " + cols[2]);
    const auto id = static_cast<std::int32_t>(std::stol(cols[1]));
    if (id != static_cast<std::int32_t>(v.tokens_.size())) {
      throw DataError(path + ":" + std::to_string(lineno) + ": ids must be contiguous from 0");
    }
    v.tokens_.push_back({cols[0], *cat, id});
  }
  if (v.tokens_.empty()) throw DataError(path + ": empty vocabulary");
  v.index();
  return v;
}

}  // namespace claimcraft
