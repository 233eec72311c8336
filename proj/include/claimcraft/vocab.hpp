#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace claimcraft {

// ---------------------------------------------------------------------------
// Token categories, in vocabulary id order. Structural sentinels come first,
// then the trajectory categories; clinical categories (dx/proc/rx) hold their
// principal/secondary and combination markers as well as observed codes.

enum class TokenCategory : std::uint8_t {
  special,  // <sos>, <eos>
  sex,
  instruct,
  dobyr,
  age,
  ny,
  att,
  erlst,
  plantyp,
  cap,
  egeoloc,
  erled,
  dx,
  proc,
  rx,
  cost,
  vt,
  ds,
  ls,
};

const char* category_name(TokenCategory c);
std::optional<TokenCategory> category_from_name(const std::string& name);

// Category inferred from a token's text, e.g. "<DX-MAJOR_E11>" -> dx.
// Returns nullopt for text that is no well-formed token of this scheme.
std::optional<TokenCategory> classify_token(const std::string& text);

struct Token {
  std::string text;
  TokenCategory category;
  std::int32_t id;
};

// ---------------------------------------------------------------------------
// Cost codec. Amounts are month-level gross payments in dollars. A code packs
// one significant mantissa digit d (rounded half-up) and a decimal exponent e
// as 10*d + e; zero or negative amounts map to code 0. Codes 1..9 would mean
// mantissa zero with a nonzero exponent and are never produced; decode rejects
// them. Amounts of $9.5e9 and above clamp to code 99.

int encode_cost(double amount_dollars);
double decode_cost(int code);  // throws DataError on invalid codes
inline constexpr int kMaxCostCode = 99;

// ---------------------------------------------------------------------------
// Hierarchical diagnosis decomposition: "E11.9" -> ["<DX-MAJOR_E11>",
// "<DX-MINOR_9>"]; a bare major yields only the major token; unparseable
// codes collapse to "<DX-NOMAP>".
std::vector<std::string> decompose_dx(const std::string& code);

// Canonical token form of a mapped code group within `category` ("PROC" or
// "RX"). Singletons stay bare; multi-target groups are wrapped in combination
// markers with members sorted lexicographically, so the result is invariant
// under permutation of the input and stable under repeated application.
std::vector<std::string> canonicalize_combo(const std::string& category,
                                            std::vector<std::string> codes);

// ---------------------------------------------------------------------------
// Vocabulary: id-assigned token inventory. Enumerable categories are present
// exhaustively regardless of the corpus; clinical-code tokens appear iff
// observed; birth-year tokens cover the years observed. Ids follow category
// order, lexicographic within a category, and are contiguous from 0.

class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus);

  std::size_t size() const { return tokens_.size(); }
  const Token& at(std::int32_t id) const;
  const std::vector<Token>& tokens() const { return tokens_; }

  std::optional<std::int32_t> find(const std::string& text) const;
  // Lookup that throws DataError with the token text when absent.
  std::int32_t require(const std::string& text) const;

  std::vector<std::int32_t> encode(const std::vector<std::string>& texts) const;
  std::vector<std::string> decode(const std::vector<std::int32_t>& ids) const;

  std::size_t category_count(TokenCategory c) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  std::int32_t sos() const { return sos_; }
  std::int32_t eos() const { return eos_; }

 private:
  void index();

  std::vector<Token> tokens_;
  std::unordered_map<std::string, std::int32_t> by_text_;
  std::int32_t sos_ = -1;
  std::int32_t eos_ = -1;
};

// Fixed token texts used across modules.
namespace tok {
inline const std::string sos = "<sos>";
inline const std::string eos = "<eos>";
inline const std::string instruct_dx = "<INSTRUCT-DX>";
inline const std::string ny = "<NY>";
inline const std::string dx_principal = "<DX-PRINCIPAL>";
inline const std::string dx_secondary = "<DX-SECONDARY>";
inline const std::string dx_nomap = "<DX-NOMAP>";
inline const std::string proc_principal = "<PROC-PRINCIPAL>";
inline const std::string proc_secondary = "<PROC-SECONDARY>";
inline const std::string proc_nomap = "<PROC-NOMAP>";
inline const std::string rx_nomap = "<RX-NOMAP>";

std::string sex(const std::string& v);
std::string dobyr(int year);
std::string age(int years);
std::string att(int months);
std::string erlst(const std::string& payer);
std::string erled(const std::string& payer);
std::string plantyp(const std::string& v);
std::string cap(const std::string& v);
std::string egeoloc(const std::string& v);
std::string vt(const std::string& v);
std::string ds(const std::string& v);
std::string ls(const std::string& v);
std::string cost(int code);
std::string dx_major(const std::string& major);
std::string comb_start(const std::string& category);  // "PROC" | "RX"
std::string comb_end(const std::string& category);
std::string clinical(const std::string& category, const std::string& code);
}  // namespace tok

// Inverse helpers for parsing token text.
std::optional<int> att_value(const std::string& text);
std::optional<int> cost_value(const std::string& text);  // nullopt for MISSING/non-cost
std::optional<int> age_value(const std::string& text);
std::optional<int> dobyr_value(const std::string& text);
// "<DX-MAJOR_E11>" -> "E11"
std::optional<std::string> dx_major_value(const std::string& text);

}  // namespace claimcraft
