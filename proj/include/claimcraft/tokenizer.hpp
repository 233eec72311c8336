#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "claimcraft/codes.hpp"
#include "claimcraft/records.hpp"
#include "claimcraft/vocab.hpp"

namespace claimcraft {

// ---------------------------------------------------------------------------
// Month-resolution trajectory view: the normal form between raw records and
// token sequences. Assembly aggregates a record's claims per (month, kind),
// deduplicates standardized codes by earliest instance, sums payments per
// group before cost encoding, and orders groups and their contents by the
// fixed two-level scheme; detokenization parses a token stream back into this
// view. Reassembling a detokenized view reproduces the token stream exactly.

enum class GroupKind : std::uint8_t {
  new_year,       // <NY> anchor
  enroll_start,   // ERLST PLANTYP CAP EGEOLOC
  outpatient,
  pharmacy,
  inpatient,
  enroll_end,     // ERLED
};

// Table-fixed ordering class within one month.
int group_order(GroupKind k);

// One mapped code unit: a single standard code, a sorted multi-target
// combination, or an unmappable source.
struct CodeUnit {
  bool nomap = false;
  std::vector<std::string> codes;  // sorted; size >= 2 means combination

  bool operator==(const CodeUnit&) const = default;
  bool operator<(const CodeUnit& other) const {
    if (nomap != other.nomap) return nomap < other.nomap;
    return codes < other.codes;
  }
};

struct ViewGroup {
  int month = 0;  // month index
  GroupKind kind = GroupKind::new_year;

  // enroll_start / enroll_end
  std::string payer, plan_type, capitation, geo;  // token value strings

  // claim groups; dx codes are reconstructed full codes ("NOMAP" sentinel
  // for unparseable ones)
  std::vector<std::string> dx_principal;
  std::vector<std::string> dx_secondary;
  std::vector<CodeUnit> proc_principal;
  std::vector<CodeUnit> proc_secondary;
  std::vector<CodeUnit> rx;
  int cost_code = -1;        // -1 absent, -2 MISSING, else 0..99
  std::string ds, ls;        // inpatient; empty when absent

  bool operator==(const ViewGroup&) const = default;
};

struct MonthlyView {
  std::string sex;        // token value: "1" | "2" | "MISSING"
  int birth_year = 0;
  int age_years = 0;      // at the anchor month
  int anchor_month = 0;   // January of the first observed event's year
  std::vector<ViewGroup> groups;  // ordered by (month, class)

  bool operator==(const MonthlyView&) const = default;
};

// ---------------------------------------------------------------------------

struct TokenSequence {
  std::string enrollee_id;
  std::vector<std::string> texts;
  // Token index of each group's leading <ATT-*>; the header (sos, sex,
  // birth-year, age) precedes the first entry.
  std::vector<std::size_t> group_starts;
};

MonthlyView build_view(const EnrolleeRecord& record, const CodeMap& map);
TokenSequence assemble_from_view(const MonthlyView& view, const std::string& enrollee_id);
TokenSequence assemble_sequence(const EnrolleeRecord& record, const CodeMap& map);

// Strict grammar parse; throws ParseError carrying the offending token index.
MonthlyView detokenize(const std::vector<std::string>& texts);

// Tokenizes every record and builds the vocabulary over the result: enumerable
// categories in full, clinical codes and birth years as observed.
Vocabulary build_vocabulary(const std::vector<EnrolleeRecord>& records, const CodeMap& map);

// Day-scale age per token: 0 up to the birth-year token, the age-anchor value
// at the age token, advanced by 30.4375 days per elapsed-time month. Tokens
// within one group share the group's age. Throws if no birth-year token.
std::vector<double> reconstruct_ages(const std::vector<std::string>& texts);

// Group starts recovered from token text (<ATT-*> positions).
std::vector<std::size_t> group_starts_from_texts(const std::vector<std::string>& texts);

// ---------------------------------------------------------------------------
// Windowing. Training windows split an over-long sequence at group boundaries
// with ~50% overlap; each window is at most `window_len` tokens (a single
// over-long group is hard-split). Scoring keeps the most recent window.

struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

std::vector<Window> split_into_windows(std::size_t n_tokens,
                                       const std::vector<std::size_t>& group_starts,
                                       std::size_t window_len);

// Latest start index <= end_index such that [start, end_index) fits in
// max_tokens and start is the sequence head or a group boundary.
struct LeftTruncation {
  std::size_t begin = 0;
  bool truncated = false;
};
LeftTruncation truncate_left_at_boundary(const std::vector<std::size_t>& group_starts,
                                         std::size_t end_index, std::size_t max_tokens);

// ---------------------------------------------------------------------------
// Sequence files: text form "id<TAB>tok tok ...", one line per enrollee, and
// an id-encoded binary container.

void write_sequences_text(const std::string& path, const std::vector<TokenSequence>& seqs);
std::vector<TokenSequence> read_sequences_text(const std::string& path);

void write_sequences_ids(const std::string& path,
                         const std::vector<std::string>& enrollee_ids,
                         const std::vector<std::vector<std::int32_t>>& ids);
void read_sequences_ids(const std::string& path, std::vector<std::string>& enrollee_ids,
                        std::vector<std::vector<std::int32_t>>& ids);

}  // namespace claimcraft
