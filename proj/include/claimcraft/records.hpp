#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "claimcraft/common.hpp"

namespace claimcraft {

// ---------------------------------------------------------------------------
// Raw claims-shaped records. These are what the generator emits and what the
// tokenizer and study builders consume.

enum class ClaimKind : std::uint8_t { outpatient, pharmacy, inpatient };

const char* claim_kind_name(ClaimKind k);
std::optional<ClaimKind> claim_kind_from_name(const std::string& name);

struct CodedEntry {
  std::string code;
  bool principal = false;
};

struct ClaimEvent {
  Date date;
  ClaimKind kind = ClaimKind::outpatient;
  std::vector<CodedEntry> dx;       // diagnosis codes, grammar "E11.9"
  std::vector<CodedEntry> proc;     // source procedure codes (pre-mapping)
  std::vector<std::string> rx;      // source drug codes (pre-mapping)
  double gross_payment = 0.0;       // dollars; may be <= 0
  std::optional<std::string> discharge_status;   // inpatient only
  std::optional<int> length_of_stay_days;        // inpatient only
};

struct EnrollmentEpisode {
  Date start;
  Date end;  // inclusive
  std::string payer;        // CCAE | MDCD | MDCR
  std::string plan_type;    // "1".."9", possibly absent -> MISSING token
  std::string capitation;   // "0" | "1"
  std::string geo;          // "01".."67"
};

struct EnrolleeRecord {
  std::string id;
  int sex = 1;  // 1 | 2
  int birth_year = 1970;
  std::vector<EnrollmentEpisode> episodes;  // chronological, non-overlapping
  std::vector<ClaimEvent> events;           // chronological
  // Latent generator state, carried for evaluation oracles only; never
  // tokenized and never visible to models or studies.
  std::vector<std::string> truth_tags;
};

// First event month including enrollment starts; nullopt for an empty record.
std::optional<int> first_observed_month(const EnrolleeRecord& r);
std::optional<Date> first_event_date(const EnrolleeRecord& r);
std::optional<Date> last_event_date(const EnrolleeRecord& r);
long total_enrollment_days(const EnrolleeRecord& r);

// ---------------------------------------------------------------------------
// JSONL cohort files. First record is a header object carrying the schema
// version; enrollee records follow, one per line.

inline constexpr int kCohortSchemaVersion = 1;

void write_cohort_jsonl(const std::string& path, const std::vector<EnrolleeRecord>& records);
std::vector<EnrolleeRecord> read_cohort_jsonl(const std::string& path);

std::string record_to_json(const EnrolleeRecord& r);
EnrolleeRecord record_from_json(const std::string& line);

}  // namespace claimcraft
