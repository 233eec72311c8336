#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "claimcraft/codes.hpp"
#include "claimcraft/records.hpp"

namespace claimcraft {

// ---------------------------------------------------------------------------
// Cohort specification. Everything the generator does is a deterministic
// function of this struct; per-enrollee randomness comes from sub-seeds forked
// from (seed, enrollee index), so records are independent of generation order.

struct PlantedRule {
  std::string name;
  std::vector<std::string> precursor_codes;  // planted together in one claim
  std::string target_dx;                     // full code; the endpoint is its major
  int lag_months_min = 2;
  int lag_months_max = 6;
  double hazard_given_precursor = 1.0;  // P(target | precursor present)
  double background_hazard = 0.0;       // P(target | no precursor)
  double precursor_prevalence = 0.15;   // P(enrollee carries the precursor)
};

struct BackgroundRates {
  double outpatient_per_month = 0.12;
  double pharmacy_per_month = 0.18;
  double inpatient_per_month = 0.008;
  double utilization_sigma = 0.6;  // lognormal per-enrollee multiplier
};

struct PaymentModel {
  // Lognormal gross payments per claim kind, dollars.
  double outpatient_mu = 5.0, outpatient_sigma = 0.9;   // median ~$150
  double pharmacy_mu = 3.6, pharmacy_sigma = 1.0;       // median ~$37
  double inpatient_mu = 9.0, inpatient_sigma = 0.8;     // median ~$8100
  double refund_probability = 0.002;                    // negative payment rows
};

// Optional observational-study structure: a latent binary confounder raises
// treatment propensity and all outcome rates, and reveals itself in the
// trajectory only through marker diagnosis codes that are deliberately left
// out of study baseline covariates.
struct ObservationalBlock {
  bool enabled = false;
  std::string arm_a_rx;  // source drug code defining arm A
  std::string arm_b_rx;
  double treated_fraction = 1.0;      // fraction of eligible enrollees indexed
  double confounder_prevalence = 0.35;
  double p_arm_a_given_c1 = 0.75;
  double p_arm_a_given_c0 = 0.30;
  std::vector<std::string> marker_dx;  // sequence-visible confounder markers
  double marker_prob_given_c1 = 0.9;
  double marker_prob_given_c0 = 0.05;
  std::vector<std::string> negative_control_dx;  // full codes; outcomes at major level
  double nco_base_prob = 0.08;                   // P(outcome event | C=0) post index
  double nco_confounder_rr = 3.0;
  std::vector<std::string> primary_dx;
  double primary_base_prob = 0.10;
  double primary_confounder_rr = 3.0;
  double primary_arm_a_rr = 1.0;  // true effect of arm A on primaries
};

struct CohortSpec {
  std::uint64_t seed = 1;
  int n_enrollees = 1000;
  Date range_start{2016, 1, 1};
  Date range_end{2023, 12, 31};
  int dx_universe = 80;    // background diagnosis codes
  int proc_universe = 60;  // background procedure sources
  int rx_universe = 40;    // background drug sources
  std::vector<PlantedRule> rules;
  BackgroundRates rates;
  PaymentModel payments;
  ObservationalBlock observational;
};

CohortSpec cohort_spec_from_json(const std::string& json_text);
std::string cohort_spec_to_json(const CohortSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic code universes derived from the spec seed. Background pools
// exclude every planted rule / study code so planted conditional
// probabilities are exact by construction.

struct CodeUniverses {
  std::vector<std::string> dx;         // full codes for background sampling
  std::vector<std::string> proc;       // source procedure codes
  std::vector<std::string> rx;         // source drug codes
  CodeMap map;                         // proc/rx source -> standard targets
};

CodeUniverses build_code_universes(const CohortSpec& spec);

// All records, pre-filter; deterministic in spec.
std::vector<EnrolleeRecord> generate_cohort(const CohortSpec& spec);

// ---------------------------------------------------------------------------
// Inclusion filtering with first-failing-criterion attribution.

struct InclusionCriteria {
  long min_enrollment_days = 180;   // cumulative
  long min_claims_span_days = 30;   // first to last claim
  int min_age_at_first_event = 10;  // years, at first observed event
  int max_age_at_first_event = 110;
};

struct InclusionTally {
  long examined = 0;
  long kept = 0;
  // First failing criterion -> count, in evaluation order.
  std::vector<std::pair<std::string, long>> excluded_by;
};

struct FilteredCohort {
  std::vector<EnrolleeRecord> kept;
  InclusionTally tally;
};

FilteredCohort apply_inclusion_criteria(std::vector<EnrolleeRecord> records,
                                        const InclusionCriteria& criteria);

std::string tally_to_csv(const InclusionTally& tally);

}  // namespace claimcraft
