#include "claimcraft/synthgen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "claimcraft/rng.hpp"

namespace claimcraft {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Spec JSON.

void rule_from_json(const json& j, PlantedRule& r) {
  r.name = j.at("name").get<std::string>();
  r.precursor_codes = j.at("precursor_codes").get<std::vector<std::string>>();
  r.target_dx = j.at("target_dx").get<std::string>();
  r.lag_months_min = j.value("lag_months_min", r.lag_months_min);
  r.lag_months_max = j.value("lag_months_max", r.lag_months_max);
  r.hazard_given_precursor = j.value("hazard_given_precursor", r.hazard_given_precursor);
  r.background_hazard = j.value("background_hazard", r.background_hazard);
  r.precursor_prevalence = j.value("precursor_prevalence", r.precursor_prevalence);
  if (r.lag_months_min < 1 || r.lag_months_max < r.lag_months_min) {
    throw ConfigError("rule " + r.name + ": bad lag range");
  }
}

json rule_to_json(const PlantedRule& r) {
  return {{"name", r.name},
          {"precursor_codes", r.precursor_codes},
          {"target_dx", r.target_dx},
          {"lag_months_min", r.lag_months_min},
          {"lag_months_max", r.lag_months_max},
          {"hazard_given_precursor", r.hazard_given_precursor},
          {"background_hazard", r.background_hazard},
          {"precursor_prevalence", r.precursor_prevalence}};
}

void observational_from_json(const json& j, ObservationalBlock& o) {
  o.enabled = j.value("enabled", true);
  o.arm_a_rx = j.at("arm_a_rx").get<std::string>();
  o.arm_b_rx = j.at("arm_b_rx").get<std::string>();
  o.treated_fraction = j.value("treated_fraction", o.treated_fraction);
  o.confounder_prevalence = j.value("confounder_prevalence", o.confounder_prevalence);
  o.p_arm_a_given_c1 = j.value("p_arm_a_given_c1", o.p_arm_a_given_c1);
  o.p_arm_a_given_c0 = j.value("p_arm_a_given_c0", o.p_arm_a_given_c0);
  o.marker_dx = j.at("marker_dx").get<std::vector<std::string>>();
  o.marker_prob_given_c1 = j.value("marker_prob_given_c1", o.marker_prob_given_c1);
  o.marker_prob_given_c0 = j.value("marker_prob_given_c0", o.marker_prob_given_c0);
  o.negative_control_dx = j.at("negative_control_dx").get<std::vector<std::string>>();
  o.nco_base_prob = j.value("nco_base_prob", o.nco_base_prob);
  o.nco_confounder_rr = j.value("nco_confounder_rr", o.nco_confounder_rr);
  o.primary_dx = j.value("primary_dx", std::vector<std::string>{});
  o.primary_base_prob = j.value("primary_base_prob", o.primary_base_prob);
  o.primary_confounder_rr = j.value("primary_confounder_rr", o.primary_confounder_rr);
  o.primary_arm_a_rr = j.value("primary_arm_a_rr", o.primary_arm_a_rr);
}

json observational_to_json(const ObservationalBlock& o) {
  return {{"enabled", o.enabled},
          {"arm_a_rx", o.arm_a_rx},
          {"arm_b_rx", o.arm_b_rx},
          {"treated_fraction", o.treated_fraction},
          {"confounder_prevalence", o.confounder_prevalence},
          {"p_arm_a_given_c1", o.p_arm_a_given_c1},
          {"p_arm_a_given_c0", o.p_arm_a_given_c0},
          {"marker_dx", o.marker_dx},
          {"marker_prob_given_c1", o.marker_prob_given_c1},
          {"marker_prob_given_c0", o.marker_prob_given_c0},
          {"negative_control_dx", o.negative_control_dx},
          {"nco_base_prob", o.nco_base_prob},
          {"nco_confounder_rr", o.nco_confounder_rr},
          {"primary_dx", o.primary_dx},
          {"primary_base_prob", o.primary_base_prob},
          {"primary_confounder_rr", o.primary_confounder_rr},
          {"primary_arm_a_rr", o.primary_arm_a_rr}};
}

}  // namespace

CohortSpec cohort_spec_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cohort spec: ") + e.what());
  }
  try {
    CohortSpec s;
    s.seed = j.value("seed", s.seed);
    s.n_enrollees = j.value("n_enrollees", s.n_enrollees);
    if (j.contains("range_start")) s.range_start = parse_date(j.at("range_start").get<std::string>());
    if (j.contains("range_end")) s.range_end = parse_date(j.at("range_end").get<std::string>());
    s.dx_universe = j.value("dx_universe", s.dx_universe);
    s.proc_universe = j.value("proc_universe", s.proc_universe);
    s.rx_universe = j.value("rx_universe", s.rx_universe);
    if (j.contains("rules")) {
      for (const auto& rj : j.at("rules")) {
        PlantedRule r;
        rule_from_json(rj, r);
        s.rules.push_back(std::move(r));
      }
    }
    if (j.contains("rates")) {
      const auto& rj = j.at("rates");
      s.rates.outpatient_per_month = rj.value("outpatient_per_month", s.rates.outpatient_per_month);
      s.rates.pharmacy_per_month = rj.value("pharmacy_per_month", s.rates.pharmacy_per_month);
      s.rates.inpatient_per_month = rj.value("inpatient_per_month", s.rates.inpatient_per_month);
      s.rates.utilization_sigma = rj.value("utilization_sigma", s.rates.utilization_sigma);
    }
    if (j.contains("payments")) {
      const auto& pj = j.at("payments");
      s.payments.outpatient_mu = pj.value("outpatient_mu", s.payments.outpatient_mu);
      s.payments.outpatient_sigma = pj.value("outpatient_sigma", s.payments.outpatient_sigma);
      s.payments.pharmacy_mu = pj.value("pharmacy_mu", s.payments.pharmacy_mu);
      s.payments.pharmacy_sigma = pj.value("pharmacy_sigma", s.payments.pharmacy_sigma);
      s.payments.inpatient_mu = pj.value("inpatient_mu", s.payments.inpatient_mu);
      s.payments.inpatient_sigma = pj.value("inpatient_sigma", s.payments.inpatient_sigma);
      s.payments.refund_probability = pj.value("refund_probability", s.payments.refund_probability);
    }
    if (j.contains("observational")) observational_from_json(j.at("observational"), s.observational);
    if (s.n_enrollees <= 0) throw ConfigError("n_enrollees must be positive");
    if (!(s.range_start < s.range_end)) throw ConfigError("empty date range");
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cohort spec: ") + e.what());
  }
}

std::string cohort_spec_to_json(const CohortSpec& s) {
  json j;
  j["seed"] = s.seed;
  j["n_enrollees"] = s.n_enrollees;
  j["range_start"] = to_string(s.range_start);
  j["range_end"] = to_string(s.range_end);
  j["dx_universe"] = s.dx_universe;
  j["proc_universe"] = s.proc_universe;
  j["rx_universe"] = s.rx_universe;
  json rules = json::array();
  for (const auto& r : s.rules) rules.push_back(rule_to_json(r));
  j["rules"] = std::move(rules);
  j["rates"] = {{"outpatient_per_month", s.rates.outpatient_per_month},
                {"pharmacy_per_month", s.rates.pharmacy_per_month},
                {"inpatient_per_month", s.rates.inpatient_per_month},
                {"utilization_sigma", s.rates.utilization_sigma}};
  j["payments"] = {{"outpatient_mu", s.payments.outpatient_mu},
                   {"outpatient_sigma", s.payments.outpatient_sigma},
                   {"pharmacy_mu", s.payments.pharmacy_mu},
                   {"pharmacy_sigma", s.payments.pharmacy_sigma},
                   {"inpatient_mu", s.payments.inpatient_mu},
                   {"inpatient_sigma", s.payments.inpatient_sigma},
                   {"refund_probability", s.payments.refund_probability}};
  if (s.observational.enabled) j["observational"] = observational_to_json(s.observational);
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Code universes.

namespace {

std::set<std::string> reserved_majors(const CohortSpec& spec) {
  std::set<std::string> out;
  auto add_code = [&](const std::string& code) {
    if (auto p = parse_dx(code)) out.insert(p->major);
  };
  for (const auto& r : spec.rules) {
    add_code(r.target_dx);
    for (const auto& c : r.precursor_codes) add_code(c);
  }
  if (spec.observational.enabled) {
    for (const auto& c : spec.observational.marker_dx) add_code(c);
    for (const auto& c : spec.observational.negative_control_dx) add_code(c);
    for (const auto& c : spec.observational.primary_dx) add_code(c);
  }
  return out;
}

}  // namespace

CodeUniverses build_code_universes(const CohortSpec& spec) {
  CodeUniverses u;
  Rng rng = Rng(spec.seed).fork(stable_hash64("universes"));
  const std::set<std::string> reserved = reserved_majors(spec);

  static const char* kLetters = "ABCDEFGHIJKLMNRSTZ";
  std::set<std::string> majors;
  while (static_cast<int>(u.dx.size()) < spec.dx_universe) {
    std::string major;
    major += kLetters[rng.below(18)];
    major += static_cast<char>('0' + rng.below(10));
    major += static_cast<char>('0' + rng.below(10));
    if (reserved.count(major) || !majors.insert(major).second) continue;
    const double shape = rng.uniform01();
    if (shape < 0.2) {
      u.dx.push_back(major);
    } else if (shape < 0.9) {
      std::string minor = std::to_string(rng.below(10));
      if (rng.bernoulli(0.3)) minor += static_cast<char>('0' + rng.below(10));
      u.dx.push_back(major + "." + minor);
    } else {
      const char* suffixes[] = {"A", "S", "XA", "XS"};
      u.dx.push_back(major + "." + std::to_string(rng.below(100)) +
                     suffixes[rng.below(4)]);
    }
  }

  std::set<std::string> used_targets;
  auto fresh_concept = [&]() {
    while (true) {
      const int len = static_cast<int>(6 + rng.below(4));
      std::string c;
      c += static_cast<char>('1' + rng.below(9));
      for (int i = 1; i < len; ++i) c += static_cast<char>('0' + rng.below(10));
      if (used_targets.insert(c).second) return c;
    }
  };
  for (int i = 0; i < spec.proc_universe; ++i) {
    const double shape = rng.uniform01();
    if (shape < 0.15) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "CPT4%05d", static_cast<int>(99000 + i));
      u.proc.emplace_back(buf);  // retained, no map entry
    } else if (shape < 0.30) {
      std::string src = "PS" + std::to_string(1000 + i);
      std::vector<std::string> targets;
      const int n = static_cast<int>(2 + rng.below(2));
      for (int t = 0; t < n; ++t) targets.push_back(fresh_concept());
      u.map.add(MapDomain::proc, src, targets);
      u.proc.push_back(std::move(src));
    } else {
      std::string src = "PS" + std::to_string(1000 + i);
      u.map.add(MapDomain::proc, src, {fresh_concept()});
      u.proc.push_back(std::move(src));
    }
  }

  std::set<std::string> used_ingredients;
  auto fresh_ingredient = [&]() {
    while (true) {
      std::string c = std::to_string(1000 + rng.below(99000));
      if (used_ingredients.insert(c).second) return c;
    }
  };
  for (int i = 0; i < spec.rx_universe; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%011llu",
                  static_cast<unsigned long long>(10000000000ULL + rng.below(89999999999ULL)));
    std::string src = buf;
    std::vector<std::string> ingredients{fresh_ingredient()};
    if (rng.bernoulli(0.12)) ingredients.push_back(fresh_ingredient());
    u.map.add(MapDomain::rx, src, ingredients);
    u.rx.push_back(std::move(src));
  }
  if (spec.observational.enabled) {
    // Study arm drugs stay out of the background pool but must still map to
    // ingredients, or their fills would tokenize as unmappable.
    for (const auto& src : {spec.observational.arm_a_rx, spec.observational.arm_b_rx}) {
      if (!src.empty() && u.map.map(MapDomain::rx, src).targets.empty()) {
        u.map.add(MapDomain::rx, src, {fresh_ingredient()});
      }
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// Generation.

namespace {

struct MonthSpan {
  int first;  // month indices, inclusive
  int last;
};

Date date_in_month(int month_index, int day) {
  return Date{month_year(month_index), month_of_year(month_index), day};
}

// Clamp a candidate date into the episode that covers its month, so claims
// never fall outside enrollment.
Date clamped_event_date(const EnrollmentEpisode& ep, int month_index, int day) {
  Date d = date_in_month(month_index, day);
  if (d < ep.start) d = ep.start;
  if (ep.end < d) d = ep.end;
  return d;
}

class EnrolleeBuilder {
 public:
  EnrolleeBuilder(const CohortSpec& spec, const CodeUniverses& universes, Rng rng)
      : spec_(spec), u_(universes), rng_(rng) {}

  EnrolleeRecord build(int index) {
    EnrolleeRecord r;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "E%06d", index);
    r.id = idbuf;
    r.sex = rng_.bernoulli(0.5) ? 2 : 1;

    make_episodes(r);
    const int anchor_year = month_year(r.episodes.front().start.month_index());
    const int age = static_cast<int>(rng_.int_range(18, 84));
    r.birth_year = anchor_year - age;
    pick_payer(r, age);

    const double util = rng_.lognormal(0.0, spec_.rates.utilization_sigma);
    for (const auto& ep : r.episodes) background_claims(r, ep, util);
    plant_rules(r);
    observational_structure(r);

    std::stable_sort(r.events.begin(), r.events.end(),
                     [](const ClaimEvent& a, const ClaimEvent& b) { return a.date < b.date; });
    return r;
  }

 private:
  void make_episodes(EnrolleeRecord& r) {
    const int span_first = spec_.range_start.month_index();
    const int span_last = spec_.range_end.month_index();
    const int span = span_last - span_first + 1;
    EnrollmentEpisode ep;
    ep.plan_type = std::to_string(rng_.int_range(1, 9));
    ep.capitation = rng_.bernoulli(0.07) ? "1" : "0";
    char geo[8];
    std::snprintf(geo, sizeof geo, "%02d", static_cast<int>(rng_.int_range(1, 67)));
    ep.geo = geo;

    const int min_len = std::min(24, span);
    const int start = span_first + static_cast<int>(rng_.below(static_cast<std::uint64_t>(
                                       std::max(1, span - min_len))));
    int end = start + min_len - 1 +
              static_cast<int>(rng_.below(static_cast<std::uint64_t>(span_last - (start + min_len - 1) + 1)));
    ep.start = date_in_month(start, static_cast<int>(rng_.int_range(1, 28)));

    if (rng_.bernoulli(0.15) && end - start >= 12) {
      // Two episodes separated by a coverage gap.
      const int len1 = (end - start) / 2 - 1;
      const int gap = static_cast<int>(rng_.int_range(2, 4));
      EnrollmentEpisode ep2 = ep;
      ep.end = date_in_month(start + len1, 28);
      ep2.start = date_in_month(start + len1 + gap, static_cast<int>(rng_.int_range(1, 28)));
      ep2.end = date_in_month(end, 28);
      if (ep2.start.month_index() <= ep2.end.month_index()) {
        r.episodes.push_back(ep);
        r.episodes.push_back(ep2);
        return;
      }
    }
    ep.end = date_in_month(end, 28);
    r.episodes.push_back(ep);
  }

  void pick_payer(EnrolleeRecord& r, int age) {
    std::string payer;
    if (age >= 65) {
      payer = "MDCR";
    } else {
      payer = rng_.bernoulli(0.1) ? "MDCD" : "CCAE";
    }
    for (auto& ep : r.episodes) ep.payer = payer;
  }

  const std::string& pick(const std::vector<std::string>& pool) {
    return pool[rng_.below(pool.size())];
  }

  double payment(ClaimKind kind) {
    double p = 0.0;
    switch (kind) {
      case ClaimKind::outpatient:
        p = rng_.lognormal(spec_.payments.outpatient_mu, spec_.payments.outpatient_sigma);
        break;
      case ClaimKind::pharmacy:
        p = rng_.lognormal(spec_.payments.pharmacy_mu, spec_.payments.pharmacy_sigma);
        break;
      case ClaimKind::inpatient:
        p = rng_.lognormal(spec_.payments.inpatient_mu, spec_.payments.inpatient_sigma);
        break;
    }
    if (rng_.bernoulli(spec_.payments.refund_probability)) p = -p;
    return std::round(p * 100.0) / 100.0;
  }

  void background_claims(EnrolleeRecord& r, const EnrollmentEpisode& ep, double util) {
    for (int m = ep.start.month_index(); m <= ep.end.month_index(); ++m) {
      const int n_out = rng_.poisson(spec_.rates.outpatient_per_month * util);
      for (int i = 0; i < n_out; ++i) {
        ClaimEvent ev;
        ev.kind = ClaimKind::outpatient;
        ev.date = clamped_event_date(ep, m, static_cast<int>(rng_.int_range(1, 28)));
        ev.dx.push_back({pick(u_.dx), true});
        if (rng_.bernoulli(0.35)) ev.dx.push_back({pick(u_.dx), false});
        const int n_proc = static_cast<int>(rng_.int_range(1, 3));
        for (int p = 0; p < n_proc; ++p) ev.proc.push_back({pick(u_.proc), p == 0});
        ev.gross_payment = payment(ClaimKind::outpatient);
        r.events.push_back(std::move(ev));
      }
      const int n_rx = rng_.poisson(spec_.rates.pharmacy_per_month * util);
      for (int i = 0; i < n_rx; ++i) {
        ClaimEvent ev;
        ev.kind = ClaimKind::pharmacy;
        ev.date = clamped_event_date(ep, m, static_cast<int>(rng_.int_range(1, 28)));
        ev.rx.push_back(pick(u_.rx));
        if (rng_.bernoulli(0.15)) ev.rx.push_back(pick(u_.rx));
        ev.gross_payment = payment(ClaimKind::pharmacy);
        r.events.push_back(std::move(ev));
      }
      const int n_in = rng_.poisson(spec_.rates.inpatient_per_month * util);
      for (int i = 0; i < n_in; ++i) {
        ClaimEvent ev;
        ev.kind = ClaimKind::inpatient;
        ev.date = clamped_event_date(ep, m, static_cast<int>(rng_.int_range(1, 28)));
        ev.dx.push_back({pick(u_.dx), true});
        const int n_sec = static_cast<int>(rng_.below(4));
        for (int s = 0; s < n_sec; ++s) ev.dx.push_back({pick(u_.dx), false});
        const int n_proc = static_cast<int>(rng_.int_range(1, 3));
        for (int p = 0; p < n_proc; ++p) ev.proc.push_back({pick(u_.proc), false});
        ev.discharge_status =
            rng_.bernoulli(0.1) ? std::optional<std::string>{} : std::to_string(rng_.int_range(1, 5));
        ev.length_of_stay_days = static_cast<int>(rng_.below(15));
        ev.gross_payment = payment(ClaimKind::inpatient);
        r.events.push_back(std::move(ev));
      }
    }
  }

  // Outpatient claim holding planted codes, placed inside the episode that
  // covers the month.
  void planted_claim(EnrolleeRecord& r, int month_index, const std::vector<std::string>& dx_codes,
                     bool principal_first) {
    const EnrollmentEpisode* home = nullptr;
    for (const auto& ep : r.episodes) {
      if (ep.start.month_index() <= month_index && month_index <= ep.end.month_index()) home = &ep;
    }
    if (!home) return;
    ClaimEvent ev;
    ev.kind = ClaimKind::outpatient;
    ev.date = clamped_event_date(*home, month_index, static_cast<int>(rng_.int_range(1, 28)));
    for (std::size_t i = 0; i < dx_codes.size(); ++i) {
      ev.dx.push_back({dx_codes[i], principal_first && i == 0});
    }
    ev.proc.push_back({pick(u_.proc), true});
    ev.gross_payment = payment(ClaimKind::outpatient);
    r.events.push_back(std::move(ev));
  }

  MonthSpan primary_span(const EnrolleeRecord& r) const {
    const auto& ep = r.episodes.front();
    return {ep.start.month_index(), ep.end.month_index()};
  }

  void plant_rules(EnrolleeRecord& r) {
    for (const auto& rule : spec_.rules) {
      const MonthSpan span = primary_span(r);
      bool precursor_placed = false;
      if (rng_.bernoulli(rule.precursor_prevalence)) {
        const int lag = static_cast<int>(rng_.int_range(rule.lag_months_min, rule.lag_months_max));
        const int last_ok = span.last - lag;
        if (last_ok >= span.first) {
          const int pm = static_cast<int>(
              span.first + rng_.below(static_cast<std::uint64_t>(last_ok - span.first + 1)));
          planted_claim(r, pm, rule.precursor_codes, true);
          precursor_placed = true;
          r.truth_tags.push_back("rule:" + rule.name + ":precursor@" + std::to_string(pm));
          if (rng_.bernoulli(rule.hazard_given_precursor)) {
            planted_claim(r, pm + lag, {rule.target_dx}, true);
            r.truth_tags.push_back("rule:" + rule.name + ":target@" + std::to_string(pm + lag));
          }
        }
      }
      if (!precursor_placed && rng_.bernoulli(rule.background_hazard)) {
        const int tm = static_cast<int>(
            span.first + rng_.below(static_cast<std::uint64_t>(span.last - span.first + 1)));
        planted_claim(r, tm, {rule.target_dx}, true);
        r.truth_tags.push_back("rule:" + rule.name + ":background@" + std::to_string(tm));
      }
    }
  }

  void observational_structure(EnrolleeRecord& r) {
    const auto& o = spec_.observational;
    if (!o.enabled) return;
    const MonthSpan span = primary_span(r);
    // Need room for a baseline year and a follow-up year around the index.
    if (span.last - span.first < 26) return;
    const bool confounded = rng_.bernoulli(o.confounder_prevalence);
    r.truth_tags.push_back(confounded ? "conf:1" : "conf:0");

    const int index_month = static_cast<int>(
        span.first + 13 + rng_.below(static_cast<std::uint64_t>(span.last - 12 - (span.first + 13) + 1)));

    const double marker_p = confounded ? o.marker_prob_given_c1 : o.marker_prob_given_c0;
    for (const auto& marker : o.marker_dx) {
      if (rng_.bernoulli(marker_p)) {
        const int mm = static_cast<int>(
            span.first + rng_.below(static_cast<std::uint64_t>(index_month - 1 - span.first + 1)));
        planted_claim(r, mm, {marker}, true);
      }
    }

    if (!rng_.bernoulli(o.treated_fraction)) return;
    const double p_a = confounded ? o.p_arm_a_given_c1 : o.p_arm_a_given_c0;
    const bool arm_a = rng_.bernoulli(p_a);
    r.truth_tags.push_back(arm_a ? "arm:A" : "arm:B");
    {
      ClaimEvent ev;
      ev.kind = ClaimKind::pharmacy;
      ev.date = clamped_event_date(r.episodes.front(), index_month, 15);
      ev.rx.push_back(arm_a ? o.arm_a_rx : o.arm_b_rx);
      ev.gross_payment = payment(ClaimKind::pharmacy);
      r.events.push_back(std::move(ev));
    }

    auto outcome_events = [&](const std::vector<std::string>& codes, double base, double rr_conf,
                              double rr_arm) {
      for (const auto& code : codes) {
        double p = base * (confounded ? rr_conf : 1.0) * (arm_a ? rr_arm : 1.0);
        p = std::min(p, 0.95);
        if (rng_.bernoulli(p)) {
          const int om = static_cast<int>(
              index_month + 1 + rng_.below(static_cast<std::uint64_t>(span.last - (index_month + 1) + 1)));
          planted_claim(r, om, {code}, true);
        }
      }
    };
    outcome_events(o.negative_control_dx, o.nco_base_prob, o.nco_confounder_rr, 1.0);
    outcome_events(o.primary_dx, o.primary_base_prob, o.primary_confounder_rr, o.primary_arm_a_rr);
  }

  const CohortSpec& spec_;
  const CodeUniverses& u_;
  Rng rng_;
};

}  // namespace

std::vector<EnrolleeRecord> generate_cohort(const CohortSpec& spec) {
  const CodeUniverses universes = build_code_universes(spec);
  const Rng root(spec.seed);
  std::vector<EnrolleeRecord> out;
  out.reserve(static_cast<std::size_t>(spec.n_enrollees));
  for (int i = 0; i < spec.n_enrollees; ++i) {
    EnrolleeBuilder builder(spec, universes, root.fork(static_cast<std::uint64_t>(i) + 1));
    out.push_back(builder.build(i));
  }
  return out;
}

// ---------------------------------------------------------------------------

FilteredCohort apply_inclusion_criteria(std::vector<EnrolleeRecord> records,
                                        const InclusionCriteria& criteria) {
  FilteredCohort out;
  long fail_enroll = 0, fail_span = 0, fail_age = 0;
  for (auto& r : records) {
    ++out.tally.examined;
    if (total_enrollment_days(r) < criteria.min_enrollment_days) {
      ++fail_enroll;
      continue;
    }
    const auto first = first_event_date(r);
    const auto last = last_event_date(r);
    if (!first || !last || days_between(*first, *last) < criteria.min_claims_span_days) {
      ++fail_span;
      continue;
    }
    const auto first_month = first_observed_month(r);
    const int age_at_entry = month_year(*first_month) - r.birth_year;
    if (age_at_entry < criteria.min_age_at_first_event ||
        age_at_entry > criteria.max_age_at_first_event) {
      ++fail_age;
      continue;
    }
    ++out.tally.kept;
    out.kept.push_back(std::move(r));
  }
  out.tally.excluded_by = {{"enrollment_duration", fail_enroll},
                           {"claims_span", fail_span},
                           {"age_at_first_event", fail_age}};
  return out;
}

std::string tally_to_csv(const InclusionTally& tally) {
  std::string csv = "criterion,excluded\n";
  for (const auto& [name, n] : tally.excluded_by) {
    csv += name + "," + std::to_string(n) + "\n";
  }
  csv += "examined," + std::to_string(tally.examined) + "\n";
  csv += "kept," + std::to_string(tally.kept) + "\n";
  return csv;
}

}  // namespace claimcraft
