#include "claimcraft/records.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace claimcraft {

using nlohmann::json;

const char* claim_kind_name(ClaimKind k) {
  switch (k) {
    case ClaimKind::outpatient: return "outpatient";
    case ClaimKind::pharmacy: return "pharmacy";
    case ClaimKind::inpatient: return "inpatient";
  }
  return "?";
}

std::optional<ClaimKind> claim_kind_from_name(const std::string& name) {
  if (name == "outpatient") return ClaimKind::outpatient;
  if (name == "pharmacy") return ClaimKind::pharmacy;
  if (name == "inpatient") return ClaimKind::inpatient;
  return std::nullopt;
}

std::optional<int> first_observed_month(const EnrolleeRecord& r) {
  std::optional<int> best;
  auto consider = [&](int m) {
    if (!best || m < *best) best = m;
  };
  for (const auto& ep : r.episodes) consider(ep.start.month_index());
  for (const auto& ev : r.events) consider(ev.date.month_index());
  return best;
}

std::optional<Date> first_event_date(const EnrolleeRecord& r) {
  if (r.events.empty()) return std::nullopt;
  return std::min_element(r.events.begin(), r.events.end(),
                          [](const ClaimEvent& a, const ClaimEvent& b) { return a.date < b.date; })
      ->date;
}

std::optional<Date> last_event_date(const EnrolleeRecord& r) {
  if (r.events.empty()) return std::nullopt;
  return std::max_element(r.events.begin(), r.events.end(),
                          [](const ClaimEvent& a, const ClaimEvent& b) { return a.date < b.date; })
      ->date;
}

long total_enrollment_days(const EnrolleeRecord& r) {
  long days = 0;
  for (const auto& ep : r.episodes) days += days_between(ep.start, ep.end) + 1;
  return days;
}

namespace {

json coded_to_json(const std::vector<CodedEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back({{"code", e.code}, {"principal", e.principal}});
  return arr;
}

std::vector<CodedEntry> coded_from_json(const json& arr) {
  std::vector<CodedEntry> out;
  for (const auto& e : arr) out.push_back({e.at("code").get<std::string>(), e.at("principal").get<bool>()});
  return out;
}

}  // namespace

std::string record_to_json(const EnrolleeRecord& r) {
  json j;
  j["id"] = r.id;
  j["sex"] = r.sex;
  j["birth_year"] = r.birth_year;
  json eps = json::array();
  for (const auto& ep : r.episodes) {
    eps.push_back({{"start", to_string(ep.start)},
                   {"end", to_string(ep.end)},
                   {"payer", ep.payer},
                   {"plan_type", ep.plan_type},
                   {"capitation", ep.capitation},
                   {"geo", ep.geo}});
  }
  j["episodes"] = std::move(eps);
  json evs = json::array();
  for (const auto& ev : r.events) {
    json e;
    e["date"] = to_string(ev.date);
    e["kind"] = claim_kind_name(ev.kind);
    if (!ev.dx.empty()) e["dx"] = coded_to_json(ev.dx);
    if (!ev.proc.empty()) e["proc"] = coded_to_json(ev.proc);
    if (!ev.rx.empty()) e["rx"] = ev.rx;
    e["pay"] = ev.gross_payment;
    if (ev.discharge_status) e["ds"] = *ev.discharge_status;
    if (ev.length_of_stay_days) e["los"] = *ev.length_of_stay_days;
    evs.push_back(std::move(e));
  }
  j["events"] = std::move(evs);
  if (!r.truth_tags.empty()) j["truth"] = r.truth_tags;
  return j.dump();
}

namespace {

EnrolleeRecord record_from_json_impl(const std::string& line) {
  const json j = json::parse(line);
  EnrolleeRecord r;
  r.id = j.at("id").get<std::string>();
  r.sex = j.at("sex").get<int>();
  r.birth_year = j.at("birth_year").get<int>();
  for (const auto& ep : j.at("episodes")) {
    r.episodes.push_back({parse_date(ep.at("start").get<std::string>()),
                          parse_date(ep.at("end").get<std::string>()),
                          ep.at("payer").get<std::string>(),
                          ep.at("plan_type").get<std::string>(),
                          ep.at("capitation").get<std::string>(),
                          ep.at("geo").get<std::string>()});
  }
  for (const auto& e : j.at("events")) {
    ClaimEvent ev;
    ev.date = parse_date(e.at("date").get<std::string>());
    const auto kind = claim_kind_from_name(e.at("kind").get<std::string>());
    if (!kind) throw DataError("bad claim kind in record " + r.id);
    ev.kind = *kind;
    if (e.contains("dx")) ev.dx = coded_from_json(e.at("dx"));
    if (e.contains("proc")) ev.proc = coded_from_json(e.at("proc"));
    if (e.contains("rx")) ev.rx = e.at("rx").get<std::vector<std::string>>();
    ev.gross_payment = e.at("pay").get<double>();
    if (e.contains("ds")) ev.discharge_status = e.at("ds").get<std::string>();
    if (e.contains("los")) ev.length_of_stay_days = e.at("los").get<int>();
    r.events.push_back(std::move(ev));
  }
  if (j.contains("truth")) r.truth_tags = j.at("truth").get<std::vector<std::string>>();
  return r;
}

}  // namespace

EnrolleeRecord record_from_json(const std::string& line) {
  try {
    return record_from_json_impl(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed record line: ") + e.what());
  }
}

void write_cohort_jsonl(const std::string& path, const std::vector<EnrolleeRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  json header;
  header["schema"] = "cohort";
  header["version"] = kCohortSchemaVersion;
  header["count"] = records.size();
  out << header.dump() << '\n';
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw DataError("short write to " + path);
}

std::vector<EnrolleeRecord> read_cohort_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty cohort file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw DataError(path + ": cohort header is not json");
  }
  if (!header.is_object() || header.value("schema", "") != "cohort" ||
      header.value("version", -1) != kCohortSchemaVersion) {
    throw DataError(path + ": unsupported cohort schema");
  }
  std::vector<EnrolleeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

}  // namespace claimcraft
