#include "claimcraft/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "claimcraft/common.hpp"

namespace claimcraft {

int group_order(GroupKind k) {
  switch (k) {
    case GroupKind::new_year: return 1;
    case GroupKind::enroll_start: return 2;
    case GroupKind::outpatient: return 3;
    case GroupKind::pharmacy: return 4;
    case GroupKind::inpatient: return 5;
    case GroupKind::enroll_end: return 6;
  }
  return 7;
}

namespace {

const char* vt_name(GroupKind k) {
  switch (k) {
    case GroupKind::outpatient: return "outpatient";
    case GroupKind::pharmacy: return "pharmacy";
    case GroupKind::inpatient: return "inpatient";
    default: return nullptr;
  }
}

std::string value_or_missing(const std::string& v) { return v.empty() ? "MISSING" : v; }

}  // namespace

// ---------------------------------------------------------------------------
// Record -> monthly view.

MonthlyView build_view(const EnrolleeRecord& record, const CodeMap& map) {
  const auto first_month = first_observed_month(record);
  if (!first_month) throw DataError("record " + record.id + " has no observable events");

  MonthlyView view;
  view.sex = (record.sex == 1 || record.sex == 2) ? std::to_string(record.sex) : "MISSING";
  view.birth_year = record.birth_year;
  const int anchor_year = month_year(*first_month);
  view.anchor_month = anchor_year * 12;
  view.age_years = anchor_year - record.birth_year;

  // Claim groups, keyed by (month, kind). Events are visited in date order
  // (ties by record position) so earliest-instance deduplication and
  // first-seen ordering fall out of insertion order.
  struct ClaimAccum {
    std::vector<std::string> dx_principal, dx_secondary;
    std::set<std::string> dx_seen;
    std::vector<CodeUnit> proc_principal, proc_secondary;
    std::set<CodeUnit> proc_seen;
    std::vector<CodeUnit> rx;
    std::set<CodeUnit> rx_seen;
    double payment_sum = 0.0;
    bool has_inpatient_fields = false;
    std::string ds, ls;
  };
  std::map<std::pair<int, int>, ClaimAccum> claims;  // (month, order class)

  std::vector<std::size_t> order(record.events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return record.events[a].date < record.events[b].date;
  });

  for (const std::size_t idx : order) {
    const ClaimEvent& ev = record.events[idx];
    GroupKind kind;
    switch (ev.kind) {
      case ClaimKind::outpatient: kind = GroupKind::outpatient; break;
      case ClaimKind::pharmacy: kind = GroupKind::pharmacy; break;
      case ClaimKind::inpatient: kind = GroupKind::inpatient; break;
      default: throw DataError("bad claim kind");
    }
    ClaimAccum& acc = claims[{ev.date.month_index(), group_order(kind)}];

    for (const auto& entry : ev.dx) {
      // Standardized form: reconstruction of the decomposed code.
      std::string std_code = "NOMAP";
      if (auto parts = parse_dx(entry.code)) std_code = dx_to_string(*parts);
      if (!acc.dx_seen.insert(std_code).second) continue;
      (entry.principal ? acc.dx_principal : acc.dx_secondary).push_back(std_code);
    }
    for (const auto& entry : ev.proc) {
      const MappedCode mapped = map.map(MapDomain::proc, entry.code);
      CodeUnit unit;
      if (mapped.targets.empty()) {
        unit.nomap = true;
      } else {
        unit.codes = mapped.targets;
        std::sort(unit.codes.begin(), unit.codes.end());
      }
      if (!acc.proc_seen.insert(unit).second) continue;
      (entry.principal ? acc.proc_principal : acc.proc_secondary).push_back(unit);
    }
    for (const auto& src : ev.rx) {
      const MappedCode mapped = map.map(MapDomain::rx, src);
      CodeUnit unit;
      if (mapped.targets.empty()) {
        unit.nomap = true;
      } else {
        unit.codes = mapped.targets;
        std::sort(unit.codes.begin(), unit.codes.end());
      }
      if (!acc.rx_seen.insert(unit).second) continue;
      acc.rx.push_back(unit);
    }
    acc.payment_sum += ev.gross_payment;
    if (ev.kind == ClaimKind::inpatient && !acc.has_inpatient_fields) {
      acc.has_inpatient_fields = true;
      acc.ds = ev.discharge_status ? value_or_missing(*ev.discharge_status) : "MISSING";
      acc.ls = ev.length_of_stay_days ? (*ev.length_of_stay_days >= 7 ? "1" : "0") : "MISSING";
    }
  }

  // (month, class) -> group; enrollment groups join the claim groups here.
  std::map<std::pair<int, int>, ViewGroup> groups;
  for (auto& [key, acc] : claims) {
    ViewGroup g;
    g.month = key.first;
    g.kind = key.second == group_order(GroupKind::outpatient) ? GroupKind::outpatient
             : key.second == group_order(GroupKind::pharmacy) ? GroupKind::pharmacy
                                                              : GroupKind::inpatient;
    g.dx_principal = std::move(acc.dx_principal);
    g.dx_secondary = std::move(acc.dx_secondary);
    g.proc_principal = std::move(acc.proc_principal);
    g.proc_secondary = std::move(acc.proc_secondary);
    g.rx = std::move(acc.rx);
    g.cost_code = encode_cost(acc.payment_sum);
    if (g.kind == GroupKind::inpatient) {
      g.ds = acc.ds.empty() ? "MISSING" : acc.ds;
      g.ls = acc.ls.empty() ? "MISSING" : acc.ls;
    }
    groups.emplace(key, std::move(g));
  }
  for (const auto& ep : record.episodes) {
    ViewGroup start;
    start.month = ep.start.month_index();
    start.kind = GroupKind::enroll_start;
    start.payer = value_or_missing(ep.payer);
    start.plan_type = value_or_missing(ep.plan_type);
    start.capitation = value_or_missing(ep.capitation);
    start.geo = value_or_missing(ep.geo);
    if (!groups.emplace(std::make_pair(start.month, group_order(GroupKind::enroll_start)), start)
             .second) {
      throw DataError("record " + record.id + ": overlapping enrollment starts in one month");
    }
    ViewGroup end;
    end.month = ep.end.month_index();
    end.kind = GroupKind::enroll_end;
    end.payer = value_or_missing(ep.payer);
    if (!groups.emplace(std::make_pair(end.month, group_order(GroupKind::enroll_end)), end).second) {
      throw DataError("record " + record.id + ": overlapping enrollment ends in one month");
    }
  }

  if (!groups.empty()) {
    // New-year anchors at the first month of each later calendar year the
    // trajectory spans. The anchor month is itself a January and gets none.
    const int last_month = groups.rbegin()->first.first;
    for (int m = view.anchor_month + 12; m <= last_month; m += 12) {
      ViewGroup ny;
      ny.month = m;
      ny.kind = GroupKind::new_year;
      groups.emplace(std::make_pair(m, group_order(GroupKind::new_year)), std::move(ny));
    }
  }

  view.groups.reserve(groups.size());
  for (auto& [key, g] : groups) view.groups.push_back(std::move(g));
  return view;
}

// ---------------------------------------------------------------------------
// Monthly view -> tokens.

namespace {

void emit_code_units(std::vector<std::string>& out, const std::string& category,
                     const std::vector<CodeUnit>& units, const std::string& nomap_token) {
  for (const auto& unit : units) {
    if (unit.nomap) {
      out.push_back(nomap_token);
    } else {
      const auto toks = canonicalize_combo(category, unit.codes);
      out.insert(out.end(), toks.begin(), toks.end());
    }
  }
}

void emit_group(std::vector<std::string>& out, const ViewGroup& g) {
  switch (g.kind) {
    case GroupKind::new_year:
      out.push_back(tok::ny);
      return;
    case GroupKind::enroll_start:
      out.push_back(tok::erlst(g.payer));
      out.push_back(tok::plantyp(g.plan_type));
      out.push_back(tok::cap(g.capitation));
      out.push_back(tok::egeoloc(g.geo));
      return;
    case GroupKind::enroll_end:
      out.push_back(tok::erled(g.payer));
      return;
    case GroupKind::outpatient:
    case GroupKind::inpatient: {
      out.push_back(tok::vt(vt_name(g.kind)));
      if (!g.dx_principal.empty()) {
        out.push_back(tok::dx_principal);
        for (const auto& code : g.dx_principal) {
          const auto toks = decompose_dx(code);
          out.insert(out.end(), toks.begin(), toks.end());
        }
      }
      if (!g.dx_secondary.empty()) {
        out.push_back(tok::dx_secondary);
        for (const auto& code : g.dx_secondary) {
          const auto toks = decompose_dx(code);
          out.insert(out.end(), toks.begin(), toks.end());
        }
      }
      if (!g.proc_principal.empty()) {
        out.push_back(tok::proc_principal);
        emit_code_units(out, "PROC", g.proc_principal, tok::proc_nomap);
      }
      if (!g.proc_secondary.empty()) {
        out.push_back(tok::proc_secondary);
        emit_code_units(out, "PROC", g.proc_secondary, tok::proc_nomap);
      }
      if (g.kind == GroupKind::inpatient) {
        out.push_back(tok::ds(g.ds));
        out.push_back(tok::ls(g.ls));
      }
      break;
    }
    case GroupKind::pharmacy: {
      out.push_back(tok::vt("pharmacy"));
      emit_code_units(out, "RX", g.rx, tok::rx_nomap);
      break;
    }
  }
  if (g.cost_code == -2) {
    out.push_back("<COST-MISSING>");
  } else if (g.cost_code >= 0) {
    out.push_back(tok::cost(g.cost_code));
  } else {
    throw DataError("claim group without cost");
  }
}

}  // namespace

TokenSequence assemble_from_view(const MonthlyView& view, const std::string& enrollee_id) {
  TokenSequence seq;
  seq.enrollee_id = enrollee_id;
  auto& out = seq.texts;
  out.push_back(tok::sos);
  out.push_back(tok::sex(view.sex));
  out.push_back(tok::dobyr(view.birth_year));
  out.push_back(tok::age(view.age_years));
  int prev_month = view.anchor_month;
  for (const auto& g : view.groups) {
    const int gap = g.month - prev_month;
    if (gap < 0 || gap > 12) {
      throw DataError("group gap of " + std::to_string(gap) + " months cannot be tokenized");
    }
    seq.group_starts.push_back(out.size());
    out.push_back(tok::att(gap));
    emit_group(out, g);
    prev_month = g.month;
  }
  out.push_back(tok::eos);
  return seq;
}

TokenSequence assemble_sequence(const EnrolleeRecord& record, const CodeMap& map) {
  return assemble_from_view(build_view(record, map), record.id);
}

Vocabulary build_vocabulary(const std::vector<EnrolleeRecord>& records, const CodeMap& map) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(records.size());
  for (const auto& r : records) corpus.push_back(assemble_sequence(r, map).texts);
  return Vocabulary::build(corpus);
}

// ---------------------------------------------------------------------------
// Token stream -> monthly view (strict).

namespace {

class Parser {
 public:
  explicit Parser(const std::vector<std::string>& texts) : t_(texts) {}

  MonthlyView run() {
    expect_text(tok::sos, "expected <sos>");
    view_.sex = expect_value(TokenCategory::sex, "<SEX-");
    const auto by = dobyr_value(peek());
    if (!by) fail("expected birth-year token");
    view_.birth_year = *by;
    advance();
    const auto age = age_value(peek());
    if (!age) fail("expected age-anchor token");
    view_.age_years = *age;
    advance();

    // The anchor sits at January of a year the age value pins only relative
    // to birth year; absolute placement uses birth_year + age.
    view_.anchor_month = (view_.birth_year + view_.age_years) * 12;
    int month = view_.anchor_month;
    int last_order = 0;
    int last_month = month;

    while (peek() != tok::eos) {
      const auto att = att_value(peek());
      if (!att) fail("expected elapsed-time token between groups");
      if (*att > 12) fail("elapsed-time token exceeds 12 months");
      advance();
      month += *att;

      ViewGroup g = parse_group(month);
      const int order = group_order(g.kind);
      if (g.month == last_month && !view_.groups.empty()) {
        if (order == last_order) fail("duplicate group type within one month");
        if (order < last_order) fail("group types out of order within one month");
      }
      // Calendar-year crossings must open with a new-year anchor in January.
      if (month_year(g.month) > month_year(last_month) && g.kind != GroupKind::new_year) {
        fail("missing new-year anchor at year boundary");
      }
      if (g.kind == GroupKind::new_year && month_of_year(g.month) != 1) {
        fail("new-year anchor not in January");
      }
      last_order = order;
      last_month = g.month;
      view_.groups.push_back(std::move(g));
    }
    advance();  // eos
    if (pos_ != t_.size()) fail("trailing tokens after <eos>");
    return view_;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(std::min(pos_, t_.size() ? t_.size() - 1 : 0), msg);
  }

  const std::string& peek() const {
    if (pos_ >= t_.size()) {
      throw ParseError(t_.size() ? t_.size() - 1 : 0, "unexpected end of sequence");
    }
    return t_[pos_];
  }

  void advance() { ++pos_; }

  void expect_text(const std::string& text, const char* msg) {
    if (peek() != text) fail(msg);
    advance();
  }

  // "<PREFIX-value>" -> "value"
  std::string expect_value(TokenCategory cat, const std::string& prefix) {
    const std::string& tk = peek();
    if (classify_token(tk) != cat || tk.rfind(prefix, 0) != 0) {
      fail("expected " + prefix + "...> token");
    }
    std::string v = tk.substr(prefix.size(), tk.size() - prefix.size() - 1);
    advance();
    return v;
  }

  TokenCategory category() const {
    const auto c = classify_token(peek());
    if (!c) fail("unknown token");
    return *c;
  }

  ViewGroup parse_group(int month) {
    ViewGroup g;
    g.month = month;
    const std::string& head = peek();
    if (head == tok::ny) {
      g.kind = GroupKind::new_year;
      advance();
      return g;
    }
    const TokenCategory cat = category();
    if (cat == TokenCategory::erlst) {
      g.kind = GroupKind::enroll_start;
      g.payer = expect_value(TokenCategory::erlst, "<ERLST-");
      g.plan_type = expect_value(TokenCategory::plantyp, "<PLANTYP-");
      g.capitation = expect_value(TokenCategory::cap, "<CAP-");
      g.geo = expect_value(TokenCategory::egeoloc, "<EGEOLOC-");
      return g;
    }
    if (cat == TokenCategory::erled) {
      g.kind = GroupKind::enroll_end;
      g.payer = expect_value(TokenCategory::erled, "<ERLED-");
      return g;
    }
    if (cat == TokenCategory::vt) {
      const std::string vt = expect_value(TokenCategory::vt, "<VT-");
      if (vt == "outpatient") {
        g.kind = GroupKind::outpatient;
        parse_medical_body(g);
      } else if (vt == "inpatient") {
        g.kind = GroupKind::inpatient;
        parse_medical_body(g);
      } else if (vt == "pharmacy") {
        g.kind = GroupKind::pharmacy;
        parse_pharmacy_body(g);
      } else {
        fail("unsupported visit type value");
      }
      return g;
    }
    fail("expected a group-opening token");
  }

  void parse_medical_body(ViewGroup& g) {
    if (peek() == tok::dx_principal) {
      advance();
      parse_dx_codes(g.dx_principal);
    }
    if (peek() == tok::dx_secondary) {
      advance();
      parse_dx_codes(g.dx_secondary);
    }
    if (peek() == tok::proc_principal) {
      advance();
      parse_code_units("PROC", tok::proc_nomap, g.proc_principal);
    }
    if (peek() == tok::proc_secondary) {
      advance();
      parse_code_units("PROC", tok::proc_nomap, g.proc_secondary);
    }
    if (g.kind == GroupKind::inpatient) {
      g.ds = expect_value(TokenCategory::ds, "<DS-");
      g.ls = expect_value(TokenCategory::ls, "<LS-");
    }
    parse_cost(g);
  }

  void parse_pharmacy_body(ViewGroup& g) {
    parse_code_units("RX", tok::rx_nomap, g.rx);
    if (g.rx.empty()) fail("pharmacy group without drug codes");
    parse_cost(g);
  }

  void parse_cost(ViewGroup& g) {
    const std::string& tk = peek();
    if (tk == "<COST-MISSING>") {
      g.cost_code = -2;
      advance();
      return;
    }
    const auto code = cost_value(tk);
    if (!code) fail("expected cost token at group end");
    if (*code > kMaxCostCode || (*code >= 1 && *code <= 9)) fail("invalid cost code");
    g.cost_code = *code;
    advance();
  }

  void parse_dx_codes(std::vector<std::string>& out) {
    bool any = false;
    while (true) {
      const std::string& tk = peek();
      if (tk == tok::dx_nomap) {
        out.push_back("NOMAP");
        advance();
        any = true;
        continue;
      }
      const auto major = dx_major_value(tk);
      if (!major) break;
      advance();
      DxParts parts{*major, "", ""};
      if (auto minor = parse_component("<DX-MINOR_")) parts.minor = *minor;
      if (parts.minor.size()) {
        if (auto suffix = parse_component("<DX-SUFFIX_")) parts.suffix = *suffix;
      }
      out.push_back(dx_to_string(parts));
      any = true;
    }
    if (!any) fail("empty diagnosis section");
  }

  std::optional<std::string> parse_component(const std::string& prefix) {
    const std::string& tk = peek();
    if (tk.rfind(prefix, 0) != 0 || tk.back() != '>') return std::nullopt;
    std::string v = tk.substr(prefix.size(), tk.size() - prefix.size() - 1);
    advance();
    return v;
  }

  void parse_code_units(const std::string& category, const std::string& nomap_token,
                        std::vector<CodeUnit>& out) {
    const std::string comb_start = tok::comb_start(category);
    const std::string comb_end = tok::comb_end(category);
    const std::string code_prefix = "<" + category + "-";
    const TokenCategory cat = category == "PROC" ? TokenCategory::proc : TokenCategory::rx;
    bool any = false;
    while (true) {
      const std::string& tk = peek();
      if (tk == nomap_token) {
        out.push_back(CodeUnit{true, {}});
        advance();
        any = true;
        continue;
      }
      if (tk == comb_start) {
        advance();
        CodeUnit unit;
        while (peek() != comb_end) {
          const std::string& member = peek();
          if (classify_token(member) != cat || member == comb_start || member == nomap_token ||
              is_marker(member)) {
            fail("expected combination member code");
          }
          unit.codes.push_back(member.substr(code_prefix.size(),
                                             member.size() - code_prefix.size() - 1));
          advance();
        }
        advance();  // comb_end
        if (unit.codes.size() < 2) fail("combination with fewer than two members");
        if (!std::is_sorted(unit.codes.begin(), unit.codes.end())) {
          fail("combination members not in canonical order");
        }
        out.push_back(std::move(unit));
        any = true;
        continue;
      }
      if (classify_token(tk) == cat && !is_marker(tk) && tk != comb_end) {
        CodeUnit unit;
        unit.codes.push_back(tk.substr(code_prefix.size(), tk.size() - code_prefix.size() - 1));
        out.push_back(std::move(unit));
        advance();
        any = true;
        continue;
      }
      if (tk == comb_end) fail("combination end without start");
      break;
    }
    if (!any && category == "PROC") fail("empty procedure section");
  }

  static bool is_marker(const std::string& tk) {
    return tk == tok::dx_principal || tk == tok::dx_secondary || tk == tok::proc_principal ||
           tk == tok::proc_secondary;
  }

  const std::vector<std::string>& t_;
  std::size_t pos_ = 0;
  MonthlyView view_;
};

}  // namespace

MonthlyView detokenize(const std::vector<std::string>& texts) { return Parser(texts).run(); }

// ---------------------------------------------------------------------------

std::vector<double> reconstruct_ages(const std::vector<std::string>& texts) {
  bool seen_birth = false;
  for (const auto& t : texts) {
    if (dobyr_value(t)) {
      seen_birth = true;
      break;
    }
  }
  if (!seen_birth) throw ParseError(0, "no birth-year token; ages are undefined");

  std::vector<double> ages(texts.size(), 0.0);
  double clock = 0.0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const std::string& t = texts[i];
    if (auto a = age_value(t)) {
      clock = *a * kDaysPerYear;
    } else if (auto n = att_value(t)) {
      if (*n > 12) throw ParseError(i, "elapsed-time token exceeds 12 months");
      clock += *n * kDaysPerMonth;
    }
    ages[i] = clock;
  }
  return ages;
}

std::vector<std::size_t> group_starts_from_texts(const std::vector<std::string>& texts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (att_value(texts[i])) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Window> split_into_windows(std::size_t n_tokens,
                                       const std::vector<std::size_t>& group_starts,
                                       std::size_t window_len) {
  std::vector<Window> out;
  if (window_len == 0 || n_tokens == 0) return out;
  if (n_tokens <= window_len) {
    out.push_back({0, n_tokens});
    return out;
  }
  // Candidate cut points: sequence head, each group start, sequence end.
  std::vector<std::size_t> cuts;
  cuts.push_back(0);
  for (auto g : group_starts) {
    if (g > 0 && g < n_tokens) cuts.push_back(g);
  }
  cuts.push_back(n_tokens);

  std::size_t a = 0;  // index into cuts
  while (cuts[a] < n_tokens) {
    // Largest b with cuts[b] - cuts[a] <= window_len.
    std::size_t b = a + 1;
    while (b + 1 < cuts.size() && cuts[b + 1] - cuts[a] <= window_len) ++b;
    if (cuts[b] - cuts[a] > window_len) {
      // Single over-long group: hard split.
      out.push_back({cuts[a], cuts[a] + window_len});
      cuts.insert(cuts.begin() + static_cast<std::ptrdiff_t>(a) + 1, cuts[a] + window_len);
      ++a;
      continue;
    }
    out.push_back({cuts[a], cuts[b]});
    if (cuts[b] >= n_tokens) break;
    // Advance roughly half a window for overlap.
    std::size_t next = a + 1;
    while (next < b && cuts[next] - cuts[a] < window_len / 2) ++next;
    a = next;
  }
  return out;
}

LeftTruncation truncate_left_at_boundary(const std::vector<std::size_t>& group_starts,
                                         std::size_t end_index, std::size_t max_tokens) {
  if (end_index <= max_tokens) return {0, false};
  const std::size_t min_begin = end_index - max_tokens;
  for (auto g : group_starts) {
    if (g >= min_begin && g < end_index) return {g, true};
  }
  return {min_begin, true};
}

// ---------------------------------------------------------------------------

void write_sequences_text(const std::string& path, const std::vector<TokenSequence>& seqs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& s : seqs) {
    out << s.enrollee_id << '\t';
    for (std::size_t i = 0; i < s.texts.size(); ++i) {
      if (i) out << ' ';
      out << s.texts[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("short write to " + path);
}

std::vector<TokenSequence> read_sequences_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<TokenSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path + ": malformed sequence line");
    TokenSequence seq;
    seq.enrollee_id = line.substr(0, tab);
    seq.texts = split(line.substr(tab + 1), ' ');
    seq.group_starts = group_starts_from_texts(seq.texts);
    out.push_back(std::move(seq));
  }
  return out;
}

namespace {
constexpr char kSeqMagic[4] = {'C', 'C', 'S', 'Q'};
constexpr std::uint32_t kSeqVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void write_sequences_ids(const std::string& path, const std::vector<std::string>& enrollee_ids,
                         const std::vector<std::vector<std::int32_t>>& ids) {
  if (enrollee_ids.size() != ids.size()) throw DataError("sequence id/payload size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(kSeqMagic, sizeof kSeqMagic);
  write_pod(out, kSeqVersion);
  write_pod(out, static_cast<std::uint64_t>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    write_pod(out, static_cast<std::uint32_t>(enrollee_ids[i].size()));
    out.write(enrollee_ids[i].data(), static_cast<std::streamsize>(enrollee_ids[i].size()));
    write_pod(out, static_cast<std::uint64_t>(ids[i].size()));
    out.write(reinterpret_cast<const char*>(ids[i].data()),
              static_cast<std::streamsize>(ids[i].size() * sizeof(std::int32_t)));
  }
  if (!out) throw DataError("short write to " + path);
}

void read_sequences_ids(const std::string& path, std::vector<std::string>& enrollee_ids,
                        std::vector<std::vector<std::int32_t>>& ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  std::uint32_t version = 0;
  read_pod(in, version);
  if (!in || std::memcmp(magic, kSeqMagic, 4) != 0 || version != kSeqVersion) {
    throw DataError(path + ": not a sequence container");
  }
  std::uint64_t count = 0;
  read_pod(in, count);
  enrollee_ids.clear();
  ids.clear();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t idlen = 0;
    read_pod(in, idlen);
    std::string id(idlen, '\0');
    in.read(id.data(), idlen);
    std::uint64_t n = 0;
    read_pod(in, n);
    std::vector<std::int32_t> seq(n);
    in.read(reinterpret_cast<char*>(seq.data()),
            static_cast<std::streamsize>(n * sizeof(std::int32_t)));
    if (!in) throw DataError(path + ": truncated sequence container");
    enrollee_ids.push_back(std::move(id));
    ids.push_back(std::move(seq));
  }
}

}  // namespace claimcraft
