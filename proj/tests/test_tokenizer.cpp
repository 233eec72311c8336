#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "claimcraft/common.hpp"
#include "claimcraft/synthgen.hpp"
#include "claimcraft/tokenizer.hpp"

using namespace claimcraft;

namespace {

std::vector<std::string> toks(const std::string& s) { return split(s, ' '); }

// The canonical worked example: a 1974-born male, enrolled 2018-01 through
// 2023-12 under commercial coverage, with two years of silence, a 2020-11
// outpatient+pharmacy pair, paired visits in 2021-06 and 2021-07, a 2022-04
// inpatient stay and a 2023-04 outpatient visit.
EnrolleeRecord example_record() {
  EnrolleeRecord r;
  r.id = "A1";
  r.sex = 1;
  r.birth_year = 1974;
  EnrollmentEpisode ep;
  ep.start = {2018, 1, 1};
  ep.end = {2023, 12, 31};
  ep.payer = "CCAE";
  ep.plan_type = "6";
  ep.capitation = "0";
  ep.geo = "04";
  r.episodes.push_back(ep);

  auto outpatient = [](Date d, std::vector<CodedEntry> dx, std::vector<std::string> procs,
                       double pay) {
    ClaimEvent ev;
    ev.kind = ClaimKind::outpatient;
    ev.date = d;
    ev.dx = std::move(dx);
    for (auto& p : procs) ev.proc.push_back({std::move(p), true});
    ev.gross_payment = pay;
    return ev;
  };
  auto pharmacy = [](Date d, std::vector<std::string> rx, double pay) {
    ClaimEvent ev;
    ev.kind = ClaimKind::pharmacy;
    ev.date = d;
    ev.rx = std::move(rx);
    ev.gross_payment = pay;
    return ev;
  };

  r.events.push_back(outpatient({2020, 11, 10}, {{"R07.9", true}, {"E11.9", true}},
                                {"P1", "P2", "P3", "P4", "CPT499214"}, 250.00));
  r.events.push_back(pharmacy({2020, 11, 16}, {"N1"}, 50.00));
  r.events.push_back(outpatient({2021, 6, 8}, {{"I10", true}},
                                {"P2", "P3", "P4", "P5", "P6", "CPT499213"}, 120.00));
  r.events.push_back(pharmacy({2021, 6, 19}, {"N2", "N3"}, 48.99));
  r.events.push_back(outpatient({2021, 7, 14}, {{"E11.9", true}, {"E78.2", true}},
                                {"P2", "P3", "P4", "P8", "P5", "P6"}, 220.00));
  r.events.push_back(pharmacy({2021, 7, 27}, {"N4", "N5"}, 2400.00));
  {
    ClaimEvent ev;
    ev.kind = ClaimKind::inpatient;
    ev.date = {2022, 4, 5};
    ev.dx = {{"R11.2", true}, {"R10.9", false}, {"R13.0", false}, {"R13.10", false},
             {"Z98.84", false}};
    ev.proc = {{"P9", false}, {"P10", false}, {"P11", false}};
    ev.discharge_status = std::nullopt;
    ev.length_of_stay_days = 3;
    ev.gross_payment = 4123.45;
    r.events.push_back(ev);
  }
  r.events.push_back(outpatient({2023, 4, 11}, {{"E11.9", true}},
                                {"P2", "P3", "P4", "P5", "P12", "P13", "CPT499214"}, 180.00));
  return r;
}

CodeMap example_map() {
  CodeMap m;
  // One-to-many entries are given unsorted to prove canonical ordering is
  // applied downstream.
  m.add(MapDomain::proc, "P1", {"29303009", "268400002", "308561006"});
  m.add(MapDomain::proc, "P2", {"165102003"});
  m.add(MapDomain::proc, "P3", {"16254007"});
  m.add(MapDomain::proc, "P4", {"43396009", "408254005"});
  m.add(MapDomain::proc, "P5", {"45896001"});
  m.add(MapDomain::proc, "P6", {"34608000"});
  m.add(MapDomain::proc, "P8", {"63476009"});
  m.add(MapDomain::proc, "P9", {"168702005"});
  m.add(MapDomain::proc, "P10", {"241157000"});
  m.add(MapDomain::proc, "P11", {"86181006", "315639002"});
  m.add(MapDomain::proc, "P12", {"117356000", "43789009"});
  m.add(MapDomain::proc, "P13", {"104154005"});
  m.add(MapDomain::rx, "N1", {"6809"});
  m.add(MapDomain::rx, "N2", {"18867"});
  m.add(MapDomain::rx, "N3", {"5487"});
  m.add(MapDomain::rx, "N4", {"1991302"});
  m.add(MapDomain::rx, "N5", {"4018"});
  return m;
}

const char* kExpectedExample =
    "<sos> <SEX-1> <DOBYR-1974> <AGE-44>"
    " <ATT-0> <ERLST-CCAE> <PLANTYP-6> <CAP-0> <EGEOLOC-04>"
    " <ATT-12> <NY>"
    " <ATT-12> <NY>"
    " <ATT-10> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_R07> <DX-MINOR_9> <DX-MAJOR_E11>"
    " <DX-MINOR_9> <PROC-PRINCIPAL> <PROC-COMBSTART> <PROC-268400002> <PROC-29303009>"
    " <PROC-308561006> <PROC-COMBEND> <PROC-165102003> <PROC-16254007> <PROC-COMBSTART>"
    " <PROC-408254005> <PROC-43396009> <PROC-COMBEND> <PROC-CPT499214> <COST-32>"
    " <ATT-0> <VT-pharmacy> <RX-6809> <COST-51>"
    " <ATT-2> <NY>"
    " <ATT-5> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_I10> <PROC-PRINCIPAL> <PROC-165102003>"
    " <PROC-16254007> <PROC-COMBSTART> <PROC-408254005> <PROC-43396009> <PROC-COMBEND>"
    " <PROC-45896001> <PROC-34608000> <PROC-CPT499213> <COST-12>"
    " <ATT-0> <VT-pharmacy> <RX-18867> <RX-5487> <COST-51>"
    " <ATT-1> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_E11> <DX-MINOR_9> <DX-MAJOR_E78>"
    " <DX-MINOR_2> <PROC-PRINCIPAL> <PROC-165102003> <PROC-16254007> <PROC-COMBSTART>"
    " <PROC-408254005> <PROC-43396009> <PROC-COMBEND> <PROC-63476009> <PROC-45896001>"
    " <PROC-34608000> <COST-22>"
    " <ATT-0> <VT-pharmacy> <RX-1991302> <RX-4018> <COST-23>"
    " <ATT-6> <NY>"
    " <ATT-3> <VT-inpatient> <DX-PRINCIPAL> <DX-MAJOR_R11> <DX-MINOR_2> <DX-SECONDARY>"
    " <DX-MAJOR_R10> <DX-MINOR_9> <DX-MAJOR_R13> <DX-MINOR_0> <DX-MAJOR_R13> <DX-MINOR_10>"
    " <DX-MAJOR_Z98> <DX-MINOR_84> <PROC-SECONDARY> <PROC-168702005> <PROC-241157000>"
    " <PROC-COMBSTART> <PROC-315639002> <PROC-86181006> <PROC-COMBEND> <DS-MISSING> <LS-0>"
    " <COST-43>"
    " <ATT-9> <NY>"
    " <ATT-3> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_E11> <DX-MINOR_9> <PROC-PRINCIPAL>"
    " <PROC-165102003> <PROC-16254007> <PROC-COMBSTART> <PROC-408254005> <PROC-43396009>"
    " <PROC-COMBEND> <PROC-45896001> <PROC-COMBSTART> <PROC-117356000> <PROC-43789009>"
    " <PROC-COMBEND> <PROC-104154005> <PROC-CPT499214> <COST-22>"
    " <ATT-8> <ERLED-CCAE> <eos>";

}  // namespace

TEST_CASE("worked example assembles byte for byte") {
  const auto seq = assemble_sequence(example_record(), example_map());
  CHECK(join(seq.texts, " ") == kExpectedExample);

  // One group per elapsed-time token, header before the first.
  CHECK(seq.group_starts.size() == 15);
  CHECK(seq.group_starts.front() == 4);
  CHECK(seq.group_starts == group_starts_from_texts(seq.texts));
}

TEST_CASE("worked example round trips through the parser") {
  const auto record = example_record();
  const auto map = example_map();
  const auto view = build_view(record, map);
  const auto texts = toks(kExpectedExample);

  const auto parsed = detokenize(texts);
  CHECK(parsed == view);
  CHECK(assemble_from_view(parsed, "A1").texts == texts);
}

TEST_CASE("assembly is invariant under event order") {
  auto record = example_record();
  std::reverse(record.events.begin(), record.events.end());
  const auto seq = assemble_sequence(record, example_map());
  CHECK(join(seq.texts, " ") == kExpectedExample);
}

TEST_CASE("monthly aggregation merges claims and deduplicates codes") {
  EnrolleeRecord r;
  r.id = "M1";
  r.sex = 2;
  r.birth_year = 1985;
  r.episodes.push_back({{2020, 1, 1}, {2020, 12, 31}, "MDCD", "1", "1", "12"});

  ClaimEvent a;
  a.kind = ClaimKind::outpatient;
  a.date = {2020, 3, 5};
  a.dx = {{"E11.9", true}};
  a.proc = {{"P2", true}};
  a.gross_payment = 100.0;
  ClaimEvent b;
  b.kind = ClaimKind::outpatient;
  b.date = {2020, 3, 20};
  b.dx = {{"E11.9", false}, {"J45.2", false}};  // repeat stays principal
  b.proc = {{"P2", false}, {"P3", false}};      // repeat keeps first bucket
  b.gross_payment = 150.0;
  r.events = {a, b};

  const auto seq = assemble_sequence(r, example_map());
  CHECK(join(seq.texts, " ") ==
        "<sos> <SEX-2> <DOBYR-1985> <AGE-35>"
        " <ATT-0> <ERLST-MDCD> <PLANTYP-1> <CAP-1> <EGEOLOC-12>"
        " <ATT-2> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_E11> <DX-MINOR_9>"
        " <DX-SECONDARY> <DX-MAJOR_J45> <DX-MINOR_2>"
        " <PROC-PRINCIPAL> <PROC-165102003> <PROC-SECONDARY> <PROC-16254007> <COST-32>"
        " <ATT-9> <ERLED-MDCD> <eos>");
}

TEST_CASE("year gaps weave new-year anchors into elapsed time") {
  // First observed event in November anchors to that year's January; a
  // November-to-March gap becomes 2 months to the anchor, then 2 more.
  EnrolleeRecord r;
  r.id = "G1";
  r.sex = 1;
  r.birth_year = 1990;
  r.episodes.push_back({{2020, 11, 1}, {2021, 3, 31}, "CCAE", "3", "0", "44"});
  ClaimEvent a;
  a.kind = ClaimKind::outpatient;
  a.date = {2020, 11, 20};
  a.dx = {{"A10", true}};
  a.proc = {{"77777", true}};
  a.gross_payment = 859.0;
  ClaimEvent b = a;
  b.date = {2021, 3, 9};
  r.events = {a, b};

  const auto seq = assemble_sequence(r, example_map());
  CHECK(join(seq.texts, " ") ==
        "<sos> <SEX-1> <DOBYR-1990> <AGE-30>"
        " <ATT-10> <ERLST-CCAE> <PLANTYP-3> <CAP-0> <EGEOLOC-44>"
        " <ATT-0> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <PROC-PRINCIPAL>"
        " <PROC-77777> <COST-92>"
        " <ATT-2> <NY>"
        " <ATT-2> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <PROC-PRINCIPAL>"
        " <PROC-77777> <COST-92>"
        " <ATT-0> <ERLED-CCAE> <eos>");
}

TEST_CASE("unmappable sources become nomap tokens") {
  EnrolleeRecord r;
  r.id = "U1";
  r.sex = 1;
  r.birth_year = 1980;
  r.episodes.push_back({{2020, 1, 1}, {2020, 12, 31}, "CCAE", "2", "0", "07"});
  ClaimEvent a;
  a.kind = ClaimKind::outpatient;
  a.date = {2020, 2, 10};
  a.dx = {{"badcode", true}};
  a.proc = {{"UNKNOWN9", true}};
  a.gross_payment = 10.0;
  ClaimEvent b;
  b.kind = ClaimKind::pharmacy;
  b.date = {2020, 2, 12};
  b.rx = {"999999999999"};
  b.gross_payment = 5.0;
  r.events = {a, b};

  const auto seq = assemble_sequence(r, example_map());
  CHECK(join(seq.texts, " ") ==
        "<sos> <SEX-1> <DOBYR-1980> <AGE-40>"
        " <ATT-0> <ERLST-CCAE> <PLANTYP-2> <CAP-0> <EGEOLOC-07>"
        " <ATT-1> <VT-outpatient> <DX-PRINCIPAL> <DX-NOMAP> <PROC-PRINCIPAL> <PROC-NOMAP>"
        " <COST-11>"
        " <ATT-0> <VT-pharmacy> <RX-NOMAP> <COST-50>"
        " <ATT-10> <ERLED-CCAE> <eos>");

  // The nomap stream still parses and reassembles.
  const auto parsed = detokenize(seq.texts);
  CHECK(assemble_from_view(parsed, "U1").texts == seq.texts);
}

TEST_CASE("generated cohorts round trip exactly") {
  CohortSpec spec;
  spec.seed = 5;
  spec.n_enrollees = 40;
  spec.range_start = {2018, 1, 1};
  spec.range_end = {2022, 12, 31};
  const auto universes = build_code_universes(spec);
  const auto records = generate_cohort(spec);

  std::vector<std::vector<std::string>> corpus;
  for (const auto& r : records) {
    const auto seq = assemble_sequence(r, universes.map);
    const auto view = build_view(r, universes.map);
    const auto parsed = detokenize(seq.texts);
    REQUIRE(parsed == view);
    REQUIRE(assemble_from_view(parsed, r.id).texts == seq.texts);
    corpus.push_back(seq.texts);
  }

  // The whole corpus fits the vocabulary contract.
  const auto vocab = build_vocabulary(records, universes.map);
  for (const auto& texts : corpus) {
    CHECK(vocab.decode(vocab.encode(texts)) == texts);
  }
}

TEST_CASE("age reconstruction follows anchor and elapsed time") {
  const auto texts = toks(kExpectedExample);
  const auto ages = reconstruct_ages(texts);
  REQUIRE(ages.size() == texts.size());
  CHECK(ages[0] == 0.0);  // <sos>
  CHECK(ages[2] == 0.0);  // birth-year token
  CHECK(ages[3] == doctest::Approx(44 * 365.25));   // anchor
  CHECK(ages[4] == doctest::Approx(44 * 365.25));   // <ATT-0> same month
  // After the 2018 and 2019 anniversaries: two <ATT-12> hops of 12 * 30.4375.
  CHECK(ages[12] == doctest::Approx(44 * 365.25 + 24 * 30.4375));
  // Last token: 71 elapsed months after the anchor (2018-01 .. 2023-12).
  CHECK(ages.back() == doctest::Approx(44 * 365.25 + 71 * 30.4375));

  // Tokens of one group share its age: the 2020-11 outpatient group spans
  // indices 13..33 inclusive of its <ATT-10>.
  for (std::size_t i = 14; i <= 33; ++i) CHECK(ages[i] == ages[13]);

  CHECK_THROWS_AS(reconstruct_ages({"<sos>", "<SEX-1>", "<AGE-44>", "<eos>"}), ParseError);
  try {
    reconstruct_ages({"<sos>", "<DOBYR-1970>", "<AGE-44>", "<ATT-13>", "<eos>"});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.token_index == 3);
  }
}

TEST_CASE("parser rejects malformed streams with a token index") {
  const auto expect_error = [](const std::string& stream, std::size_t index,
                               const std::string& needle) {
    const auto texts = toks(stream);
    try {
      detokenize(texts);
      FAIL_CHECK("no error for: " << stream << " (wanted \"" << needle << "\")");
    } catch (const ParseError& e) {
      CHECK(e.token_index == index);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  const std::string head = "<sos> <SEX-1> <DOBYR-1990> <AGE-30>";

  expect_error("<SEX-1> <DOBYR-1990> <AGE-30> <eos>", 0, "<sos>");
  expect_error("<sos> <DOBYR-1990> <AGE-30> <eos>", 1, "SEX");
  expect_error(head + " <ATT-13> <NY> <eos>", 4, "exceeds 12");
  expect_error(head + " <VT-outpatient> <COST-10> <eos>", 4, "elapsed-time");
  // Crossing into the next calendar year without a new-year anchor.
  expect_error(head + " <ATT-11> <VT-pharmacy> <RX-6809> <COST-10>"
                      " <ATT-2> <VT-pharmacy> <RX-6809> <COST-10> <eos>",
               12, "new-year");
  // A new-year anchor anywhere but January.
  expect_error(head + " <ATT-3> <NY> <eos>", 6, "January");
  // Two groups of one type in one month.
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-6809> <COST-10>"
                      " <ATT-0> <VT-pharmacy> <RX-6809> <COST-10> <eos>",
               12, "duplicate");
  // Outpatient after pharmacy in the same month.
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-6809> <COST-10>"
                      " <ATT-0> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <COST-10> <eos>",
               13, "out of order");
  // Combination problems.
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-COMBSTART> <RX-6809> <RX-COMBEND>"
                      " <COST-10> <eos>",
               9, "fewer than two");
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-COMBSTART> <RX-6809> <RX-5487>"
                      " <RX-COMBEND> <COST-10> <eos>",
               10, "canonical order");
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-COMBEND> <COST-10> <eos>", 6, "without start");
  // Pharmacy group with no drugs.
  expect_error(head + " <ATT-0> <VT-pharmacy> <COST-10> <eos>", 6, "without drug");
  // A principal-diagnosis marker must be followed by codes.
  expect_error(head + " <ATT-0> <VT-outpatient> <DX-PRINCIPAL> <COST-10> <eos>", 7,
               "empty diagnosis");
  // Costs: missing, reserved code.
  expect_error(head + " <ATT-0> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <eos>", 8, "cost");
  expect_error(head + " <ATT-0> <VT-outpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <COST-5> <eos>",
               8, "invalid cost");
  // Inpatient needs discharge-status and stay-length tokens.
  expect_error(head + " <ATT-0> <VT-inpatient> <DX-PRINCIPAL> <DX-MAJOR_A10> <COST-10> <eos>",
               8, "<DS-");
  // Structure around the ends.
  expect_error(head + " <ATT-0> <VT-pharmacy> <RX-6809>", 6, "end of sequence");
  expect_error(head + " <eos> <ATT-0>", 5, "trailing");
  expect_error(head + " <ATT-0> <WHAT-9> <eos>", 5, "unknown token");
  expect_error(head + " <ATT-0> <DX-PRINCIPAL> <COST-10> <eos>", 5, "group-opening");
}

TEST_CASE("windows cut at group boundaries with bounded length") {
  SUBCASE("short sequences stay whole") {
    const auto w = split_into_windows(37, {4, 9, 20}, 128);
    REQUIRE(w.size() == 1);
    CHECK(w[0].begin == 0);
    CHECK(w[0].end == 37);
  }
  SUBCASE("long sequences split with overlap and full coverage") {
    const std::vector<std::size_t> starts{4, 20, 35, 60, 80};
    const auto windows = split_into_windows(100, starts, 40);
    REQUIRE(windows.size() >= 2);
    std::vector<bool> covered(100, false);
    for (const auto& w : windows) {
      CHECK(w.end - w.begin <= 40);
      CHECK(w.end > w.begin);
      const bool at_boundary =
          w.begin == 0 || std::find(starts.begin(), starts.end(), w.begin) != starts.end();
      CHECK(at_boundary);
      for (std::size_t i = w.begin; i < w.end; ++i) covered[i] = true;
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }));
  }
  SUBCASE("a single over-long group is hard split") {
    const auto windows = split_into_windows(50, {4}, 10);
    std::vector<bool> covered(50, false);
    for (const auto& w : windows) {
      CHECK(w.end - w.begin <= 10);
      for (std::size_t i = w.begin; i < w.end; ++i) covered[i] = true;
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](bool b) { return b; }));
  }
}

TEST_CASE("left truncation prefers group boundaries") {
  const std::vector<std::size_t> starts{4, 20, 35};
  const auto a = truncate_left_at_boundary(starts, 50, 40);
  CHECK(a.begin == 20);
  CHECK(a.truncated);
  const auto b = truncate_left_at_boundary(starts, 50, 60);
  CHECK(b.begin == 0);
  CHECK_FALSE(b.truncated);
  const auto c = truncate_left_at_boundary({4}, 50, 20);
  CHECK(c.begin == 30);
  CHECK(c.truncated);
}

TEST_CASE("sequence files round trip") {
  const auto seq = assemble_sequence(example_record(), example_map());
  const auto dir = std::filesystem::temp_directory_path();

  const auto text_path = (dir / "cc_seq_probe.txt").string();
  write_sequences_text(text_path, {seq});
  const auto loaded = read_sequences_text(text_path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].enrollee_id == "A1");
  CHECK(loaded[0].texts == seq.texts);
  CHECK(loaded[0].group_starts == seq.group_starts);
  std::remove(text_path.c_str());

  const auto bin_path = (dir / "cc_seq_probe.bin").string();
  const std::vector<std::vector<std::int32_t>> ids{{0, 5, 2, 1}, {0, 9, 1}};
  write_sequences_ids(bin_path, {"A1", "B2"}, ids);
  std::vector<std::string> rids;
  std::vector<std::vector<std::int32_t>> rdata;
  read_sequences_ids(bin_path, rids, rdata);
  CHECK(rids == std::vector<std::string>{"A1", "B2"});
  CHECK(rdata == ids);

  write_text_file(bin_path, "JUNKJUNKJUNK");
  CHECK_THROWS_AS(read_sequences_ids(bin_path, rids, rdata), DataError);
  std::remove(bin_path.c_str());
}

TEST_CASE("records without observable events cannot be tokenized") {
  EnrolleeRecord r;
  r.id = "empty";
  CHECK_THROWS_AS(build_view(r, example_map()), DataError);
}
