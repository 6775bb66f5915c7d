#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sedkit/filtering.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace sedkit;
using sedkit::testing::ScratchDir;

namespace {

std::vector<std::string> ids(const std::vector<RankedSample>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(r.sample.sample_id);
  return out;
}

std::vector<ScoredSample> four_samples() {
  return {{"A", "dog", 0.9, 0.1}, {"B", "dog", 0.8, 0.4}, {"C", "dog", 0.7, 0.3}, {"D", "dog", 0.6, 0.2}};
}

}  // namespace

TEST_CASE("rank_descending", "[filtering]") {
  const auto r = rank_descending({{"A", 0.9}, {"B", 0.8}, {"C", 0.7}});
  CHECK(r.at("A") == 1);
  CHECK(r.at("B") == 2);
  CHECK(r.at("C") == 3);
  const auto tie = rank_descending({{"B", 0.5}, {"A", 0.5}});
  CHECK(tie.at("A") == 1);
  CHECK(tie.at("B") == 2);
  CHECK(rank_descending({{"only", -3.0}}).at("only") == 1);
  CHECK_THROWS_AS(rank_descending({}), InvalidArgument);
}

TEST_CASE("fuse_and_select worked example", "[filtering]") {
  const auto result = fuse_and_select(four_samples(), {0.5, 50.0});
  const auto& dog = result.classes.at("dog");
  CHECK(ids(dog.kept) == std::vector<std::string>{"B", "A"});
  CHECK(ids(dog.discarded) == std::vector<std::string>{"C", "D"});
  std::map<std::string, double> fused;
  for (const auto* list : {&dog.kept, &dog.discarded})
    for (const auto& r : *list) fused[r.sample.sample_id] = r.fused_score;
  CHECK(fused == std::map<std::string, double>{{"A", 2.5}, {"B", 1.5}, {"C", 2.5}, {"D", 3.5}});
  CHECK(dog.kept[1].clap_rank == 1);
  CHECK(dog.kept[1].cls_rank == 4);

  const auto oracle = oracle::filter(four_samples(), 0.5, 50);
  CHECK(oracle.at("dog").first.size() == 2);
  CHECK(oracle.at("dog").first[0].id == "B");
  CHECK(oracle.at("dog").first[1].id == "A");
}

TEST_CASE("fuse_and_select edge configurations", "[filtering]") {
  const auto clap_only = fuse_and_select(four_samples(), {1.0, 100.0});
  CHECK(ids(clap_only.classes.at("dog").kept) == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(clap_only.classes.at("dog").discarded.empty());

  const auto cls_only = fuse_and_select(four_samples(), {0.0, 50.0});
  CHECK(ids(cls_only.classes.at("dog").kept) == std::vector<std::string>{"B", "C"});

  const auto single = fuse_and_select({{"x", "cat", 0.1, 0.2}}, {0.3, 50.0});
  CHECK(single.classes.at("cat").kept.size() == 1);

  CHECK_THROWS_AS(fuse_and_select({}, {}), InvalidArgument);
  CHECK_THROWS_AS(fuse_and_select(four_samples(), {1.5, 50.0}), InvalidArgument);
  CHECK_THROWS_AS(fuse_and_select(four_samples(), {0.5, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(fuse_and_select({{"a", "x", 1, 1}, {"a", "y", 1, 1}}, {}), InvalidArgument);
}

TEST_CASE("keep_quota rounds up", "[filtering]") {
  CHECK(keep_quota(1, 50.0) == 1);
  CHECK(keep_quota(7, 25.0) == 2);
  CHECK(keep_quota(8, 25.0) == 2);
  CHECK(keep_quota(3, 100.0) == 3);
  CHECK(keep_quota(10, 75.0) == 8);
}

TEST_CASE("filtering invariants on random tables", "[filtering][property]") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> score(-5.0, 5.0);
  const double weights[] = {0.0, 0.3, 0.5, 0.7, 1.0};
  const double percents[] = {25.0, 50.0, 75.0, 100.0};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_classes = 1 + rng() % 4;
    std::vector<ScoredSample> samples;
    std::map<std::string, std::size_t> per_class;
    const std::size_t n = n_classes + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string cls = "c" + std::to_string(i < n_classes ? i : rng() % n_classes);
      // Coarse grid so ties occur.
      samples.push_back({"s" + std::to_string(rng() % 1000) + "_" + std::to_string(i), cls,
                         std::round(score(rng)), std::round(score(rng) * 2) / 2});
      ++per_class[cls];
    }
    const FilterConfig cfg{weights[rng() % 5], percents[rng() % 4]};
    const auto result = fuse_and_select(samples, cfg);

    std::size_t expected_kept = 0;
    for (const auto& [cls, count] : per_class) expected_kept += keep_quota(count, cfg.top_percent);
    CHECK(result.kept_count() == expected_kept);

    auto shuffled = samples;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(fuse_and_select(shuffled, cfg) == result);

    // Union of classes equals per-class filtering.
    for (const auto& [cls, sel] : result.classes) {
      std::vector<ScoredSample> only;
      for (const auto& s : samples)
        if (s.class_name == cls) only.push_back(s);
      CHECK(fuse_and_select(only, cfg).classes.at(cls) == sel);
    }

    // Disjoint cover of the input.
    std::set<std::string> seen;
    for (const auto& [cls, sel] : result.classes) {
      for (const auto& r : sel.kept) CHECK(seen.insert(r.sample.sample_id).second);
      for (const auto& r : sel.discarded) CHECK(seen.insert(r.sample.sample_id).second);
    }
    CHECK(seen.size() == samples.size());
  }
}

TEST_CASE("load_score_table", "[filtering][io]") {
  const auto ok = parse_score_table({"sample_id,class,clap_score,cls_logit", "a,dog,0.5,1.2",
                                     "b,dog,0.25,-0.5", "c,cat,1e-3,3"});
  REQUIRE(ok.size() == 3);
  CHECK(ok[2] == ScoredSample{"c", "cat", 1e-3, 3.0});

  const auto reordered = parse_score_table({"cls_logit,sample_id,clap_score,class", "2,x,0.1,dog"});
  CHECK(reordered.front() == ScoredSample{"x", "dog", 0.1, 2.0});

  try {
    parse_score_table({"sample_id,class,clap_score,cls_logit", "a,d,1,1", "b,d,1,1", "c,d,1,1",
                       "e,d,1,1", "a,d,1,1"});
    FAIL("duplicate not detected");
  } catch (const ParseError& e) {
    CHECK(e.row() == 5);
    CHECK(std::string(e.what()).find("row 5") != std::string::npos);
  }

  try {
    parse_score_table({"sample_id,class,clap_score,cls_logit", "a,d,abc,1"});
    FAIL("bad number not detected");
  } catch (const ParseError& e) {
    CHECK(e.row() == 1);
    CHECK(std::string(e.what()).find("clap_score") != std::string::npos);
  }

  try {
    parse_score_table({"sample_id,class,clap_score", "a,d,1"});
    FAIL("missing column not detected");
  } catch (const ParseError& e) {
    CHECK(e.row() == 0);
    CHECK(std::string(e.what()).find("cls_logit") != std::string::npos);
  }
}

TEST_CASE("write_filter_result emits kept and discarded tables", "[filtering][io]") {
  ScratchDir dir("filt");
  write_filter_result(fuse_and_select(four_samples(), {0.5, 50.0}), dir.path());
  const auto kept = sedkit::text::read_lines((dir / "kept.csv").string());
  REQUIRE(kept.size() == 3);
  CHECK(kept[0] == "sample_id,class,clap_score,cls_logit,clap_rank,cls_rank,fused_score");
  CHECK(kept[1] == "B,dog,0.8,0.4,2,1,1.5");
  CHECK(kept[2] == "A,dog,0.9,0.1,1,4,2.5");
  CHECK(sedkit::text::read_lines((dir / "discarded.csv").string()).size() == 3);
}
