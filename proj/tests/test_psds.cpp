#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sedkit/psds.hpp"

using namespace sedkit;

namespace {

std::vector<EventAnnotation> micro_gt() {
  return {{"clipA", 1.0, 3.0, "dog"}, {"clipA", 5.0, 8.0, "blender"}, {"clipB", 2.0, 4.0, "dog"}};
}

DetectionSet micro_detections() {
  return {0.5, {{"clipA", 1.0, 2.0, "dog"}, {"clipA", 6.0, 7.0, "dog"}, {"clipB", 2.0, 4.0, "dog"}}};
}

const ClassRates& rates_of(const PerClassRates& r, const std::string& cls) {
  const auto it = std::find(r.classes.begin(), r.classes.end(), cls);
  REQUIRE(it != r.classes.end());
  return r.rates[static_cast<std::size_t>(it - r.classes.begin())];
}

std::vector<EventAnnotation> random_gt(std::mt19937_64& rng, std::size_t clips, double clip_len) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* names[] = {"a", "b", "c"};
  std::vector<EventAnnotation> gt;
  for (std::size_t k = 0; k < clips; ++k) {
    for (int e = 0; e < 3; ++e) {
      const double on = u(rng) * (clip_len - 2.0);
      gt.push_back({"clip" + std::to_string(k), on, on + 0.3 + 1.7 * u(rng), names[rng() % 3]});
    }
  }
  return gt;
}

DetectionSet jitter(const std::vector<EventAnnotation>& gt, std::mt19937_64& rng, double amount,
                    double threshold = 0.5) {
  std::uniform_real_distribution<double> u(-amount, amount);
  DetectionSet d{threshold, {}};
  for (auto e : gt) {
    e.onset = std::max(0.0, e.onset + u(rng));
    e.offset = std::max(e.onset + 0.05, e.offset + u(rng));
    d.events.push_back(e);
  }
  return d;
}

}  // namespace

TEST_CASE("presets", "[psds]") {
  const auto p1 = psds1_params();
  CHECK(p1 == PsdsParams{0.7, 0.7, 0.3, 0.0, 1.0, 100.0});
  const auto p2 = psds2_params();
  CHECK(p2 == PsdsParams{0.1, 0.1, 0.3, 0.5, 1.0, 100.0});
}

TEST_CASE("detections identical to the ground truth", "[psds][match]") {
  const auto gt = micro_gt();
  for (const double rho : {0.1, 0.5, 0.7, 1.0}) {
    const PsdsParams p{rho, rho, rho, 0.5, 1.0, 100.0};
    const auto r = match_operating_point({0.5, gt}, gt, p, 20.0);
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
      CHECK(r.rates[c].tpr == 1.0);
      CHECK(r.rates[c].fp == 0);
      CHECK(r.rates[c].efpr == 0.0);
      for (const auto ct : r.ct_counts[c]) CHECK(ct == 0);
    }
  }
}

TEST_CASE("empty detections", "[psds][match]") {
  const auto r = match_operating_point({}, micro_gt(), psds1_params(), 20.0);
  for (const auto& x : r.rates) {
    CHECK(x.tpr == 0.0);
    CHECK(x.fp == 0);
  }
}

TEST_CASE("two-class micro instance, hand-stepped", "[psds][match]") {
  const auto r1 = match_operating_point(micro_detections(), micro_gt(), psds1_params(), 20.0);
  CHECK(r1.classes == std::vector<std::string>{"blender", "dog"});
  CHECK(rates_of(r1, "dog").tp == 1);
  CHECK(rates_of(r1, "dog").gt == 2);
  CHECK(rates_of(r1, "dog").tpr == 0.5);
  CHECK(rates_of(r1, "dog").fp == 1);
  CHECK(rates_of(r1, "dog").efpr == Catch::Approx(180.0));  // 1 FP in 20 s
  CHECK(rates_of(r1, "blender").tpr == 0.0);
  CHECK(rates_of(r1, "blender").fp == 0);
  CHECK(r1.ct_counts[1][0] == 1);  // (6,7) dog lies inside blender GT

  // Loose criteria: (1,2) now covers half of (1,3) -> TP; the cross-trigger
  // adds 0.5 * 1 / 3 s = 600 per hour.
  const auto r2 = match_operating_point(micro_detections(), micro_gt(), psds2_params(), 20.0);
  CHECK(rates_of(r2, "dog").tpr == 1.0);
  CHECK(rates_of(r2, "dog").fp == 1);
  CHECK(rates_of(r2, "dog").efpr == Catch::Approx(180.0 + 600.0));
  CHECK(rates_of(r2, "blender").efpr == 0.0);
}

TEST_CASE("overlapping ground truth is counted once in the DTC ratio", "[psds][match]") {
  const std::vector<EventAnnotation> gt{{"c", 0.0, 2.0, "x"}, {"c", 1.0, 3.0, "x"}};
  const PsdsParams strict{1.0, 0.0, 0.3, 0.0, 0.0, 100.0};
  // Without merging the ratio would read 4/4 for (0,4); it is 3/4.
  auto r = match_operating_point({0.5, {{"c", 0.0, 4.0, "x"}}}, gt, strict, 10.0);
  CHECK(r.rates[0].fp == 1);
  r = match_operating_point({0.5, {{"c", 0.0, 3.0, "x"}}}, gt, strict, 10.0);
  CHECK(r.rates[0].fp == 0);
}

TEST_CASE("match_operating_point errors and warnings", "[psds][match]") {
  CHECK_THROWS_AS(match_operating_point({}, micro_gt(), psds1_params(), 0.0), InvalidArgument);
  CHECK_THROWS_AS(match_operating_point({0.5, {{"clipA", 2.0, 2.0, "dog"}}}, micro_gt(), psds1_params(), 20.0),
                  InvalidArgument);
  const auto r = match_operating_point({0.5, {{"clipA", 1.0, 2.0, "cat"}}}, micro_gt(), psds1_params(), 20.0,
                                       {"blender", "dog", "siren"});
  CHECK(rates_of(r, "siren").tpr == 0.0);
  CHECK(r.warnings.size() == 2);  // unknown class 'cat', no GT for 'siren'
}

TEST_CASE("PSD-ROC construction", "[psds][roc]") {
  const auto p = PsdsParams{0.5, 0.5, 0.3, 0.0, 1.0, 100.0};
  PerClassRates perfect{0.5, {"x"}, {{1, 1, 0, 1.0, 0.0}}, {{0}}, {{0.0}}, {}};
  auto curve = build_psd_roc({perfect}, p);
  for (const double v : curve.etpr) CHECK(v == 1.0);
  CHECK(compute_psds(curve, p) == Catch::Approx(1.0).margin(1e-9));

  PerClassRates a = perfect, b = perfect;
  a.rates[0] = {8, 10, 5, 0.8, 20.0};
  b.rates[0] = {6, 10, 9, 0.6, 40.0};
  curve = build_psd_roc({a, b}, p);
  CHECK(curve.efpr == std::vector<double>{0.0, 20.0, 40.0, 100.0});
  CHECK(curve.tpr[0] == std::vector<double>{0.0, 0.8, 0.8, 0.8});

  PerClassRates two{0.5, {"x", "y"}, {{8, 10, 5, 0.8, 20.0}, {8, 10, 5, 0.8, 20.0}},
                    {{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, {}};
  curve = build_psd_roc({two}, p);
  CHECK(curve.etpr == curve.tpr[0]);

  CHECK_THROWS_AS(build_psd_roc({}, p), InvalidArgument);
}

TEST_CASE("compute_psds step integral", "[psds][roc]") {
  const PsdsParams p{0.5, 0.5, 0.3, 0.0, 1.0, 100.0};
  const PerClassRates op{0.5, {"x"}, {{8, 10, 3, 0.8, 50.0}}, {{0}}, {{0.0}}, {}};
  CHECK(compute_psds(build_psd_roc({op}, p), p) == 0.4);

  const auto empty = evaluate_psds({{0.1, {}}, {0.5, {}}}, micro_gt(), 20.0, psds1_params());
  CHECK(empty.value == 0.0);

  // Points past e_max do not contribute.
  const PerClassRates far{0.5, {"x"}, {{10, 10, 50, 1.0, 250.0}}, {{0}}, {{0.0}}, {}};
  CHECK(compute_psds(build_psd_roc({far}, p), p) == 0.0);
}

TEST_CASE("ground truth as detections scores 1", "[psds]") {
  const auto gt = micro_gt();
  CHECK(evaluate_psds({{0.5, gt}}, gt, 20.0, psds1_params()).value == Catch::Approx(1.0).margin(1e-9));
  CHECK(evaluate_psds({{0.5, gt}}, gt, 20.0, psds2_params()).value == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("PSDS properties on random instances", "[psds][property]") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto gt = random_gt(rng, 6, 10.0);
    std::vector<DetectionSet> sets;
    for (int t = 0; t < 4; ++t) sets.push_back(jitter(gt, rng, 0.2 + 0.3 * t, 0.2 * (t + 1)));
    for (const auto& params : {psds1_params(), psds2_params()}) {
      const auto r = evaluate_psds(sets, gt, 60.0, params);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      for (const auto& row : r.curve.tpr)
        for (std::size_t g = 1; g < row.size(); ++g) CHECK(row[g] >= row[g - 1]);

      // Duplicate every clip under a fresh id.
      auto gt2 = gt;
      auto sets2 = sets;
      for (const auto& e : gt) gt2.push_back({e.clip_id + "_dup", e.onset, e.offset, e.class_name});
      for (auto& s : sets2) {
        const auto n = s.events.size();
        for (std::size_t i = 0; i < n; ++i) {
          auto e = s.events[i];
          e.clip_id += "_dup";
          s.events.push_back(e);
        }
      }
      const auto r2 = evaluate_psds(sets2, gt2, 120.0, params);
      CHECK(std::abs(r2.value - r.value) < 1e-9);
      for (std::size_t k = 0; k < r.operating_points.size(); ++k)
        for (std::size_t c = 0; c < r.operating_points[k].rates.size(); ++c) {
          CHECK(std::abs(r2.operating_points[k].rates[c].tpr - r.operating_points[k].rates[c].tpr) < 1e-9);
          CHECK(std::abs(r2.operating_points[k].rates[c].efpr - r.operating_points[k].rates[c].efpr) < 1e-9);
        }
    }

    // Lowering rho_dtc or rho_gtc never loses a TP.
    const auto& d = sets[2];
    const PsdsParams tight{0.8, 0.8, 0.3, 0.0, 1.0, 100.0};
    const auto base = match_operating_point(d, gt, tight, 60.0);
    for (const auto& looser : {PsdsParams{0.4, 0.8, 0.3, 0.0, 1.0, 100.0}, PsdsParams{0.8, 0.4, 0.3, 0.0, 1.0, 100.0}}) {
      const auto r = match_operating_point(d, gt, looser, 60.0);
      for (std::size_t c = 0; c < r.rates.size(); ++c) CHECK(r.rates[c].tp >= base.rates[c].tp);
    }

    // alpha_ct = 0: cross-trigger tolerance has no effect.
    PsdsParams a{0.7, 0.7, 0.0, 0.0, 1.0, 100.0}, b = a;
    b.rho_cttc = 1.0;
    CHECK(evaluate_psds(sets, gt, 60.0, a).value == evaluate_psds(sets, gt, 60.0, b).value);
  }
}

TEST_CASE("single-class eTPR is non-decreasing", "[psds][property]") {
  std::mt19937_64 rng(3);
  auto gt = random_gt(rng, 5, 10.0);
  for (auto& e : gt) e.class_name = "only";
  std::vector<DetectionSet> sets;
  for (int t = 0; t < 6; ++t) sets.push_back(jitter(gt, rng, 0.1 * t, 0.1 * (t + 1)));
  const auto r = evaluate_psds(sets, gt, 50.0, psds1_params());
  for (std::size_t g = 1; g < r.curve.etpr.size(); ++g) CHECK(r.curve.etpr[g] >= r.curve.etpr[g - 1]);
}

TEST_CASE("timing jitter hurts PSDS1 more than PSDS2", "[psds][property]") {
  std::mt19937_64 rng(50);
  std::vector<EventAnnotation> gt;
  const char* names[] = {"a", "b", "c"};
  for (int k = 0; k < 50; ++k)
    for (int e = 0; e < 2; ++e)
      gt.push_back({"clip" + std::to_string(k), 1.0 + 4.0 * e, 3.0 + 4.0 * e, names[(k + e) % 3]});
  const auto jittered = jitter(gt, rng, 0.5);
  const double p1 = evaluate_psds({{0.5, gt}}, gt, 500.0, psds1_params()).value;
  const double p2 = evaluate_psds({{0.5, gt}}, gt, 500.0, psds2_params()).value;
  const double j1 = evaluate_psds({jittered}, gt, 500.0, psds1_params()).value;
  const double j2 = evaluate_psds({jittered}, gt, 500.0, psds2_params()).value;
  CHECK((p1 - j1) / p1 > (p2 - j2) / p2);
}

TEST_CASE("report rows", "[psds][io]") {
  const auto r = evaluate_psds({micro_detections()}, micro_gt(), 20.0, psds1_params());
  const auto rows = text::split(format_report_rows("psds1", r), '\n');
  CHECK(rows.front() == "psds1,rates,0.5,blender,0,1,0,0,0,");
  CHECK(rows[rows.size() - 2].rfind("psds1,psds,", 0) == 0);
  for (const auto& row : rows)
    if (!row.empty()) CHECK(text::split(row, ',').size() == text::split(kReportHeader, ',').size());
}
