#pragma once

// Polyphonic sound detection score.
//
// Each operating point is matched against the ground truth with three
// intersection criteria:
//   DTC  a detection is valid when the part of it covered by same-class GT
//        is at least rho_dtc of its length;
//   GTC  a GT event is a true positive when the part of it covered by valid
//        same-class detections is at least rho_gtc of its length;
//   CTTC a DTC-failing detection of class c is a cross-trigger on c' when it
//        overlaps some c' GT event by at least rho_cttc of its own length.
// Per class this yields tpr_c and an effective FP rate (events per hour)
//   efpr_c = fp_c / T + alpha_ct * mean_{c' != c} ct_{c,c'} / T_gt(c').
// Per-class (efpr, tpr) points form upper staircase curves; the effective
// TPR is mean_c - alpha_st * std_c (population std), floored at zero, and
// PSDS is its area on [0, e_max] divided by e_max.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sedkit/error.hpp"
#include "sedkit/labels.hpp"
#include "sedkit/postprocess.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

struct PsdsParams {
  double rho_dtc = 0.5;
  double rho_gtc = 0.5;
  double rho_cttc = 0.3;
  double alpha_ct = 0.0;
  double alpha_st = 0.0;
  double e_max = 100.0;  // events per hour

  void validate() const {
    const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(rho_dtc) || !unit(rho_gtc) || !unit(rho_cttc))
      throw InvalidArgument("PSDS tolerance criteria must be in [0, 1]");
    if (!(alpha_ct >= 0.0) || !(alpha_st >= 0.0))
      throw InvalidArgument("PSDS alpha weights must be non-negative");
    if (!(e_max > 0.0)) throw InvalidArgument("e_max must be positive");
  }

  friend bool operator==(const PsdsParams&, const PsdsParams&) = default;
};

/// Localization-focused scenario (DCASE baseline scenario 1).
inline PsdsParams psds1_params() { return {0.7, 0.7, 0.3, 0.0, 1.0, 100.0}; }
/// Classification-focused scenario (DCASE baseline scenario 2).
inline PsdsParams psds2_params() { return {0.1, 0.1, 0.3, 0.5, 1.0, 100.0}; }

struct ClassRates {
  std::size_t tp = 0;
  std::size_t gt = 0;
  std::size_t fp = 0;
  double tpr = 0.0;
  double efpr = 0.0;  // events per hour
};

struct PerClassRates {
  double threshold = 0.0;
  std::vector<std::string> classes;
  std::vector<ClassRates> rates;                      // indexed like classes
  std::vector<std::vector<std::size_t>> ct_counts;    // [detected class][triggered class]
  std::vector<std::vector<double>> ct_rates;          // ct / T_gt(c'), per hour
  std::vector<std::string> warnings;
};

namespace detail {

struct Interval {
  double onset;
  double offset;
};

/// Length of [a, b) covered by the union of `intervals`.
inline double covered_length(double a, double b, std::vector<Interval> intervals) {
  std::vector<Interval> clipped;
  for (const auto& iv : intervals) {
    const double lo = std::max(a, iv.onset), hi = std::min(b, iv.offset);
    if (hi > lo) clipped.push_back({lo, hi});
  }
  std::sort(clipped.begin(), clipped.end(),
            [](const Interval& x, const Interval& y) { return x.onset < y.onset; });
  double total = 0.0, cur_lo = 0.0, cur_hi = 0.0;
  bool open = false;
  for (const auto& iv : clipped) {
    if (open && iv.onset <= cur_hi) {
      cur_hi = std::max(cur_hi, iv.offset);
      continue;
    }
    if (open) total += cur_hi - cur_lo;
    cur_lo = iv.onset;
    cur_hi = iv.offset;
    open = true;
  }
  if (open) total += cur_hi - cur_lo;
  return total;
}

using ClipClass = std::pair<std::string, std::size_t>;

}  // namespace detail

/// Sorted set of classes present in the ground truth.
inline std::vector<std::string> ground_truth_classes(const std::vector<EventAnnotation>& gt) {
  std::set<std::string> names;
  for (const auto& e : gt) names.insert(e.class_name);
  return {names.begin(), names.end()};
}

/// Counts for one operating point. `classes` fixes the class universe;
/// when empty the ground-truth classes are used. Detections of classes
/// outside the universe are dropped with a warning.
inline PerClassRates match_operating_point(const DetectionSet& detections,
                                           const std::vector<EventAnnotation>& ground_truth,
                                           const PsdsParams& params, double total_duration,
                                           std::vector<std::string> classes = {}) {
  params.validate();
  if (!(total_duration > 0.0)) throw InvalidArgument("total duration must be positive");
  if (classes.empty()) classes = ground_truth_classes(ground_truth);
  if (classes.empty()) throw InvalidArgument("ground truth covers no class");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], i);
  const std::size_t n_classes = classes.size();

  PerClassRates out;
  out.threshold = detections.threshold;
  out.classes = classes;
  out.rates.assign(n_classes, {});
  out.ct_counts.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  out.ct_rates.assign(n_classes, std::vector<double>(n_classes, 0.0));

  std::map<detail::ClipClass, std::vector<detail::Interval>> gt_by_key;
  std::vector<double> gt_duration(n_classes, 0.0);
  for (const auto& g : ground_truth) {
    if (!(g.onset < g.offset))
      throw InvalidArgument("ground truth event with onset >= offset in " + g.clip_id);
    const auto it = index.find(g.class_name);
    if (it == index.end()) continue;
    gt_by_key[{g.clip_id, it->second}].push_back({g.onset, g.offset});
    gt_duration[it->second] += g.duration();
    ++out.rates[it->second].gt;
  }

  std::map<detail::ClipClass, std::vector<detail::Interval>> valid_by_key;
  std::set<std::string> unknown;
  for (const auto& d : detections.events) {
    if (!(d.onset < d.offset))
      throw InvalidArgument("detection with onset >= offset in " + d.clip_id);
    const auto it = index.find(d.class_name);
    if (it == index.end()) {
      unknown.insert(d.class_name);
      continue;
    }
    const std::size_t c = it->second;
    const double len = d.duration();
    const auto gt_it = gt_by_key.find({d.clip_id, c});
    const double covered =
        gt_it == gt_by_key.end() ? 0.0 : detail::covered_length(d.onset, d.offset, gt_it->second);
    if (covered / len >= params.rho_dtc) {
      valid_by_key[{d.clip_id, c}].push_back({d.onset, d.offset});
      continue;
    }
    ++out.rates[c].fp;
    for (std::size_t other = 0; other < n_classes; ++other) {
      if (other == c) continue;
      const auto o = gt_by_key.find({d.clip_id, other});
      if (o == gt_by_key.end()) continue;
      for (const auto& g : o->second) {
        const double overlap = std::min(d.offset, g.offset) - std::max(d.onset, g.onset);
        if (overlap > 0.0 && overlap / len >= params.rho_cttc) {
          ++out.ct_counts[c][other];
          break;
        }
      }
    }
  }
  for (const auto& name : unknown)
    out.warnings.push_back("detections of class '" + name + "' ignored: not in the class list");

  for (const auto& [key, gts] : gt_by_key) {
    const auto v = valid_by_key.find(key);
    if (v == valid_by_key.end()) continue;
    for (const auto& g : gts) {
      const double covered = detail::covered_length(g.onset, g.offset, v->second);
      if (covered / (g.offset - g.onset) >= params.rho_gtc) ++out.rates[key.second].tp;
    }
  }

  const double hours = total_duration / 3600.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& r = out.rates[c];
    if (r.gt == 0) {
      r.tpr = 0.0;
      out.warnings.push_back("class '" + classes[c] + "' has no ground truth; TPR set to 0");
    } else {
      r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.gt);
    }
    double ct_sum = 0.0;
    for (std::size_t other = 0; other < n_classes; ++other) {
      if (other == c || gt_duration[other] <= 0.0) continue;
      out.ct_rates[c][other] = out.ct_counts[c][other] * 3600.0 / gt_duration[other];
      ct_sum += out.ct_rates[c][other];
    }
    const double ct_mean = n_classes > 1 ? ct_sum / static_cast<double>(n_classes - 1) : 0.0;
    r.efpr = static_cast<double>(r.fp) / hours + params.alpha_ct * ct_mean;
  }
  return out;
}

struct PsdRocCurve {
  std::vector<std::string> classes;
  std::vector<double> efpr;               // sorted breakpoints, starting at 0, including e_max
  std::vector<std::vector<double>> tpr;   // [class][breakpoint], right-continuous staircase
  std::vector<double> etpr;               // [breakpoint]
};

inline PsdRocCurve build_psd_roc(const std::vector<PerClassRates>& operating_points,
                                 const PsdsParams& params) {
  params.validate();
  if (operating_points.empty()) throw InvalidArgument("need at least one operating point");
  PsdRocCurve curve;
  curve.classes = operating_points.front().classes;
  for (const auto& op : operating_points)
    if (op.classes != curve.classes) throw InvalidArgument("operating points disagree on classes");
  const std::size_t n_classes = curve.classes.size();

  std::set<double> grid{0.0, params.e_max};
  for (const auto& op : operating_points)
    for (const auto& r : op.rates) grid.insert(r.efpr);
  curve.efpr.assign(grid.begin(), grid.end());

  curve.tpr.assign(n_classes, std::vector<double>(curve.efpr.size(), 0.0));
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    for (const auto& op : operating_points) points.emplace_back(op.rates[c].efpr, op.rates[c].tpr);
    std::sort(points.begin(), points.end());
    std::size_t p = 0;
    double best = 0.0;
    for (std::size_t g = 0; g < curve.efpr.size(); ++g) {
      while (p < points.size() && points[p].first <= curve.efpr[g]) best = std::max(best, points[p++].second);
      curve.tpr[c][g] = best;
    }
  }

  curve.etpr.assign(curve.efpr.size(), 0.0);
  for (std::size_t g = 0; g < curve.efpr.size(); ++g) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) mean += curve.tpr[c][g];
    mean /= static_cast<double>(n_classes);
    double var = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) var += (curve.tpr[c][g] - mean) * (curve.tpr[c][g] - mean);
    var /= static_cast<double>(n_classes);
    curve.etpr[g] = std::max(0.0, mean - params.alpha_st * std::sqrt(var));
  }
  return curve;
}

/// Exact integral of the eTPR staircase over [0, e_max], divided by e_max.
inline double compute_psds(const PsdRocCurve& curve, const PsdsParams& params) {
  params.validate();
  double area = 0.0;
  for (std::size_t g = 0; g + 1 < curve.efpr.size(); ++g) {
    if (curve.efpr[g] >= params.e_max) break;
    const double right = std::min(curve.efpr[g + 1], params.e_max);
    area += curve.etpr[g] * (right - curve.efpr[g]);
  }
  return std::clamp(area / params.e_max, 0.0, 1.0);
}

struct PsdsResult {
  std::vector<PerClassRates> operating_points;
  PsdRocCurve curve;
  double value = 0.0;
};

inline double total_duration(const DurationTable& durations) {
  double t = 0.0;
  for (const auto& [_, d] : durations) t += d;
  return t;
}

/// Full evaluation over a sweep. With no detection sets the score is 0.
inline PsdsResult evaluate_psds(const std::vector<DetectionSet>& detection_sets,
                                const std::vector<EventAnnotation>& ground_truth,
                                double total_seconds, const PsdsParams& params,
                                const std::vector<std::string>& classes = {}) {
  PsdsResult result;
  std::vector<DetectionSet> sets = detection_sets;
  if (sets.empty()) sets.push_back({});
  for (const auto& s : sets)
    result.operating_points.push_back(
        match_operating_point(s, ground_truth, params, total_seconds, classes));
  result.curve = build_psd_roc(result.operating_points, params);
  result.value = compute_psds(result.curve, params);
  return result;
}

inline constexpr std::string_view kReportHeader = "metric,kind,threshold,class,tp,gt,fp,tpr,efpr,value";

/// Report rows for one metric: per-class rates for every operating point,
/// the aggregate PSD-ROC breakpoints (eTPR in the tpr column) and the score.
inline std::string format_report_rows(const std::string& metric, const PsdsResult& r) {
  std::string out;
  for (const auto& op : r.operating_points) {
    for (std::size_t c = 0; c < op.classes.size(); ++c) {
      const auto& x = op.rates[c];
      out += metric + ",rates," + text::format_double(op.threshold) + ',' + op.classes[c] + ',' +
             std::to_string(x.tp) + ',' + std::to_string(x.gt) + ',' + std::to_string(x.fp) + ',' +
             text::format_double(x.tpr) + ',' + text::format_double(x.efpr) + ",\n";
    }
  }
  for (std::size_t g = 0; g < r.curve.efpr.size(); ++g)
    out += metric + ",roc,,,,,," + text::format_double(r.curve.etpr[g]) + ',' +
           text::format_double(r.curve.efpr[g]) + ",\n";
  out += metric + ",psds,,,,,,,," + text::format_double(r.value) + "\n";
  return out;
}

}  // namespace sedkit
