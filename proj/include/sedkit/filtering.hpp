#pragma once

// Dual-classifier joint rank filtering of generated foreground samples.
//
// Within each class, samples are ranked independently by CLAP score and by
// classifier logit (rank 1 = best), the two ranks are fused as
//   s = w * rank_clap + (1 - w) * rank_cls,
// and the ceil(p% of n_c) samples with the lowest fused score are kept.
// Only orderings matter, so any strictly increasing transform of either
// score column leaves the result unchanged.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sedkit/error.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

struct ScoredSample {
  std::string sample_id;
  std::string class_name;
  double clap_score = 0.0;
  double cls_logit = 0.0;

  friend bool operator==(const ScoredSample&, const ScoredSample&) = default;
};

struct FilterConfig {
  double weight = 0.5;       // CLAP weight w; the classifier gets 1 - w
  double top_percent = 50.0; // p

  void validate() const {
    if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidArgument("filter weight must be in [0, 1]");
    if (!(top_percent > 0.0 && top_percent <= 100.0))
      throw InvalidArgument("top percentage must be in (0, 100]");
  }
};

struct RankedSample {
  ScoredSample sample;
  std::size_t clap_rank = 0;
  std::size_t cls_rank = 0;
  double fused_score = 0.0;

  friend bool operator==(const RankedSample&, const RankedSample&) = default;
};

/// Both lists are in fused order (best first).
struct ClassSelection {
  std::vector<RankedSample> kept;
  std::vector<RankedSample> discarded;

  friend bool operator==(const ClassSelection&, const ClassSelection&) = default;
};

struct FilterResult {
  std::map<std::string, ClassSelection> classes;

  std::size_t kept_count() const {
    std::size_t n = 0;
    for (const auto& [_, sel] : classes) n += sel.kept.size();
    return n;
  }

  friend bool operator==(const FilterResult&, const FilterResult&) = default;
};

/// Number of samples kept out of n at top_percent: ceil(p / 100 * n).
inline std::size_t keep_quota(std::size_t n, double top_percent) {
  const double raw = top_percent * static_cast<double>(n) / 100.0;
  return std::min(n, static_cast<std::size_t>(std::ceil(raw)));
}

/// Ranks 1..n by value descending, ties broken by id ascending.
inline std::unordered_map<std::string, std::size_t> rank_descending(
    std::vector<std::pair<std::string, double>> values) {
  if (values.empty()) throw InvalidArgument("cannot rank an empty list");
  std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::unordered_map<std::string, std::size_t> ranks;
  ranks.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) ranks.emplace(values[i].first, i + 1);
  return ranks;
}

inline ClassSelection select_within_class(const std::vector<ScoredSample>& samples,
                                          const FilterConfig& config) {
  std::vector<std::pair<std::string, double>> clap, cls;
  clap.reserve(samples.size());
  cls.reserve(samples.size());
  for (const auto& s : samples) {
    clap.emplace_back(s.sample_id, s.clap_score);
    cls.emplace_back(s.sample_id, s.cls_logit);
  }
  const auto clap_rank = rank_descending(std::move(clap));
  const auto cls_rank = rank_descending(std::move(cls));

  std::vector<RankedSample> ranked;
  ranked.reserve(samples.size());
  for (const auto& s : samples) {
    RankedSample r{s, clap_rank.at(s.sample_id), cls_rank.at(s.sample_id), 0.0};
    r.fused_score = config.weight * static_cast<double>(r.clap_rank) +
                    (1.0 - config.weight) * static_cast<double>(r.cls_rank);
    ranked.push_back(std::move(r));
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedSample& a, const RankedSample& b) {
    if (a.fused_score != b.fused_score) return a.fused_score < b.fused_score;
    if (a.clap_rank != b.clap_rank) return a.clap_rank < b.clap_rank;
    return a.sample.sample_id < b.sample.sample_id;
  });

  const std::size_t quota = keep_quota(ranked.size(), config.top_percent);
  ClassSelection out;
  out.kept.assign(std::make_move_iterator(ranked.begin()),
                  std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(quota)));
  out.discarded.assign(std::make_move_iterator(ranked.begin() + static_cast<std::ptrdiff_t>(quota)),
                       std::make_move_iterator(ranked.end()));
  return out;
}

/// Per-class rank fusion and top-p selection. Deterministic in the input
/// order; classes are processed independently.
inline FilterResult fuse_and_select(const std::vector<ScoredSample>& samples,
                                    const FilterConfig& config) {
  config.validate();
  if (samples.empty()) throw InvalidArgument("no samples to filter");
  std::map<std::string, std::vector<ScoredSample>> by_class;
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.sample_id).second)
      throw InvalidArgument("duplicate sample id '" + s.sample_id + "'");
    by_class[s.class_name].push_back(s);
  }
  FilterResult result;
  for (const auto& [name, members] : by_class)
    result.classes.emplace(name, select_within_class(members, config));
  return result;
}

/// Parses a `sample_id,class,clap_score,cls_logit` table (columns located by
/// header name). Row numbers in errors are 1-based data rows.
inline std::vector<ScoredSample> parse_score_table(const std::vector<std::string>& lines) {
  std::size_t first = 0;
  while (first < lines.size() && text::trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw ParseError(0, "empty score table");

  const auto header = text::split(lines[first], ',');
  const auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::trim(header[i]) == name) return i;
    throw ParseError(0, "missing column '" + std::string(name) + "'");
  };
  const std::size_t id_col = column("sample_id");
  const std::size_t class_col = column("class");
  const std::size_t clap_col = column("clap_score");
  const std::size_t logit_col = column("cls_logit");
  const std::size_t width = std::max({id_col, class_col, clap_col, logit_col}) + 1;

  std::vector<ScoredSample> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t row = 0;
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    if (text::trim(lines[li]).empty()) continue;
    ++row;
    const auto fields = text::split(lines[li], ',');
    if (fields.size() < width)
      throw ParseError(row, "expected " + std::to_string(header.size()) + " columns, got " +
                                std::to_string(fields.size()));
    ScoredSample s;
    s.sample_id = std::string(text::trim(fields[id_col]));
    s.class_name = std::string(text::trim(fields[class_col]));
    if (s.sample_id.empty()) throw ParseError(row, "empty sample_id");
    if (s.class_name.empty()) throw ParseError(row, "empty class");
    const auto clap = text::parse_double(fields[clap_col]);
    if (!clap || !std::isfinite(*clap))
      throw ParseError(row, "column clap_score: not a number: '" + fields[clap_col] + "'");
    const auto logit = text::parse_double(fields[logit_col]);
    if (!logit || !std::isfinite(*logit))
      throw ParseError(row, "column cls_logit: not a number: '" + fields[logit_col] + "'");
    s.clap_score = *clap;
    s.cls_logit = *logit;
    if (auto [it, fresh] = seen.emplace(s.sample_id, row); !fresh)
      throw ParseError(row, "duplicate sample_id '" + s.sample_id + "' (first seen on row " +
                                std::to_string(it->second) + ")");
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ScoredSample> load_score_table(const std::filesystem::path& path) {
  return parse_score_table(text::read_lines(path.string()));
}

inline std::string format_selection_csv(const std::vector<const RankedSample*>& rows) {
  std::string out = "sample_id,class,clap_score,cls_logit,clap_rank,cls_rank,fused_score\n";
  for (const RankedSample* r : rows) {
    out += r->sample.sample_id + ',' + r->sample.class_name + ',' +
           text::format_double(r->sample.clap_score) + ',' +
           text::format_double(r->sample.cls_logit) + ',' + std::to_string(r->clap_rank) + ',' +
           std::to_string(r->cls_rank) + ',' + text::format_double(r->fused_score) + '\n';
  }
  return out;
}

/// Writes `kept.csv` and `discarded.csv` into out_dir, classes in name order.
inline void write_filter_result(const FilterResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<const RankedSample*> kept, discarded;
  for (const auto& [_, sel] : result.classes) {
    for (const auto& r : sel.kept) kept.push_back(&r);
    for (const auto& r : sel.discarded) discarded.push_back(&r);
  }
  text::write_file((out_dir / "kept.csv").string(), format_selection_csv(kept));
  text::write_file((out_dir / "discarded.csv").string(), format_selection_csv(discarded));
}

}  // namespace sedkit
