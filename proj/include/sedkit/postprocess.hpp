#pragma once

// Frame posteriors -> event lists: threshold, median-filter the binary
// activity per class, and decode runs of active frames into events.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sedkit/error.hpp"
#include "sedkit/labels.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

/// Row-major frames x classes posteriors for one clip.
struct PosteriorMatrix {
  std::string clip_id;
  std::size_t frames = 0;
  std::vector<std::string> class_names;
  std::vector<double> values;
  double hop_seconds = 0.0;

  std::size_t classes() const { return class_names.size(); }
  double at(std::size_t f, std::size_t c) const { return values[f * classes() + c]; }

  void validate() const {
    if (frames == 0 || class_names.empty()) throw InvalidArgument("posterior matrix is empty");
    if (values.size() != frames * class_names.size())
      throw InvalidArgument("posterior matrix shape mismatch");
    if (!(hop_seconds > 0.0)) throw InvalidArgument("hop_seconds must be positive");
    for (const double v : values)
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("posterior outside [0, 1] in " + clip_id);
  }
};

/// Row-major frames x classes 0/1 activity.
struct ActivityMatrix {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(std::size_t f, std::size_t c) const { return values[f * classes + c]; }
  std::uint8_t& at(std::size_t f, std::size_t c) { return values[f * classes + c]; }

  friend bool operator==(const ActivityMatrix&, const ActivityMatrix&) = default;
};

struct DetectionSet {
  double threshold = 0.5;
  std::vector<EventAnnotation> events;
};

inline constexpr std::size_t kMedianWindow = 7;

inline ActivityMatrix binarize(const PosteriorMatrix& posteriors, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must be in (0, 1)");
  ActivityMatrix out{posteriors.frames, posteriors.classes(),
                     std::vector<std::uint8_t>(posteriors.values.size())};
  for (std::size_t i = 0; i < posteriors.values.size(); ++i)
    out.values[i] = posteriors.values[i] >= threshold ? 1 : 0;
  return out;
}

/// Index into a signal of length n extended by mirroring with the boundary
/// sample repeated (... c b a | a b c ... x y z | z y x ...).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

/// Centered running median over an odd window.
template <typename T>
std::vector<T> median_filter(std::span<const T> column, std::size_t window = kMedianWindow) {
  if (window == 0 || window % 2 == 0) throw InvalidArgument("median window must be odd");
  const std::size_t n = column.size();
  std::vector<T> out(n);
  if (n == 0) return out;
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<T> buf(window);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t k = -half; k <= half; ++k)
      buf[static_cast<std::size_t>(k + half)] =
          column[reflect_index(static_cast<std::ptrdiff_t>(i) + k, n)];
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[i] = buf[static_cast<std::size_t>(half)];
  }
  return out;
}

template <typename T>
std::vector<T> median_filter(const std::vector<T>& column, std::size_t window = kMedianWindow) {
  return median_filter(std::span<const T>(column), window);
}

/// Filters every class column independently.
inline ActivityMatrix median_filter(const ActivityMatrix& activity, std::size_t window = kMedianWindow) {
  ActivityMatrix out = activity;
  std::vector<std::uint8_t> column(activity.frames);
  for (std::size_t c = 0; c < activity.classes; ++c) {
    for (std::size_t f = 0; f < activity.frames; ++f) column[f] = activity.at(f, c);
    const auto filtered = median_filter(std::span<const std::uint8_t>(column), window);
    for (std::size_t f = 0; f < activity.frames; ++f) out.at(f, c) = filtered[f];
  }
  return out;
}

/// Each maximal run of active frames [i..j] becomes (i*hop, (j+1)*hop).
/// Events are ordered by class, then onset.
inline std::vector<EventAnnotation> decode_events(const ActivityMatrix& activity, double hop_seconds,
                                                  const std::string& clip_id,
                                                  const std::vector<std::string>& class_names) {
  if (class_names.size() != activity.classes) throw InvalidArgument("class name count mismatch");
  std::vector<EventAnnotation> out;
  for (std::size_t c = 0; c < activity.classes; ++c) {
    std::size_t f = 0;
    while (f < activity.frames) {
      if (!activity.at(f, c)) {
        ++f;
        continue;
      }
      const std::size_t start = f;
      while (f < activity.frames && activity.at(f, c)) ++f;
      out.push_back({clip_id, static_cast<double>(start) * hop_seconds,
                     static_cast<double>(f) * hop_seconds, class_names[c]});
    }
  }
  return out;
}

/// 0.01, 0.03, ..., 0.99.
inline std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int k = 0; k < 50; ++k) out.push_back((2 * k + 1) / 100.0);
  return out;
}

inline void validate_thresholds(const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw InvalidArgument("no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0))
      throw InvalidArgument("thresholds must lie strictly inside (0, 1)");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw InvalidArgument("thresholds must be strictly increasing");
  }
}

inline std::vector<EventAnnotation> detect(const PosteriorMatrix& posteriors, double threshold,
                                           std::size_t window = kMedianWindow) {
  return decode_events(median_filter(binarize(posteriors, threshold), window), posteriors.hop_seconds,
                       posteriors.clip_id, posteriors.class_names);
}

/// binarize -> median filter -> decode, for every threshold over all clips.
inline std::vector<DetectionSet> sweep_operating_points(const std::vector<PosteriorMatrix>& posteriors,
                                                        const std::vector<double>& thresholds,
                                                        std::size_t window = kMedianWindow) {
  validate_thresholds(thresholds);
  for (const auto& p : posteriors) p.validate();
  std::vector<DetectionSet> out;
  out.reserve(thresholds.size());
  for (const double t : thresholds) {
    DetectionSet set{t, {}};
    for (const auto& p : posteriors) {
      auto events = detect(p, t, window);
      set.events.insert(set.events.end(), events.begin(), events.end());
    }
    out.push_back(std::move(set));
  }
  return out;
}

/// Posterior CSV: `hop_seconds=<v>`, a row of class names, then one row of
/// comma-separated posteriors per frame.
inline PosteriorMatrix parse_posterior_csv(const std::vector<std::string>& lines,
                                           const std::string& clip_id) {
  std::vector<std::string> rows;
  for (const auto& l : lines)
    if (!text::trim(l).empty()) rows.push_back(l);
  if (rows.size() < 3) throw ParseError(0, clip_id + ": need hop, class-name and frame rows");
  const auto head = text::trim(rows[0]);
  if (head.rfind("hop_seconds=", 0) != 0) throw ParseError(0, clip_id + ": expected hop_seconds=<v>");
  const auto hop = text::parse_double(head.substr(12));
  if (!hop || !(*hop > 0.0)) throw ParseError(0, clip_id + ": bad hop_seconds");

  PosteriorMatrix m;
  m.clip_id = clip_id;
  m.hop_seconds = *hop;
  for (const auto& name : text::split(rows[1], ',')) m.class_names.emplace_back(text::trim(name));
  for (std::size_t r = 2; r < rows.size(); ++r) {
    const auto fields = text::split(rows[r], ',');
    if (fields.size() != m.class_names.size())
      throw ParseError(r - 1, clip_id + ": expected " + std::to_string(m.class_names.size()) +
                                   " values");
    for (const auto& f : fields) {
      const auto v = text::parse_double(f);
      if (!v || !(*v >= 0.0 && *v <= 1.0))
        throw ParseError(r - 1, clip_id + ": posterior must be a number in [0, 1]");
      m.values.push_back(*v);
    }
  }
  m.frames = rows.size() - 2;
  return m;
}

inline std::string format_posterior_csv(const PosteriorMatrix& m) {
  std::string out = "hop_seconds=" + text::format_double(m.hop_seconds) + "\n";
  for (std::size_t c = 0; c < m.classes(); ++c) out += (c ? "," : "") + m.class_names[c];
  out += '\n';
  for (std::size_t f = 0; f < m.frames; ++f) {
    for (std::size_t c = 0; c < m.classes(); ++c)
      out += (c ? "," : "") + text::format_double(m.at(f, c));
    out += '\n';
  }
  return out;
}

/// Every `*.csv` in dir, clip id = file stem, in name order.
inline std::vector<PosteriorMatrix> load_posterior_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<PosteriorMatrix> out;
  for (const auto& f : files)
    out.push_back(parse_posterior_csv(text::read_lines(f.string()), f.stem().string()));
  return out;
}

inline std::string detection_filename(double threshold) {
  return "detections_t" + text::format_double(threshold) + ".tsv";
}

inline void write_detection_sets(const std::vector<DetectionSet>& sets,
                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& s : sets) write_label_tsv(s.events, out_dir / detection_filename(s.threshold));
}

/// Reads every `detections_t<threshold>.tsv` in dir, ordered by threshold.
inline std::vector<DetectionSet> load_detection_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<DetectionSet> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || name.rfind("detections_t", 0) != 0 || e.path().extension() != ".tsv")
      continue;
    const auto t = text::parse_double(std::string_view(name).substr(12, name.size() - 16));
    if (!t) throw ParseError(0, "cannot read threshold from file name " + name);
    out.push_back({*t, read_label_tsv(e.path())});
  }
  std::sort(out.begin(), out.end(),
            [](const DetectionSet& a, const DetectionSet& b) { return a.threshold < b.threshold; });
  return out;
}

}  // namespace sedkit
