#pragma once

// Frame-level RMS energy envelope used as the temporal control signal for
// foreground generation, plus active-region detection and silence trimming.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sedkit/audio_io.hpp"
#include "sedkit/error.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

struct EnvelopeParams {
  int sample_rate = 16000;
  double latent_rate = 50.0;
  std::size_t hop = 320;
  std::size_t window = 640;

  /// hop = round(sample_rate / latent_rate), window = 2 * hop.
  static EnvelopeParams from_rates(int sample_rate, double latent_rate = 50.0) {
    if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    if (!(latent_rate > 0.0)) throw InvalidArgument("latent rate must be positive");
    const auto hop = static_cast<long long>(std::llround(sample_rate / latent_rate));
    if (hop < 1) throw InvalidArgument("latent rate exceeds the sample rate");
    EnvelopeParams p;
    p.sample_rate = sample_rate;
    p.latent_rate = latent_rate;
    p.hop = static_cast<std::size_t>(hop);
    p.window = 2 * p.hop;
    return p;
  }

  void validate() const {
    if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    if (hop < 1) throw InvalidArgument("hop must be at least one sample");
    if (window < 1) throw InvalidArgument("window must be at least one sample");
  }

  friend bool operator==(const EnvelopeParams&, const EnvelopeParams&) = default;
};

struct EnergyEnvelope {
  std::vector<double> values;
  EnvelopeParams params;
};

/// Frame i is the RMS of samples [i*hop, i*hop + window), zero-padded past
/// the end of the clip; there are ceil(len / hop) frames.
inline EnergyEnvelope compute_envelope(const AudioClip& clip, const EnvelopeParams& params) {
  params.validate();
  if (clip.empty()) throw InvalidArgument("envelope of an empty clip");
  const std::size_t n = clip.size();
  const std::size_t frames = (n + params.hop - 1) / params.hop;
  EnergyEnvelope env{std::vector<double>(frames, 0.0), params};
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t begin = i * params.hop;
    const std::size_t end = std::min(n, begin + params.window);
    double acc = 0.0;
    for (std::size_t k = begin; k < end; ++k) acc += clip.samples[k] * clip.samples[k];
    env.values[i] = std::sqrt(acc / static_cast<double>(params.window));
  }
  return env;
}

inline EnergyEnvelope normalize_envelope(const EnergyEnvelope& env) {
  EnergyEnvelope out = env;
  const double mx = out.values.empty() ? 0.0 : *std::max_element(out.values.begin(), out.values.end());
  if (mx > 0.0)
    for (double& v : out.values) v /= mx;
  return out;
}

/// Half-open frame range [onset, offset).
struct FrameRegion {
  std::size_t onset = 0;
  std::size_t offset = 0;

  friend bool operator==(const FrameRegion&, const FrameRegion&) = default;
};

/// First and one-past-last frame whose value reaches threshold_rel * max.
/// Empty when the envelope is silent.
inline std::optional<FrameRegion> detect_active_region(const EnergyEnvelope& env,
                                                       double threshold_rel) {
  if (env.values.empty()) return std::nullopt;
  const double mx = *std::max_element(env.values.begin(), env.values.end());
  if (!(mx > 0.0)) return std::nullopt;
  const double level = threshold_rel * mx;
  const auto active = [level](double v) { return v >= level; };
  const auto first = std::find_if(env.values.begin(), env.values.end(), active);
  const auto last = std::find_if(env.values.rbegin(), env.values.rend(), active);
  return FrameRegion{static_cast<std::size_t>(first - env.values.begin()),
                     static_cast<std::size_t>(env.values.rend() - last)};
}

/// Cuts leading and trailing frames below the relative threshold.
inline AudioClip trim_silence(const AudioClip& clip, const EnvelopeParams& params,
                              double threshold_rel) {
  const auto region = detect_active_region(compute_envelope(clip, params), threshold_rel);
  if (!region) return clip;
  const std::size_t begin = region->onset * params.hop;
  const std::size_t end = std::min(region->offset * params.hop, clip.size());
  return AudioClip(std::vector<double>(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                       clip.samples.begin() + static_cast<std::ptrdiff_t>(end)),
                   clip.sample_rate);
}

enum class ControlFormat { csv, f32le };

namespace detail {

inline std::string envelope_header(const EnvelopeParams& p) {
  return "hop=" + std::to_string(p.hop) + ",window=" + std::to_string(p.window) +
         ",sample_rate=" + std::to_string(p.sample_rate);
}

inline EnvelopeParams parse_envelope_header(const std::vector<std::string>& fields) {
  EnvelopeParams p;
  bool hop = false, window = false, rate = false;
  for (const auto& field : fields) {
    if (text::trim(field).empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError(0, "expected key=value, got '" + field + "'");
    const auto key = text::trim(std::string_view(field).substr(0, eq));
    const auto value = std::string_view(field).substr(eq + 1);
    if (key == "hop") {
      auto v = text::parse_int<std::size_t>(value);
      if (!v) throw ParseError(0, "bad hop");
      p.hop = *v;
      hop = true;
    } else if (key == "window") {
      auto v = text::parse_int<std::size_t>(value);
      if (!v) throw ParseError(0, "bad window");
      p.window = *v;
      window = true;
    } else if (key == "sample_rate") {
      auto v = text::parse_int<int>(value);
      if (!v) throw ParseError(0, "bad sample_rate");
      p.sample_rate = *v;
      rate = true;
    }
  }
  if (!hop || !window || !rate) throw ParseError(0, "missing hop, window or sample_rate");
  p.validate();
  p.latent_rate = static_cast<double>(p.sample_rate) / static_cast<double>(p.hop);
  return p;
}

inline std::filesystem::path meta_path(const std::filesystem::path& path) {
  auto meta = path;
  meta += ".meta";
  return meta;
}

}  // namespace detail

/// csv: a `hop=..,window=..,sample_rate=..` header and one value per line.
/// f32le: raw little-endian floats next to a `<path>.meta` key=value sidecar.
inline void export_control_signal(const EnergyEnvelope& env, const std::filesystem::path& path,
                                  ControlFormat format) {
  if (format == ControlFormat::csv) {
    std::string out = detail::envelope_header(env.params) + "\n";
    for (const double v : env.values) out += text::format_double(v) + "\n";
    text::write_file(path.string(), out);
    return;
  }
  std::string raw;
  raw.reserve(env.values.size() * 4);
  for (const double v : env.values) {
    const float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    for (int i = 0; i < 4; ++i) raw.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  text::write_file(path.string(), raw);
  text::write_file(detail::meta_path(path).string(),
                   "hop=" + std::to_string(env.params.hop) + "\nwindow=" +
                       std::to_string(env.params.window) + "\nsample_rate=" +
                       std::to_string(env.params.sample_rate) + "\nframes=" +
                       std::to_string(env.values.size()) + "\n");
}

inline EnergyEnvelope import_control_signal(const std::filesystem::path& path, ControlFormat format) {
  EnergyEnvelope env;
  if (format == ControlFormat::csv) {
    const auto lines = text::read_lines(path.string());
    if (lines.empty()) throw ParseError(0, path.string() + " is empty");
    env.params = detail::parse_envelope_header(text::split(lines.front(), ','));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      const auto v = text::parse_double(lines[i]);
      if (!v) throw ParseError(i, "not a number: '" + lines[i] + "'");
      env.values.push_back(*v);
    }
    return env;
  }
  const auto meta_lines = text::read_lines(detail::meta_path(path).string());
  env.params = detail::parse_envelope_header(meta_lines);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() % 4 != 0) throw ParseError(0, path.string() + " is not a whole number of floats");
  env.values.resize(raw.size() / 4);
  for (std::size_t i = 0; i < env.values.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
    float f;
    std::memcpy(&f, &u, sizeof f);
    env.values[i] = f;
  }
  return env;
}

}  // namespace sedkit
