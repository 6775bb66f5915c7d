#pragma once

// Mono audio clips: RIFF/WAVE reading and writing, windowed-sinc resampling,
// and the level arithmetic (RMS, peak normalization) the mixer relies on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sedkit/error.hpp"

namespace sedkit {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  AudioClip() = default;
  AudioClip(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {
    if (rate <= 0) throw InvalidArgument("sample rate must be positive");
  }

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;
};

enum class WavErrc { missing_file, unsupported_codec, corrupt_header };

class WavError : public Error {
 public:
  WavError(WavErrc code, const std::string& what) : Error(what), code_(code) {}
  WavErrc code() const noexcept { return code_; }

 private:
  WavErrc code_;
};

enum class WavEncoding { pcm16, float32 };

struct WavWriteReport {
  /// Samples outside [-1, 1] that were saturated (pcm16 only).
  std::size_t clipped_samples = 0;
};

namespace detail {

inline std::uint16_t load_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Reads a PCM16, PCM24 or float32 RIFF/WAVE file. Multi-channel audio is
/// downmixed by the arithmetic mean of the channels.
inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrc::missing_file, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto corrupt = [&](const std::string& why) {
    return WavError(WavErrc::corrupt_header, path.string() + ": " + why);
  };
  if (bytes.size() < 12) throw corrupt("truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw corrupt("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* id = bytes.data() + pos;
    const std::size_t size = detail::load_u32(id + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw corrupt("truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = detail::load_u16(f);
      channels = detail::load_u16(f + 2);
      rate = detail::load_u32(f + 4);
      block_align = detail::load_u16(f + 12);
      bits = detail::load_u16(f + 14);
      if (format == detail::kFormatExtensible) {
        if (size < 40) throw corrupt("truncated extensible fmt chunk");
        format = detail::load_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw corrupt("data chunk precedes fmt chunk");
      if (body + size > bytes.size()) throw corrupt("truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw corrupt("missing fmt chunk");
  if (data == nullptr) throw corrupt("missing data chunk");
  if (channels == 0 || rate == 0) throw corrupt("zero channels or sample rate");

  const bool pcm = format == detail::kFormatPcm && (bits == 16 || bits == 24);
  const bool flt = format == detail::kFormatFloat && bits == 32;
  if (!pcm && !flt) {
    throw WavError(WavErrc::unsupported_codec,
                   path.string() + ": unsupported encoding (format " + std::to_string(format) +
                       ", " + std::to_string(bits) + " bits)");
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels) throw corrupt("inconsistent block alignment");
  if (data_size % block_align != 0) throw corrupt("data chunk is not a whole number of frames");

  const std::size_t frames = data_size / block_align;
  std::vector<double> samples(frames, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data + i * block_align + ch * bytes_per_sample;
      double v = 0.0;
      if (flt) {
        float f;
        const std::uint32_t u = detail::load_u32(p);
        std::memcpy(&f, &u, sizeof f);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::load_u16(p)) / 32768.0;
      } else {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      }
      acc += v;
    }
    samples[i] = channels == 1 ? acc : acc / channels;
  }
  return AudioClip(std::move(samples), static_cast<int>(rate));
}

/// Serializes a clip as a mono RIFF/WAVE byte string.
inline std::string encode_wav(const AudioClip& clip, WavEncoding encoding,
                              WavWriteReport* report = nullptr) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.size() * block);
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, encoding == WavEncoding::pcm16 ? detail::kFormatPcm : detail::kFormatFloat);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_size);

  std::size_t clipped = 0;
  for (const double x : clip.samples) {
    if (encoding == WavEncoding::float32) {
      const float f = static_cast<float>(x);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      detail::put_u32(out, u);
    } else {
      if (x > 1.0 || x < -1.0) ++clipped;
      const double q = std::round(x * 32768.0);
      const auto s = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
      detail::put_u16(out, static_cast<std::uint16_t>(s));
    }
  }
  if (report) report->clipped_samples = clipped;
  return out;
}

/// Writes a mono WAV file. pcm16 saturates out-of-range samples and counts
/// them in the returned report instead of failing.
inline WavWriteReport write_wav(const AudioClip& clip, const std::filesystem::path& path,
                                WavEncoding encoding) {
  WavWriteReport report;
  const std::string bytes = encode_wav(clip, encoding, &report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
  return report;
}

/// Kaiser-windowed sinc polyphase resampler.
class Resampler {
 public:
  static constexpr int kHalfWidth = 32;
  static constexpr double kCutoff = 0.95;
  static constexpr double kKaiserBeta = 8.0;

  Resampler(int source_rate, int target_rate) {
    if (source_rate <= 0 || target_rate <= 0) throw InvalidArgument("sample rates must be positive");
    const int g = std::gcd(source_rate, target_rate);
    up_ = target_rate / g;
    down_ = source_rate / g;
    source_rate_ = source_rate;
    target_rate_ = target_rate;
    cutoff_ = kCutoff * std::min(1.0, static_cast<double>(target_rate) / source_rate);
    if (up_ <= kMaxTabulatedPhases) {
      table_.resize(static_cast<std::size_t>(up_) * 2 * kHalfWidth);
      for (int phase = 0; phase < up_; ++phase)
        fill_taps(phase, std::span(table_).subspan(static_cast<std::size_t>(phase) * 2 * kHalfWidth,
                                                    2 * kHalfWidth));
    }
  }

  std::size_t output_length(std::size_t input_length) const {
    const auto num = static_cast<unsigned long long>(input_length) * target_rate_;
    return static_cast<std::size_t>((2 * num + source_rate_) / (2ULL * source_rate_));
  }

  std::vector<double> process(std::span<const double> in) const {
    std::vector<double> out(output_length(in.size()));
    std::array<double, 2 * kHalfWidth> scratch{};
    const auto n_in = static_cast<long long>(in.size());
    for (std::size_t n = 0; n < out.size(); ++n) {
      const long long scaled = static_cast<long long>(n) * down_;
      const long long base = scaled / up_;
      const int phase = static_cast<int>(scaled % up_);
      std::span<const double> taps;
      if (!table_.empty()) {
        taps = std::span(table_).subspan(static_cast<std::size_t>(phase) * 2 * kHalfWidth,
                                         2 * kHalfWidth);
      } else {
        fill_taps(phase, scratch);
        taps = scratch;
      }
      double acc = 0.0;
      for (int j = -kHalfWidth; j < kHalfWidth; ++j) {
        const long long k = base - j;
        if (k < 0 || k >= n_in) continue;
        acc += taps[static_cast<std::size_t>(j + kHalfWidth)] * in[static_cast<std::size_t>(k)];
      }
      out[n] = acc;
    }
    return out;
  }

 private:
  static constexpr int kMaxTabulatedPhases = 4096;

  // Tap j (offset -H..H-1) weights input sample base - j, at distance frac + j.
  void fill_taps(int phase, std::span<double> taps) const {
    const double frac = static_cast<double>(phase) / up_;
    const double norm = std::cyl_bessel_i(0.0, kKaiserBeta);
    double sum = 0.0;
    for (int j = -kHalfWidth; j < kHalfWidth; ++j) {
      const double t = frac + j;
      const double r = t / kHalfWidth;
      double w = 0.0;
      if (std::abs(r) < 1.0) {
        const double x = cutoff_ * t;
        const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        w = cutoff_ * sinc * std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
      }
      taps[static_cast<std::size_t>(j + kHalfWidth)] = w;
      sum += w;
    }
    // Unity DC gain in every phase.
    for (double& w : taps) w /= sum;
  }

  int up_ = 1, down_ = 1, source_rate_ = 1, target_rate_ = 1;
  double cutoff_ = kCutoff;
  std::vector<double> table_;
};

/// Output length is round(len * target / source); equal rates return the input unchanged.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("target sample rate must be positive");
  if (target_rate == clip.sample_rate) return clip;
  const Resampler r(clip.sample_rate, target_rate);
  return AudioClip(r.process(clip.samples), target_rate);
}

inline double rms(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("rms of an empty range");
  double acc = 0.0;
  for (const double x : samples) acc += x * x;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

/// RMS over the half-open sample range [start, end).
inline double rms(const AudioClip& clip, std::size_t start, std::size_t end) {
  if (start >= end) throw InvalidArgument("rms of an empty range");
  if (end > clip.size()) throw InvalidArgument("rms range exceeds clip length");
  return rms(std::span(clip.samples).subspan(start, end - start));
}

inline double peak(std::span<const double> samples) {
  double p = 0.0;
  for (const double x : samples) p = std::max(p, std::abs(x));
  return p;
}

struct NormalizedClip {
  AudioClip clip;
  double gain = 1.0;
};

/// Scales the clip down so that max |sample| <= target_peak. Clips already
/// within the limit (including silent ones) come back unchanged with gain 1.
inline NormalizedClip peak_normalize(const AudioClip& clip, double target_peak) {
  if (clip.empty()) throw InvalidArgument("peak_normalize of an empty clip");
  if (!(target_peak > 0.0 && target_peak <= 1.0))
    throw InvalidArgument("target peak must be in (0, 1]");
  const double p = peak(clip.samples);
  if (p <= target_peak) return {clip, 1.0};
  const double gain = target_peak / p;
  NormalizedClip out{clip, gain};
  for (double& x : out.clip.samples) {
    x *= gain;
    // Rounding in x * gain can overshoot by an ulp.
    x = std::clamp(x, -target_peak, target_peak);
  }
  return out;
}

}  // namespace sedkit
