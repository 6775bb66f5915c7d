#pragma once

// Shared test fixtures: scratch directories and a small synthetic
// soundbank of tone bursts and noise beds.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sedkit/audio_io.hpp"

namespace sedkit::testing {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::mt19937_64 salt(static_cast<std::uint64_t>(
        std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = fs::temp_directory_path() / ("sedkit_" + tag + "_" + std::to_string(salt()));
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline AudioClip sine(double freq, double amplitude, double seconds, int rate) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return AudioClip(std::move(s), rate);
}

/// Silence, a faded tone burst, silence.
inline AudioClip tone_burst(double freq, double lead, double burst, double tail, int rate,
                            double amplitude = 0.5) {
  const auto n_lead = static_cast<std::size_t>(std::llround(lead * rate));
  const auto n_burst = static_cast<std::size_t>(std::llround(burst * rate));
  const auto n_tail = static_cast<std::size_t>(std::llround(tail * rate));
  const auto n_fade = static_cast<std::size_t>(0.005 * rate);
  std::vector<double> s(n_lead + n_burst + n_tail, 0.0);
  for (std::size_t i = 0; i < n_burst; ++i) {
    double g = 1.0;
    if (i < n_fade) g = static_cast<double>(i) / n_fade;
    if (n_burst - i <= n_fade) g = static_cast<double>(n_burst - i) / n_fade;
    s[n_lead + i] = amplitude * g * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  }
  return AudioClip(std::move(s), rate);
}

inline AudioClip noise(double amplitude, double seconds, int rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  std::vector<double> s(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (double& x : s) x = u(rng);
  return AudioClip(std::move(s), rate);
}

struct ToneBank {
  fs::path fg_dir;
  fs::path bg_dir;
  std::vector<std::string> classes;
};

/// 3 classes x 5 tone bursts (24 kHz, as a generator would emit) and 3 noise
/// beds at 16 kHz, one shorter than a clip so it has to loop.
inline ToneBank write_tone_bank(const fs::path& root) {
  ToneBank bank{root / "fg", root / "bg", {"alarm", "beep", "hum"}};
  const double base[] = {1200.0, 2500.0, 300.0};
  for (std::size_t c = 0; c < bank.classes.size(); ++c) {
    fs::create_directories(bank.fg_dir / bank.classes[c]);
    for (int k = 0; k < 5; ++k) {
      const auto clip = tone_burst(base[c] * (1.0 + 0.05 * k), 0.2 + 0.05 * k, 0.6 + 0.3 * k,
                                   0.3, 24000, 0.3 + 0.1 * k);
      write_wav(clip, bank.fg_dir / bank.classes[c] / (bank.classes[c] + "_" + std::to_string(k) + ".wav"),
                WavEncoding::float32);
    }
  }
  fs::create_directories(bank.bg_dir);
  write_wav(noise(0.05, 12.0, 16000, 1), bank.bg_dir / "bed_a.wav", WavEncoding::float32);
  write_wav(noise(0.08, 14.0, 16000, 2), bank.bg_dir / "bed_b.wav", WavEncoding::pcm16);
  write_wav(noise(0.03, 4.0, 16000, 3), bank.bg_dir / "bed_c.wav", WavEncoding::float32);
  return bank;
}

}  // namespace sedkit::testing
