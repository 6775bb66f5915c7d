#pragma once

// Strongly labeled soundscape synthesis: foreground events are trimmed to
// their active region, scaled to a target RMS SNR against the background
// under them, and added sample-exactly at their onset. Labels are derived
// from the same integer sample positions used for mixing.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sedkit/audio_io.hpp"
#include "sedkit/envelope.hpp"
#include "sedkit/error.hpp"
#include "sedkit/labels.hpp"
#include "sedkit/rng.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

namespace fs = std::filesystem;

struct AudioEntry {
  fs::path root;      // catalog directory the entry was found under
  std::string name;   // path relative to root, generic separators

  fs::path path() const { return root / name; }
  friend bool operator==(const AudioEntry&, const AudioEntry&) = default;
};

struct Catalog {
  std::map<std::string, std::vector<AudioEntry>> foreground;
  std::vector<AudioEntry> background;

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : foreground) out.push_back(name);
    return out;
  }
};

namespace detail {

inline bool is_wav(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".wav";
}

inline std::vector<AudioEntry> list_wavs(const fs::path& root, const fs::path& dir) {
  std::vector<AudioEntry> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_wav(e.path()))
      out.push_back({root, fs::relative(e.path(), root).generic_string()});
  }
  std::sort(out.begin(), out.end(),
            [](const AudioEntry& a, const AudioEntry& b) { return a.name < b.name; });
  return out;
}

inline void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
}

}  // namespace detail

/// Adds one class per subdirectory of fg_dir. An existing class gains the
/// new files after its current ones.
inline void add_foreground(Catalog& catalog, const fs::path& fg_dir) {
  detail::require_dir(fg_dir);
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(fg_dir))
    if (e.is_directory()) classes.push_back(e.path());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw InvalidArgument("no class subdirectories in " + fg_dir.string());
  for (const auto& dir : classes) {
    auto files = detail::list_wavs(fg_dir, dir);
    const std::string name = dir.filename().string();
    if (files.empty()) throw InvalidArgument("foreground class '" + name + "' has no audio files");
    auto& list = catalog.foreground[name];
    list.insert(list.end(), files.begin(), files.end());
  }
}

inline void add_background(Catalog& catalog, const fs::path& bg_dir) {
  detail::require_dir(bg_dir);
  auto files = detail::list_wavs(bg_dir, bg_dir);
  if (files.empty()) throw InvalidArgument("no background audio files in " + bg_dir.string());
  catalog.background.insert(catalog.background.end(), files.begin(), files.end());
}

/// One class per subdirectory of fg_dir, a flat background directory;
/// entries sorted lexicographically.
inline Catalog load_catalog(const fs::path& fg_dir, const fs::path& bg_dir) {
  Catalog catalog;
  add_foreground(catalog, fg_dir);
  add_background(catalog, bg_dir);
  return catalog;
}

struct SynthParams {
  double duration = 10.0;
  int events_min = 1;
  int events_max = 5;
  double snr_min = 6.0;
  double snr_max = 30.0;
  double peak_limit = 0.95;
  double trim_threshold = 0.05;
  double latent_rate = 50.0;
  int sample_rate = 16000;
  std::uint64_t seed = 0;
  WavEncoding encoding = WavEncoding::float32;

  void validate() const {
    if (!(duration > 0.0)) throw InvalidArgument("duration must be positive");
    if (sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
    if (events_min < 0 || events_max < events_min)
      throw InvalidArgument("need 0 <= events_min <= events_max");
    if (!(snr_min <= snr_max)) throw InvalidArgument("need snr_min <= snr_max");
    if (!(peak_limit > 0.0 && peak_limit <= 1.0)) throw InvalidArgument("peak_limit must be in (0, 1]");
    if (!(trim_threshold > 0.0 && trim_threshold < 1.0))
      throw InvalidArgument("trim_threshold must be in (0, 1)");
    if (!(latent_rate > 0.0)) throw InvalidArgument("latent_rate must be positive");
  }

  std::size_t duration_samples() const {
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
  }
};

/// Audio of a catalog decoded, trimmed and resampled to the synthesis rate.
class SoundBank {
 public:
  struct Foreground {
    AudioEntry entry;
    AudioClip clip;  // trimmed to its active region, at the synthesis rate
  };

  static SoundBank prepare(const Catalog& catalog, const SynthParams& params) {
    params.validate();
    if (catalog.foreground.empty()) throw InvalidArgument("catalog has no foreground classes");
    if (catalog.background.empty()) throw InvalidArgument("catalog has no background files");
    SoundBank bank;
    for (const auto& [name, entries] : catalog.foreground) {
      if (entries.empty()) throw InvalidArgument("foreground class '" + name + "' is empty");
      auto& list = bank.foreground_[name];
      for (const auto& entry : entries) {
        const AudioClip raw = read_wav(entry.path());
        if (raw.empty()) throw InvalidArgument("empty foreground file " + entry.path().string());
        const auto env = EnvelopeParams::from_rates(raw.sample_rate, params.latent_rate);
        list.push_back({entry, resample(trim_silence(raw, env, params.trim_threshold),
                                        params.sample_rate)});
      }
      bank.classes_.push_back(name);
    }
    for (const auto& entry : catalog.background) {
      AudioClip clip = resample(read_wav(entry.path()), params.sample_rate);
      if (clip.empty()) throw InvalidArgument("empty background file " + entry.path().string());
      bank.background_.push_back({entry, std::move(clip)});
    }
    return bank;
  }

  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<Foreground>& foreground(const std::string& cls) const {
    return foreground_.at(cls);
  }
  const std::vector<Foreground>& background() const { return background_; }

 private:
  std::vector<std::string> classes_;
  std::map<std::string, std::vector<Foreground>> foreground_;
  std::vector<Foreground> background_;
};

struct EventRecipe {
  std::string class_name;
  std::size_t fg_index = 0;
  std::string fg_name;
  std::size_t onset_sample = 0;
  std::size_t length_samples = 0;
  double snr_db = 0.0;

  friend bool operator==(const EventRecipe&, const EventRecipe&) = default;
};

struct SoundscapeSpec {
  std::string clip_id;
  int sample_rate = 16000;
  std::size_t duration_samples = 0;
  std::size_t bg_index = 0;
  std::string bg_name;
  std::size_t bg_start = 0;
  std::vector<EventRecipe> events;

  double duration() const { return static_cast<double>(duration_samples) / sample_rate; }

  std::vector<EventAnnotation> annotations() const {
    std::vector<EventAnnotation> out;
    const double sr = sample_rate;
    for (const auto& e : events) {
      out.push_back({clip_id, static_cast<double>(e.onset_sample) / sr,
                     static_cast<double>(e.onset_sample + e.length_samples) / sr, e.class_name});
    }
    return out;
  }

  friend bool operator==(const SoundscapeSpec&, const SoundscapeSpec&) = default;
};

inline std::string clip_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05zu", index);
  return buf;
}

/// Draws the recipe for one clip from the stream (params.seed, clip_index).
/// Draw order: event count, background, background offset, then per event
/// class, file, SNR and onset.
inline SoundscapeSpec sample_spec(const SoundBank& bank, const SynthParams& params,
                                  std::size_t clip_index) {
  params.validate();
  StreamRng rng(params.seed, clip_index);
  SoundscapeSpec spec;
  spec.clip_id = clip_name(clip_index);
  spec.sample_rate = params.sample_rate;
  spec.duration_samples = params.duration_samples();
  const std::size_t total = spec.duration_samples;

  const auto n_events = rng.between(params.events_min, params.events_max);
  spec.bg_index = static_cast<std::size_t>(rng.below(bank.background().size()));
  const auto& bg = bank.background()[spec.bg_index];
  spec.bg_name = bg.entry.name;
  spec.bg_start = bg.clip.size() > total
                      ? static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(bg.clip.size() - total)))
                      : 0;

  for (std::int64_t i = 0; i < n_events; ++i) {
    EventRecipe ev;
    ev.class_name = bank.classes()[rng.below(bank.classes().size())];
    const auto& files = bank.foreground(ev.class_name);
    ev.fg_index = static_cast<std::size_t>(rng.below(files.size()));
    ev.fg_name = files[ev.fg_index].entry.name;
    ev.snr_db = rng.uniform(params.snr_min, params.snr_max);
    ev.length_samples = std::min(files[ev.fg_index].clip.size(), total);
    ev.onset_sample =
        static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(total - ev.length_samples)));
    spec.events.push_back(std::move(ev));
  }
  return spec;
}

/// (bg_rms / fg_rms) * 10^(snr_db / 20).
inline double gain_for_snr(double fg_rms, double bg_rms, double snr_db) {
  if (!(fg_rms > 0.0)) throw InvalidArgument("silent foreground: cannot set an SNR");
  if (!(bg_rms > 0.0)) throw InvalidArgument("background RMS must be positive");
  return (bg_rms / fg_rms) * std::pow(10.0, snr_db / 20.0);
}

struct RenderedSoundscape {
  AudioClip mixture;                 // after peak limiting
  AudioClip background;              // looped/truncated bed, before limiting
  std::vector<double> event_gains;   // one per event, before limiting
  double normalization_gain = 1.0;
  std::vector<EventAnnotation> annotations;
};

/// Background looped (wrap-around) from bg_start to the clip length.
inline AudioClip background_bed(const SoundscapeSpec& spec, const SoundBank& bank) {
  const auto& src = bank.background().at(spec.bg_index).clip.samples;
  std::vector<double> bed(spec.duration_samples);
  for (std::size_t t = 0; t < bed.size(); ++t) bed[t] = src[(spec.bg_start + t) % src.size()];
  return AudioClip(std::move(bed), spec.sample_rate);
}

inline RenderedSoundscape render(const SoundscapeSpec& spec, const SoundBank& bank,
                                 const SynthParams& params) {
  RenderedSoundscape out;
  out.background = background_bed(spec, bank);
  std::vector<double> mix = out.background.samples;
  const double bed_rms = mix.empty() ? 0.0 : rms(std::span<const double>(mix));

  for (const auto& ev : spec.events) {
    const auto& fg = bank.foreground(ev.class_name).at(ev.fg_index);
    if (ev.onset_sample + ev.length_samples > mix.size() || ev.length_samples == 0)
      throw InvalidArgument("event outside clip " + spec.clip_id);
    const auto event = std::span(fg.clip.samples).first(ev.length_samples);
    const double fg_rms = rms(event);
    if (!(fg_rms > 0.0)) throw InvalidArgument("silent foreground " + fg.entry.path().string());
    // SNR reference: background RMS under the event, falling back to the
    // whole bed, then to full scale when the background is silent.
    double bg_rms = rms(std::span<const double>(out.background.samples)
                            .subspan(ev.onset_sample, ev.length_samples));
    if (!(bg_rms > 0.0)) bg_rms = bed_rms > 0.0 ? bed_rms : 1.0;
    const double gain = gain_for_snr(fg_rms, bg_rms, ev.snr_db);
    for (std::size_t k = 0; k < event.size(); ++k) mix[ev.onset_sample + k] += gain * event[k];
    out.event_gains.push_back(gain);
  }

  auto limited = peak_normalize(AudioClip(std::move(mix), spec.sample_rate), params.peak_limit);
  out.mixture = std::move(limited.clip);
  out.normalization_gain = limited.gain;
  out.annotations = spec.annotations();
  return out;
}

struct ClipRecord {
  SoundscapeSpec spec;
  std::vector<double> event_gains;
  double normalization_gain = 1.0;
  std::size_t clipped_samples = 0;
};

struct Manifest {
  SynthParams params;
  std::string fg_roots;
  std::string bg_roots;
  std::vector<ClipRecord> clips;

  std::vector<EventAnnotation> annotations() const {
    std::vector<EventAnnotation> out;
    for (const auto& c : clips) {
      auto a = c.spec.annotations();
      out.insert(out.end(), a.begin(), a.end());
    }
    return out;
  }
};

namespace detail {

inline const char* encoding_name(WavEncoding e) { return e == WavEncoding::pcm16 ? "pcm16" : "float32"; }

inline std::string join_roots(const std::vector<fs::path>& roots) {
  std::string out;
  for (const auto& r : roots) {
    if (!out.empty()) out += ';';
    out += r.generic_string();
  }
  return out;
}

}  // namespace detail

/// Key-value manifest: a [params] section followed by one [clip <id>]
/// section per clip listing background and `event = class|file|onset|length|snr_db|gain`.
inline std::string format_manifest(const Manifest& m) {
  const auto& p = m.params;
  std::string out = "# soundscape manifest\n[params]\n";
  const auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("n_clips", std::to_string(m.clips.size()));
  kv("seed", std::to_string(p.seed));
  kv("duration", text::format_double(p.duration));
  kv("sample_rate", std::to_string(p.sample_rate));
  kv("events_min", std::to_string(p.events_min));
  kv("events_max", std::to_string(p.events_max));
  kv("snr_min", text::format_double(p.snr_min));
  kv("snr_max", text::format_double(p.snr_max));
  kv("peak_limit", text::format_double(p.peak_limit));
  kv("trim_threshold", text::format_double(p.trim_threshold));
  kv("latent_rate", text::format_double(p.latent_rate));
  kv("encoding", detail::encoding_name(p.encoding));
  kv("fg_dirs", m.fg_roots);
  kv("bg_dirs", m.bg_roots);
  kv("snr_convention", "rms; event active region vs background under the event");
  kv("assumption.event_count", "uniform integer [events_min, events_max]");
  kv("assumption.snr", "uniform [snr_min, snr_max] dB");
  kv("assumption.augmentation", "none (no pitch shift or time stretch)");
  for (const auto& c : m.clips) {
    out += "\n[clip " + c.spec.clip_id + "]\n";
    kv("background", c.spec.bg_name);
    kv("bg_index", std::to_string(c.spec.bg_index));
    kv("bg_start", std::to_string(c.spec.bg_start));
    kv("duration_samples", std::to_string(c.spec.duration_samples));
    kv("normalization_gain", text::format_double(c.normalization_gain));
    for (std::size_t i = 0; i < c.spec.events.size(); ++i) {
      const auto& e = c.spec.events[i];
      kv("event", e.class_name + "|" + std::to_string(e.fg_index) + "|" + e.fg_name + "|" +
                      std::to_string(e.onset_sample) + "|" + std::to_string(e.length_samples) + "|" +
                      text::format_double(e.snr_db) + "|" + text::format_double(c.event_gains.at(i)));
    }
  }
  return out;
}

inline Manifest parse_manifest(const std::vector<std::string>& lines) {
  Manifest m;
  ClipRecord* clip = nullptr;
  bool in_params = false;
  std::size_t row = 0;
  const auto need_int = [&row](std::string_view v) {
    auto x = text::parse_int<std::int64_t>(v);
    if (!x) throw ParseError(row, "expected an integer, got '" + std::string(v) + "'");
    return *x;
  };
  const auto need_num = [&row](std::string_view v) {
    auto x = text::parse_double(v);
    if (!x) throw ParseError(row, "expected a number, got '" + std::string(v) + "'");
    return *x;
  };
  for (const auto& raw : lines) {
    ++row;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line == "[params]") {
        in_params = true;
        clip = nullptr;
      } else if (line.rfind("[clip ", 0) == 0 && line.back() == ']') {
        in_params = false;
        m.clips.emplace_back();
        clip = &m.clips.back();
        clip->spec.clip_id = std::string(line.substr(6, line.size() - 7));
        clip->spec.sample_rate = m.params.sample_rate;
      } else {
        throw ParseError(row, "unknown section " + std::string(line));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(row, "expected key = value");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (in_params) {
      auto& p = m.params;
      if (key == "seed") p.seed = static_cast<std::uint64_t>(need_int(value));
      else if (key == "duration") p.duration = need_num(value);
      else if (key == "sample_rate") p.sample_rate = static_cast<int>(need_int(value));
      else if (key == "events_min") p.events_min = static_cast<int>(need_int(value));
      else if (key == "events_max") p.events_max = static_cast<int>(need_int(value));
      else if (key == "snr_min") p.snr_min = need_num(value);
      else if (key == "snr_max") p.snr_max = need_num(value);
      else if (key == "peak_limit") p.peak_limit = need_num(value);
      else if (key == "trim_threshold") p.trim_threshold = need_num(value);
      else if (key == "latent_rate") p.latent_rate = need_num(value);
      else if (key == "encoding") p.encoding = value == "pcm16" ? WavEncoding::pcm16 : WavEncoding::float32;
      else if (key == "fg_dirs") m.fg_roots = std::string(value);
      else if (key == "bg_dirs") m.bg_roots = std::string(value);
    } else if (clip != nullptr) {
      auto& s = clip->spec;
      if (key == "background") s.bg_name = std::string(value);
      else if (key == "bg_index") s.bg_index = static_cast<std::size_t>(need_int(value));
      else if (key == "bg_start") s.bg_start = static_cast<std::size_t>(need_int(value));
      else if (key == "duration_samples") s.duration_samples = static_cast<std::size_t>(need_int(value));
      else if (key == "normalization_gain") clip->normalization_gain = need_num(value);
      else if (key == "event") {
        const auto f = text::split(value, '|');
        if (f.size() != 7) throw ParseError(row, "event needs 7 '|'-separated fields");
        EventRecipe e;
        e.class_name = f[0];
        e.fg_index = static_cast<std::size_t>(need_int(f[1]));
        e.fg_name = f[2];
        e.onset_sample = static_cast<std::size_t>(need_int(f[3]));
        e.length_samples = static_cast<std::size_t>(need_int(f[4]));
        e.snr_db = need_num(f[5]);
        clip->event_gains.push_back(need_num(f[6]));
        s.events.push_back(std::move(e));
      }
    }
  }
  return m;
}

struct SynthSetOptions {
  unsigned threads = 1;
  std::vector<fs::path> fg_roots;
  std::vector<fs::path> bg_roots;
};

/// Renders clips 0..n_clips-1 into out_dir: audio/<clip>.wav, labels.tsv,
/// durations.tsv and manifest.txt. Output bytes do not depend on the thread
/// count.
inline Manifest synthesize_set(const SoundBank& bank, std::size_t n_clips, const SynthParams& params,
                               const fs::path& out_dir, const SynthSetOptions& options = {}) {
  params.validate();
  fs::create_directories(out_dir / "audio");
  Manifest manifest;
  manifest.params = params;
  manifest.fg_roots = detail::join_roots(options.fg_roots);
  manifest.bg_roots = detail::join_roots(options.bg_roots);
  manifest.clips.resize(n_clips);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_clips) return;
      try {
        auto spec = sample_spec(bank, params, i);
        auto rendered = render(spec, bank, params);
        const auto report = write_wav(rendered.mixture,
                                      out_dir / "audio" / filename_from_clip_id(spec.clip_id),
                                      params.encoding);
        manifest.clips[i] = {std::move(spec), std::move(rendered.event_gains),
                             rendered.normalization_gain, report.clipped_samples};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_clips);
        return;
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(std::max<std::size_t>(n_clips, 1))));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  DurationTable durations;
  for (const auto& c : manifest.clips) durations[c.spec.clip_id] = c.spec.duration();
  write_label_tsv(manifest.annotations(), out_dir / "labels.tsv");
  write_duration_tsv(durations, out_dir / "durations.tsv");
  text::write_file((out_dir / "manifest.txt").string(), format_manifest(manifest));
  return manifest;
}

}  // namespace sedkit
