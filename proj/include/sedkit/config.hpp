#pragma once

// Pipeline configuration file: `key = value` lines, `#` comments. Every
// key has a default; unknown keys are rejected. Command-line flags override
// values loaded from a file.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sedkit/envelope.hpp"
#include "sedkit/error.hpp"
#include "sedkit/filtering.hpp"
#include "sedkit/postprocess.hpp"
#include "sedkit/psds.hpp"
#include "sedkit/synth.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

struct PipelineConfig {
  // synthesis
  std::string fg_dir;
  std::string bg_dir;
  std::string real_fg_dir;   // empty: generated foreground only
  std::string gen_bg_dir;    // empty: real backgrounds only
  std::size_t n_clips = 100;
  unsigned threads = 1;
  SynthParams synth;
  std::string synth_encoding = "float32";

  // filtering
  std::string scores_csv;
  FilterConfig filter;

  // envelope export
  std::string audio_in;
  double latent_rate = 50.0;
  std::size_t window = 0;  // 0: twice the hop
  double envelope_threshold = 0.05;
  std::string envelope_format = "csv";

  // decoding and evaluation
  std::string posteriors_dir;
  std::string detections_dir;
  std::string gt_tsv;
  std::string durations_tsv;
  std::size_t median_window = kMedianWindow;
  std::string thresholds = "default";
  std::string metric = "both";
  PsdsParams psds1 = psds1_params();
  PsdsParams psds2 = psds2_params();

  std::string out_dir = "out";

  // Covers std::size_t and std::uint64_t on both LP64 and LLP64.
  using FieldRef = std::variant<std::string*, double*, int*, unsigned*, unsigned long*, unsigned long long*>;
  struct Field {
    const char* key;
    FieldRef ref;
  };

  std::vector<Field> fields() {
    return {
        {"out_dir", &out_dir},
        {"synth.fg_dir", &fg_dir},
        {"synth.bg_dir", &bg_dir},
        {"synth.real_fg_dir", &real_fg_dir},
        {"synth.gen_bg_dir", &gen_bg_dir},
        {"synth.n_clips", &n_clips},
        {"synth.threads", &threads},
        {"synth.duration", &synth.duration},
        {"synth.events_min", &synth.events_min},
        {"synth.events_max", &synth.events_max},
        {"synth.snr_min", &synth.snr_min},
        {"synth.snr_max", &synth.snr_max},
        {"synth.peak_limit", &synth.peak_limit},
        {"synth.trim_threshold", &synth.trim_threshold},
        {"synth.latent_rate", &synth.latent_rate},
        {"synth.sample_rate", &synth.sample_rate},
        {"synth.seed", &synth.seed},
        {"synth.encoding", &synth_encoding},
        {"filter.scores_csv", &scores_csv},
        {"filter.weight", &filter.weight},
        {"filter.top_percent", &filter.top_percent},
        {"envelope.audio_in", &audio_in},
        {"envelope.latent_rate", &latent_rate},
        {"envelope.window", &window},
        {"envelope.threshold", &envelope_threshold},
        {"envelope.format", &envelope_format},
        {"decode.posteriors_dir", &posteriors_dir},
        {"decode.median_window", &median_window},
        {"decode.thresholds", &thresholds},
        {"evaluate.detections_dir", &detections_dir},
        {"evaluate.gt_tsv", &gt_tsv},
        {"evaluate.durations_tsv", &durations_tsv},
        {"evaluate.metric", &metric},
        {"psds1.rho_dtc", &psds1.rho_dtc},
        {"psds1.rho_gtc", &psds1.rho_gtc},
        {"psds1.rho_cttc", &psds1.rho_cttc},
        {"psds1.alpha_ct", &psds1.alpha_ct},
        {"psds1.alpha_st", &psds1.alpha_st},
        {"psds1.e_max", &psds1.e_max},
        {"psds2.rho_dtc", &psds2.rho_dtc},
        {"psds2.rho_gtc", &psds2.rho_gtc},
        {"psds2.rho_cttc", &psds2.rho_cttc},
        {"psds2.alpha_ct", &psds2.alpha_ct},
        {"psds2.alpha_st", &psds2.alpha_st},
        {"psds2.e_max", &psds2.e_max},
    };
  }

  void set(std::string_view key, std::string_view value, std::size_t line = 0) {
    for (auto& f : fields()) {
      if (key != f.key) continue;
      const auto fail = [&] {
        throw ParseError(line, "invalid value '" + std::string(value) + "' for " + f.key);
      };
      std::visit(
          [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) {
              *p = std::string(value);
            } else if constexpr (std::is_same_v<T, double>) {
              auto v = text::parse_double(value);
              if (!v) fail();
              *p = *v;
            } else {
              auto v = text::parse_int<T>(value);
              if (!v) fail();
              *p = *v;
            }
          },
          f.ref);
      return;
    }
    throw ParseError(line, "unknown config key '" + std::string(key) + "'");
  }

  std::string format() {
    std::string out;
    for (auto& f : fields()) {
      out += f.key;
      out += " = ";
      std::visit(
          [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, std::string>) out += *p;
            else if constexpr (std::is_same_v<T, double>) out += text::format_double(*p);
            else out += std::to_string(*p);
          },
          f.ref);
      out += '\n';
    }
    return out;
  }

  /// Row numbers in errors are file line numbers.
  static PipelineConfig parse(const std::vector<std::string>& lines) {
    PipelineConfig cfg;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto line = text::trim(lines[i]);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(i + 1, "expected key = value");
      cfg.set(text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)), i + 1);
    }
    return cfg;
  }

  static PipelineConfig load(const std::string& path) {
    try {
      return parse(text::read_lines(path));
    } catch (const ParseError& e) {
      throw ParseError(e.row(), path + ": " + e.what());
    }
  }

  WavEncoding encoding() const {
    if (synth_encoding == "float32") return WavEncoding::float32;
    if (synth_encoding == "pcm16") return WavEncoding::pcm16;
    throw InvalidArgument("encoding must be float32 or pcm16");
  }

  ControlFormat control_format() const {
    if (envelope_format == "csv") return ControlFormat::csv;
    if (envelope_format == "f32le") return ControlFormat::f32le;
    throw InvalidArgument("envelope format must be csv or f32le");
  }

  std::vector<double> threshold_list() const {
    if (thresholds == "default" || thresholds.empty()) return default_thresholds();
    std::vector<double> out;
    for (const auto& f : text::split(thresholds, ',')) {
      auto v = text::parse_double(f);
      if (!v) throw InvalidArgument("bad threshold '" + f + "'");
      out.push_back(*v);
    }
    validate_thresholds(out);
    return out;
  }
};

}  // namespace sedkit
