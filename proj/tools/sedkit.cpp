// sedkit: command-line front end for the soundscape augmentation and SED
// evaluation pipeline.
//
//   sedkit envelope --audio-in DIR --out DIR [--latent-rate 50] [--format csv|f32le]
//   sedkit filter   --scores scores.csv --w 0.5 --p 50 --out-dir DIR
//   sedkit synth    --fg-dir DIR --bg-dir DIR --n-clips N --seed S --out-dir DIR
//   sedkit decode   --posteriors-dir DIR --out-dir DIR
//   sedkit evaluate --gt labels.tsv --durations durations.tsv
//                   (--detections-dir DIR | --posteriors-dir DIR) [--metric both]
//   sedkit report   --report report.csv
//
// Every subcommand accepts --config FILE; flags given on the command line
// override values from the file.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sedkit/sedkit.hpp"

namespace fs = std::filesystem;
using namespace sedkit;

namespace {

/// Flags are collected as strings and applied on top of the config file so
/// that parsing and validation go through one path.
class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = values_[key];
    options_.emplace_back(app->add_option(flag, slot, help), key);
  }

  void apply(PipelineConfig& cfg) const {
    for (const auto& [opt, key] : options_)
      if (opt->count() > 0) cfg.set(key, values_.at(key));
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> options_;
};

PipelineConfig resolve(const std::string& config_path, const Overrides& overrides) {
  PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
  overrides.apply(cfg);
  return cfg;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw InvalidArgument(std::string("missing required ") + what);
}

void print_warnings(const PerClassRates& rates) {
  for (const auto& w : rates.warnings) std::cerr << "warning: " << w << "\n";
}

int run_envelope(const PipelineConfig& cfg, bool normalize, bool trim) {
  require(cfg.audio_in, "--audio-in");
  std::vector<fs::path> inputs;
  if (fs::is_directory(cfg.audio_in)) {
    for (const auto& e : fs::directory_iterator(cfg.audio_in))
      if (e.is_regular_file() && detail::is_wav(e.path())) inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
  } else {
    inputs.emplace_back(cfg.audio_in);
  }
  const auto format = cfg.control_format();
  fs::create_directories(cfg.out_dir);
  for (const auto& in : inputs) {
    AudioClip clip;
    try {
      clip = read_wav(in);
    } catch (const Error& e) {
      throw Error(in.string() + ": " + e.what());
    }
    if (clip.empty()) throw InvalidArgument(in.string() + ": empty audio");
    auto params = EnvelopeParams::from_rates(clip.sample_rate, cfg.latent_rate);
    if (cfg.window > 0) params.window = cfg.window;
    if (trim) clip = trim_silence(clip, params, cfg.envelope_threshold);
    auto env = compute_envelope(clip, params);
    const auto region = detect_active_region(env, cfg.envelope_threshold);
    if (normalize) env = normalize_envelope(env);
    const fs::path out = fs::path(cfg.out_dir) /
                         (in.stem().string() + (format == ControlFormat::csv ? ".csv" : ".f32"));
    export_control_signal(env, out, format);
    std::cerr << in.filename().string() << ": " << env.values.size() << " frames";
    if (region) std::cerr << ", active frames [" << region->onset << ", " << region->offset << ")";
    std::cerr << "\n";
  }
  std::cout << "envelope: wrote " << inputs.size() << " control signals to " << cfg.out_dir << "\n";
  return 0;
}

int run_filter(const PipelineConfig& cfg) {
  require(cfg.scores_csv, "--scores");
  const auto samples = load_score_table(cfg.scores_csv);
  const auto result = fuse_and_select(samples, cfg.filter);
  write_filter_result(result, cfg.out_dir);
  std::cout << "filter: kept " << result.kept_count() << " of " << samples.size() << " samples in "
            << result.classes.size() << " classes (w=" << cfg.filter.weight
            << ", p=" << cfg.filter.top_percent << ")\n";
  return 0;
}

int run_synth(PipelineConfig cfg) {
  require(cfg.fg_dir, "--fg-dir");
  require(cfg.bg_dir, "--bg-dir");
  cfg.synth.encoding = cfg.encoding();
  Catalog catalog = load_catalog(cfg.fg_dir, cfg.bg_dir);
  SynthSetOptions options;
  options.threads = cfg.threads;
  options.fg_roots = {cfg.fg_dir};
  options.bg_roots = {cfg.bg_dir};
  if (!cfg.real_fg_dir.empty()) {
    add_foreground(catalog, cfg.real_fg_dir);
    options.fg_roots.emplace_back(cfg.real_fg_dir);
  }
  if (!cfg.gen_bg_dir.empty()) {
    add_background(catalog, cfg.gen_bg_dir);
    options.bg_roots.emplace_back(cfg.gen_bg_dir);
  }
  const auto bank = SoundBank::prepare(catalog, cfg.synth);
  const auto manifest = synthesize_set(bank, cfg.n_clips, cfg.synth, cfg.out_dir, options);
  std::size_t clipped = 0, events = 0;
  for (const auto& c : manifest.clips) {
    clipped += c.clipped_samples;
    events += c.spec.events.size();
  }
  if (clipped > 0) std::cerr << "warning: " << clipped << " samples clipped while writing pcm16\n";
  std::cout << "synth: " << manifest.clips.size() << " clips, " << events << " events -> "
            << cfg.out_dir << "\n";
  return 0;
}

int run_decode(const PipelineConfig& cfg) {
  require(cfg.posteriors_dir, "--posteriors-dir");
  const auto posteriors = load_posterior_dir(cfg.posteriors_dir);
  const auto sets = sweep_operating_points(posteriors, cfg.threshold_list(), cfg.median_window);
  write_detection_sets(sets, cfg.out_dir);
  std::cout << "decode: " << posteriors.size() << " clips, " << sets.size()
            << " operating points -> " << cfg.out_dir << "\n";
  return 0;
}

int run_evaluate(const PipelineConfig& cfg, const std::string& report_path) {
  require(cfg.gt_tsv, "--gt");
  require(cfg.durations_tsv, "--durations");
  if (cfg.detections_dir.empty() == cfg.posteriors_dir.empty())
    throw InvalidArgument("give exactly one of --detections-dir and --posteriors-dir");
  if (cfg.metric != "psds1" && cfg.metric != "psds2" && cfg.metric != "both")
    throw InvalidArgument("metric must be psds1, psds2 or both");

  const auto gt = read_label_tsv(cfg.gt_tsv);
  const auto durations = read_duration_tsv(cfg.durations_tsv);
  std::vector<DetectionSet> sets;
  std::vector<std::string> classes;
  if (!cfg.posteriors_dir.empty()) {
    const auto posteriors = load_posterior_dir(cfg.posteriors_dir);
    sets = sweep_operating_points(posteriors, cfg.threshold_list(), cfg.median_window);
    if (!posteriors.empty()) {
      classes = posteriors.front().class_names;
      std::sort(classes.begin(), classes.end());
    }
  } else {
    sets = load_detection_dir(cfg.detections_dir);
  }
  if (classes.empty()) classes = ground_truth_classes(gt);
  const double seconds = total_duration(durations);

  std::string report(kReportHeader);
  report += '\n';
  const auto score = [&](const std::string& name, const PsdsParams& params) {
    const auto result = evaluate_psds(sets, gt, seconds, params, classes);
    if (!result.operating_points.empty()) print_warnings(result.operating_points.front());
    report += format_report_rows(name, result);
    std::cout << name << "=" << text::format_fixed(result.value, 6) << "\n";
  };
  if (cfg.metric != "psds2") score("psds1", cfg.psds1);
  if (cfg.metric != "psds1") score("psds2", cfg.psds2);

  const fs::path out = report_path.empty() ? fs::path(cfg.out_dir) / "report.csv" : fs::path(report_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  text::write_file(out.string(), report);
  std::cerr << "report written to " << out.string() << "\n";
  return 0;
}

int run_report(const std::string& path) {
  require(path, "--report");
  const auto lines = text::read_lines(path);
  if (lines.empty() || lines.front() != kReportHeader) throw ParseError(0, path + ": not a report CSV");
  struct Summary {
    std::size_t operating_points = 0;
    std::map<std::string, double> best_tpr;
    double value = -1.0;
  };
  std::map<std::string, Summary> metrics;
  std::map<std::string, std::set<std::string>> thresholds;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = text::split(lines[i], ',');
    if (f.size() != 10) throw ParseError(i, path + ": expected 10 columns");
    auto& s = metrics[f[0]];
    if (f[1] == "rates") {
      thresholds[f[0]].insert(f[2]);
      auto& best = s.best_tpr[f[3]];
      best = std::max(best, text::parse_double(f[7]).value_or(0.0));
    } else if (f[1] == "psds") {
      s.value = text::parse_double(f[9]).value_or(-1.0);
    }
  }
  for (auto& [name, s] : metrics) {
    std::cout << name << ": " << text::format_fixed(s.value, 6) << " over "
              << thresholds[name].size() << " operating points\n";
    for (const auto& [cls, tpr] : s.best_tpr)
      std::cout << "  " << cls << ": best tpr " << text::format_fixed(tpr, 4) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soundscape augmentation and sound event detection evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key = value pipeline config file")->check(CLI::ExistingFile);

  Overrides ov;

  auto* env = app.add_subcommand("envelope", "export energy-envelope control signals");
  ov.add(env, "--audio-in", "envelope.audio_in", "WAV file or directory of WAVs");
  ov.add(env, "--out,--out-dir", "out_dir", "output directory");
  ov.add(env, "--latent-rate", "envelope.latent_rate", "envelope frames per second");
  ov.add(env, "--window", "envelope.window", "window in samples (0: twice the hop)");
  ov.add(env, "--threshold", "envelope.threshold", "relative activity threshold");
  ov.add(env, "--format", "envelope.format", "csv or f32le");
  bool normalize = false, trim = false;
  env->add_flag("--normalize", normalize, "scale each envelope to a peak of 1");
  env->add_flag("--trim", trim, "trim leading/trailing silence before computing the envelope");

  auto* filt = app.add_subcommand("filter", "dual-classifier rank filtering of generated samples");
  ov.add(filt, "--scores", "filter.scores_csv", "CSV with sample_id,class,clap_score,cls_logit");
  ov.add(filt, "--w", "filter.weight", "CLAP rank weight in [0, 1]");
  ov.add(filt, "--p", "filter.top_percent", "percentage kept per class, (0, 100]");
  ov.add(filt, "--out-dir", "out_dir", "output directory");

  auto* syn = app.add_subcommand("synth", "render strongly labeled soundscapes");
  ov.add(syn, "--fg-dir", "synth.fg_dir", "foreground directory, one subdirectory per class");
  ov.add(syn, "--bg-dir", "synth.bg_dir", "background directory");
  ov.add(syn, "--n-clips", "synth.n_clips", "number of clips");
  ov.add(syn, "--duration", "synth.duration", "clip duration in seconds");
  ov.add(syn, "--events-min", "synth.events_min", "minimum events per clip");
  ov.add(syn, "--events-max", "synth.events_max", "maximum events per clip");
  ov.add(syn, "--snr-min", "synth.snr_min", "minimum event SNR in dB");
  ov.add(syn, "--snr-max", "synth.snr_max", "maximum event SNR in dB");
  ov.add(syn, "--peak-limit", "synth.peak_limit", "mixture peak limit in (0, 1]");
  ov.add(syn, "--trim-threshold", "synth.trim_threshold", "foreground trim threshold");
  ov.add(syn, "--sample-rate", "synth.sample_rate", "output sample rate");
  ov.add(syn, "--seed", "synth.seed", "dataset seed");
  ov.add(syn, "--threads", "synth.threads", "render threads (does not affect output)");
  ov.add(syn, "--encoding", "synth.encoding", "float32 or pcm16");
  ov.add(syn, "--include-real-fg", "synth.real_fg_dir", "also draw from this real foreground directory");
  ov.add(syn, "--gen-bg-dir", "synth.gen_bg_dir", "also draw backgrounds from this directory");
  ov.add(syn, "--out-dir", "out_dir", "output directory");

  auto* dec = app.add_subcommand("decode", "posteriors to detection TSVs over a threshold sweep");
  ov.add(dec, "--posteriors-dir", "decode.posteriors_dir", "directory of per-clip posterior CSVs");
  ov.add(dec, "--thresholds", "decode.thresholds", "comma-separated thresholds or 'default'");
  ov.add(dec, "--median-window", "decode.median_window", "odd median filter window in frames");
  ov.add(dec, "--out-dir", "out_dir", "output directory");

  auto* ev = app.add_subcommand("evaluate", "PSDS1/PSDS2 against strong labels");
  ov.add(ev, "--gt", "evaluate.gt_tsv", "ground-truth label TSV");
  ov.add(ev, "--durations", "evaluate.durations_tsv", "clip duration TSV");
  ov.add(ev, "--detections-dir", "evaluate.detections_dir", "directory of detections_t<thr>.tsv");
  ov.add(ev, "--posteriors-dir", "decode.posteriors_dir", "directory of posterior CSVs");
  ov.add(ev, "--thresholds", "decode.thresholds", "thresholds when decoding posteriors");
  ov.add(ev, "--median-window", "decode.median_window", "median window when decoding posteriors");
  ov.add(ev, "--metric", "evaluate.metric", "psds1, psds2 or both");
  ov.add(ev, "--out-dir", "out_dir", "directory for report.csv");
  std::string report_out;
  ev->add_option("--report", report_out, "report CSV path (default <out-dir>/report.csv)");

  auto* rep = app.add_subcommand("report", "summarize a report CSV");
  std::string report_in;
  rep->add_option("--report", report_in, "report CSV written by evaluate")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = resolve(config_path, ov);
    if (env->parsed()) return run_envelope(cfg, normalize, trim);
    if (filt->parsed()) return run_filter(cfg);
    if (syn->parsed()) return run_synth(cfg);
    if (dec->parsed()) return run_decode(cfg);
    if (ev->parsed()) return run_evaluate(cfg, report_out);
    if (rep->parsed()) return run_report(report_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
