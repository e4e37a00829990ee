#include "ecgtf/cli.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecgtf/classifier.hpp"
#include "ecgtf/error.hpp"
#include "ecgtf/eval.hpp"
#include "ecgtf/pipeline.hpp"

namespace ecgtf::cli {

namespace {

namespace fs = std::filesystem;
using pipeline::in_stage;
using pipeline::PipelineConfig;

struct Global {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  PipelineConfig load() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : in_stage("config", [&] {
      return pipeline::load_config(config_path);
    });
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

// ---- preprocess / detect / featurize / scalogram ---------------------------------------

struct StageArgs {
  std::string in;
  std::string out;
  bool filtered = false;  ///< input is already Butterworth filtered
  std::string peaks;      ///< precomputed peaks csv
  std::string feature;    ///< precomputed feature wave
  std::string taps;
  std::string format = "pgm";
};

EcgRecord filtered_input(const StageArgs& a, const PipelineConfig& cfg) {
  const auto rec = pipeline::load(a.in, cfg);
  return a.filtered ? rec : pipeline::preprocess(rec, cfg);
}

rpeak::RPeaks peaks_for(const StageArgs& a, const EcgRecord& filtered, const PipelineConfig& cfg) {
  if (a.peaks.empty()) return pipeline::detect(filtered, cfg);
  rpeak::RPeaks p;
  p.fs = filtered.fs;
  p.indices = in_stage("ingest", [&] { return read_csv_indices(a.peaks); });
  return p;
}

int cmd_preprocess(const StageArgs& a, const PipelineConfig& cfg, std::ostream&) {
  const auto filtered = pipeline::preprocess(pipeline::load(a.in, cfg), cfg);
  in_stage("preprocess", [&] { pipeline::write_record_csv(filtered, a.out); });
  return 0;
}

int cmd_detect(const StageArgs& a, const PipelineConfig& cfg, std::ostream& out) {
  const auto filtered = filtered_input(a, cfg);
  const auto peaks = pipeline::detect(filtered, cfg);
  in_stage("detect", [&] {
    write_csv_indices(a.out, peaks.indices);
    if (!a.taps.empty()) {
      const auto taps = rpeak::detection_taps(filtered, cfg.detector);
      fs::create_directories(a.taps);
      write_csv_values(fs::path(a.taps) / "bandpassed.csv", taps.bandpassed);
      write_csv_values(fs::path(a.taps) / "derivative.csv", taps.derivative);
      write_csv_values(fs::path(a.taps) / "squared.csv", taps.squared);
      write_csv_values(fs::path(a.taps) / "integrated.csv", taps.integrated);
    }
  });
  out << peaks.count() << " peaks\n";
  return 0;
}

int cmd_featurize(const StageArgs& a, const PipelineConfig& cfg, std::ostream& out) {
  const auto filtered = filtered_input(a, cfg);
  const auto peaks = peaks_for(a, filtered, cfg);
  const auto wave = pipeline::extract(filtered, peaks, cfg);
  in_stage("featurize", [&] { featurize::write_feature_wave(wave, a.out); });
  out << (wave.is_noise_gated ? "gated" : "ok") << '\n';
  return 0;
}

int cmd_scalogram(const StageArgs& a, const PipelineConfig& cfg, std::ostream&) {
  if (a.format != "pgm" && a.format != "f32") {
    throw StageError("scalogram", "InvalidArgument", "--format must be pgm or f32");
  }
  const pipeline::Pipeline pipe(cfg);
  featurize::FeatureWave wave;
  if (!a.feature.empty()) {
    wave = in_stage("featurize", [&] { return featurize::read_feature_wave(a.feature); });
  } else {
    const auto filtered = filtered_input(a, cfg);
    wave = pipeline::extract(filtered, peaks_for(a, filtered, cfg), cfg);
  }
  const auto s = pipeline::transform(wave, cfg, pipe.wavelet());
  in_stage("scalogram", [&] {
    if (a.format == "pgm") {
      scalogram::write_pgm(scalogram::to_grayscale(s), a.out);
    } else {
      scalogram::write_f32(s, a.out);
    }
  });
  return 0;
}

// ---- train / eval / predict ---------------------------------------------------------------

struct LearnArgs {
  std::string data;
  std::string labels;
  std::string model;
  std::string report;
  std::string predictions;
  std::string record;
};

int cmd_train(const LearnArgs& a, const PipelineConfig& cfg, std::ostream& out) {
  const pipeline::Pipeline pipe(cfg);
  const auto labels = in_stage("ingest", [&] { return load_labels(a.labels); });
  const auto data = pipeline::build_dataset(pipe, a.data, labels);
  out << "dataset: " << data.examples.size() << " records\n";
  const auto tc = cfg.effective_train();
  const auto model = in_stage("train", [&] {
    return nn::train(data, cfg.network, tc, [&](const nn::EpochReport& r) {
      out << "epoch " << r.epoch << '/' << tc.epochs << " loss " << fixed6(r.mean_loss) << '\n' << std::flush;
    });
  });
  out << "training accuracy " << fixed6(nn::accuracy(model, data)) << '\n';
  in_stage("train", [&] { nn::save_model(model, a.model); });
  return 0;
}

/// Lines "id,symbol" in the label-file format.
std::vector<Rhythm> aligned(const LabelSet& labels, const LabelSet& predicted) {
  std::vector<Rhythm> out;
  for (const auto& id : labels.ids) {
    const auto p = predicted.find(id);
    if (!p) throw InvalidArgument("no prediction for record '" + id + "'");
    out.push_back(*p);
  }
  return out;
}

int cmd_eval(const LearnArgs& a, const PipelineConfig& cfg, std::ostream& out) {
  const auto labels = in_stage("ingest", [&] { return load_labels(a.labels); });
  std::vector<Rhythm> truth;
  for (const auto& id : labels.ids) truth.push_back(labels.by_id.at(id));

  std::vector<Rhythm> preds;
  if (!a.predictions.empty()) {
    preds = in_stage("eval", [&] { return aligned(labels, load_labels(a.predictions)); });
  } else {
    if (a.model.empty() || a.data.empty()) {
      throw StageError("eval", "InvalidArgument", "give --model and --data, or --predictions");
    }
    auto run_cfg = cfg;
    const auto model = in_stage("classify", [&] { return nn::load_model(a.model); });
    run_cfg.network = model.config;
    const pipeline::Pipeline pipe(run_cfg);
    const auto data = pipeline::build_dataset(pipe, a.data, labels);
    preds = in_stage("classify", [&] { return nn::predict_all(model, data); });
  }
  const auto rep = in_stage("eval", [&] { return eval::report(eval::confusion(preds, truth)); });
  out << eval::format_confusion(rep.confusion) << '\n' << eval::format_metrics(rep);
  if (!a.report.empty()) in_stage("eval", [&] { write_text(a.report, eval::to_json(rep)); });
  return 0;
}

int cmd_predict(const LearnArgs& a, const PipelineConfig& cfg, std::ostream& out) {
  const auto model = in_stage("classify", [&] { return nn::load_model(a.model); });
  auto run_cfg = cfg;
  run_cfg.network = model.config;
  const pipeline::Pipeline pipe(run_cfg);
  const auto stages = pipe.run(pipeline::load(a.record, run_cfg));
  const auto label = in_stage("classify", [&] { return nn::predict(model, stages.input); });
  out << to_symbol(label) << '\n';
  return 0;
}

// ---- helpers --------------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string peaks;
  SynthSpec spec;
};

int cmd_synth(SynthArgs a, const PipelineConfig& cfg, std::ostream& out) {
  a.spec.seed = cfg.seed;
  const auto ecg = in_stage("synth", [&] { return synth_ecg(a.spec); });
  auto rec = ecg.record;
  rec.id = fs::path(a.out).stem().string();
  in_stage("synth", [&] {
    pipeline::write_record_csv(rec, a.out);
    if (!a.peaks.empty()) write_csv_indices(a.peaks, ecg.peaks);
  });
  out << ecg.peaks.size() << " beats\n";
  return 0;
}

int cmd_config(const std::string& path, const PipelineConfig& cfg, std::ostream& out) {
  in_stage("config", [&] { cfg.validate(); });
  if (path.empty()) {
    out << pipeline::to_json(cfg);
  } else {
    in_stage("config", [&] { pipeline::save_config(cfg, path); });
  }
  return 0;
}

int cmd_design(const PipelineConfig& cfg, double fs_hz, std::ostream& out) {
  const auto filter = in_stage("preprocess", [&] {
    return dsp::design_butterworth_lowpass(cfg.butterworth_order, cfg.butterworth_cutoff_hz, fs_hz);
  });
  nlohmann::json j;
  j["order"] = cfg.butterworth_order;
  j["cutoff_hz"] = cfg.butterworth_cutoff_hz;
  j["fs"] = fs_hz;
  j["gain"] = filter.gain;
  j["sections"] = nlohmann::json::array();
  for (const auto& s : filter.sections) {
    j["sections"].push_back({{"b", {s.b0, s.b1, s.b2}}, {"a", {1.0, s.a1, s.a2}}});
  }
  out << j.dump(2) << '\n';
  return 0;
}

void error_line(std::ostream& err, const std::string& stage, const std::string& type, const std::string& what) {
  err << nlohmann::json{{"error", what}, {"stage", stage}, {"type", type}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ECG rhythm classification through wavelet time-frequency images", "ecgtf"};
  app.fallthrough();
  app.require_subcommand(1);

  Global global;
  app.add_option("--config", global.config_path, "pipeline config JSON")->check(CLI::ExistingFile);
  app.add_option("--seed", global.seed, "override the config seed");

  StageArgs stage;
  auto* pre = app.add_subcommand("preprocess", "Butterworth low-pass a record to csv");
  pre->add_option("--in", stage.in)->required()->check(CLI::ExistingFile);
  pre->add_option("--out", stage.out)->required();

  auto* det = app.add_subcommand("detect", "R-peak indices as csv");
  det->add_option("--in", stage.in)->required()->check(CLI::ExistingFile);
  det->add_option("--out", stage.out)->required();
  det->add_flag("--filtered", stage.filtered, "input is already low-pass filtered");
  det->add_option("--taps", stage.taps, "directory for the intermediate detector signals");

  auto* feat = app.add_subcommand("featurize", "four-cycle feature wave as csv");
  feat->add_option("--in", stage.in)->required()->check(CLI::ExistingFile);
  feat->add_option("--out", stage.out)->required();
  feat->add_flag("--filtered", stage.filtered, "input is already low-pass filtered");
  feat->add_option("--peaks", stage.peaks, "peak indices from `detect`")->check(CLI::ExistingFile);

  auto* scal = app.add_subcommand("scalogram", "time-frequency image of a record or feature wave");
  auto* scal_in = scal->add_option("--in", stage.in, "record")->check(CLI::ExistingFile);
  auto* scal_feat = scal->add_option("--feature", stage.feature, "feature wave from `featurize`")
                        ->check(CLI::ExistingFile);
  scal_in->excludes(scal_feat);
  scal->add_option("--out", stage.out)->required();
  scal->add_option("--format", stage.format, "pgm or f32")->check(CLI::IsMember({"pgm", "f32"}));
  scal->add_flag("--filtered", stage.filtered, "record is already low-pass filtered");
  scal->add_option("--peaks", stage.peaks, "peak indices from `detect`")->check(CLI::ExistingFile);

  LearnArgs learn;
  auto* trn = app.add_subcommand("train", "run the pipeline over a labelled set and train the network");
  trn->add_option("--data", learn.data)->required()->check(CLI::ExistingDirectory);
  trn->add_option("--labels", learn.labels)->required()->check(CLI::ExistingFile);
  trn->add_option("--model", learn.model, "checkpoint to write")->required();

  auto* evl = app.add_subcommand("eval", "confusion matrix, precision/recall and F1");
  evl->add_option("--labels", learn.labels)->required()->check(CLI::ExistingFile);
  evl->add_option("--data", learn.data)->check(CLI::ExistingDirectory);
  evl->add_option("--model", learn.model)->check(CLI::ExistingFile);
  evl->add_option("--predictions", learn.predictions, "score an id,symbol file instead of running a model")
      ->check(CLI::ExistingFile);
  evl->add_option("--report", learn.report, "metrics JSON to write");

  auto* prd = app.add_subcommand("predict", "classify one record");
  prd->add_option("--record", learn.record)->required()->check(CLI::ExistingFile);
  prd->add_option("--model", learn.model)->required()->check(CLI::ExistingFile);

  SynthArgs synth;
  auto* syn = app.add_subcommand("synth", "write a synthetic ECG record");
  syn->add_option("--out", synth.out)->required();
  syn->add_option("--peaks", synth.peaks, "ground-truth R positions csv");
  syn->add_option("--duration", synth.spec.duration_s, "seconds")->capture_default_str();
  syn->add_option("--bpm", synth.spec.bpm)->capture_default_str();
  syn->add_option("--amplitude", synth.spec.qrs_amplitude)->capture_default_str();
  syn->add_option("--width", synth.spec.qrs_width_s, "QRS width in seconds")->capture_default_str();
  syn->add_option("--noise", synth.spec.noise_sigma, "white noise sigma")->capture_default_str();
  syn->add_option("--jitter", synth.spec.rr_jitter, "relative RR jitter")->capture_default_str();
  syn->add_option("--fs", synth.spec.fs)->capture_default_str();

  std::string config_out;
  auto* cfg_cmd = app.add_subcommand("config", "print or save the effective config");
  cfg_cmd->add_option("--out", config_out);

  double design_fs = 200.0;
  auto* des = app.add_subcommand("design", "Butterworth second-order sections as JSON");
  des->add_option("--fs", design_fs)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    error_line(err, "cli", e.get_name(), e.what());
    return 2;
  }

  try {
    if (*scal && stage.in.empty() && stage.feature.empty()) {
      throw StageError("cli", "InvalidArgument", "scalogram needs --in or --feature");
    }
    const auto cfg = global.load();
    in_stage("config", [&] { cfg.validate(); });
    if (*pre) return cmd_preprocess(stage, cfg, out);
    if (*det) return cmd_detect(stage, cfg, out);
    if (*feat) return cmd_featurize(stage, cfg, out);
    if (*scal) return cmd_scalogram(stage, cfg, out);
    if (*trn) return cmd_train(learn, cfg, out);
    if (*evl) return cmd_eval(learn, cfg, out);
    if (*prd) return cmd_predict(learn, cfg, out);
    if (*syn) return cmd_synth(synth, cfg, out);
    if (*cfg_cmd) return cmd_config(config_out, cfg, out);
    if (*des) return cmd_design(cfg, design_fs, out);
  } catch (const StageError& e) {
    error_line(err, e.stage(), e.kind(), e.what());
    return 1;
  } catch (const Error& e) {
    error_line(err, "unknown", pipeline::error_kind(e), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_line(err, "unknown", "InternalError", e.what());
    return 1;
  }
  return 0;
}

}  // namespace ecgtf::cli
