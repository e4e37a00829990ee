#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "ecgtf/cli.hpp"
#include "ecgtf/pipeline.hpp"
#include "support.hpp"

using namespace ecgtf;
using pipeline::PipelineConfig;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_text(const std::filesystem::path& p) {
  const auto bytes = testing::read_file(p);
  return {bytes.begin(), bytes.end()};
}

/// Small network and image so whole-pipeline training finishes in seconds.
PipelineConfig small_config() {
  PipelineConfig c;
  c.feature_length = 256;
  c.scale_count = 16;
  c.network = nn::NetworkConfig::tiny();
  c.train.epochs = 4;
  c.train.batch_size = 4;
  c.train.learning_rate = 0.05;
  return c;
}

}  // namespace

TEST_CASE("config round trips through json") {
  PipelineConfig c = small_config();
  c.detector.highpass = rpeak::HighpassVariant::kClassic;
  c.gate.min_bpm = 25.0;
  c.butterworth_cutoff_hz = 0.1 + 0.2;  // not exactly representable in short decimal
  c.seed = 0xFFFFFFFFFFFFull;
  c.network.normalization = true;
  CHECK(pipeline::config_from_json(pipeline::to_json(c)) == c);
  CHECK(pipeline::config_from_json(pipeline::to_json(PipelineConfig{})) == PipelineConfig{});
  CHECK(pipeline::config_from_json("{}") == PipelineConfig{});

  CHECK_THROWS_AS(pipeline::config_from_json(R"({"fs": 200, "sampel_rate": 1})"), InvalidArgument);
  CHECK_THROWS_AS(pipeline::config_from_json(R"({"network": {"depth": 3}})"), InvalidArgument);
  CHECK_THROWS_AS(pipeline::config_from_json("{"), FormatError);
  CHECK_THROWS_AS(pipeline::config_from_json(R"({"scale_count": 65})"), InvalidArgument);
}

TEST_CASE("stages through files equal the in-process pipeline") {
  testing::TempDir dir;
  const auto d = [&](const std::string& n) { return (dir / n).string(); };
  REQUIRE(run_cli({"synth", "--out", d("r.csv"), "--noise", "0.05", "--bpm", "72"}).code == 0);
  REQUIRE(run_cli({"preprocess", "--in", d("r.csv"), "--out", d("f.csv")}).code == 0);
  const auto det = run_cli({"detect", "--in", d("f.csv"), "--filtered", "--out", d("p.csv"), "--taps", d("taps")});
  REQUIRE(det.code == 0);
  CHECK(std::filesystem::exists(dir / "taps" / "integrated.csv"));
  REQUIRE(run_cli({"featurize", "--in", d("f.csv"), "--filtered", "--peaks", d("p.csv"), "--out", d("w.csv")}).code == 0);
  REQUIRE(run_cli({"scalogram", "--feature", d("w.csv"), "--out", d("a.pgm")}).code == 0);
  REQUIRE(run_cli({"scalogram", "--in", d("r.csv"), "--out", d("b.pgm")}).code == 0);
  CHECK(testing::read_file(dir / "a.pgm") == testing::read_file(dir / "b.pgm"));

  const pipeline::Pipeline pipe{PipelineConfig{}};
  const auto stages = pipe.run(pipeline::load(dir / "r.csv", pipe.config()));
  CHECK(read_csv_indices(dir / "p.csv") == stages.peaks.indices);
  CHECK(det.out == std::to_string(stages.peaks.count()) + " peaks\n");
  CHECK(testing::read_file(dir / "a.pgm") == scalogram::encode_pgm(stages.image));

  REQUIRE(run_cli({"scalogram", "--in", d("r.csv"), "--out", d("s.f32"), "--format", "f32"}).code == 0);
  const auto f32 = scalogram::read_f32(dir / "s.f32");
  REQUIRE(f32.coeffs.size() == stages.scalogram.coeffs.size());
  for (std::size_t i = 0; i < f32.coeffs.size(); ++i) {
    CHECK(f32.coeffs[i] == static_cast<double>(static_cast<float>(stages.scalogram.coeffs[i])));
  }
}

TEST_CASE("all-zero record gives an all-black image") {
  testing::TempDir dir;
  std::string zeros;
  for (int i = 0; i < 6000; ++i) zeros += "0\n";
  testing::write_file(dir / "z.csv", zeros);
  const auto r = run_cli({"scalogram", "--in", (dir / "z.csv").string(), "--out", (dir / "z.pgm").string()});
  REQUIRE(r.code == 0);
  const auto img = scalogram::read_pgm(dir / "z.pgm");
  CHECK(img.width == 1024);
  CHECK(img.height == 64);
  CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](std::uint8_t p) { return p == 0; }));
  CHECK(run_cli({"featurize", "--in", (dir / "z.csv").string(), "--out", (dir / "w.csv").string()}).out == "gated\n");
}

TEST_CASE("eval scores a predictions file") {
  testing::TempDir dir;
  testing::write_file(dir / "labels.csv", "A01,N\nA02,A\nA03,O\nA04,~\nA05,N\n");
  const auto r = run_cli({"eval", "--labels", (dir / "labels.csv").string(), "--predictions",
                      (dir / "labels.csv").string(), "--report", (dir / "m.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("F1 (N, A, O mean) = 1.000") != std::string::npos);
  const auto j = nlohmann::json::parse(read_text(dir / "m.json"));
  CHECK(j.at("total") == 5);

  testing::write_file(dir / "preds.csv", "A01,N\nA02,N\nA03,O\nA04,~\nA05,N\n");
  const auto half = run_cli({"eval", "--labels", (dir / "labels.csv").string(), "--predictions",
                         (dir / "preds.csv").string()});
  REQUIRE(half.code == 0);
  CHECK(half.out.find("F1 (N, A, O mean) = 0.600") != std::string::npos);

  testing::write_file(dir / "short.csv", "A01,N\n");
  const auto bad = run_cli({"eval", "--labels", (dir / "labels.csv").string(), "--predictions",
                        (dir / "short.csv").string()});
  CHECK(bad.code != 0);
}

TEST_CASE("train and predict end to end") {
  testing::TempDir dir;
  save_config(small_config(), dir / "cfg.json");
  const auto d = [&](const std::string& n) { return (dir / n).string(); };
  std::filesystem::create_directories(dir / "data");
  std::string labels;
  struct Kind {
    const char* symbol;
    std::vector<std::string> synth;
  };
  const std::vector<Kind> kinds = {
      {"N", {"--bpm", "60", "--noise", "0.03"}},
      {"A", {"--bpm", "110", "--jitter", "0.25", "--noise", "0.03"}},
      {"O", {"--bpm", "160", "--width", "0.16", "--noise", "0.03"}},
      {"~", {"--amplitude", "0", "--noise", "0.3"}},
  };
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    for (int i = 0; i < 3; ++i) {
      const std::string id = "R" + std::to_string(k) + std::to_string(i);
      std::vector<std::string> args = {"--seed", std::to_string(10 * k + i), "synth", "--out", d("data/" + id + ".csv")};
      args.insert(args.end(), kinds[k].synth.begin(), kinds[k].synth.end());
      REQUIRE(run_cli(args).code == 0);
      labels += id + "," + kinds[k].symbol + "\n";
    }
  }
  testing::write_file(dir / "labels.csv", labels);

  const auto t1 = run_cli({"--config", d("cfg.json"), "train", "--data", d("data"), "--labels", d("labels.csv"), "--model",
                       d("m1.bin")});
  REQUIRE(t1.code == 0);
  CHECK(t1.out.find("dataset: 12 records") != std::string::npos);
  CHECK(t1.out.find("epoch 4/4") != std::string::npos);
  const auto t2 = run_cli({"--config", d("cfg.json"), "train", "--data", d("data"), "--labels", d("labels.csv"), "--model",
                       d("m2.bin")});
  REQUIRE(t2.code == 0);
  CHECK(t1.out == t2.out);
  CHECK(testing::read_file(dir / "m1.bin") == testing::read_file(dir / "m2.bin"));

  REQUIRE(run_cli({"--seed", "99", "synth", "--out", d("probe.csv")}).code == 0);
  const auto p1 = run_cli({"--config", d("cfg.json"), "predict", "--record", d("probe.csv"), "--model", d("m1.bin")});
  const auto p2 = run_cli({"--config", d("cfg.json"), "predict", "--record", d("probe.csv"), "--model", d("m1.bin")});
  REQUIRE(p1.code == 0);
  CHECK(p1.out == p2.out);
  CHECK(p1.out.size() == 2);
  CHECK(std::string("NAO~").find(p1.out[0]) != std::string::npos);

  // a noise-only record is gated to a black image, which the network must map somewhere valid
  const auto ev = run_cli({"--config", d("cfg.json"), "eval", "--labels", d("labels.csv"), "--data", d("data"), "--model",
                       d("m1.bin")});
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("true\\pred") != std::string::npos);
}

TEST_CASE("errors are one json line with the failing stage") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.csv", "1.0\nnot-a-number\n");
  const auto r = run_cli({"detect", "--in", (dir / "bad.csv").string(), "--out", (dir / "p.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  const auto j = nlohmann::json::parse(r.err);
  CHECK(j.at("stage") == "ingest");
  CHECK(j.at("type") == "FormatError");
  CHECK(j.at("error").get<std::string>().find("offset") != std::string::npos);

  const auto missing = run_cli({"detect", "--in", (dir / "absent.csv").string(), "--out", "x"});
  CHECK(missing.code == 2);
  CHECK(nlohmann::json::parse(missing.err).at("stage") == "cli");
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("the installed binary behaves like the library entry point") {
  testing::TempDir dir;
  const std::string exe = ECGTF_CLI_PATH;
  const auto err = dir / "err.txt";
  const std::string bad = exe + " preprocess --in " + (dir / "nope.csv").string() + " --out x 2> " + err.string();
  const int status = std::system(bad.c_str());
  CHECK(status != 0);
  CHECK(nlohmann::json::parse(read_text(err)).contains("error"));

  const std::string ok = exe + " synth --out " + (dir / "r.csv").string() + " > " + (dir / "o.txt").string();
  CHECK(std::system(ok.c_str()) == 0);
  CHECK(read_text(dir / "o.txt") == "30 beats\n");
}
