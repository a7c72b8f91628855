// Copyright 2026 The DQAD Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dqad/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dqad/binary_io.hpp"
#include "dqad/features.hpp"
#include "dqad/metrics.hpp"
#include "dqad/qnet.hpp"
#include "dqad/trainer.hpp"
#include "json.hpp"

namespace dqad::cli {
namespace fs = std::filesystem;
using nlohmann::json;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kInput:
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kIo:
      return kExitData;
    case ErrorKind::kState:
    case ErrorKind::kNumeric:
    case ErrorKind::kUndefinedMetric:
      return kExitRuntime;
  }
  return kExitRuntime;
}

namespace {

std::string Hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json ReadConfigFile(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::is_regular_file(path)) Fail(ErrorKind::kConfig, "config file not found: " + path);
  try {
    json j = json::parse(io::ReadFile(path));
    Require(j.is_object(), ErrorKind::kConfig, path + ": config must be a JSON object");
    return j;
  } catch (const json::parse_error& ex) {
    Fail(ErrorKind::kConfig, path + ": " + ex.what());
  }
}

// Flag values are JSON literals when they parse as such, strings otherwise.
json FlagValue(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create output directory " + dir.string());
}

void WriteJson(const fs::path& path, const json& j) {
  io::WriteFileAtomic(path, j.dump(2) + "\n");
}

Split SplitFromFlag(const std::string& text) {
  try {
    return ParseSplit(text);
  } catch (const Error&) {
    Fail(ErrorKind::kConfig, "unknown split \"" + text + "\"");
  }
}

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  std::string per;
  std::string bs;
  std::map<std::string, std::string> overrides;
};

int RunSynth(const Options& o, std::ostream& out) {
  json spec_json = ReadConfigFile(o.config);
  if (o.seed) spec_json["seed"] = *o.seed;
  const SynthSpec spec = SynthSpecFromJson(spec_json);
  const Dataset dataset = SynthGenerate(spec);
  WriteDataset(dataset, o.out);
  out << "synth: wrote " << dataset.maps.size() << " maps ("
      << dataset.Select(Split::kTrain, ImageKind::kAnomalous).size()
      << " labeled anomalous) to " << o.out << "\n";
  return kExitOk;
}

int RunValidate(const Options& o, std::ostream& out, std::ostream& err) {
  json report;
  int code = kExitOk;
  try {
    const Dataset dataset = ReadDataset(o.data);
    report = {{"valid", true}, {"entries", dataset.maps.size()}};
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      report["splits"][ToString(s)] = {
          {"normal", dataset.Select(s, ImageKind::kNormal).size()},
          {"anomalous", dataset.Select(s, ImageKind::kAnomalous).size()}};
    }
    out << "validate: ok, " << dataset.maps.size() << " entries in " << o.data << "\n";
  } catch (const Error& e) {
    report = {{"valid", false}, {"error", e.what()}, {"kind", ErrorKindName(e.kind())}};
    err << "validate: " << e.what() << "\n";
    code = ExitCodeFor(e.kind());
  }
  if (!o.out.empty()) {
    EnsureDir(o.out);
    WriteJson(fs::path(o.out) / "validation_report.json", report);
  }
  return code;
}

int RunTrain(const Options& o, std::ostream& out) {
  json merged = ConfigToJson(TrainConfig{});
  merged.update(ReadConfigFile(o.config));
  for (const auto& [key, value] : o.overrides) merged[key] = FlagValue(value);
  if (o.seed) merged["seed"] = *o.seed;
  if (!o.per.empty()) merged["per_enabled"] = o.per == "on";
  if (!o.bs.empty()) merged["bs_enabled"] = o.bs == "on";
  const TrainConfig config = ConfigFromJson(merged);
  config.Validate();

  const Dataset dataset = ReadDataset(o.data);
  EnsureDir(o.out);
  const TrainResult result = Train(dataset, config);

  const fs::path dir(o.out);
  const std::string ckpt = EncodeCheckpoint(result.net, result.optimizer.accumulators);
  io::WriteFileAtomic(dir / "checkpoint.dqck", ckpt);
  io::WriteFileAtomic(dir / "run_log.jsonl", RunLogToJsonLines(result.log));
  WriteJson(dir / "config.json", ConfigToJson(config));
  const std::string digest = Hex64(Fnv1a(ckpt));
  WriteJson(dir / "train_summary.json",
            {{"steps", result.log.steps.size()},
             {"updates", result.log.updates},
             {"syncs", result.log.syncs},
             {"resamples", result.log.resamples},
             {"episodes", result.log.episodes},
             {"seen_anomalies", dataset.Select(Split::kTrain, ImageKind::kAnomalous).size()},
             {"checkpoint_digest", digest}});
  out << "train: " << result.log.steps.size() << " steps, " << result.log.updates
      << " updates, checkpoint " << (dir / "checkpoint.dqck").string() << " digest " << digest
      << "\n";
  return kExitOk;
}

int RunScore(const Options& o, std::ostream& out) {
  const Split split = SplitFromFlag(o.split);
  const Checkpoint ckpt = LoadCheckpoint(o.checkpoint);
  const Dataset dataset = ReadDataset(o.data);
  const auto indices = dataset.Select(split);
  Require(!indices.empty(), ErrorKind::kValidation,
          o.data + ": no " + ToString(split) + " images to score");
  Dataset scores;
  for (std::size_t idx : indices) {
    const AggregatedFeatureMap& source = dataset.maps[idx];
    const ScoreMap map = ComputeScoreMap(ckpt.net, source);
    AggregatedFeatureMap encoded(source.height, source.width, 1);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
      encoded.features[i] = static_cast<float>(map.values[i]);
    }
    encoded.mask = source.mask;
    ManifestEntry entry = dataset.manifest.entries[idx];
    entry.channels = 1;
    scores.manifest.entries.push_back(entry);
    scores.maps.push_back(std::move(encoded));
  }
  EnsureDir(o.out);
  WriteDataset(scores, o.out);
  out << "score: wrote " << scores.maps.size() << " score maps to " << o.out << "\n";
  return kExitOk;
}

int RunEval(const Options& o, std::ostream& out) {
  const Split split = SplitFromFlag(o.split);
  const Checkpoint ckpt = LoadCheckpoint(o.checkpoint);
  const Dataset dataset = ReadDataset(o.data);
  const MetricsReport report = Evaluate(ckpt.net, dataset, split);
  json j = ReportToJson(report);
  j["split"] = ToString(split);
  j["seen_anomalies"] = dataset.Select(Split::kTrain, ImageKind::kAnomalous).size();
  EnsureDir(o.out);
  WriteJson(fs::path(o.out) / "eval_report.json", j);
  out << "eval: I-AUROC " << report.image.auroc << " P-AUROC " << report.pixel.auroc
      << " P-DICE " << report.pixel.max_dice << " -> "
      << (fs::path(o.out) / "eval_report.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep Q-learning anomaly detection over patch feature maps", "dqad"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic feature-map dataset");
  synth->add_option("--config", o.config, "Synthetic dataset spec (JSON)");
  synth->add_option("--out", o.out, "Dataset output directory")->required();
  synth->add_option("--seed", o.seed, "Override the generator seed");

  auto* validate = app.add_subcommand("validate", "Check a dataset directory");
  validate->add_option("--data", o.data, "Dataset directory")->required();
  validate->add_option("--out", o.out, "Directory for validation_report.json");
  validate->add_option("--config", o.config, "Unused; accepted for uniformity");

  auto* train = app.add_subcommand("train", "Train the Q-network agent");
  train->add_option("--data", o.data, "Dataset directory")->required();
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--config", o.config, "Training config (JSON)");
  train->add_option("--seed", o.seed, "Random seed");
  train->add_option("--per", o.per, "Prioritized replay")->check(CLI::IsMember({"on", "off"}));
  train->add_option("--bs", o.bs, "Boundary selection")->check(CLI::IsMember({"on", "off"}));
  const json defaults = ConfigToJson(TrainConfig{});
  for (const auto& item : defaults.items()) {
    const std::string name = item.key();
    if (name == "seed") continue;
    train->add_option_function<std::string>(
        "--" + name, [&o, name](const std::string& v) { o.overrides[name] = v; },
        "Override config key " + name);
  }

  auto* score = app.add_subcommand("score", "Write per-image anomaly score maps");
  score->add_option("--data", o.data, "Dataset directory")->required();
  score->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  score->add_option("--out", o.out, "Output directory")->required();
  score->add_option("--split", o.split, "Split to score (default test)");
  score->add_option("--config", o.config, "Unused; accepted for uniformity");

  auto* eval = app.add_subcommand("eval", "Compute detection metrics");
  eval->add_option("--data", o.data, "Dataset directory")->required();
  eval->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required();
  eval->add_option("--out", o.out, "Output directory")->required();
  eval->add_option("--split", o.split, "Split to evaluate (default test)");
  eval->add_option("--config", o.config, "Unused; accepted for uniformity");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitConfig;
  }

  try {
    if (*synth) return RunSynth(o, out);
    if (*validate) return RunValidate(o, out, err);
    if (*train) return RunTrain(o, out);
    if (*score) return RunScore(o, out);
    if (*eval) return RunEval(o, out);
  } catch (const Error& e) {
    err << "dqad: " << ErrorKindName(e.kind()) << ": " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    err << "dqad: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace dqad::cli
