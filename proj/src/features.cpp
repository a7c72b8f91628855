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

#include "dqad/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dqad/binary_io.hpp"
#include "dqad/error.hpp"
#include "dqad/random.hpp"

namespace dqad {

std::size_t AggregatedFeatureMap::PositiveCount() const {
  return static_cast<std::size_t>(std::count_if(
      mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

LayerFeatureMap PatchAggregate(const LayerFeatureMap& map, std::size_t p) {
  Require(p % 2 == 1, ErrorKind::kInput, "patch size must be odd");
  Require(map.data.size() == map.channels * map.height * map.width, ErrorKind::kInput,
          "layer map storage does not match its shape");
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(p / 2);
  const auto H = static_cast<std::ptrdiff_t>(map.height);
  const auto W = static_cast<std::ptrdiff_t>(map.width);
  LayerFeatureMap out(map.channels, map.height, map.width);
  for (std::size_t c = 0; c < map.channels; ++c) {
    for (std::ptrdiff_t h = 0; h < H; ++h) {
      const std::ptrdiff_t h0 = std::max<std::ptrdiff_t>(0, h - r);
      const std::ptrdiff_t h1 = std::min(H - 1, h + r);
      for (std::ptrdiff_t w = 0; w < W; ++w) {
        const std::ptrdiff_t w0 = std::max<std::ptrdiff_t>(0, w - r);
        const std::ptrdiff_t w1 = std::min(W - 1, w + r);
        double sum = 0.0;
        for (std::ptrdiff_t y = h0; y <= h1; ++y) {
          for (std::ptrdiff_t x = w0; x <= w1; ++x) sum += map.at(c, y, x);
        }
        const auto count = static_cast<double>((h1 - h0 + 1) * (w1 - w0 + 1));
        out.at(c, h, w) = static_cast<float>(sum / count);
      }
    }
  }
  return out;
}

LayerFeatureMap UpscaleBilinear(const LayerFeatureMap& map, std::size_t height,
                                std::size_t width) {
  Require(height >= map.height && width >= map.width, ErrorKind::kInput,
          "upscale target is smaller than the source map");
  Require(map.height > 0 && map.width > 0, ErrorKind::kInput, "empty source map");
  auto coord = [](std::size_t dst, std::size_t src_size, std::size_t dst_size) {
    if (src_size == 1 || dst_size == 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(src_size - 1) /
           static_cast<double>(dst_size - 1);
  };
  LayerFeatureMap out(map.channels, height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = coord(y, map.height, height);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, map.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = coord(x, map.width, width);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, map.width - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < map.channels; ++c) {
        const double v = (1.0 - fy) * ((1.0 - fx) * map.at(c, y0, x0) + fx * map.at(c, y0, x1)) +
                         fy * ((1.0 - fx) * map.at(c, y1, x0) + fx * map.at(c, y1, x1));
        out.at(c, y, x) = static_cast<float>(v);
      }
    }
  }
  return out;
}

AggregatedFeatureMap ConcatProject(std::span<const LayerFeatureMap> maps,
                                   std::size_t height, std::size_t width,
                                   std::size_t target_channels) {
  Require(!maps.empty(), ErrorKind::kInput, "no layer maps to concatenate");
  std::size_t total = 0;
  for (const auto& m : maps) total += m.channels;
  Require(target_channels > 0 && target_channels <= total, ErrorKind::kInput,
          "target dimension must be in [1, total channels]");

  std::vector<LayerFeatureMap> upscaled;
  upscaled.reserve(maps.size());
  for (const auto& m : maps) {
    upscaled.push_back(m.height == height && m.width == width
                           ? m
                           : UpscaleBilinear(m, height, width));
  }

  AggregatedFeatureMap out(height, width, target_channels);
  std::vector<double> concat(total);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      std::size_t k = 0;
      for (const auto& m : upscaled) {
        for (std::size_t c = 0; c < m.channels; ++c) concat[k++] = m.at(c, y, x);
      }
      std::span<float> dst = out.position(y * width + x);
      for (std::size_t s = 0; s < target_channels; ++s) {
        const std::size_t lo = s * total / target_channels;
        const std::size_t hi = (s + 1) * total / target_channels;
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += concat[i];
        dst[s] = static_cast<float>(sum / static_cast<double>(hi - lo));
      }
    }
  }
  return out;
}

std::vector<LabeledFeature> StatesFromMap(const AggregatedFeatureMap& map) {
  Require(map.mask.size() == map.positions(), ErrorKind::kInput,
          "mask is not aligned with the feature grid");
  Require(map.features.size() == map.positions() * map.channels, ErrorKind::kInput,
          "feature storage does not match its shape");
  std::vector<LabeledFeature> states;
  states.reserve(map.positions());
  for (std::size_t i = 0; i < map.positions(); ++i) {
    const auto v = map.position(i);
    states.push_back({std::vector<float>(v.begin(), v.end()),
                      static_cast<std::uint8_t>(map.mask[i] != 0)});
  }
  return states;
}

// ---------------------------------------------------------------------------

const char* ToString(ImageKind kind) {
  return kind == ImageKind::kNormal ? "normal" : "anomalous";
}

const char* ToString(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

ImageKind ParseImageKind(std::string_view text) {
  if (text == "normal") return ImageKind::kNormal;
  if (text == "anomalous") return ImageKind::kAnomalous;
  Fail(ErrorKind::kParse, "unknown image kind \"" + std::string(text) + "\"");
}

Split ParseSplit(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  Fail(ErrorKind::kParse, "unknown split \"" + std::string(text) + "\"");
}

nlohmann::json ManifestToJson(const DatasetManifest& manifest) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"kind", ToString(e.kind)},
                       {"split", ToString(e.split)},
                       {"H", e.height},
                       {"W", e.width},
                       {"C", e.channels}});
  }
  return {{"format", "DQADFMAP"}, {"version", kFeatureFileVersion}, {"entries", entries}};
}

DatasetManifest ManifestFromJson(const nlohmann::json& json, const std::string& source) {
  DatasetManifest manifest;
  try {
    for (const auto& e : json.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.kind = ParseImageKind(e.at("kind").get<std::string>());
      entry.split = ParseSplit(e.at("split").get<std::string>());
      entry.height = e.at("H").get<std::size_t>();
      entry.width = e.at("W").get<std::size_t>();
      entry.channels = e.at("C").get<std::size_t>();
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorKind::kParse, source + ": malformed manifest: " + ex.what());
  } catch (const Error& ex) {
    Fail(ErrorKind::kParse, source + ": " + ex.what());
  }
  return manifest;
}

std::vector<std::size_t> Dataset::Select(Split split, ImageKind kind) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == split && manifest.entries[i].kind == kind) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<std::size_t> Dataset::Select(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == split) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

void SynthSpec::Validate() const {
  Require(H > 0 && W > 0 && C > 0, ErrorKind::kConfig, "synth dimensions must be positive");
  Require(blob_size >= 1 && blob_size < std::min(H, W), ErrorKind::kConfig,
          "blob_size must be in [1, min(H, W))");
  Require(n_anomalous >= 1, ErrorKind::kConfig, "synth needs n_anomalous >= 1");
  Require(n_normal >= 1, ErrorKind::kConfig, "synth needs n_normal >= 1");
  Require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::kConfig,
          "sigma must be finite and >= 0");
  Require(std::isfinite(mu_normal) && std::isfinite(mu_anomaly), ErrorKind::kConfig,
          "means must be finite");
}

nlohmann::json SynthSpecToJson(const SynthSpec& s) {
  return {{"n_normal", s.n_normal},     {"n_anomalous", s.n_anomalous},
          {"test_normal", s.test_normal}, {"test_anomalous", s.test_anomalous},
          {"H", s.H},                     {"W", s.W},
          {"C", s.C},                     {"mu_normal", s.mu_normal},
          {"mu_anomaly", s.mu_anomaly},   {"sigma", s.sigma},
          {"blob_size", s.blob_size},     {"seed", s.seed}};
}

SynthSpec SynthSpecFromJson(const nlohmann::json& json) {
  SynthSpec s;
  Require(json.is_object(), ErrorKind::kConfig, "synth config must be a JSON object");
  try {
    for (const auto& [key, value] : json.items()) {
      if (key == "n_normal") s.n_normal = value.get<std::size_t>();
      else if (key == "n_anomalous") s.n_anomalous = value.get<std::size_t>();
      else if (key == "test_normal") s.test_normal = value.get<std::size_t>();
      else if (key == "test_anomalous") s.test_anomalous = value.get<std::size_t>();
      else if (key == "H") s.H = value.get<std::size_t>();
      else if (key == "W") s.W = value.get<std::size_t>();
      else if (key == "C") s.C = value.get<std::size_t>();
      else if (key == "mu_normal") s.mu_normal = value.get<double>();
      else if (key == "mu_anomaly") s.mu_anomaly = value.get<double>();
      else if (key == "sigma") s.sigma = value.get<double>();
      else if (key == "blob_size") s.blob_size = value.get<std::size_t>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else Fail(ErrorKind::kConfig, "unknown synth key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorKind::kConfig, std::string("bad synth config value: ") + ex.what());
  }
  return s;
}

Dataset SynthGenerate(const SynthSpec& spec) {
  spec.Validate();
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset dataset;

  auto make = [&](Split split, ImageKind kind, std::size_t index) {
    AggregatedFeatureMap map(spec.H, spec.W, spec.C);
    for (float& v : map.features) {
      v = static_cast<float>(spec.mu_normal + spec.sigma * noise(rng));
    }
    if (kind == ImageKind::kAnomalous) {
      const std::size_t top = UniformIndex(rng, spec.H - spec.blob_size + 1);
      const std::size_t left = UniformIndex(rng, spec.W - spec.blob_size + 1);
      for (std::size_t y = top; y < top + spec.blob_size; ++y) {
        for (std::size_t x = left; x < left + spec.blob_size; ++x) {
          const std::size_t pos = y * spec.W + x;
          for (float& v : map.position(pos)) {
            v = static_cast<float>(spec.mu_anomaly + spec.sigma * noise(rng));
          }
          map.mask[pos] = 1;
        }
      }
    }
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%s_%04zu.fmap", ToString(split),
                  ToString(kind), index);
    dataset.manifest.entries.push_back({name, kind, split, spec.H, spec.W, spec.C});
    dataset.maps.push_back(std::move(map));
  };

  for (std::size_t i = 0; i < spec.n_normal; ++i) make(Split::kTrain, ImageKind::kNormal, i);
  for (std::size_t i = 0; i < spec.n_anomalous; ++i) make(Split::kTrain, ImageKind::kAnomalous, i);
  for (std::size_t i = 0; i < spec.test_normal; ++i) make(Split::kTest, ImageKind::kNormal, i);
  for (std::size_t i = 0; i < spec.test_anomalous; ++i) make(Split::kTest, ImageKind::kAnomalous, i);
  return dataset;
}

// ---------------------------------------------------------------------------

std::string EncodeFeatureMap(const AggregatedFeatureMap& map) {
  Require(map.features.size() == map.positions() * map.channels &&
              map.mask.size() == map.positions(),
          ErrorKind::kInput, "feature map storage does not match its shape");
  io::ByteWriter w;
  w.Bytes("DQADFMAP");
  w.Scalar(kFeatureFileVersion);
  w.Scalar(static_cast<std::uint32_t>(map.height));
  w.Scalar(static_cast<std::uint32_t>(map.width));
  w.Scalar(static_cast<std::uint32_t>(map.channels));
  w.Array<float>(map.features);
  w.Array<std::uint8_t>(map.mask);
  return w.buffer();
}

AggregatedFeatureMap DecodeFeatureMap(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.ExpectMagic("DQADFMAP");
  const auto version = r.Scalar<std::uint16_t>("version");
  if (version != kFeatureFileVersion) {
    r.FailAt("unsupported feature file version " + std::to_string(version));
  }
  const auto h = r.Scalar<std::uint32_t>("H");
  const auto w = r.Scalar<std::uint32_t>("W");
  const auto c = r.Scalar<std::uint32_t>("C");
  if (h == 0 || w == 0 || c == 0) r.FailAt("zero dimension in header");
  const std::size_t expected = static_cast<std::size_t>(h) * w * (c * sizeof(float) + 1);
  if (bytes.size() - r.offset() < expected) r.FailAt("truncated payload");
  AggregatedFeatureMap map(h, w, c);
  r.Array<float>(map.features, "features");
  r.Array<std::uint8_t>(map.mask, "mask");
  r.ExpectEnd();
  for (std::uint8_t m : map.mask) {
    if (m > 1) r.FailAt("mask value outside {0,1}");
  }
  return map;
}

void WriteFeatureMap(const std::filesystem::path& path, const AggregatedFeatureMap& map) {
  io::WriteFileAtomic(path, EncodeFeatureMap(map));
}

AggregatedFeatureMap ReadFeatureMap(const std::filesystem::path& path) {
  return DecodeFeatureMap(io::ReadFile(path), path.string());
}

namespace {

void CheckEntryPath(const std::string& path) {
  const std::filesystem::path p(path);
  Require(!path.empty() && p.is_relative(), ErrorKind::kValidation,
          "manifest path must be relative: \"" + path + "\"");
  for (const auto& part : p) {
    Require(part != "..", ErrorKind::kValidation,
            "manifest path escapes the dataset directory: " + path);
  }
}

}  // namespace

void WriteDataset(const Dataset& dataset, const std::filesystem::path& dir) {
  Require(dataset.maps.size() == dataset.manifest.entries.size(), ErrorKind::kInput,
          "manifest and maps differ in length");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + dir.string());
  for (std::size_t i = 0; i < dataset.maps.size(); ++i) {
    const ManifestEntry& e = dataset.manifest.entries[i];
    const AggregatedFeatureMap& m = dataset.maps[i];
    CheckEntryPath(e.path);
    Require(e.height == m.height && e.width == m.width && e.channels == m.channels,
            ErrorKind::kInput, "manifest shape does not match map for " + e.path);
    const std::filesystem::path target = dir / e.path;
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path(), ec);
    WriteFeatureMap(target, m);
  }
  io::WriteFileAtomic(dir / kManifestFileName,
                      ManifestToJson(dataset.manifest).dump(2) + "\n");
}

Dataset ReadDataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / kManifestFileName;
  Require(std::filesystem::exists(manifest_path), ErrorKind::kValidation,
          "missing manifest: " + manifest_path.string());
  nlohmann::json json;
  try {
    json = nlohmann::json::parse(io::ReadFile(manifest_path));
  } catch (const nlohmann::json::parse_error& ex) {
    Fail(ErrorKind::kParse, manifest_path.string() + ": " + ex.what());
  }
  Dataset dataset;
  dataset.manifest = ManifestFromJson(json, manifest_path.string());
  Require(!dataset.manifest.entries.empty(), ErrorKind::kValidation,
          manifest_path.string() + ": manifest lists no entries");

  for (const ManifestEntry& e : dataset.manifest.entries) {
    CheckEntryPath(e.path);
    const std::filesystem::path file = dir / e.path;
    Require(std::filesystem::is_regular_file(file), ErrorKind::kValidation,
            "missing feature file: " + file.string());
    AggregatedFeatureMap map = ReadFeatureMap(file);
    Require(map.height == e.height && map.width == e.width && map.channels == e.channels,
            ErrorKind::kValidation,
            file.string() + ": header shape does not match manifest");
    Require(e.kind != ImageKind::kAnomalous || map.PositiveCount() > 0,
            ErrorKind::kValidation,
            file.string() + ": anomalous image has an empty mask");
    Require(std::all_of(map.features.begin(), map.features.end(),
                        [](float v) { return std::isfinite(v); }),
            ErrorKind::kValidation, file.string() + ": non-finite feature value");
    dataset.maps.push_back(std::move(map));
  }
  const std::size_t channels = dataset.maps.front().channels;
  for (std::size_t i = 0; i < dataset.maps.size(); ++i) {
    Require(dataset.maps[i].channels == channels, ErrorKind::kValidation,
            (dir / dataset.manifest.entries[i].path).string() +
                ": feature dimension differs from the rest of the dataset");
  }
  return dataset;
}

}  // namespace dqad
