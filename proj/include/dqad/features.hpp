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

// Locally-aware patch feature maps: aggregation, upscaling, channel
// projection, labeled state extraction, synthetic datasets and the on-disk
// dataset format.

#ifndef DQAD_FEATURES_HPP_
#define DQAD_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dqad {

// Raw backbone output of one layer, channel-major (C x H x W).
struct LayerFeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  LayerFeatureMap() = default;
  LayerFeatureMap(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0f) {}

  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * height + h) * width + w];
  }
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * height + h) * width + w];
  }

  bool operator==(const LayerFeatureMap&) const = default;
};

// Per-position C-vectors (H x W x C, row-major, channel fastest) with a
// pixel-aligned {0,1} ground-truth mask.
struct AggregatedFeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> features;
  std::vector<std::uint8_t> mask;

  AggregatedFeatureMap() = default;
  AggregatedFeatureMap(std::size_t h, std::size_t w, std::size_t c)
      : height(h), width(w), channels(c), features(h * w * c, 0.0f), mask(h * w, 0) {}

  std::size_t positions() const { return height * width; }

  std::span<const float> position(std::size_t index) const {
    return {features.data() + index * channels, channels};
  }
  std::span<float> position(std::size_t index) {
    return {features.data() + index * channels, channels};
  }

  std::size_t PositiveCount() const;

  bool operator==(const AggregatedFeatureMap&) const = default;
};

struct LabeledFeature {
  std::vector<float> vector;
  std::uint8_t gt = 0;

  bool operator==(const LabeledFeature&) const = default;
};

// Mean over the p x p neighborhood of every position; border positions
// average over the part of the window inside the map. p must be odd.
LayerFeatureMap PatchAggregate(const LayerFeatureMap& map, std::size_t p);

// Channelwise bilinear interpolation with aligned corners: target pixel y
// samples source row y * (H_src - 1) / (H_dst - 1).
LayerFeatureMap UpscaleBilinear(const LayerFeatureMap& map, std::size_t height,
                                std::size_t width);

// Upscales each map to (height, width), concatenates channels in input order
// and reduces the concatenated vector to `target_channels` by averaging
// contiguous segments [floor(k*D/C), floor((k+1)*D/C)). The mask is zeroed.
AggregatedFeatureMap ConcatProject(std::span<const LayerFeatureMap> maps,
                                   std::size_t height, std::size_t width,
                                   std::size_t target_channels);

// Row-major (vector, gt) pairs.
std::vector<LabeledFeature> StatesFromMap(const AggregatedFeatureMap& map);

// ---------------------------------------------------------------------------
// Datasets

enum class ImageKind { kNormal, kAnomalous };
enum class Split { kTrain, kVal, kTest };

const char* ToString(ImageKind kind);
const char* ToString(Split split);
ImageKind ParseImageKind(std::string_view text);
Split ParseSplit(std::string_view text);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  ImageKind kind = ImageKind::kNormal;
  Split split = Split::kTrain;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
};

nlohmann::json ManifestToJson(const DatasetManifest& manifest);
DatasetManifest ManifestFromJson(const nlohmann::json& json, const std::string& source);

// Manifest entries and maps are index-aligned.
struct Dataset {
  DatasetManifest manifest;
  std::vector<AggregatedFeatureMap> maps;

  std::vector<std::size_t> Select(Split split, ImageKind kind) const;
  std::vector<std::size_t> Select(Split split) const;

  bool operator==(const Dataset&) const = default;
};

struct SynthSpec {
  std::size_t n_normal = 200;     // training split
  std::size_t n_anomalous = 10;   // training split (|D^a|)
  std::size_t test_normal = 40;
  std::size_t test_anomalous = 20;
  std::size_t H = 16;
  std::size_t W = 16;
  std::size_t C = 8;
  double mu_normal = 0.0;
  double mu_anomaly = 2.0;
  double sigma = 1.0;
  std::size_t blob_size = 4;
  std::uint64_t seed = 0;

  void Validate() const;
};

nlohmann::json SynthSpecToJson(const SynthSpec& spec);
SynthSpec SynthSpecFromJson(const nlohmann::json& json);

// Normal maps draw every position from N(mu_normal, sigma^2 I); anomalous maps
// additionally redraw a random blob_size x blob_size square from
// N(mu_anomaly, sigma^2 I) and mark it in the mask.
Dataset SynthGenerate(const SynthSpec& spec);

// Feature file layout (little endian):
//   "DQADFMAP" | u16 version | u32 H | u32 W | u32 C
//   | f32 features[H*W*C] | u8 mask[H*W]
inline constexpr std::uint16_t kFeatureFileVersion = 1;
inline constexpr const char* kManifestFileName = "manifest.json";

std::string EncodeFeatureMap(const AggregatedFeatureMap& map);
AggregatedFeatureMap DecodeFeatureMap(std::string_view bytes, const std::string& source);

void WriteFeatureMap(const std::filesystem::path& path, const AggregatedFeatureMap& map);
AggregatedFeatureMap ReadFeatureMap(const std::filesystem::path& path);

// Writes every map under `dir` plus manifest.json. Entry paths are taken
// from the manifest.
void WriteDataset(const Dataset& dataset, const std::filesystem::path& dir);

// Reads and validates a dataset: every file must exist, parse completely,
// match its manifest shape, and anomalous maps need a positive mask pixel.
// Nothing is returned on failure.
Dataset ReadDataset(const std::filesystem::path& dir);

}  // namespace dqad

#endif  // DQAD_FEATURES_HPP_
