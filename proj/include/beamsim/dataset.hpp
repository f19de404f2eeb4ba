#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beamsim/channel.hpp"
#include "beamsim/common.hpp"
#include "beamsim/preprocess.hpp"
#include "beamsim/scene.hpp"

namespace beamsim::harness {

constexpr int kDatasetFormatVersion = 1;

/// One generated sample: the scene, its sensor observations, the
/// preprocessed representations and the power labels.
struct SampleRecord {
  uint64_t scene_id = 0;
  scene::Scene world;
  bool los = false;
  scene::GpsReading gps;
  std::optional<scene::PointCloud> cloud;  // stored only when configured
  preprocess::VoxelGrid voxel;
  std::optional<preprocess::BitMap> bitmap;  // absent for camera-less profiles
  channel::PowerMatrix power;
};

nlohmann::ordered_json record_to_json(const SampleRecord& rec);
SampleRecord record_from_json(const nlohmann::json& j);

struct SplitRange {
  int64_t begin = 0;
  int64_t end = 0;  // exclusive
  std::string checksum;

  int64_t count() const { return end - begin; }
};

struct Manifest {
  int format_version = kDatasetFormatVersion;
  std::string profile;
  uint64_t seed = 0;
  int64_t sample_count = 0;
  std::array<double, 3> split_fractions{0.73, 0.17, 0.10};
  SplitRange train;
  SplitRange val;
  SplitRange test;
  std::vector<uint64_t> skipped_scenes;  // ids dropped for lack of a link
  nlohmann::ordered_json config_echo;
};

nlohmann::ordered_json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest, hex-encoded.
std::string fnv1a_hex(std::string_view bytes);

/// Loaded dataset with contiguous split views.
struct Dataset {
  Manifest manifest;
  std::vector<SampleRecord> records;

  std::span<const SampleRecord> split(const SplitRange& r) const {
    return {records.data() + r.begin, static_cast<size_t>(r.count())};
  }
  std::span<const SampleRecord> train() const { return split(manifest.train); }
  std::span<const SampleRecord> val() const { return split(manifest.val); }
  std::span<const SampleRecord> test() const { return split(manifest.test); }
};

/// Writes samples.jsonl + manifest.json; the per-split checksums cover the
/// raw line bytes of each range.
void write_dataset(const std::filesystem::path& dir,
                   const std::vector<SampleRecord>& records, Manifest manifest);

/// Loads and verifies a dataset directory (format version and checksums).
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace beamsim::harness
