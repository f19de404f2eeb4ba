#include "beamsim/dataset.hpp"

#include <fstream>
#include <sstream>

namespace beamsim::harness {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json vec3_to_json(const Vec3& v) {
  return ordered_json::array({v.x, v.y, v.z});
}

Vec3 vec3_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

ordered_json vehicle_to_json(const scene::VehicleInstance& v) {
  ordered_json j;
  j["type"] = scene::to_string(v.type);
  j["center"] = vec3_to_json(v.center);
  j["heading"] = v.heading;
  j["dims"] = vec3_to_json(v.dims);
  return j;
}

scene::VehicleInstance vehicle_from_json(const json& j) {
  scene::VehicleInstance v;
  v.type = scene::vehicle_type_from_string(j.at("type").get<std::string>());
  v.center = vec3_from_json(j.at("center"));
  v.heading = j.at("heading").get<double>();
  v.dims = vec3_from_json(j.at("dims"));
  return v;
}

// Run-length encoding of the nonzero cells over the flattened grid.
ordered_json rle_encode(const std::vector<int8_t>& cells) {
  ordered_json runs = ordered_json::array();
  size_t i = 0;
  while (i < cells.size()) {
    if (cells[i] == 0) {
      ++i;
      continue;
    }
    const size_t start = i;
    const int8_t value = cells[i];
    while (i < cells.size() && cells[i] == value) ++i;
    runs.push_back(ordered_json::array(
        {start, i - start, static_cast<int>(value)}));
  }
  return runs;
}

std::vector<int8_t> rle_decode(const json& runs, int64_t cell_count) {
  std::vector<int8_t> cells(cell_count, 0);
  for (const auto& run : runs) {
    const int64_t start = run.at(0).get<int64_t>();
    const int64_t length = run.at(1).get<int64_t>();
    const int value = run.at(2).get<int>();
    if (start < 0 || length < 0 || start + length > cell_count) {
      throw DataError("voxel run outside the grid");
    }
    std::fill_n(cells.begin() + start, length, static_cast<int8_t>(value));
  }
  return cells;
}

ordered_json split_to_json(const SplitRange& r) {
  ordered_json j;
  j["begin"] = r.begin;
  j["end"] = r.end;
  j["checksum"] = r.checksum;
  return j;
}

SplitRange split_from_json(const json& j) {
  SplitRange r;
  r.begin = j.at("begin").get<int64_t>();
  r.end = j.at("end").get<int64_t>();
  r.checksum = j.at("checksum").get<std::string>();
  return r;
}

}  // namespace

ordered_json record_to_json(const SampleRecord& rec) {
  ordered_json j;
  j["scene_id"] = rec.scene_id;

  ordered_json world;
  world["bs"] = vec3_to_json(rec.world.bs_position);
  world["receiver"] = vehicle_to_json(rec.world.receiver);
  ordered_json obstacles = ordered_json::array();
  for (const auto& o : rec.world.obstacles) obstacles.push_back(vehicle_to_json(o));
  world["obstacles"] = obstacles;
  j["scene"] = world;

  j["los"] = rec.los;
  j["gps"] = ordered_json::array({rec.gps.latitude_like, rec.gps.longitude_like});

  if (rec.cloud.has_value()) {
    ordered_json points = ordered_json::array();
    for (const Vec3& p : rec.cloud->points) points.push_back(vec3_to_json(p));
    j["lidar_points"] = points;
  }

  ordered_json voxel;
  voxel["shape"] = rec.voxel.shape;
  voxel["rle"] = rle_encode(rec.voxel.cells);
  j["voxel"] = voxel;

  if (rec.bitmap.has_value()) {
    ordered_json bm;
    bm["rows"] = rec.bitmap->rows;
    bm["cols"] = rec.bitmap->cols;
    bm["window"] = rec.bitmap->window;
    bm["stride"] = rec.bitmap->stride;
    bm["labels"] = rec.bitmap->labels;
    j["bitmap"] = bm;
  }

  ordered_json power;
  power["m"] = rec.power.m;
  power["n"] = rec.power.n;
  power["y"] = rec.power.y;
  power["best_pair"] = rec.power.best_pair;
  j["power"] = power;
  return j;
}

SampleRecord record_from_json(const json& j) {
  SampleRecord rec;
  rec.scene_id = j.at("scene_id").get<uint64_t>();

  const auto& world = j.at("scene");
  rec.world.scene_id = rec.scene_id;
  rec.world.bs_position = vec3_from_json(world.at("bs"));
  rec.world.receiver = vehicle_from_json(world.at("receiver"));
  for (const auto& o : world.at("obstacles")) {
    rec.world.obstacles.push_back(vehicle_from_json(o));
  }

  rec.los = j.at("los").get<bool>();
  rec.gps.latitude_like = j.at("gps").at(0).get<double>();
  rec.gps.longitude_like = j.at("gps").at(1).get<double>();

  if (j.contains("lidar_points")) {
    scene::PointCloud cloud;
    for (const auto& p : j.at("lidar_points")) {
      cloud.points.push_back(vec3_from_json(p));
    }
    rec.cloud = std::move(cloud);
  }

  const auto& voxel = j.at("voxel");
  for (int i = 0; i < 3; ++i) {
    rec.voxel.shape[i] = voxel.at("shape").at(i).get<int64_t>();
  }
  rec.voxel.cells = rle_decode(voxel.at("rle"), rec.voxel.cell_count());

  if (j.contains("bitmap")) {
    preprocess::BitMap bm;
    bm.rows = j.at("bitmap").at("rows").get<int64_t>();
    bm.cols = j.at("bitmap").at("cols").get<int64_t>();
    bm.window = j.at("bitmap").at("window").get<int>();
    bm.stride = j.at("bitmap").at("stride").get<int>();
    bm.labels = j.at("bitmap").at("labels").get<std::vector<int>>();
    if (static_cast<int64_t>(bm.labels.size()) != bm.rows * bm.cols) {
      throw DataError("bitmap labels do not match its shape");
    }
    rec.bitmap = std::move(bm);
  }

  const auto& power = j.at("power");
  rec.power.m = power.at("m").get<int64_t>();
  rec.power.n = power.at("n").get<int64_t>();
  rec.power.y = power.at("y").get<std::vector<double>>();
  rec.power.best_pair = {power.at("best_pair").at(0).get<int64_t>(),
                         power.at("best_pair").at(1).get<int64_t>()};
  if (static_cast<int64_t>(rec.power.y.size()) != rec.power.m * rec.power.n) {
    throw DataError("power matrix does not match its shape");
  }
  return rec;
}

ordered_json manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["profile"] = m.profile;
  j["seed"] = m.seed;
  j["sample_count"] = m.sample_count;
  j["split_fractions"] = m.split_fractions;
  j["splits"] = {{"train", split_to_json(m.train)},
                 {"val", split_to_json(m.val)},
                 {"test", split_to_json(m.test)}};
  j["skipped_scenes"] = m.skipped_scenes;
  j["config_echo"] = m.config_echo;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kDatasetFormatVersion) {
    throw DataError("unsupported dataset format version " +
                    std::to_string(m.format_version));
  }
  m.profile = j.at("profile").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.sample_count = j.at("sample_count").get<int64_t>();
  for (int i = 0; i < 3; ++i) {
    m.split_fractions[i] = j.at("split_fractions").at(i).get<double>();
  }
  m.train = split_from_json(j.at("splits").at("train"));
  m.val = split_from_json(j.at("splits").at("val"));
  m.test = split_from_json(j.at("splits").at("test"));
  m.skipped_scenes = j.at("skipped_scenes").get<std::vector<uint64_t>>();
  m.config_echo = j.at("config_echo");
  return m;
}

std::string fnv1a_hex(std::string_view bytes) {
  uint64_t hash = 0xCBF29CE484222325ull;
  for (const char c : bytes) {
    hash ^= static_cast<uint8_t>(c);
    hash *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

void write_dataset(const std::filesystem::path& dir,
                   const std::vector<SampleRecord>& records, Manifest manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);

  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const SampleRecord& rec : records) {
    lines.push_back(record_to_json(rec).dump() + "\n");
  }

  auto range_checksum = [&](const SplitRange& r) {
    std::string bytes;
    for (int64_t i = r.begin; i < r.end; ++i) bytes += lines[i];
    return fnv1a_hex(bytes);
  };
  manifest.sample_count = static_cast<int64_t>(records.size());
  manifest.train.checksum = range_checksum(manifest.train);
  manifest.val.checksum = range_checksum(manifest.val);
  manifest.test.checksum = range_checksum(manifest.test);

  const auto samples_path = dir / "samples.jsonl";
  std::ofstream samples(samples_path, std::ios::binary);
  if (!samples) throw DataError("cannot write " + samples_path.string());
  for (const std::string& line : lines) samples << line;
  samples.close();
  if (!samples) throw DataError("failed writing " + samples_path.string());

  const auto manifest_path = dir / "manifest.json";
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw DataError("cannot write " + manifest_path.string());
  mf << manifest_to_json(manifest).dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw DataError("cannot open " + manifest_path.string());
  json mj;
  mf >> mj;

  Dataset ds;
  ds.manifest = manifest_from_json(mj);

  const auto samples_path = dir / "samples.jsonl";
  std::ifstream samples(samples_path, std::ios::binary);
  if (!samples) throw DataError("cannot open " + samples_path.string());

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(samples, line)) lines.push_back(line + "\n");
  if (static_cast<int64_t>(lines.size()) != ds.manifest.sample_count) {
    throw DataError("sample count does not match the manifest");
  }

  auto verify = [&](const SplitRange& r, const char* name) {
    std::string bytes;
    for (int64_t i = r.begin; i < r.end; ++i) bytes += lines[i];
    if (fnv1a_hex(bytes) != r.checksum) {
      throw DataError(std::string("checksum mismatch for the ") + name +
                      " split");
    }
  };
  verify(ds.manifest.train, "train");
  verify(ds.manifest.val, "val");
  verify(ds.manifest.test, "test");

  ds.records.reserve(lines.size());
  for (const std::string& l : lines) {
    ds.records.push_back(record_from_json(json::parse(l)));
  }
  return ds;
}

}  // namespace beamsim::harness
