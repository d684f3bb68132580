// Copyright (c) 2026, the m3i-lab authors
// SPDX-License-Identifier: Apache-2.0
#include "m3i/harness/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "m3i/binio.hpp"
#include "m3i/config_file.hpp"
#include "m3i/error.hpp"
#include "m3i/rng.hpp"

namespace m3i::harness {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kShapes = {"circle", "square",  "triangle", "cross",
                                          "diamond", "ring",   "hbar",     "checker"};
const std::vector<std::string> kColors = {"red",     "green", "blue",   "yellow",
                                          "magenta", "cyan",  "orange", "white"};
const double kPalette[8][3] = {
    {0.85, 0.15, 0.15}, {0.15, 0.75, 0.20}, {0.15, 0.25, 0.85}, {0.90, 0.85, 0.15},
    {0.80, 0.15, 0.80}, {0.15, 0.80, 0.80}, {0.95, 0.55, 0.10}, {0.95, 0.95, 0.95}};

double quantize8(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return std::round(v * 255.0) / 255.0;
}

// distance-based coverage in [0,1]; soft edge of about one pixel
double shape_alpha(int kind, double dx, double dy, double r) {
  const double soft = 1.0;
  auto edge = [&](double signed_dist) {
    return std::min(1.0, std::max(0.0, 0.5 - signed_dist / soft));
  };
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (kind) {
    case 0: return edge(std::hypot(dx, dy) - r);                       // circle
    case 1: return edge(std::max(ax, ay) - r * 0.9);                   // square
    case 2: {                                                          // triangle (up)
      const double d1 = dy - r * 0.8;
      const double d2 = -dy - r * 0.8 + 1.6 * ax;
      return edge(std::max(d1, d2) * 0.7);
    }
    case 3: {                                                          // cross
      const double bar = r * 0.34;
      const double d = std::min(std::max(ax - bar, ay - r), std::max(ay - bar, ax - r));
      return edge(d);
    }
    case 4: return edge((ax + ay) - r);                                // diamond
    case 5: {                                                          // ring
      const double d = std::abs(std::hypot(dx, dy) - r * 0.75) - r * 0.3;
      return edge(d);
    }
    case 6: return edge(std::max(ax - r, ay - r * 0.35));              // hbar
    case 7: {                                                          // checker
      if (std::max(ax, ay) > r) return edge(std::max(ax, ay) - r);
      const bool on = (dx >= 0.0) == (dy >= 0.0);
      return on ? 1.0 : 0.0;
    }
    default: return 0.0;
  }
}

}  // namespace

const std::vector<std::string>& shape_names() { return kShapes; }
const std::vector<std::string>& color_names() { return kColors; }

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::vector<std::string> v = {"<pad>", "a"};
    v.insert(v.end(), kColors.begin(), kColors.end());
    v.insert(v.end(), kShapes.begin(), kShapes.end());
    return v;
  }();
  return vocab;
}

int token_id(const std::string& word) {
  const auto& v = vocabulary();
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i] == word) return static_cast<int>(i);
  throw Error("word not in vocabulary: " + word);
}

core::Sample make_sample(const ShapesSpec& spec, int id) {
  if (spec.num_classes < 2 || spec.num_classes > static_cast<int>(kShapes.size()))
    throw ConfigInvalid("num_classes outside [2,8]");
  if (spec.palette < 1 || spec.palette > 8) throw ConfigInvalid("palette outside [1,8]");
  const int res = spec.resolution;
  Rng rng = derive_rng(spec.seed, static_cast<uint64_t>(id), 0x5a17);

  // background: bilinear value noise per channel around a random base color
  const int g = 5;
  double noise[3][g * g];
  double base[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.35 + 0.3 * rng.uniform();
    for (int i = 0; i < g * g; ++i) noise[c][i] = rng.uniform() - 0.5;
  }
  core::Image img(res, res, 3);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const double fy = static_cast<double>(y) / res * (g - 1);
      const double fx = static_cast<double>(x) / res * (g - 1);
      const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
      const double wy = fy - y0, wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double n00 = noise[c][y0 * g + x0];
        const double n01 = noise[c][y0 * g + std::min(x0 + 1, g - 1)];
        const double n10 = noise[c][std::min(y0 + 1, g - 1) * g + x0];
        const double n11 = noise[c][std::min(y0 + 1, g - 1) * g + std::min(x0 + 1, g - 1)];
        const double n = (1 - wy) * ((1 - wx) * n00 + wx * n01) + wy * ((1 - wx) * n10 + wx * n11);
        img.at(y, x, c) = base[c] + spec.texture_amp * n;
      }
    }

  const int cls = id % spec.num_classes;
  const int color = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(spec.palette)));
  const double r = res * rng.uniform(spec.shape_min, spec.shape_max);
  const double cx = res * (0.5 + 0.125 * (2.0 * rng.uniform() - 1.0));
  const double cy = res * (0.5 + 0.125 * (2.0 * rng.uniform() - 1.0));

  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const double a =
          spec.shape_contrast * shape_alpha(cls, x + 0.5 - cx, y + 0.5 - cy, r);
      if (a <= 0.0) continue;
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = (1.0 - a) * img.at(y, x, c) + a * kPalette[color][c];
    }
  for (double& v : img.data) v = quantize8(v);

  core::Sample s;
  s.id = id;
  s.image = std::move(img);
  s.category = cls;
  s.caption = std::vector<int>{token_id("a"), token_id(kColors[static_cast<size_t>(color)]),
                               token_id(kShapes[static_cast<size_t>(cls)])};
  return s;
}

Dataset build_dataset(const ShapesSpec& spec) {
  Dataset d;
  d.spec = spec;
  d.train.reserve(static_cast<size_t>(spec.train_size));
  d.val.reserve(static_cast<size_t>(spec.val_size));
  for (int i = 0; i < spec.train_size; ++i) d.train.push_back(make_sample(spec, i));
  for (int i = 0; i < spec.val_size; ++i) d.val.push_back(make_sample(spec, spec.train_size + i));
  return d;
}

void generate_shapes_dataset(const ShapesSpec& spec, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DiskWriteError("cannot create " + dir);

  std::ofstream meta(fs::path(dir) / "meta.txt");
  if (!meta) throw DiskWriteError("cannot write meta.txt");
  meta << "version = 1\n"
       << "num_classes = " << spec.num_classes << "\n"
       << "resolution = " << spec.resolution << "\n"
       << "palette = " << spec.palette << "\n"
       << "train_size = " << spec.train_size << "\n"
       << "val_size = " << spec.val_size << "\n"
       << "seed = " << spec.seed << "\n"
       << "texture_amp = " << spec.texture_amp << "\n"
       << "shape_contrast = " << spec.shape_contrast << "\n"
       << "shape_min = " << spec.shape_min << "\n"
       << "shape_max = " << spec.shape_max << "\n";
  {
    meta << "vocab = ";
    const auto& v = vocabulary();
    for (size_t i = 0; i < v.size(); ++i) meta << (i ? "," : "") << v[i];
    meta << "\n";
  }
  meta.close();

  std::ofstream rec(fs::path(dir) / "records.bin", std::ios::binary | std::ios::trunc);
  std::ofstream idx(fs::path(dir) / "index.tsv", std::ios::trunc);
  if (!rec || !idx) throw DiskWriteError("cannot write dataset records");
  idx << "id\tsplit\toffset\tlength\tcategory\tcaption\n";
  uint64_t offset = 0;
  const int total = spec.train_size + spec.val_size;
  for (int i = 0; i < total; ++i) {
    core::Sample s = make_sample(spec, i);
    std::ostringstream buf;
    write_u32(buf, static_cast<uint32_t>(s.image.h));
    write_u32(buf, static_cast<uint32_t>(s.image.w));
    write_u32(buf, static_cast<uint32_t>(s.image.c));
    for (double v : s.image.data)
      write_u8(buf, static_cast<uint8_t>(std::lround(v * 255.0)));
    const std::string bytes = buf.str();
    rec.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    idx << s.id << "\t" << (i < spec.train_size ? "train" : "val") << "\t" << offset << "\t"
        << bytes.size() << "\t" << *s.category << "\t";
    const auto& cap = *s.caption;
    for (size_t t = 0; t < cap.size(); ++t) idx << (t ? " " : "") << cap[t];
    idx << "\n";
    offset += bytes.size();
  }
  if (!rec || !idx) throw DiskWriteError("dataset write failed");
}

Dataset load_dataset(const std::string& dir) {
  ConfigFile meta = ConfigFile::parse_file((fs::path(dir) / "meta.txt").string());
  ShapesSpec spec;
  spec.num_classes = static_cast<int>(meta.get_i64("num_classes", 4));
  spec.resolution = static_cast<int>(meta.get_i64("resolution", 32));
  spec.palette = static_cast<int>(meta.get_i64("palette", 6));
  spec.train_size = static_cast<int>(meta.get_i64("train_size", 0));
  spec.val_size = static_cast<int>(meta.get_i64("val_size", 0));
  spec.seed = static_cast<uint64_t>(meta.get_i64("seed", 0));
  spec.texture_amp = meta.get_f64("texture_amp", 0.9);
  spec.shape_contrast = meta.get_f64("shape_contrast", 0.55);
  spec.shape_min = meta.get_f64("shape_min", 0.30);
  spec.shape_max = meta.get_f64("shape_max", 0.42);

  std::ifstream rec(fs::path(dir) / "records.bin", std::ios::binary);
  std::ifstream idx(fs::path(dir) / "index.tsv");
  if (!rec || !idx) throw Error("dataset not found in " + dir);

  Dataset d;
  d.spec = spec;
  std::string line;
  std::getline(idx, line);  // header
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int id;
    std::string split;
    uint64_t offset, length;
    int category;
    if (!(ls >> id >> split >> offset >> length >> category))
      throw Error("malformed index line: " + line);
    std::vector<int> caption;
    int tok;
    while (ls >> tok) caption.push_back(tok);

    rec.seekg(static_cast<std::streamoff>(offset));
    const uint32_t h = read_u32(rec), w = read_u32(rec), c = read_u32(rec);
    core::Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (double& v : img.data) v = static_cast<double>(read_u8(rec)) / 255.0;

    core::Sample s;
    s.id = id;
    s.image = std::move(img);
    s.category = category;
    s.caption = caption;
    (split == "train" ? d.train : d.val).push_back(std::move(s));
  }
  return d;
}

ShapesSpec shapes_spec_from_file(const std::string& path) {
  ConfigFile cf = ConfigFile::parse_file(path);
  static const std::vector<std::string> known = {
      "dataset.num_classes", "dataset.resolution", "dataset.palette",   "dataset.train_size",
      "dataset.val_size",    "dataset.seed",       "dataset.out_dir",   "dataset.texture_amp",
      "dataset.shape_contrast", "dataset.shape_min", "dataset.shape_max"};
  for (const auto& k : cf.keys()) {
    bool ok = false;
    for (const auto& kk : known) ok = ok || kk == k;
    if (!ok) throw ConfigInvalid("unknown dataset key '" + k + "'");
  }
  ShapesSpec spec;
  spec.num_classes = static_cast<int>(cf.get_i64("dataset.num_classes", spec.num_classes));
  spec.resolution = static_cast<int>(cf.get_i64("dataset.resolution", spec.resolution));
  spec.palette = static_cast<int>(cf.get_i64("dataset.palette", spec.palette));
  spec.train_size = static_cast<int>(cf.get_i64("dataset.train_size", spec.train_size));
  spec.val_size = static_cast<int>(cf.get_i64("dataset.val_size", spec.val_size));
  spec.seed = static_cast<uint64_t>(cf.get_i64("dataset.seed", static_cast<int64_t>(spec.seed)));
  spec.texture_amp = cf.get_f64("dataset.texture_amp", spec.texture_amp);
  spec.shape_contrast = cf.get_f64("dataset.shape_contrast", spec.shape_contrast);
  spec.shape_min = cf.get_f64("dataset.shape_min", spec.shape_min);
  spec.shape_max = cf.get_f64("dataset.shape_max", spec.shape_max);
  return spec;
}

}  // namespace m3i::harness
