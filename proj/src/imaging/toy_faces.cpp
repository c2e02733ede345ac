#include "crsr/toy_faces.hpp"

#include "crsr/error.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace crsr {

namespace fs = std::filesystem;

namespace {

using Color = std::array<double, 3>;

struct Identity {
  Color skin;
  Color hair;
  Color iris;
  Color lips;
  double face_rx;
  double face_ry;
  double eye_dx;
  double eye_y;
  double eye_rx;
  double eye_ry;
  double brow_thickness;
  double nose_length;
  double mouth_y;
  double mouth_w;
  double fringe;
};

struct Variation {
  Color background;
  Color background_bottom;
  double cx;
  double cy;
  double scale;
  double tilt;
  double light_angle;
  double light_strength;
  double smile;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Color random_color(std::mt19937_64& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

Identity make_identity(uint64_t seed, int id) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(id) * 7919ULL + 1);
  Identity p{};
  const double tone = uniform(rng, 0.35, 0.95);
  p.skin = {tone, tone * uniform(rng, 0.7, 0.85), tone * uniform(rng, 0.5, 0.7)};
  p.hair = random_color(rng, 0.02, 0.6);
  p.iris = random_color(rng, 0.05, 0.6);
  p.lips = {uniform(rng, 0.5, 0.85), uniform(rng, 0.15, 0.35), uniform(rng, 0.2, 0.4)};
  p.face_rx = uniform(rng, 15.0, 20.0);
  p.face_ry = uniform(rng, 19.0, 24.0);
  p.eye_dx = uniform(rng, 6.5, 9.5);
  p.eye_y = uniform(rng, -6.0, -2.0);
  p.eye_rx = uniform(rng, 2.5, 4.0);
  p.eye_ry = uniform(rng, 1.5, 2.5);
  p.brow_thickness = uniform(rng, 0.8, 2.0);
  p.nose_length = uniform(rng, 5.0, 9.0);
  p.mouth_y = uniform(rng, 9.0, 13.0);
  p.mouth_w = uniform(rng, 4.0, 8.0);
  p.fringe = uniform(rng, 3.0, 9.0);
  return p;
}

Variation make_variation(std::mt19937_64& rng) {
  Variation v{};
  v.background = random_color(rng, 0.1, 0.9);
  v.background_bottom = random_color(rng, 0.1, 0.9);
  v.cx = 32.0 + uniform(rng, -3.0, 3.0);
  v.cy = 33.0 + uniform(rng, -3.0, 3.0);
  v.scale = uniform(rng, 0.92, 1.08);
  v.tilt = uniform(rng, -0.18, 0.18);
  v.light_angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  v.light_strength = uniform(rng, 0.0, 0.35);
  v.smile = uniform(rng, -1.5, 2.5);
  return v;
}

double sq(double x) { return x * x; }

Color shade(const Identity& p, const Variation& v, double px, double py) {
  const double t = py / 64.0;
  Color c{};
  for (int k = 0; k < 3; ++k) c[k] = v.background[k] * (1.0 - t) + v.background_bottom[k] * t;

  const double dx = (px - v.cx) / v.scale;
  const double dy = (py - v.cy) / v.scale;
  const double u = std::cos(v.tilt) * dx + std::sin(v.tilt) * dy;
  const double w = -std::sin(v.tilt) * dx + std::cos(v.tilt) * dy;

  const double face = sq(u / p.face_rx) + sq(w / p.face_ry);
  const double hair = sq(u / (p.face_rx + 3.0)) + sq((w + 3.0) / (p.face_ry + 3.0));
  const bool in_face = face < 1.0;
  const bool in_hair = hair < 1.0 && (w < -p.face_ry + p.fringe || (!in_face && w < 2.0));
  if (in_hair) {
    c = p.hair;
  } else if (in_face) {
    c = p.skin;
    for (const double side : {-1.0, 1.0}) {
      const double ex = u - side * p.eye_dx;
      const double ey = w - p.eye_y;
      if (sq(ex / p.eye_rx) + sq(ey / p.eye_ry) < 1.0) {
        c = {0.95, 0.95, 0.95};
        const double r = std::hypot(ex, ey);
        if (r < p.eye_ry * 0.9) c = p.iris;
        if (r < p.eye_ry * 0.4) c = {0.02, 0.02, 0.02};
      }
      const double by = w - (p.eye_y - p.eye_ry - 2.0);
      if (std::abs(ex) < p.eye_rx + 0.5 && std::abs(by + 0.08 * sq(ex)) < p.brow_thickness * 0.5) {
        c = {p.hair[0] * 0.7, p.hair[1] * 0.7, p.hair[2] * 0.7};
      }
    }
    if (std::abs(u) < 1.2 - (w - p.eye_y) * 0.05 && w > p.eye_y + 1.0 &&
        w < p.eye_y + p.nose_length) {
      c = {p.skin[0] * 0.8, p.skin[1] * 0.75, p.skin[2] * 0.7};
    }
    if (std::abs(u) < p.mouth_w) {
      const double curve = p.mouth_y + v.smile * (1.0 - sq(u / p.mouth_w));
      if (std::abs(w - curve) < 1.1) c = p.lips;
    }
  }
  const double light =
      1.0 + v.light_strength * (u * std::cos(v.light_angle) + w * std::sin(v.light_angle)) / 32.0;
  for (auto& ch : c) ch = std::clamp(ch * light, 0.0, 1.0);
  return c;
}

}  // namespace

ToyFaceSet make_toy_faces(const ToyFaceOptions& options) {
  if (options.identities < 1 || options.per_identity < 1) {
    throw ConfigError("toy_faces", "identities and per_identity must be positive");
  }
  constexpr int kSuper = 4;
  const int n = options.identities * options.per_identity;
  auto batch = torch::empty({n, 3, kHrSize, kHrSize}, torch::kFloat32);
  auto acc = batch.accessor<float, 4>();
  std::vector<int> labels;
  std::mt19937_64 rng(options.variation_seed);
  for (int id = 0; id < options.identities; ++id) {
    const Identity person = make_identity(options.identity_seed, id);
    for (int k = 0; k < options.per_identity; ++k) {
      const int i = id * options.per_identity + k;
      const Variation var = make_variation(rng);
      for (int y = 0; y < kHrSize; ++y) {
        for (int x = 0; x < kHrSize; ++x) {
          Color sum{};
          for (int sy = 0; sy < kSuper; ++sy) {
            for (int sx = 0; sx < kSuper; ++sx) {
              const Color c = shade(person, var, x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper);
              for (int ch = 0; ch < 3; ++ch) sum[ch] += c[ch];
            }
          }
          for (int ch = 0; ch < 3; ++ch) {
            acc[i][ch][y][x] = static_cast<float>(2.0 * sum[ch] / (kSuper * kSuper) - 1.0);
          }
        }
      }
      labels.push_back(id);
    }
  }
  return ToyFaceSet{ImageBatch(batch, Role::AuxHr), std::move(labels)};
}

void write_toy_faces(const ToyFaceSet& set, const fs::path& dir) {
  std::vector<std::string> names;
  for (int64_t i = 0; i < set.images.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld.png", static_cast<long long>(i));
    names.emplace_back(buf);
  }
  save_images(set.images, dir, names);
  std::ofstream labels(dir / "labels.txt");
  if (!labels) {
    throw IoError((dir / "labels.txt").string() + ": cannot open for writing");
  }
  for (size_t i = 0; i < names.size(); ++i) {
    labels << names[i] << ' ' << set.identities[i] << '\n';
  }
}

std::vector<int> read_labels(const fs::path& labels_file, const std::vector<std::string>& names) {
  std::ifstream in(labels_file);
  if (!in) {
    throw IoError(labels_file.string() + ": cannot open");
  }
  std::map<std::string, int> table;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string name;
    int id = 0;
    if (fields >> name >> id) table[name] = id;
  }
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    auto it = table.find(name);
    if (it == table.end()) {
      throw ConfigError("labels_file", "no identity label for " + name);
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace crsr
