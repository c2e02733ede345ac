#include "crsr/error.hpp"
#include "crsr/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace crsr {

namespace {

// IJG baseline luminance table.
constexpr std::array<double, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr int kBlock = 8;

std::array<double, kBlock * kBlock> dct_basis() {
  std::array<double, kBlock * kBlock> b{};
  for (int u = 0; u < kBlock; ++u) {
    const double alpha = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
    for (int x = 0; x < kBlock; ++x) {
      b[u * kBlock + x] = alpha * std::cos((2.0 * x + 1.0) * u * std::numbers::pi / (2.0 * kBlock));
    }
  }
  return b;
}

double draw_real(std::mt19937_64& rng, const std::array<double, 2>& range) {
  if (range[0] == range[1]) {
    return range[0];
  }
  return std::uniform_real_distribution<double>(range[0], range[1])(rng);
}

void check_range(const char* key, double lo, double hi, double floor_value, double ceil_value) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
    throw ConfigError(key, "range must be finite with min <= max");
  }
  if (lo < floor_value || hi > ceil_value) {
    throw ConfigError(key, "range out of bounds");
  }
}

}  // namespace

void DegradationConfig::validate() const {
  check_range("blur_sigma_range", blur_sigma_range[0], blur_sigma_range[1], 0.0, 64.0);
  check_range("noise_sigma_range", noise_sigma_range[0], noise_sigma_range[1], 0.0, 1.0);
  check_range("compression_quality_range", compression_quality_range[0],
              compression_quality_range[1], 1.0, 100.0);
}

torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma) {
  if (image.dim() != 3) {
    throw ShapeError("gaussian_blur expects a (3, H, W) image");
  }
  if (sigma <= 0.0) {
    return image.clone();
  }
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += taps[k + radius];
  }
  for (auto& t : taps) {
    t /= total;
  }

  auto src = image.to(torch::kFloat64).contiguous();
  const int64_t c = src.size(0);
  const int64_t h = src.size(1);
  const int64_t w = src.size(2);
  auto tmp = torch::empty_like(src);
  auto out = torch::empty_like(src);
  auto s = src.accessor<double, 3>();
  auto t = tmp.accessor<double, 3>();
  auto o = out.accessor<double, 3>();
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int64_t xx = std::clamp<int64_t>(x + k, 0, w - 1);
          acc += taps[k + radius] * s[ch][y][xx];
        }
        t[ch][y][x] = acc;
      }
    }
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int64_t yy = std::clamp<int64_t>(y + k, 0, h - 1);
          acc += taps[k + radius] * t[ch][yy][x];
        }
        o[ch][y][x] = acc;
      }
    }
  }
  return out.to(image.scalar_type());
}

torch::Tensor block_dct_quantize(const torch::Tensor& image, int quality) {
  if (image.dim() != 3 || image.size(1) % kBlock != 0 || image.size(2) % kBlock != 0) {
    throw ShapeError("block_dct_quantize expects (3, H, W) with H, W multiples of 8");
  }
  if (quality < 1 || quality > 100) {
    throw ConfigError("compression_quality_range", "quality must be in [1, 100]");
  }
  if (quality == 100) {
    return image.clone();
  }
  const double scale = quality < 50 ? 5000.0 / quality : 200.0 - 2.0 * quality;
  std::array<double, 64> step{};
  for (size_t i = 0; i < step.size(); ++i) {
    step[i] = kLumaTable[i] * scale / 100.0;
  }
  static const auto basis = dct_basis();

  auto px = image.to(torch::kFloat64).contiguous().clone();
  auto a = px.accessor<double, 3>();
  std::array<double, 64> block{};
  std::array<double, 64> tmp{};
  std::array<double, 64> coef{};
  for (int64_t ch = 0; ch < px.size(0); ++ch) {
    for (int64_t by = 0; by < px.size(1); by += kBlock) {
      for (int64_t bx = 0; bx < px.size(2); bx += kBlock) {
        for (int y = 0; y < kBlock; ++y) {
          for (int x = 0; x < kBlock; ++x) {
            block[y * kBlock + x] = (a[ch][by + y][bx + x] + 1.0) * 127.5 - 128.0;
          }
        }
        // coef = B * block * B^T
        for (int u = 0; u < kBlock; ++u) {
          for (int x = 0; x < kBlock; ++x) {
            double acc = 0.0;
            for (int y = 0; y < kBlock; ++y) acc += basis[u * kBlock + y] * block[y * kBlock + x];
            tmp[u * kBlock + x] = acc;
          }
        }
        for (int u = 0; u < kBlock; ++u) {
          for (int v = 0; v < kBlock; ++v) {
            double acc = 0.0;
            for (int x = 0; x < kBlock; ++x) acc += tmp[u * kBlock + x] * basis[v * kBlock + x];
            const auto idx = static_cast<size_t>(u * kBlock + v);
            coef[idx] = std::round(acc / step[idx]) * step[idx];
          }
        }
        // block = B^T * coef * B
        for (int y = 0; y < kBlock; ++y) {
          for (int v = 0; v < kBlock; ++v) {
            double acc = 0.0;
            for (int u = 0; u < kBlock; ++u) acc += basis[u * kBlock + y] * coef[u * kBlock + v];
            tmp[y * kBlock + v] = acc;
          }
        }
        for (int y = 0; y < kBlock; ++y) {
          for (int x = 0; x < kBlock; ++x) {
            double acc = 0.0;
            for (int v = 0; v < kBlock; ++v) acc += tmp[y * kBlock + v] * basis[v * kBlock + x];
            a[ch][by + y][bx + x] = (acc + 128.0) / 127.5 - 1.0;
          }
        }
      }
    }
  }
  return px.to(image.scalar_type());
}

ImageBatch degrade_to_genuine_like(const ImageBatch& x_hr, const DegradationConfig& cfg,
                                   std::vector<DegradationDraw>* draws) {
  if (x_hr.role() != Role::AuxHr) {
    throw ShapeError("degrade_to_genuine_like expects an AUX_HR batch");
  }
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const ResampleSpec spec{};

  std::vector<torch::Tensor> outputs;
  outputs.reserve(static_cast<size_t>(x_hr.size()));
  if (draws != nullptr) {
    draws->clear();
  }
  for (int64_t i = 0; i < x_hr.size(); ++i) {
    DegradationDraw d{};
    d.blur_sigma = draw_real(rng, cfg.blur_sigma_range);
    d.noise_sigma = draw_real(rng, cfg.noise_sigma_range);
    d.quality = cfg.compression_quality_range[0] == cfg.compression_quality_range[1]
                    ? cfg.compression_quality_range[0]
                    : std::uniform_int_distribution<int>(cfg.compression_quality_range[0],
                                                         cfg.compression_quality_range[1])(rng);

    auto img = x_hr.data()[i].to(torch::kFloat64);
    img = gaussian_blur(img, d.blur_sigma);
    img = downsample(img, spec).contiguous();
    if (d.noise_sigma > 0.0) {
      // Noise sigma is given in [0, 1] intensity units; the batch spans [-1, 1].
      auto acc = img.accessor<double, 3>();
      for (int64_t ch = 0; ch < img.size(0); ++ch) {
        for (int64_t y = 0; y < img.size(1); ++y) {
          for (int64_t x = 0; x < img.size(2); ++x) {
            acc[ch][y][x] += 2.0 * d.noise_sigma * gauss(rng);
          }
        }
      }
    }
    img = block_dct_quantize(img.clamp(-1.0, 1.0), d.quality).clamp(-1.0, 1.0);
    outputs.push_back(img.to(torch::kFloat32));
    if (draws != nullptr) {
      draws->push_back(d);
    }
  }
  return ImageBatch(torch::stack(outputs), Role::GenuineLr);
}

}  // namespace crsr
