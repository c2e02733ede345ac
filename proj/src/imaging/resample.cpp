#include "crsr/error.hpp"
#include "crsr/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace crsr {

namespace {

constexpr double kCubicA = -0.5;
constexpr double kCubicSupport = 2.0;

}  // namespace

double cubic_kernel(double x) {
  x = std::abs(x);
  if (x < 1.0) {
    return ((kCubicA + 2.0) * x - (kCubicA + 3.0)) * x * x + 1.0;
  }
  if (x < 2.0) {
    return (((x - 5.0) * x + 8.0) * x - 4.0) * kCubicA;
  }
  return 0.0;
}

torch::Tensor resize_matrix(int64_t in_size, int64_t out_size, bool antialias,
                            torch::ScalarType dtype) {
  if (in_size < 1 || out_size < 1) {
    throw ShapeError("resize sizes must be positive");
  }
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double filter_scale = (antialias && scale > 1.0) ? scale : 1.0;
  const double support = kCubicSupport * filter_scale;

  auto weights = torch::zeros({out_size, in_size}, torch::kFloat64);
  auto w = weights.accessor<double, 2>();
  std::vector<double> row;
  for (int64_t i = 0; i < out_size; ++i) {
    // Sample centres sit at half-integer positions in input coordinates.
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const auto lo = std::max<int64_t>(0, static_cast<int64_t>(std::floor(center - support)));
    const auto hi = std::min<int64_t>(in_size, static_cast<int64_t>(std::ceil(center + support)) + 1);
    double total = 0.0;
    row.assign(static_cast<size_t>(hi - lo), 0.0);
    for (int64_t j = lo; j < hi; ++j) {
      const double v = cubic_kernel((static_cast<double>(j) + 0.5 - center) / filter_scale);
      row[static_cast<size_t>(j - lo)] = v;
      total += v;
    }
    for (int64_t j = lo; j < hi; ++j) {
      w[i][j] = total != 0.0 ? row[static_cast<size_t>(j - lo)] / total : 0.0;
    }
  }
  return weights.to(dtype);
}

torch::Tensor bicubic_resize(const torch::Tensor& x, int64_t out_h, int64_t out_w, bool antialias) {
  if (x.dim() < 2) {
    throw ShapeError("bicubic_resize needs at least two spatial dimensions");
  }
  const int64_t h = x.size(-2);
  const int64_t w = x.size(-1);
  auto rows = resize_matrix(h, out_h, antialias, x.scalar_type()).to(x.device());
  auto cols = resize_matrix(w, out_w, antialias, x.scalar_type()).to(x.device());
  return torch::matmul(torch::matmul(rows, x), cols.t());
}

torch::Tensor downsample(const torch::Tensor& x, const ResampleSpec& spec) {
  if (spec.factor < 1) {
    throw ShapeError("resample factor must be positive");
  }
  if (x.dim() < 2) {
    throw ShapeError("downsample needs at least two spatial dimensions");
  }
  const int64_t h = x.size(-2);
  const int64_t w = x.size(-1);
  if (h % spec.factor != 0 || w % spec.factor != 0) {
    throw ShapeError("factor " + std::to_string(spec.factor) + " does not divide " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  return bicubic_resize(x, h / spec.factor, w / spec.factor, spec.antialias);
}

ImageBatch bicubic_downsample(const ImageBatch& x, const ResampleSpec& spec) {
  if (x.height() / std::max<int64_t>(spec.factor, 1) != kLrSize) {
    throw ShapeError("bicubic_downsample expects a 64x64 batch and factor 4");
  }
  auto out = downsample(x.data(), spec).clamp(-1.0, 1.0);
  return ImageBatch(out, Role::ArtificialLr);
}

ImageBatch bicubic_upsample(const ImageBatch& lr) {
  if (!is_low_res(lr.role())) {
    throw ShapeError("bicubic_upsample expects a low-resolution batch");
  }
  auto out = bicubic_resize(lr.data(), kHrSize, kHrSize, false).clamp(-1.0, 1.0);
  return ImageBatch(out, Role::SuperResolved);
}

ImageBatch nearest_upsample(const ImageBatch& lr) {
  if (!is_low_res(lr.role())) {
    throw ShapeError("nearest_upsample expects a low-resolution batch");
  }
  auto out = lr.data().repeat_interleave(kScale, 2).repeat_interleave(kScale, 3);
  return ImageBatch(out, Role::SuperResolved);
}

}  // namespace crsr
