#include "crsr/error.hpp"
#include "crsr/metrics.hpp"

#include <array>
#include <cmath>

namespace crsr {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Separable Gaussian filter, valid region only.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& m) {
  static const auto w = gaussian_window();
  const Eigen::Index rows = m.rows() - kWindow + 1;
  const Eigen::Index cols = m.cols() - kWindow + 1;
  Eigen::MatrixXd horizontal(m.rows(), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += w[k] * m(r, c + k);
      horizontal(r, c) = acc;
    }
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += w[k] * horizontal(r + k, c);
      out(r, c) = acc;
    }
  }
  return out;
}

void require_same_shape(const ImageBatch& x, const ImageBatch& y, const char* op) {
  if (x.data().sizes() != y.data().sizes()) {
    throw ShapeError(std::string(op) + ": batches have different shapes");
  }
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const ImageBatch& x, const ImageBatch& y) {
  require_same_shape(x, y, "psnr");
  auto diff = (x.data().to(torch::kFloat64) - y.data().to(torch::kFloat64)) * 127.5;
  auto per_image = diff.pow(2).mean({1, 2, 3});
  double total = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) total += psnr_from_mse(per_image[i].item<double>());
  return total / static_cast<double>(x.size());
}

Eigen::MatrixXd luma_plane(const ImageBatch& batch, int64_t index) {
  auto img = (batch.data()[index].to(torch::kFloat64) + 1.0) * 127.5;
  auto y = (0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]).contiguous();
  return to_eigen(y);
}

double ssim_plane(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError("ssim: planes have different shapes");
  }
  if (x.rows() < kWindow || x.cols() < kWindow) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  const Eigen::MatrixXd mu_x = filter_valid(x);
  const Eigen::MatrixXd mu_y = filter_valid(y);
  const Eigen::MatrixXd xx = filter_valid(x.cwiseProduct(x));
  const Eigen::MatrixXd yy = filter_valid(y.cwiseProduct(y));
  const Eigen::MatrixXd xy = filter_valid(x.cwiseProduct(y));
  double total = 0.0;
  for (Eigen::Index r = 0; r < mu_x.rows(); ++r) {
    for (Eigen::Index c = 0; c < mu_x.cols(); ++c) {
      const double mx = mu_x(r, c);
      const double my = mu_y(r, c);
      const double vx = xx(r, c) - mx * mx;
      const double vy = yy(r, c) - my * my;
      const double cxy = xy(r, c) - mx * my;
      total += ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
  }
  return total / static_cast<double>(mu_x.size());
}

double ssim(const ImageBatch& x, const ImageBatch& y) {
  require_same_shape(x, y, "ssim");
  double total = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) total += ssim_plane(luma_plane(x, i), luma_plane(y, i));
  return total / static_cast<double>(x.size());
}

}  // namespace crsr
