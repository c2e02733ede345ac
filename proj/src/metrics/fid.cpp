#include "crsr/error.hpp"
#include "crsr/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace crsr {

namespace {

constexpr double kNegativeEigenTolerance = 1e-6;

// Square root of a symmetric PSD matrix; tiny negative eigenvalues clamp to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericError(std::string("eigendecomposition failed for ") + what);
  }
  Eigen::VectorXd values = solver.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < -kNegativeEigenTolerance * scale) {
      throw NumericError(std::string(what) + " is not positive semi-definite");
    }
    values(i) = std::sqrt(std::max(0.0, values(i)));
  }
  return solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd to_eigen(const torch::Tensor& matrix) {
  if (matrix.dim() != 2) throw ShapeError("expected a rank-2 tensor");
  auto m = matrix.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  Eigen::MatrixXd out(m.size(0), m.size(1));
  auto a = m.accessor<double, 2>();
  for (int64_t i = 0; i < m.size(0); ++i) {
    for (int64_t j = 0; j < m.size(1); ++j) out(i, j) = a[i][j];
  }
  return out;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& embeddings) {
  const Eigen::Index n = embeddings.rows();
  if (n < 2) throw NoDataError("gaussian_stats needs at least two samples");
  GaussianStats s;
  s.n = n;
  s.mean = embeddings.colwise().mean().transpose();
  const Eigen::MatrixXd centered = embeddings.rowwise() - s.mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  s.cov = 0.5 * (cov + cov.transpose());
  return s;
}

GaussianStats gaussian_stats(const torch::Tensor& embeddings) {
  return gaussian_stats(to_eigen(embeddings));
}

double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw ShapeError("fid: dimension mismatch");
  }
  const Eigen::MatrixXd sqrt_a = psd_sqrt(a.cov, "first covariance");
  Eigen::MatrixXd middle = sqrt_a * b.cov * sqrt_a;
  middle = 0.5 * (middle + middle.transpose());
  const double cross = psd_sqrt(middle, "covariance product").trace();
  const double value =
      (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  if (!std::isfinite(value)) throw NumericError("fid is not finite");
  return std::max(0.0, value);
}

}  // namespace crsr
