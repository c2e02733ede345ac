#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "crsr/imaging.hpp"

namespace crsr {

/// Sufficient statistics of a Gaussian fit to an embedding set.
struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  int64_t n = 0;
};

/// Sample mean and unbiased covariance of the rows of `embeddings` (n x d).
/// NoDataError when n < 2.
GaussianStats gaussian_stats(const Eigen::MatrixXd& embeddings);
GaussianStats gaussian_stats(const torch::Tensor& embeddings);

/// Frechet distance between two Gaussians, using the symmetric form
/// Tr((A^1/2 B A^1/2)^1/2) for the cross term.
double fid(const GaussianStats& a, const GaussianStats& b);

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(255^2 / mse) for an MSE in 8-bit units; kPsnrCap when mse == 0.
double psnr_from_mse(double mse);

/// Mean per-image PSNR in the 8-bit convention ([-1, 1] mapped to [0, 255]).
double psnr(const ImageBatch& x, const ImageBatch& y);

/// SSIM of two single-channel images in 8-bit units: 11x11 Gaussian window
/// (sigma 1.5), valid region only, C1 = (0.01*255)^2, C2 = (0.03*255)^2.
double ssim_plane(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Luma (BT.601) plane of image `index` in 8-bit units.
Eigen::MatrixXd luma_plane(const ImageBatch& batch, int64_t index);

/// Mean per-image SSIM on the luma channel.
double ssim(const ImageBatch& x, const ImageBatch& y);

/// Gallery and probe embeddings (one row each) with identity labels.
struct RecognitionSplit {
  Eigen::MatrixXd gallery;
  std::vector<int> gallery_ids;
  Eigen::MatrixXd probes;
  std::vector<int> probe_ids;
};

/// Fraction of probes whose most cosine-similar gallery row (lowest index on
/// ties) carries the probe's identity.
double rank1(const RecognitionSplit& split);

/// Row-major (n, d) tensor -> Eigen matrix (double).
Eigen::MatrixXd to_eigen(const torch::Tensor& matrix);

}  // namespace crsr
