#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace crsr {

/// Spatial size of every low-resolution image.
inline constexpr int64_t kLrSize = 16;
/// Spatial size of every high-resolution and super-resolved image.
inline constexpr int64_t kHrSize = 64;
/// Per-dimension super-resolution factor.
inline constexpr int64_t kScale = kHrSize / kLrSize;

/// Which of the four image domains a batch belongs to.
enum class Role { GenuineLr, ArtificialLr, AuxHr, SuperResolved };

std::string_view to_string(Role role);
bool is_low_res(Role role);
int64_t spatial_size(Role role);

/// Immutable batch of RGB images, shape (batch, 3, size, size), values in [-1, 1].
///
/// Construction validates the tensor against the role: LR roles are 16x16,
/// AUX_HR and SUPER_RESOLVED are 64x64. The stored tensor is a detached
/// float32 copy, so callers cannot mutate a batch after construction.
class ImageBatch {
 public:
  ImageBatch(const torch::Tensor& data, Role role);

  const torch::Tensor& data() const noexcept { return data_; }
  Role role() const noexcept { return role_; }
  int64_t size() const noexcept { return data_.size(0); }
  int64_t height() const noexcept { return data_.size(2); }
  int64_t width() const noexcept { return data_.size(3); }

  /// Images at the given positions, in order.
  ImageBatch select(const std::vector<int64_t>& indices) const;
  ImageBatch slice(int64_t begin, int64_t end) const;

  /// Same pixels, different role. Sizes must still match the new role.
  ImageBatch with_role(Role role) const { return ImageBatch(data_, role); }

 private:
  torch::Tensor data_;
  Role role_;
};

ImageBatch concat(const std::vector<ImageBatch>& parts);

enum class ResampleKernel { Bicubic };

struct ResampleSpec {
  int64_t factor = kScale;
  ResampleKernel kernel = ResampleKernel::Bicubic;
  bool antialias = true;
};

/// Catmull-Rom cubic (a = -0.5).
double cubic_kernel(double x);

/// Dense (out, in) interpolation matrix for 1-D bicubic resizing. With
/// `antialias` and out < in the kernel is stretched by in/out. Window taps
/// falling outside the signal are dropped and the row renormalised to 1.
torch::Tensor resize_matrix(int64_t in_size, int64_t out_size, bool antialias,
                            torch::ScalarType dtype = torch::kFloat32);

/// Differentiable separable bicubic resize of a (..., H, W) tensor. No clamping.
torch::Tensor bicubic_resize(const torch::Tensor& x, int64_t out_h, int64_t out_w,
                             bool antialias);

/// Differentiable, unclamped downsampling by spec.factor.
/// Throws ShapeError if the factor does not divide both spatial sizes.
torch::Tensor downsample(const torch::Tensor& x, const ResampleSpec& spec);

/// f_DS: AUX_HR or SUPER_RESOLVED 64x64 -> ARTIFICIAL_LR 16x16, clamped to [-1, 1].
ImageBatch bicubic_downsample(const ImageBatch& x, const ResampleSpec& spec = {});

/// Plain bicubic 4x upsampling (the interpolation baseline), clamped.
ImageBatch bicubic_upsample(const ImageBatch& lr);

/// Nearest-neighbour upsampling of an LR batch to 64x64, for visual dumps.
ImageBatch nearest_upsample(const ImageBatch& lr);

struct DegradationConfig {
  std::array<double, 2> blur_sigma_range{0.5, 2.5};
  /// Standard deviation in [0, 1] intensity units.
  std::array<double, 2> noise_sigma_range{0.01, 0.05};
  std::array<int, 2> compression_quality_range{30, 70};
  uint64_t seed = 0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Per-image parameters drawn by degrade_to_genuine_like.
struct DegradationDraw {
  double blur_sigma;
  double noise_sigma;
  int quality;
};

/// Blur -> bicubic downsample to 16x16 -> additive Gaussian noise -> 8x8
/// block-DCT quantisation. Input must be AUX_HR; output is GENUINE_LR.
/// Pure function of (x_hr, cfg).
ImageBatch degrade_to_genuine_like(const ImageBatch& x_hr, const DegradationConfig& cfg,
                                   std::vector<DegradationDraw>* draws = nullptr);

/// Separable Gaussian blur of one (3, H, W) image with replicated borders.
/// sigma <= 0 returns the input unchanged.
torch::Tensor gaussian_blur(const torch::Tensor& image, double sigma);

/// JPEG-style quantisation of 8x8 DCT blocks of one (3, H, W) image in
/// [-1, 1]. Quality 100 is the identity; H and W must be multiples of 8.
torch::Tensor block_dct_quantize(const torch::Tensor& image, int quality);

/// Result of scanning a directory of PNGs.
struct ImageFolder {
  ImageBatch images;
  /// File names (no directory) of the decoded images, sorted.
  std::vector<std::string> names;
  /// One human-readable message per skipped file.
  std::vector<std::string> warnings;
};

/// Decodes every *.png in `dir` (sorted by name), centre-crops to square,
/// resizes to target_size and maps [0, 255] -> [-1, 1].
/// Undecodable files are skipped with a warning; NoDataError if nothing loads.
ImageFolder load_image_folder(const std::filesystem::path& dir, int64_t target_size, Role role);

/// Tiles the batch row-major into a near-square grid and writes an 8-bit PNG.
void save_image_grid(const ImageBatch& x, const std::filesystem::path& path);

/// Writes each image of the batch to dir/names[i].
void save_images(const ImageBatch& x, const std::filesystem::path& dir,
                 const std::vector<std::string>& names);

/// Raw 8-bit RGB image, row-major interleaved.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;
};

Rgb8Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Rgb8Image& image);

/// (3, H, W) tensor in [-1, 1] <-> 8-bit image with rounding.
Rgb8Image to_rgb8(const torch::Tensor& image);
torch::Tensor from_rgb8(const Rgb8Image& image);

}  // namespace crsr
