#include "crsr/error.hpp"
#include "crsr/imaging.hpp"

#include <string>

namespace crsr {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::GenuineLr:
      return "GENUINE_LR";
    case Role::ArtificialLr:
      return "ARTIFICIAL_LR";
    case Role::AuxHr:
      return "AUX_HR";
    case Role::SuperResolved:
      return "SUPER_RESOLVED";
  }
  return "UNKNOWN";
}

bool is_low_res(Role role) { return role == Role::GenuineLr || role == Role::ArtificialLr; }

int64_t spatial_size(Role role) { return is_low_res(role) ? kLrSize : kHrSize; }

ImageBatch::ImageBatch(const torch::Tensor& data, Role role) : role_(role) {
  if (!data.defined() || data.dim() != 4) {
    throw ShapeError("image batch must be rank 4 (batch, channel, height, width)");
  }
  if (data.size(0) < 1) {
    throw NoDataError("image batch is empty");
  }
  if (data.size(1) != 3) {
    throw ShapeError("image batch must have 3 channels, got " + std::to_string(data.size(1)));
  }
  const int64_t expected = spatial_size(role);
  if (data.size(2) != expected || data.size(3) != expected) {
    throw ShapeError(std::string(to_string(role)) + " images must be " + std::to_string(expected) +
                     "x" + std::to_string(expected) + ", got " + std::to_string(data.size(2)) +
                     "x" + std::to_string(data.size(3)));
  }
  data_ = data.detach().to(torch::kCPU, torch::kFloat32).contiguous().clone();
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw NumericError("image batch contains non-finite values");
  }
  if (data_.abs().max().item<float>() > 1.0F) {
    throw NumericError("image batch values must lie in [-1, 1]");
  }
}

ImageBatch ImageBatch::select(const std::vector<int64_t>& indices) const {
  auto index = torch::tensor(indices, torch::kLong);
  return ImageBatch(data_.index_select(0, index), role_);
}

ImageBatch ImageBatch::slice(int64_t begin, int64_t end) const {
  return ImageBatch(data_.slice(0, begin, end), role_);
}

ImageBatch concat(const std::vector<ImageBatch>& parts) {
  if (parts.empty()) {
    throw NoDataError("nothing to concatenate");
  }
  std::vector<torch::Tensor> tensors;
  tensors.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.role() != parts.front().role()) {
      throw ShapeError("cannot concatenate batches with different roles");
    }
    tensors.push_back(p.data());
  }
  return ImageBatch(torch::cat(tensors, 0), parts.front().role());
}

}  // namespace crsr
