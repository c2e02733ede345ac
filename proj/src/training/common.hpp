#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "crsr/imaging.hpp"

namespace crsr::detail {

inline torch::Tensor gather(const ImageBatch& batch, const std::vector<int64_t>& indices) {
  return batch.data().index_select(0, torch::tensor(indices, torch::kLong));
}

// Distinct, reproducible seed for the k-th sampler of a run.
inline uint64_t sampler_seed(uint64_t run_seed, uint64_t k) {
  return run_seed * 0x9e3779b97f4a7c15ULL + 0x51ed27ULL * (k + 1);
}

inline double scalar(const torch::Tensor& t) { return t.detach().item<double>(); }

}  // namespace crsr::detail
