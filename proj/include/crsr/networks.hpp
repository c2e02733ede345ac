#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "crsr/imaging.hpp"

namespace crsr {

enum class NetworkKind {
  SrGen,      // phi_sr: 16x16 -> 64x64
  CrGen,      // phi_cr: genuine LR -> artificial-like LR
  InvCrGen,   // inverse CR: artificial LR -> pseudo-genuine LR
  DiscCr,     // D: is this an artificial LR image?
  DiscInvCr,  // inverse D: is this a genuine LR image?
  DiscFeat,   // D': embedding-space discriminator
  FaceEmbed,  // phi_fr: 64x64 face -> unit-norm embedding
};

inline constexpr std::array<NetworkKind, 7> kAllNetworkKinds = {
    NetworkKind::SrGen,     NetworkKind::CrGen,    NetworkKind::InvCrGen, NetworkKind::DiscCr,
    NetworkKind::DiscInvCr, NetworkKind::DiscFeat, NetworkKind::FaceEmbed};

std::string_view to_string(NetworkKind kind);
/// Inverse of to_string; throws StateError on unknown names.
NetworkKind network_kind_from_string(std::string_view name);

struct NetworkConfig {
  int base_channels = 32;
  int cr_res_blocks = 3;
  std::array<int, 3> sr_group_blocks{12, 3, 2};
  int disc_res_blocks = 6;
  int feat_disc_fc_layers = 5;
  int embed_dim = 128;
  /// Adds an image-space discriminator to SR pretraining.
  bool sr_image_gan = false;

  void validate() const;
  /// Canonical text form; equal configs give equal strings.
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  uint64_t fingerprint() const;
};

std::string fingerprint_hex(uint64_t fingerprint);

/// conv3x3 -> GroupNorm -> LeakyReLU -> conv3x3 -> GroupNorm, plus identity skip.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
  torch::nn::GroupNorm norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Common base so a handle can hold any of the seven networks.
class NetworkModule : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
};

/// phi_cr and its inverse: residual correction applied in atanh space, so a
/// zero tail makes the generator the identity map.
class CrGeneratorImpl : public NetworkModule {
 public:
  explicit CrGeneratorImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::Conv2d head_{nullptr};
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d tail_{nullptr};
};

/// phi_sr: three residual groups, x2 sub-pixel upsampling after the first two,
/// output predicted as a residual over bicubic upsampling in atanh space.
class SrGeneratorImpl : public NetworkModule {
 public:
  explicit SrGeneratorImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::Conv2d head_{nullptr};
  torch::nn::Sequential group1_{nullptr};
  torch::nn::Conv2d group1_out_{nullptr};
  torch::nn::Sequential up1_{nullptr};
  torch::nn::Sequential group2_{nullptr};
  torch::nn::Sequential up2_{nullptr};
  torch::nn::Sequential group3_{nullptr};
  torch::nn::Conv2d tail_{nullptr};
};

/// Image discriminator. Returns one logit per image (sigmoid not applied).
class DiscriminatorImpl : public NetworkModule {
 public:
  explicit DiscriminatorImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::Sequential features_{nullptr};
  torch::nn::Linear fc_{nullptr};
};

/// D': stack of fully connected layers over embeddings. Returns logits.
class FeatureDiscriminatorImpl : public NetworkModule {
 public:
  explicit FeatureDiscriminatorImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::Sequential layers_{nullptr};
};

/// phi_fr: small residual CNN; forward() returns L2-normalised embeddings.
class FaceEmbedderImpl : public NetworkModule {
 public:
  explicit FaceEmbedderImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x) override;
  /// Embedding before normalisation; the training target of the center loss.
  torch::Tensor embed_raw(const torch::Tensor& x);

 private:
  torch::nn::Sequential features_{nullptr};
  torch::nn::Linear fc_{nullptr};
};

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// NetworkHandle: a network kind, its config and the shared module holding
/// the parameters. Copies share parameters; use clone() for a deep copy.
class Network {
 public:
  /// Builds a freshly initialised network. Initialisation is a pure function
  /// of (kind, cfg, seed).
  static Network create(NetworkKind kind, const NetworkConfig& cfg, uint64_t seed);

  NetworkKind kind() const noexcept { return kind_; }
  const NetworkConfig& config() const noexcept { return config_; }
  NetworkModule& module() const { return *module_; }
  std::shared_ptr<NetworkModule> module_ptr() const { return module_; }

  /// Raw differentiable forward on a tensor (logits for discriminators).
  torch::Tensor operator()(const torch::Tensor& x) const { return module_->forward(x); }

  std::vector<torch::Tensor> parameters() const { return module_->parameters(); }
  /// Parameters and buffers, in registration order, as detached CPU tensors.
  NamedTensors named_arrays() const;
  /// Copies arrays into the module. Names and shapes must match exactly.
  void load_arrays(const NamedTensors& arrays);

  Network clone() const;
  void set_trainable(bool trainable) const;

 private:
  Network(NetworkKind kind, NetworkConfig cfg, std::shared_ptr<NetworkModule> module)
      : kind_(kind), config_(std::move(cfg)), module_(std::move(module)) {}

  NetworkKind kind_;
  NetworkConfig config_;
  std::shared_ptr<NetworkModule> module_;
};

/// Clamp bound applied to all probabilities leaving a discriminator.
inline constexpr double kProbabilityEpsilon = 1e-7;

/// sigmoid(logits) clamped to [eps, 1 - eps].
torch::Tensor to_probability(const torch::Tensor& logits);

/// Inference-mode forwards. No autograd graph is recorded.
ImageBatch forward_cr(const Network& net, const ImageBatch& x);
ImageBatch forward_sr(const Network& net, const ImageBatch& x);
/// (batch,) probabilities in (0, 1).
torch::Tensor forward_disc(const Network& net, const ImageBatch& x);
torch::Tensor forward_feature_disc(const Network& net, const torch::Tensor& embeddings);
/// (batch, embed_dim), unit-norm rows.
torch::Tensor forward_face_embed(const Network& net, const ImageBatch& x);

int64_t count_parameters(const Network& net);
int64_t count_parameters(const torch::nn::Module& module);
int64_t count_parameters(const NamedTensors& arrays);

}  // namespace crsr
