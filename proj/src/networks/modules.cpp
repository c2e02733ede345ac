#include "crsr/networks.hpp"

namespace crsr {

namespace nn = torch::nn;

namespace {

constexpr double kLeakySlope = 0.2;
// Keeps atanh finite on inputs that touch the [-1, 1] boundary.
constexpr double kAtanhLimit = 0.999;

int64_t group_count(int64_t channels) {
  for (int64_t g : {8, 4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

nn::LeakyReLU leaky() { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(kLeakySlope)); }

torch::Tensor to_logit_space(const torch::Tensor& x) {
  return torch::atanh(x.clamp(-kAtanhLimit, kAtanhLimit));
}

}  // namespace

ResidualBlockImpl::ResidualBlockImpl(int64_t channels)
    : conv1_(register_module("conv1", conv3x3(channels, channels))),
      norm1_(register_module("norm1", nn::GroupNorm(group_count(channels), channels))),
      conv2_(register_module("conv2", conv3x3(channels, channels))),
      norm2_(register_module("norm2", nn::GroupNorm(group_count(channels), channels))) {}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::leaky_relu(norm1_(conv1_(x)), kLeakySlope);
  y = norm2_(conv2_(y));
  return x + y;
}

CrGeneratorImpl::CrGeneratorImpl(const NetworkConfig& cfg) {
  const int64_t c = cfg.base_channels;
  head_ = register_module("head", conv3x3(3, c));
  nn::Sequential body;
  for (int i = 0; i < cfg.cr_res_blocks; ++i) body->push_back(ResidualBlock(c));
  body_ = register_module("body", body);
  tail_ = register_module("tail", conv3x3(c, 3));
  torch::NoGradGuard no_grad;
  tail_->weight.zero_();
  tail_->bias.zero_();
}

torch::Tensor CrGeneratorImpl::forward(const torch::Tensor& x) {
  auto h = torch::leaky_relu(head_(x), kLeakySlope);
  auto residual = tail_(body_->forward(h));
  return torch::tanh(residual + to_logit_space(x));
}

SrGeneratorImpl::SrGeneratorImpl(const NetworkConfig& cfg) {
  const int64_t c = cfg.base_channels;
  head_ = register_module("head", conv3x3(3, c));

  auto make_group = [c](int blocks) {
    nn::Sequential group;
    for (int i = 0; i < blocks; ++i) group->push_back(ResidualBlock(c));
    return group;
  };
  auto make_upsampler = [c]() {
    return nn::Sequential(conv3x3(c, 4 * c), nn::PixelShuffle(2), leaky());
  };

  group1_ = register_module("group1", make_group(cfg.sr_group_blocks[0]));
  group1_out_ = register_module("group1_out", conv3x3(c, c));
  up1_ = register_module("up1", make_upsampler());
  group2_ = register_module("group2", make_group(cfg.sr_group_blocks[1]));
  up2_ = register_module("up2", make_upsampler());
  group3_ = register_module("group3", make_group(cfg.sr_group_blocks[2]));
  tail_ = register_module("tail", conv3x3(c, 3));
  // Starts as plain bicubic upsampling.
  torch::NoGradGuard no_grad;
  tail_->weight.zero_();
  tail_->bias.zero_();
}

torch::Tensor SrGeneratorImpl::forward(const torch::Tensor& x) {
  auto base = bicubic_resize(x, x.size(-2) * kScale, x.size(-1) * kScale, false);
  auto h = torch::leaky_relu(head_(x), kLeakySlope);
  auto y = group1_out_(group1_->forward(h)) + h;
  y = group2_->forward(up1_->forward(y));
  y = group3_->forward(up2_->forward(y));
  return torch::tanh(tail_(y) + to_logit_space(base));
}

DiscriminatorImpl::DiscriminatorImpl(const NetworkConfig& cfg) {
  int64_t ch = cfg.base_channels;
  nn::Sequential features(conv3x3(3, ch), leaky());
  int downsamples = 0;
  for (int b = 0; b < cfg.disc_res_blocks; ++b) {
    features->push_back(ResidualBlock(ch));
    if (b % 2 == 1 && downsamples < 2 && b + 1 < cfg.disc_res_blocks) {
      features->push_back(conv3x3(ch, 2 * ch, 2));
      features->push_back(leaky());
      ch *= 2;
      ++downsamples;
    }
  }
  features->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
  features->push_back(nn::Flatten());
  features_ = register_module("features", features);
  fc_ = register_module("fc", nn::Linear(ch, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
  return fc_(features_->forward(x)).squeeze(1);
}

FeatureDiscriminatorImpl::FeatureDiscriminatorImpl(const NetworkConfig& cfg) {
  const int64_t d = cfg.embed_dim;
  nn::Sequential layers;
  for (int i = 0; i + 1 < cfg.feat_disc_fc_layers; ++i) {
    layers->push_back(nn::Linear(d, d));
    layers->push_back(leaky());
  }
  layers->push_back(nn::Linear(d, 1));
  layers_ = register_module("layers", layers);
}

torch::Tensor FeatureDiscriminatorImpl::forward(const torch::Tensor& x) {
  return layers_->forward(x).squeeze(1);
}

FaceEmbedderImpl::FaceEmbedderImpl(const NetworkConfig& cfg) {
  const int64_t c = cfg.base_channels;
  features_ = register_module(
      "features",
      nn::Sequential(conv3x3(3, c, 2), leaky(), ResidualBlock(c),              // 32x32
                     conv3x3(c, 2 * c, 2), leaky(), ResidualBlock(2 * c),      // 16x16
                     conv3x3(2 * c, 4 * c, 2), leaky(), ResidualBlock(4 * c),  // 8x8
                     nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)), nn::Flatten()));
  fc_ = register_module("fc", nn::Linear(4 * c, cfg.embed_dim));
}

torch::Tensor FaceEmbedderImpl::embed_raw(const torch::Tensor& x) {
  return fc_(features_->forward(x));
}

torch::Tensor FaceEmbedderImpl::forward(const torch::Tensor& x) {
  return torch::nn::functional::normalize(
      embed_raw(x), torch::nn::functional::NormalizeFuncOptions().p(2).dim(1).eps(1e-12));
}

}  // namespace crsr
