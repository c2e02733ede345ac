#include "crsr/error.hpp"
#include "crsr/networks.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

namespace crsr {

std::string_view to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::SrGen:
      return "SR_GEN";
    case NetworkKind::CrGen:
      return "CR_GEN";
    case NetworkKind::InvCrGen:
      return "INV_CR_GEN";
    case NetworkKind::DiscCr:
      return "DISC_CR";
    case NetworkKind::DiscInvCr:
      return "DISC_INV_CR";
    case NetworkKind::DiscFeat:
      return "DISC_FEAT";
    case NetworkKind::FaceEmbed:
      return "FACE_EMBED";
  }
  return "UNKNOWN";
}

NetworkKind network_kind_from_string(std::string_view name) {
  for (auto kind : kAllNetworkKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw StateError("unknown network kind '" + std::string(name) + "'");
}

void NetworkConfig::validate() const {
  auto positive = [](const char* key, int value) {
    if (value < 1) throw ConfigError(key, "must be >= 1, got " + std::to_string(value));
  };
  positive("base_channels", base_channels);
  positive("cr_res_blocks", cr_res_blocks);
  for (int blocks : sr_group_blocks) positive("sr_group_blocks", blocks);
  positive("disc_res_blocks", disc_res_blocks);
  positive("feat_disc_fc_layers", feat_disc_fc_layers);
  positive("embed_dim", embed_dim);
}

std::string NetworkConfig::canonical() const {
  std::ostringstream os;
  os << "base_channels=" << base_channels << ";cr_res_blocks=" << cr_res_blocks
     << ";sr_group_blocks=" << sr_group_blocks[0] << ',' << sr_group_blocks[1] << ','
     << sr_group_blocks[2] << ";disc_res_blocks=" << disc_res_blocks
     << ";feat_disc_fc_layers=" << feat_disc_fc_layers << ";embed_dim=" << embed_dim
     << ";sr_image_gan=" << (sr_image_gan ? 1 : 0);
  return os.str();
}

uint64_t NetworkConfig::fingerprint() const {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string fingerprint_hex(uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

namespace {

std::shared_ptr<NetworkModule> make_module(NetworkKind kind, const NetworkConfig& cfg) {
  switch (kind) {
    case NetworkKind::SrGen:
      return std::make_shared<SrGeneratorImpl>(cfg);
    case NetworkKind::CrGen:
    case NetworkKind::InvCrGen:
      return std::make_shared<CrGeneratorImpl>(cfg);
    case NetworkKind::DiscCr:
    case NetworkKind::DiscInvCr:
      return std::make_shared<DiscriminatorImpl>(cfg);
    case NetworkKind::DiscFeat:
      return std::make_shared<FeatureDiscriminatorImpl>(cfg);
    case NetworkKind::FaceEmbed:
      return std::make_shared<FaceEmbedderImpl>(cfg);
  }
  throw StateError("unknown network kind");
}

void require_kind(const Network& net, std::initializer_list<NetworkKind> kinds, const char* op) {
  for (auto k : kinds) {
    if (net.kind() == k) return;
  }
  throw std::invalid_argument(std::string(op) + " does not accept a " +
                              std::string(to_string(net.kind())) + " network");
}

}  // namespace

Network Network::create(NetworkKind kind, const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  // Distinct streams per kind so two kinds built from one seed differ.
  torch::manual_seed(seed * 31 + static_cast<uint64_t>(kind) + 1);
  return Network(kind, cfg, make_module(kind, cfg));
}

NamedTensors Network::named_arrays() const {
  NamedTensors out;
  for (const auto& item : module_->named_parameters(true)) {
    out.emplace_back(item.key(), item.value().detach().to(torch::kCPU).clone());
  }
  for (const auto& item : module_->named_buffers(true)) {
    out.emplace_back(item.key(), item.value().detach().to(torch::kCPU).clone());
  }
  return out;
}

void Network::load_arrays(const NamedTensors& arrays) {
  std::map<std::string, torch::Tensor> targets;
  for (const auto& item : module_->named_parameters(true)) targets[item.key()] = item.value();
  for (const auto& item : module_->named_buffers(true)) targets[item.key()] = item.value();
  if (arrays.size() != targets.size()) {
    throw StateError(std::string(to_string(kind_)) + ": expected " +
                     std::to_string(targets.size()) + " arrays, got " +
                     std::to_string(arrays.size()));
  }
  torch::NoGradGuard no_grad;
  for (const auto& [name, value] : arrays) {
    auto it = targets.find(name);
    if (it == targets.end()) {
      throw StateError(std::string(to_string(kind_)) + ": unexpected array '" + name + "'");
    }
    if (it->second.sizes() != value.sizes()) {
      throw StateError(std::string(to_string(kind_)) + ": shape mismatch for '" + name + "'");
    }
    it->second.copy_(value);
  }
}

Network Network::clone() const {
  Network copy(kind_, config_, make_module(kind_, config_));
  copy.module_->to(module_->parameters().empty() ? torch::kFloat32
                                                 : module_->parameters().front().scalar_type());
  copy.load_arrays(named_arrays());
  return copy;
}

void Network::set_trainable(bool trainable) const {
  for (auto& p : module_->parameters()) p.requires_grad_(trainable);
}

namespace {

// Inference evaluates one sample at a time, so results never depend on what
// else is in the batch (batched float kernels may reorder sums).
torch::Tensor per_sample(const Network& net, const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> out;
  out.reserve(static_cast<size_t>(x.size(0)));
  for (int64_t i = 0; i < x.size(0); ++i) out.push_back(net(x.slice(0, i, i + 1)));
  if (out.empty()) return net(x);
  return torch::cat(out, 0);
}

}  // namespace

torch::Tensor to_probability(const torch::Tensor& logits) {
  return torch::sigmoid(logits).clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

ImageBatch forward_cr(const Network& net, const ImageBatch& x) {
  require_kind(net, {NetworkKind::CrGen, NetworkKind::InvCrGen}, "forward_cr");
  if (!is_low_res(x.role())) {
    throw ShapeError("forward_cr expects a 16x16 LR batch");
  }
  auto out = per_sample(net, x.data()).clamp(-1.0, 1.0);
  return ImageBatch(out, net.kind() == NetworkKind::CrGen ? Role::ArtificialLr : Role::GenuineLr);
}

ImageBatch forward_sr(const Network& net, const ImageBatch& x) {
  require_kind(net, {NetworkKind::SrGen}, "forward_sr");
  if (!is_low_res(x.role())) {
    throw ShapeError("forward_sr expects a 16x16 LR batch");
  }
  return ImageBatch(per_sample(net, x.data()).clamp(-1.0, 1.0), Role::SuperResolved);
}

torch::Tensor forward_disc(const Network& net, const ImageBatch& x) {
  require_kind(net, {NetworkKind::DiscCr, NetworkKind::DiscInvCr}, "forward_disc");
  if (!is_low_res(x.role())) {
    throw ShapeError("forward_disc expects a 16x16 LR batch");
  }
  return to_probability(per_sample(net, x.data()));
}

torch::Tensor forward_feature_disc(const Network& net, const torch::Tensor& embeddings) {
  require_kind(net, {NetworkKind::DiscFeat}, "forward_feature_disc");
  if (embeddings.dim() != 2 || embeddings.size(1) != net.config().embed_dim) {
    throw ShapeError("forward_feature_disc expects (batch, " +
                     std::to_string(net.config().embed_dim) + ") embeddings");
  }
  return to_probability(per_sample(net, embeddings.to(torch::kFloat32)));
}

torch::Tensor forward_face_embed(const Network& net, const ImageBatch& x) {
  require_kind(net, {NetworkKind::FaceEmbed}, "forward_face_embed");
  if (is_low_res(x.role())) {
    throw ShapeError("forward_face_embed expects a 64x64 batch");
  }
  return per_sample(net, x.data());
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

int64_t count_parameters(const Network& net) { return count_parameters(net.module()); }

int64_t count_parameters(const NamedTensors& arrays) {
  int64_t total = 0;
  for (const auto& [name, value] : arrays) total += value.numel();
  return total;
}

}  // namespace crsr
