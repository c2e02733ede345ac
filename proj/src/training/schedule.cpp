#include "crsr/error.hpp"
#include "crsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace crsr {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::SrPretrain:
      return "sr_pretrain";
    case Stage::CcPretrain:
      return "cc_pretrain";
    case Stage::FacePretrain:
      return "face_pretrain";
    case Stage::Joint:
      return "joint";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  for (auto s : {Stage::SrPretrain, Stage::CcPretrain, Stage::FacePretrain, Stage::Joint}) {
    if (to_string(s) == name) return s;
  }
  throw StateError("unknown stage '" + std::string(name) + "'");
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::NoCr:
      return "NO_CR";
    case Ablation::NoSrRi:
      return "NO_SR_RI";
    case Ablation::NoUl:
      return "NO_UL";
  }
  return "UNKNOWN";
}

Ablation ablation_from_string(std::string_view name) {
  for (auto a : {Ablation::NoCr, Ablation::NoSrRi, Ablation::NoUl}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("ablation", "unknown ablation flag '" + std::string(name) + "'");
}

void TrainingSchedule::validate() const {
  if (!std::isfinite(lr) || lr <= 0.0) throw ConfigError("lr", "must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (epochs_sr < 0) throw ConfigError("epochs_sr", "must be >= 0");
  if (epochs_cc < 0) throw ConfigError("epochs_cc", "must be >= 0");
  if (epochs_joint < 0) throw ConfigError("epochs_joint", "must be >= 0");
  if (epochs_face < 0) throw ConfigError("epochs_face", "must be >= 0");
  if (paired_unpaired.paired < 1 || paired_unpaired.unpaired < 1) {
    throw ConfigError("paired_unpaired_ratio", "both parts must be >= 1");
  }
  if (!std::isfinite(center_loss_weight) || center_loss_weight < 0.0) {
    throw ConfigError("center_loss_weight", "must be finite and >= 0");
  }
  if (!std::isfinite(center_alpha) || center_alpha < 0.0 || center_alpha > 1.0) {
    throw ConfigError("center_alpha", "must lie in [0, 1]");
  }
  if (!std::isfinite(sr_gan_weight) || sr_gan_weight < 0.0) {
    throw ConfigError("sr_gan_weight", "must be finite and >= 0");
  }
}

nlohmann::json to_json(const StepRecord& record) {
  nlohmann::json j;
  j["step"] = record.step;
  j["stage"] = std::string(to_string(record.stage));
  if (record.stage == Stage::FacePretrain) {
    for (const auto& [key, value] : record.extra) j[key] = value;
  } else {
    j["L_sr"] = record.report.sr;
    j["L_gan"] = record.report.gan;
    j["L_cr"] = record.report.cr;
    j["L_cr_sr"] = record.report.cr_sr;
    j["L_cr_gan"] = record.report.cr_gan;
  }
  j["L_total"] = record.report.total;
  return j;
}

uint64_t network_seed(uint64_t run_seed, NetworkKind kind) {
  return run_seed * 1000003ULL + static_cast<uint64_t>(kind) * 7919ULL + 17ULL;
}

EpochSampler::EpochSampler(int64_t n, int64_t batch_size, uint64_t seed)
    : n_(n), batch_(batch_size), rng_(seed) {
  if (n < 1) throw NoDataError("sampler over an empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  reshuffle();
}

void EpochSampler::reshuffle() {
  order_.resize(static_cast<size_t>(n_));
  for (int64_t i = 0; i < n_; ++i) order_[static_cast<size_t>(i)] = i;
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (int64_t i = n_ - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng_() % static_cast<uint64_t>(i + 1));
    std::swap(order_[static_cast<size_t>(i)], order_[static_cast<size_t>(j)]);
  }
  cursor_ = 0;
}

std::vector<int64_t> EpochSampler::next() {
  if (cursor_ >= n_) {
    ++epoch_;
    reshuffle();
  }
  const int64_t end = std::min(n_, cursor_ + batch_);
  std::vector<int64_t> batch(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  return batch;
}

nlohmann::json EpochSampler::state() const {
  std::ostringstream rng;
  rng << rng_;
  return {{"n", n_}, {"batch", batch_}, {"rng", rng.str()},
          {"order", order_}, {"cursor", cursor_}, {"epoch", epoch_}};
}

void EpochSampler::restore(const nlohmann::json& state) {
  if (state.at("n").get<int64_t>() != n_ || state.at("batch").get<int64_t>() != batch_) {
    throw StateError("sampler state was saved for a different dataset or batch size");
  }
  std::istringstream rng(state.at("rng").get<std::string>());
  rng >> rng_;
  order_ = state.at("order").get<std::vector<int64_t>>();
  cursor_ = state.at("cursor").get<int64_t>();
  epoch_ = state.at("epoch").get<int64_t>();
}

}  // namespace crsr
