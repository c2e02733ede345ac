#include "common.hpp"
#include "crsr/error.hpp"
#include "crsr/training.hpp"

#include <algorithm>
#include <cmath>

namespace crsr {

namespace {

constexpr NetworkKind kStageOneKinds[] = {NetworkKind::SrGen,    NetworkKind::CrGen,
                                          NetworkKind::InvCrGen, NetworkKind::DiscCr,
                                          NetworkKind::DiscInvCr, NetworkKind::FaceEmbed};

int64_t unpaired_batch(const TrainingSchedule& sched) {
  const double scaled = static_cast<double>(sched.batch_size) * sched.paired_unpaired.unpaired /
                        sched.paired_unpaired.paired;
  return std::max<int64_t>(1, static_cast<int64_t>(std::llround(scaled)));
}

const ImageBatch& require_role(const ImageBatch& batch, Role role, const char* what) {
  if (batch.role() != role) {
    throw ShapeError(std::string(what) + " must have role " + std::string(to_string(role)) +
                     ", got " + std::string(to_string(batch.role())));
  }
  return batch;
}

}  // namespace

JointTrainer::JointTrainer(const TrainingSchedule& sched, const NetworkConfig& cfg,
                           const LossWeights& weights, const NetworkSet& stage1,
                           const JointData& data)
    : StageTrainer(Stage::Joint, sched, cfg),
      weights_(weights),
      hr_(require_role(data.hr, Role::AuxHr, "joint paired data")),
      lr_aux_(bicubic_downsample(data.hr)),
      genuine_(require_role(data.genuine_lr, Role::GenuineLr, "joint unpaired data")),
      paired_sampler_(data.hr.size(), sched.batch_size, detail::sampler_seed(sched.seed, 4)),
      unpaired_sampler_(data.genuine_lr.size(), unpaired_batch(sched),
                        detail::sampler_seed(sched.seed, 5)) {
  weights_.validate();
  if (sched_.has(Ablation::NoUl)) weights_.lambda_cr_sr = 0.0;
  for (auto kind : kStageOneKinds) {
    auto it = stage1.find(kind);
    if (it == stage1.end()) {
      throw StateError("joint fine-tuning needs the stage-1 network " +
                       std::string(to_string(kind)));
    }
    if (it->second.config().fingerprint() != cfg_.fingerprint()) {
      throw StateError("stage-1 network " + std::string(to_string(kind)) +
                       " was built with a different config");
    }
    nets_.emplace(kind, it->second.clone());
  }
  auto feat = stage1.find(NetworkKind::DiscFeat);
  nets_.emplace(NetworkKind::DiscFeat,
                feat != stage1.end()
                    ? feat->second.clone()
                    : Network::create(NetworkKind::DiscFeat, cfg_,
                                      network_seed(sched_.seed, NetworkKind::DiscFeat)));

  nets_.at(NetworkKind::InvCrGen).set_trainable(false);
  nets_.at(NetworkKind::FaceEmbed).set_trainable(false);
  const bool use_cr = !sched_.has(Ablation::NoCr);
  if (!use_cr) nets_.at(NetworkKind::CrGen).set_trainable(false);

  add_optimizer("SR_GEN", live_parameters(nets_.at(NetworkKind::SrGen)));
  if (use_cr) {
    add_optimizer("CR_GEN", live_parameters(nets_.at(NetworkKind::CrGen)));
    add_optimizer("DISC_CR", live_parameters(nets_.at(NetworkKind::DiscCr)));
    add_optimizer("DISC_INV_CR", live_parameters(nets_.at(NetworkKind::DiscInvCr)));
  }
  add_optimizer("DISC_FEAT", live_parameters(nets_.at(NetworkKind::DiscFeat)));
  add_sampler(&paired_sampler_);
  add_sampler(&unpaired_sampler_);
  set_total_steps(static_cast<int64_t>(sched_.epochs_joint) * paired_sampler_.steps_per_epoch());
}

StepRecord JointTrainer::step() {
  require_unfinished();
  const auto paired_idx = paired_sampler_.next();
  const auto lr_aux = detail::gather(lr_aux_, paired_idx);
  const auto hr = detail::gather(hr_, paired_idx);
  const auto genuine = detail::gather(genuine_, unpaired_sampler_.next());

  const bool use_cr = !sched_.has(Ablation::NoCr);
  const Network& sr = nets_.at(NetworkKind::SrGen);
  const Network& cr = nets_.at(NetworkKind::CrGen);
  const Network& inv = nets_.at(NetworkKind::InvCrGen);
  const Network& disc = nets_.at(NetworkKind::DiscCr);
  const Network& disc_inv = nets_.at(NetworkKind::DiscInvCr);
  const Network& disc_feat = nets_.at(NetworkKind::DiscFeat);
  const Network& face = nets_.at(NetworkKind::FaceEmbed);

  // Generator update under the joint objective; discriminators held fixed.
  disc.set_trainable(false);
  disc_inv.set_trainable(false);
  disc_feat.set_trainable(false);

  LossTerms<torch::Tensor> terms;
  terms.sr = sr_mse_loss(sr(lr_aux), hr);

  const auto regulated = use_cr ? cr(genuine) : genuine;
  if (sched_.has(Ablation::NoSrRi)) sr.set_trainable(false);
  const auto sr_regulated = sr(regulated);
  if (sched_.has(Ablation::NoSrRi)) sr.set_trainable(true);
  terms.cr_sr = cr_sr_loss(sr_regulated, regulated);

  torch::Tensor real_embed;
  torch::Tensor d_feat_real;
  {
    torch::NoGradGuard no_grad;
    real_embed = face(hr);
    d_feat_real = to_probability(disc_feat(real_embed));
  }
  const auto fake_embed = face(sr_regulated);
  terms.cr_gan =
      semantic_adaptation_loss(d_feat_real, to_probability(disc_feat(fake_embed))).gen;

  torch::Tensor pseudo;
  torch::Tensor loss;
  if (use_cr) {
    torch::Tensor d_real;
    {
      torch::NoGradGuard no_grad;
      d_real = to_probability(disc(lr_aux));
      pseudo = inv(lr_aux);
    }
    terms.gan = gan_loss_cr(d_real, to_probability(disc(regulated))).gen;
    terms.cr = cr_composite_loss(lr_aux, cr(pseudo), terms.gan, weights_);
    loss = total_loss(terms, weights_);
  } else {
    terms.gan = torch::zeros({});
    terms.cr = torch::zeros({});
    loss = baseline_loss(terms, weights_);
  }

  auto& sr_opt = optimizer("SR_GEN");
  sr_opt.zero_grad();
  if (use_cr) optimizer("CR_GEN").zero_grad();
  loss.backward();
  sr_opt.step();
  if (use_cr) optimizer("CR_GEN").step();
  notify("generator");

  // Discriminator updates on detached generator outputs.
  if (use_cr) {
    disc.set_trainable(true);
    auto d_loss = gan_loss_cr(to_probability(disc(lr_aux)),
                              to_probability(disc(regulated.detach())))
                      .disc;
    auto& d_opt = optimizer("DISC_CR");
    d_opt.zero_grad();
    d_loss.backward();
    d_opt.step();
    notify("DISC_CR");

    disc_inv.set_trainable(true);
    auto d_inv_loss =
        gan_loss_inverse_cr(to_probability(disc_inv(genuine)), to_probability(disc_inv(pseudo)))
            .disc;
    auto& d_inv_opt = optimizer("DISC_INV_CR");
    d_inv_opt.zero_grad();
    d_inv_loss.backward();
    d_inv_opt.step();
    notify("DISC_INV_CR");
  }
  disc_feat.set_trainable(true);
  auto d_feat_loss = semantic_adaptation_loss(to_probability(disc_feat(real_embed)),
                                              to_probability(disc_feat(fake_embed.detach())))
                         .disc;
  auto& feat_opt = optimizer("DISC_FEAT");
  feat_opt.zero_grad();
  d_feat_loss.backward();
  feat_opt.step();
  notify("DISC_FEAT");

  LossTerms<double> values;
  values.sr = detail::scalar(terms.sr);
  values.gan = detail::scalar(terms.gan);
  values.cr = detail::scalar(terms.cr);
  values.cr_sr = detail::scalar(terms.cr_sr);
  values.cr_gan = detail::scalar(terms.cr_gan);
  StepRecord record;
  record.stage = stage_;
  // Without CR the cr term is zero, so this total equals the baseline loss.
  record.report = total_loss(values, weights_);
  record.step = ++step_;
  return record;
}

NetworkSet stage2_joint_finetune(const TrainingSchedule& sched, const NetworkConfig& cfg,
                                 const LossWeights& weights, const NetworkSet& stage1,
                                 const JointData& data, const StepCallback& callback) {
  JointTrainer trainer(sched, cfg, weights, stage1, data);
  trainer.run(callback);
  return trainer.networks();
}

}  // namespace crsr
