#include "common.hpp"
#include "crsr/error.hpp"
#include "crsr/training.hpp"

namespace crsr {

namespace {

const ImageBatch& require_role(const ImageBatch& batch, Role role, const char* what) {
  if (batch.role() != role) {
    throw ShapeError(std::string(what) + " must have role " + std::string(to_string(role)) +
                     ", got " + std::string(to_string(batch.role())));
  }
  return batch;
}

}  // namespace

SrPretrainer::SrPretrainer(const TrainingSchedule& sched, const NetworkConfig& cfg,
                           const ImageBatch& hr)
    : StageTrainer(Stage::SrPretrain, sched, cfg),
      hr_(require_role(hr, Role::AuxHr, "SR pretraining data")),
      lr_(bicubic_downsample(hr)),
      sampler_(hr.size(), sched.batch_size, detail::sampler_seed(sched.seed, 0)) {
  auto sr = Network::create(NetworkKind::SrGen, cfg_, network_seed(sched_.seed, NetworkKind::SrGen));
  nets_.emplace(NetworkKind::SrGen, sr);
  add_optimizer("SR_GEN", live_parameters(sr));
  if (cfg_.sr_image_gan) {
    auto disc =
        Network::create(NetworkKind::DiscCr, cfg_, network_seed(sched_.seed, NetworkKind::DiscCr));
    nets_.emplace(NetworkKind::DiscCr, disc);
    add_optimizer("DISC_CR", live_parameters(disc));
  }
  add_sampler(&sampler_);
  set_total_steps(static_cast<int64_t>(sched_.epochs_sr) * sampler_.steps_per_epoch());
}

StepRecord SrPretrainer::step() {
  require_unfinished();
  const auto idx = sampler_.next();
  const auto lr = detail::gather(lr_, idx);
  const auto hr = detail::gather(hr_, idx);
  const Network& sr_net = nets_.at(NetworkKind::SrGen);

  StepRecord record;
  record.stage = stage_;
  const bool with_gan = cfg_.sr_image_gan;

  if (with_gan) nets_.at(NetworkKind::DiscCr).set_trainable(false);
  auto sr = sr_net(lr);
  auto l_sr = sr_mse_loss(sr, hr);
  auto loss = l_sr;
  double gan_value = 0.0;
  if (with_gan) {
    const Network& disc = nets_.at(NetworkKind::DiscCr);
    torch::Tensor d_real;
    {
      torch::NoGradGuard no_grad;
      d_real = to_probability(disc(hr));
    }
    auto gen = adversarial_loss(d_real, to_probability(disc(sr))).gen;
    loss = l_sr + sched_.sr_gan_weight * gen;
    gan_value = detail::scalar(gen);
  }
  auto& opt = optimizer("SR_GEN");
  opt.zero_grad();
  loss.backward();
  opt.step();

  if (with_gan) {
    const Network& disc = nets_.at(NetworkKind::DiscCr);
    disc.set_trainable(true);
    auto fake = sr.detach();
    auto adv = adversarial_loss(to_probability(disc(hr)), to_probability(disc(fake)));
    auto& dopt = optimizer("DISC_CR");
    dopt.zero_grad();
    adv.disc.backward();
    dopt.step();
  }

  record.report.sr = detail::scalar(l_sr);
  record.report.gan = gan_value;
  record.report.total = detail::scalar(loss);
  record.step = ++step_;
  return record;
}

Network stage1_pretrain_sr(const TrainingSchedule& sched, const NetworkConfig& cfg,
                           const ImageBatch& hr, const StepCallback& callback) {
  SrPretrainer trainer(sched, cfg, hr);
  trainer.run(callback);
  return trainer.network(NetworkKind::SrGen);
}

}  // namespace crsr
