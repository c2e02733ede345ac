#include "common.hpp"
#include "crsr/error.hpp"
#include "crsr/training.hpp"

#include <algorithm>

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

CcPretrainer::CcPretrainer(const TrainingSchedule& sched, const NetworkConfig& cfg,
                           const LossWeights& weights, const ImageBatch& genuine_lr,
                           const ImageBatch& artificial_lr)
    : StageTrainer(Stage::CcPretrain, sched, cfg),
      weights_(weights),
      genuine_(require_role(genuine_lr, Role::GenuineLr, "genuine LR data")),
      artificial_(require_role(artificial_lr, Role::ArtificialLr, "artificial LR data")),
      genuine_sampler_(genuine_lr.size(), sched.batch_size, detail::sampler_seed(sched.seed, 1)),
      artificial_sampler_(artificial_lr.size(), sched.batch_size,
                          detail::sampler_seed(sched.seed, 2)) {
  weights_.validate();
  for (auto kind : {NetworkKind::CrGen, NetworkKind::InvCrGen, NetworkKind::DiscCr,
                    NetworkKind::DiscInvCr}) {
    auto net = Network::create(kind, cfg_, network_seed(sched_.seed, kind));
    nets_.emplace(kind, net);
    add_optimizer(std::string(to_string(kind)), live_parameters(net));
  }
  add_sampler(&genuine_sampler_);
  add_sampler(&artificial_sampler_);
  set_total_steps(static_cast<int64_t>(sched_.epochs_cc) *
                  std::max(genuine_sampler_.steps_per_epoch(),
                           artificial_sampler_.steps_per_epoch()));
}

StepRecord CcPretrainer::step() {
  require_unfinished();
  const auto genuine = detail::gather(genuine_, genuine_sampler_.next());
  const auto artificial = detail::gather(artificial_, artificial_sampler_.next());
  const Network& cr = nets_.at(NetworkKind::CrGen);
  const Network& inv = nets_.at(NetworkKind::InvCrGen);
  const Network& disc = nets_.at(NetworkKind::DiscCr);
  const Network& disc_inv = nets_.at(NetworkKind::DiscInvCr);

  // Discriminators first, against the current generators.
  torch::Tensor fake_artificial;
  torch::Tensor fake_genuine;
  {
    torch::NoGradGuard no_grad;
    fake_artificial = cr(genuine);
    fake_genuine = inv(artificial);
  }
  auto d_loss =
      gan_loss_cr(to_probability(disc(artificial)), to_probability(disc(fake_artificial))).disc;
  auto& d_opt = optimizer("DISC_CR");
  d_opt.zero_grad();
  d_loss.backward();
  d_opt.step();

  auto d_inv_loss = gan_loss_inverse_cr(to_probability(disc_inv(genuine)),
                                        to_probability(disc_inv(fake_genuine)))
                        .disc;
  auto& d_inv_opt = optimizer("DISC_INV_CR");
  d_inv_opt.zero_grad();
  d_inv_loss.backward();
  d_inv_opt.step();

  // Generators.
  disc.set_trainable(false);
  disc_inv.set_trainable(false);
  torch::Tensor d_real;
  torch::Tensor d_inv_real;
  {
    torch::NoGradGuard no_grad;
    d_real = to_probability(disc(artificial));
    d_inv_real = to_probability(disc_inv(genuine));
  }
  auto regulated = cr(genuine);
  auto gan = gan_loss_cr(d_real, to_probability(disc(regulated))).gen;
  auto pseudo = inv(artificial);
  auto inv_gan = gan_loss_inverse_cr(d_inv_real, to_probability(disc_inv(pseudo))).gen;
  // The inverse generator is trained by its own adversarial game only.
  auto round_trip = cr(pseudo.detach());
  auto l_cr = cr_composite_loss(artificial, round_trip, gan, weights_);
  auto loss = l_cr + inv_gan;

  auto& g_opt = optimizer("CR_GEN");
  auto& inv_opt = optimizer("INV_CR_GEN");
  g_opt.zero_grad();
  inv_opt.zero_grad();
  loss.backward();
  g_opt.step();
  inv_opt.step();
  disc.set_trainable(true);
  disc_inv.set_trainable(true);

  StepRecord record;
  record.stage = stage_;
  record.report.gan = detail::scalar(gan);
  record.report.cr = detail::scalar(l_cr);
  record.report.total = detail::scalar(loss);
  record.step = ++step_;
  return record;
}

NetworkSet stage1_pretrain_cc(const TrainingSchedule& sched, const NetworkConfig& cfg,
                              const LossWeights& weights, const ImageBatch& genuine_lr,
                              const ImageBatch& artificial_lr, const StepCallback& callback) {
  CcPretrainer trainer(sched, cfg, weights, genuine_lr, artificial_lr);
  trainer.run(callback);
  return trainer.networks();
}

double discriminator_accuracy(const Network& disc, const ImageBatch& real, const ImageBatch& fake) {
  const auto p_real = forward_disc(disc, real);
  const auto p_fake = forward_disc(disc, fake);
  const double hits = p_real.gt(0.5).sum().item<double>() + p_fake.lt(0.5).sum().item<double>();
  return hits / static_cast<double>(real.size() + fake.size());
}

}  // namespace crsr
