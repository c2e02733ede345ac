#include "crsr/losses.hpp"

#include "crsr/error.hpp"
#include "crsr/networks.hpp"

#include <cmath>
#include <sstream>

namespace crsr {

namespace {

std::string shape_string(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

torch::Tensor clamp_probability(const torch::Tensor& p) {
  return p.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term ") + name);
}

}  // namespace

void LossWeights::validate() const {
  auto check = [](const char* key, double v) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError(key, "weight must be finite and >= 0");
  };
  check("lambda_inner", lambda_inner);
  check("lambda_cr", lambda_cr);
  check("lambda_cr_sr", lambda_cr_sr);
  check("lambda_cr_gan", lambda_cr_gan);
}

torch::Tensor sr_mse_loss(const torch::Tensor& sr, const torch::Tensor& hr) {
  require_same_shape(sr, hr, "sr_mse_loss");
  return (sr - hr).pow(2).mean();
}

double sr_mse_loss(const ImageBatch& sr, const ImageBatch& hr) {
  return sr_mse_loss(sr.data(), hr.data()).item<double>();
}

AdversarialLoss adversarial_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
  auto real = clamp_probability(d_real);
  auto fake = clamp_probability(d_fake);
  AdversarialLoss out;
  out.disc = -torch::log(real).mean() - torch::log(1.0 - fake).mean();
  out.gen = -torch::log(fake).mean();
  return out;
}

AdversarialLoss gan_loss_cr(const torch::Tensor& d_real, const torch::Tensor& d_fake) {
  return adversarial_loss(d_real, d_fake);
}

AdversarialLoss gan_loss_inverse_cr(const torch::Tensor& d_real_genuine,
                                    const torch::Tensor& d_fake_pseudo) {
  return adversarial_loss(d_real_genuine, d_fake_pseudo);
}

AdversarialLoss semantic_adaptation_loss(const torch::Tensor& d_real_feat,
                                         const torch::Tensor& d_fake_feat) {
  return adversarial_loss(d_real_feat, d_fake_feat);
}

torch::Tensor cr_composite_loss(const torch::Tensor& lr_aux, const torch::Tensor& round_trip,
                                const torch::Tensor& gen_gan_term, const LossWeights& w) {
  require_same_shape(lr_aux, round_trip, "cr_composite_loss");
  return (lr_aux - round_trip).pow(2).mean() + w.lambda_inner * gen_gan_term;
}

torch::Tensor cr_sr_loss(const torch::Tensor& sr_of_regulated, const torch::Tensor& regulated,
                         const ResampleSpec& spec) {
  if (spec.factor != kScale) {
    throw ShapeError("cr_sr_loss requires a resample factor of " + std::to_string(kScale));
  }
  auto down = downsample(sr_of_regulated, spec);
  require_same_shape(down, regulated, "cr_sr_loss");
  return (down - regulated).pow(2).mean();
}

torch::Tensor total_loss(const LossTerms<torch::Tensor>& t, const LossWeights& w) {
  return t.sr + w.lambda_cr * t.cr + w.lambda_cr_sr * t.cr_sr + w.lambda_cr_gan * t.cr_gan;
}

LossReport total_loss(const LossTerms<double>& t, const LossWeights& w) {
  require_finite(t.sr, "L_sr");
  require_finite(t.gan, "L_gan");
  require_finite(t.cr, "L_cr");
  require_finite(t.cr_sr, "L_cr_sr");
  require_finite(t.cr_gan, "L_cr_gan");
  LossReport r;
  r.sr = t.sr;
  r.gan = t.gan;
  r.cr = t.cr;
  r.cr_sr = t.cr_sr;
  r.cr_gan = t.cr_gan;
  r.total = t.sr + w.lambda_cr * t.cr + w.lambda_cr_sr * t.cr_sr + w.lambda_cr_gan * t.cr_gan;
  require_finite(r.total, "L_total");
  return r;
}

torch::Tensor baseline_loss(const LossTerms<torch::Tensor>& t, const LossWeights& w) {
  return t.sr + w.lambda_cr_sr * t.cr_sr + w.lambda_cr_gan * t.cr_gan;
}

double baseline_loss(const LossTerms<double>& t, const LossWeights& w) {
  require_finite(t.sr, "L_sr");
  require_finite(t.cr_sr, "L_cr_sr");
  require_finite(t.cr_gan, "L_cr_gan");
  return t.sr + w.lambda_cr_sr * t.cr_sr + w.lambda_cr_gan * t.cr_gan;
}

}  // namespace crsr
