#pragma once

#include <torch/torch.h>

#include "crsr/imaging.hpp"

namespace crsr {

/// Weights of the composite CR loss (lambda_inner) and of the joint objective.
struct LossWeights {
  double lambda_inner = 0.2;
  double lambda_cr = 0.06;
  double lambda_cr_sr = 0.01;
  double lambda_cr_gan = 0.03;

  /// Throws ConfigError if any weight is negative or non-finite.
  void validate() const;
};

/// Discriminator and generator sides of one adversarial game.
struct AdversarialLoss {
  torch::Tensor disc;
  torch::Tensor gen;
};

/// Per-term values of the joint objective.
template <typename T>
struct LossTerms {
  T sr{};
  T gan{};
  T cr{};
  T cr_sr{};
  T cr_gan{};
};

/// Scalar loss values for one training step.
struct LossReport {
  double sr = 0.0;
  double gan = 0.0;
  double cr = 0.0;
  double cr_sr = 0.0;
  double cr_gan = 0.0;
  double total = 0.0;
};

/// Mean squared pixel error; both tensors must have identical shapes.
torch::Tensor sr_mse_loss(const torch::Tensor& sr, const torch::Tensor& hr);
double sr_mse_loss(const ImageBatch& sr, const ImageBatch& hr);

/// Adversarial loss over probabilities clamped to [1e-7, 1 - 1e-7]:
///   disc = -E[log d_real] - E[log(1 - d_fake)]
///   gen  = -E[log d_fake]                       (non-saturating)
AdversarialLoss adversarial_loss(const torch::Tensor& d_real, const torch::Tensor& d_fake);

/// D scores artificial LR as real and phi_cr(genuine) as fake.
AdversarialLoss gan_loss_cr(const torch::Tensor& d_real, const torch::Tensor& d_fake);
/// Inverse D scores genuine LR as real and inverse-CR(artificial) as fake.
AdversarialLoss gan_loss_inverse_cr(const torch::Tensor& d_real_genuine,
                                    const torch::Tensor& d_fake_pseudo);
/// D' scores phi_fr(HR) as real and phi_fr(phi_sr(phi_cr(genuine))) as fake.
AdversarialLoss semantic_adaptation_loss(const torch::Tensor& d_real_feat,
                                         const torch::Tensor& d_fake_feat);

/// mse(lr_aux, round_trip) + lambda_inner * gen_gan_term, where round_trip is
/// phi_cr(inverse_cr(lr_aux)).
torch::Tensor cr_composite_loss(const torch::Tensor& lr_aux, const torch::Tensor& round_trip,
                                const torch::Tensor& gen_gan_term, const LossWeights& w);

/// Downsample consistency: mse(f_DS(sr_of_regulated), regulated). Gradients
/// flow through the (unclamped) downsampler.
torch::Tensor cr_sr_loss(const torch::Tensor& sr_of_regulated, const torch::Tensor& regulated,
                         const ResampleSpec& spec = {});

/// L_sr + lambda_cr L_cr + lambda_cr_sr L_cr_sr + lambda_cr_gan L_cr_gan.
/// The gan term is reported but already folded into L_cr.
torch::Tensor total_loss(const LossTerms<torch::Tensor>& terms, const LossWeights& w);
/// Throws NumericError on non-finite terms.
LossReport total_loss(const LossTerms<double>& terms, const LossWeights& w);

/// The joint objective without the L_cr term (no characteristic regularisation).
torch::Tensor baseline_loss(const LossTerms<torch::Tensor>& terms, const LossWeights& w);
double baseline_loss(const LossTerms<double>& terms, const LossWeights& w);

}  // namespace crsr
