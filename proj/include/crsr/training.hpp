#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "crsr/checkpoint.hpp"
#include "crsr/imaging.hpp"
#include "crsr/losses.hpp"
#include "crsr/networks.hpp"

namespace crsr {

enum class Stage { SrPretrain, CcPretrain, FacePretrain, Joint };

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

enum class Ablation {
  NoCr,    // drop phi_cr, train with the baseline loss
  NoSrRi,  // phi_sr receives no gradient from the regulated branch
  NoUl,    // lambda_cr_sr forced to 0
};

std::string_view to_string(Ablation ablation);
/// Throws ConfigError("ablation") on unknown names.
Ablation ablation_from_string(std::string_view name);

struct Ratio {
  int paired = 1;
  int unpaired = 1;
};

struct TrainingSchedule {
  double lr = 1e-4;
  int batch_size = 16;
  int epochs_sr = 100;
  int epochs_cc = 130;
  int epochs_joint = 10;
  int epochs_face = 50;
  uint64_t seed = 0;
  /// Paired:unpaired batch sizes in the joint stage.
  Ratio paired_unpaired{1, 1};
  std::set<Ablation> ablation;
  double center_loss_weight = 0.003;
  /// Learning rate of the center update rule.
  double center_alpha = 0.5;
  /// Weight of the optional image-space adversarial term in SR pretraining.
  double sr_gan_weight = 1e-3;

  void validate() const;
  bool has(Ablation a) const { return ablation.contains(a); }
};

/// One training step's losses. The face stage fills `extra` instead of the
/// joint-objective terms.
struct StepRecord {
  int64_t step = 0;
  Stage stage = Stage::SrPretrain;
  LossReport report;
  std::vector<std::pair<std::string, double>> extra;
};

/// {step, stage, L_sr, L_gan, L_cr, L_cr_sr, L_cr_gan, L_total}; the face
/// stage emits {step, stage, L_softmax, L_center, L_total}.
nlohmann::json to_json(const StepRecord& record);

nlohmann::json to_json(const NetworkConfig& cfg);
/// Strict: unknown or missing keys throw StateError.
NetworkConfig network_config_from_json(const nlohmann::json& j);

using StepCallback = std::function<void(const StepRecord&)>;

/// Deterministic mini-batch order: a fresh permutation per epoch drawn from a
/// seeded engine. The last batch of an epoch may be short.
class EpochSampler {
 public:
  EpochSampler(int64_t n, int64_t batch_size, uint64_t seed);

  std::vector<int64_t> next();
  int64_t steps_per_epoch() const { return (n_ + batch_ - 1) / batch_; }
  int64_t epoch() const { return epoch_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& state);

 private:
  void reshuffle();

  int64_t n_;
  int64_t batch_;
  std::mt19937_64 rng_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
  int64_t epoch_ = 0;
};

using NetworkSet = std::map<NetworkKind, Network>;

/// Everything needed to continue a stage exactly where it stopped.
struct TrainState {
  Stage stage = Stage::SrPretrain;
  int64_t step = 0;
  int64_t total_steps = 0;
  nlohmann::json samplers = nlohmann::json::array();
  /// "ADAM:<group>" sections: per parameter exp_avg, exp_avg_sq and step.
  std::vector<CheckpointSection> optimizers;
  /// "AUX:<name>" sections: stage-specific arrays (e.g. face centers).
  std::vector<CheckpointSection> aux;
};

/// Writes nets and state. The file fingerprint is that of the nets' config.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const NetworkSet& nets);

struct LoadedCheckpoint {
  TrainState state;
  NetworkSet nets;
  NetworkConfig config;
};

/// Reads a checkpoint using the config stored inside it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
/// As above, and throws StateError unless the stored fingerprint equals
/// expected.fingerprint().
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig& expected);

/// Base of the four stage trainers: owns networks, optimizers, samplers and
/// the step counter, and persists all of them.
class StageTrainer {
 public:
  virtual ~StageTrainer() = default;
  StageTrainer(const StageTrainer&) = delete;
  StageTrainer& operator=(const StageTrainer&) = delete;

  /// One optimisation step. Throws StateError once finished().
  virtual StepRecord step() = 0;

  /// Runs the remaining steps, reporting each to `callback`.
  std::vector<StepRecord> run(const StepCallback& callback = {});

  Stage stage() const noexcept { return stage_; }
  int64_t steps_done() const noexcept { return step_; }
  int64_t total_steps() const noexcept { return total_; }
  bool finished() const noexcept { return step_ >= total_; }
  const NetworkSet& networks() const noexcept { return nets_; }
  const Network& network(NetworkKind kind) const;

  TrainState state() const;
  void save(const std::filesystem::path& path) const;
  /// Restores networks and state saved by an identically configured trainer.
  void resume(const std::filesystem::path& path);

 protected:
  StageTrainer(Stage stage, TrainingSchedule sched, NetworkConfig cfg);

  torch::optim::Adam& add_optimizer(const std::string& name, NamedTensors live_params);
  void add_aux(const std::string& name, NamedTensors live_arrays);
  void add_sampler(EpochSampler* sampler) { samplers_.push_back(sampler); }
  void set_total_steps(int64_t total) { total_ = total; }
  void require_unfinished() const;
  torch::optim::Adam& optimizer(const std::string& name);

  /// Named live parameters of a network, prefixed for optimizer bookkeeping.
  static NamedTensors live_parameters(const Network& net);

  TrainingSchedule sched_;
  NetworkConfig cfg_;
  NetworkSet nets_;
  Stage stage_;
  int64_t step_ = 0;

 private:
  struct OptimizerGroup {
    std::string name;
    NamedTensors params;
    std::unique_ptr<torch::optim::Adam> adam;
  };

  int64_t total_ = 0;
  std::vector<OptimizerGroup> optimizers_;
  std::vector<std::pair<std::string, NamedTensors>> aux_;
  std::vector<EpochSampler*> samplers_;
};

/// Stage 1: supervised SR on (bicubic_downsample(hr), hr) pairs. With
/// NetworkConfig::sr_image_gan an image discriminator is kept under DISC_CR.
class SrPretrainer : public StageTrainer {
 public:
  SrPretrainer(const TrainingSchedule& sched, const NetworkConfig& cfg, const ImageBatch& hr);
  StepRecord step() override;

 private:
  ImageBatch hr_;
  ImageBatch lr_;
  EpochSampler sampler_;
};

/// Stage 1: characteristic consistifying on unpaired genuine / artificial LR.
class CcPretrainer : public StageTrainer {
 public:
  CcPretrainer(const TrainingSchedule& sched, const NetworkConfig& cfg, const LossWeights& weights,
               const ImageBatch& genuine_lr, const ImageBatch& artificial_lr);
  StepRecord step() override;

 private:
  LossWeights weights_;
  ImageBatch genuine_;
  ImageBatch artificial_;
  EpochSampler genuine_sampler_;
  EpochSampler artificial_sampler_;
};

/// Stage 1: face embedder trained with softmax plus center loss.
class FaceTrainer : public StageTrainer {
 public:
  FaceTrainer(const TrainingSchedule& sched, const NetworkConfig& cfg, const ImageBatch& hr,
              const std::vector<int>& labels);
  StepRecord step() override;

  /// Current class centers, (classes, embed_dim).
  const torch::Tensor& centers() const { return centers_; }

 private:
  ImageBatch hr_;
  torch::Tensor labels_;
  EpochSampler sampler_;
  torch::nn::Linear classifier_{nullptr};
  torch::Tensor centers_;
};

/// Data consumed by the joint stage.
struct JointData {
  ImageBatch hr;          // AUX_HR, paired with its bicubic downsample
  ImageBatch genuine_lr;  // GENUINE_LR, unpaired
};

/// Stage 2: joint fine-tuning of phi_cr and phi_sr under the full objective,
/// alternating with updates of D, the inverse D and D'.
class JointTrainer : public StageTrainer {
 public:
  /// `stage1` must hold SR_GEN, CR_GEN, INV_CR_GEN, DISC_CR, DISC_INV_CR and
  /// FACE_EMBED (StateError otherwise). DISC_FEAT is created if absent.
  JointTrainer(const TrainingSchedule& sched, const NetworkConfig& cfg, const LossWeights& weights,
               const NetworkSet& stage1, const JointData& data);
  StepRecord step() override;

  /// Called after the generator update ("generator") and after each
  /// discriminator update ("DISC_CR", "DISC_INV_CR", "DISC_FEAT").
  void set_phase_observer(std::function<void(std::string_view)> observer) {
    observer_ = std::move(observer);
  }

  /// Weights actually applied (NO_UL zeroes lambda_cr_sr).
  const LossWeights& effective_weights() const { return weights_; }

 private:
  void notify(std::string_view phase) const {
    if (observer_) observer_(phase);
  }

  LossWeights weights_;
  ImageBatch hr_;
  ImageBatch lr_aux_;
  ImageBatch genuine_;
  EpochSampler paired_sampler_;
  EpochSampler unpaired_sampler_;
  std::function<void(std::string_view)> observer_;
};

Network stage1_pretrain_sr(const TrainingSchedule& sched, const NetworkConfig& cfg,
                           const ImageBatch& hr, const StepCallback& callback = {});

/// Returns CR_GEN, INV_CR_GEN, DISC_CR and DISC_INV_CR.
NetworkSet stage1_pretrain_cc(const TrainingSchedule& sched, const NetworkConfig& cfg,
                              const LossWeights& weights, const ImageBatch& genuine_lr,
                              const ImageBatch& artificial_lr, const StepCallback& callback = {});

/// Throws ConfigError with fewer than two identities or fewer than two
/// images for some identity.
Network stage1_train_face_embed(const TrainingSchedule& sched, const NetworkConfig& cfg,
                                const ImageBatch& hr, const std::vector<int>& labels,
                                const StepCallback& callback = {});

NetworkSet stage2_joint_finetune(const TrainingSchedule& sched, const NetworkConfig& cfg,
                                 const LossWeights& weights, const NetworkSet& stage1,
                                 const JointData& data, const StepCallback& callback = {});

/// 0.5 * mean_i ||e_i - c_{y_i}||^2.
torch::Tensor center_loss(const torch::Tensor& embeddings, const torch::Tensor& labels,
                          const torch::Tensor& centers);

/// In-place center update: c_j -= alpha * sum_{y_i = j}(c_j - e_i) / (1 + n_j).
void update_centers(torch::Tensor& centers, const torch::Tensor& embeddings,
                    const torch::Tensor& labels, double alpha);

/// Fraction of real images scored > 0.5 plus fakes scored < 0.5.
double discriminator_accuracy(const Network& disc, const ImageBatch& real, const ImageBatch& fake);

/// Seed of the network of `kind` for a run seeded with `run_seed`.
uint64_t network_seed(uint64_t run_seed, NetworkKind kind);

}  // namespace crsr
