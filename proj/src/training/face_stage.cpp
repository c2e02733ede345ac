#include "common.hpp"
#include "crsr/error.hpp"
#include "crsr/training.hpp"

#include <map>

namespace crsr {

namespace {

// Maps arbitrary identity labels onto 0..classes-1 in ascending label order.
torch::Tensor class_indices(const std::vector<int>& labels, int64_t* classes) {
  std::map<int, int64_t> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) {
    throw ConfigError("labels", "face training needs at least two identities");
  }
  std::map<int, int64_t> index;
  for (const auto& [label, n] : counts) {
    if (n < 2) {
      throw ConfigError("labels",
                        "identity " + std::to_string(label) + " has fewer than two images");
    }
    const int64_t next = static_cast<int64_t>(index.size());
    index[label] = next;
  }
  std::vector<int64_t> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(index.at(l));
  *classes = static_cast<int64_t>(counts.size());
  return torch::tensor(out, torch::kLong);
}

const ImageBatch& require_labeled_hr(const ImageBatch& hr, const std::vector<int>& labels) {
  if (hr.role() != Role::AuxHr) throw ShapeError("face training expects an AUX_HR batch");
  if (static_cast<int64_t>(labels.size()) != hr.size()) {
    throw ShapeError("face training: one label per image required");
  }
  return hr;
}

}  // namespace

torch::Tensor center_loss(const torch::Tensor& embeddings, const torch::Tensor& labels,
                          const torch::Tensor& centers) {
  if (embeddings.dim() != 2 || centers.dim() != 2 || embeddings.size(1) != centers.size(1) ||
      labels.dim() != 1 || labels.size(0) != embeddings.size(0)) {
    throw ShapeError("center_loss: incompatible embedding, label or center shapes");
  }
  auto diff = embeddings - centers.index_select(0, labels);
  return 0.5 * diff.pow(2).sum(1).mean();
}

void update_centers(torch::Tensor& centers, const torch::Tensor& embeddings,
                    const torch::Tensor& labels, double alpha) {
  torch::NoGradGuard no_grad;
  const auto e = embeddings.detach();
  auto delta = torch::zeros_like(centers);
  auto counts = torch::zeros({centers.size(0)}, centers.options());
  delta.index_add_(0, labels, centers.index_select(0, labels) - e);
  counts.index_add_(0, labels, torch::ones({labels.size(0)}, centers.options()));
  centers.sub_(alpha * delta / (1.0 + counts).unsqueeze(1));
}

FaceTrainer::FaceTrainer(const TrainingSchedule& sched, const NetworkConfig& cfg,
                         const ImageBatch& hr, const std::vector<int>& labels)
    : StageTrainer(Stage::FacePretrain, sched, cfg),
      hr_(require_labeled_hr(hr, labels)),
      sampler_(hr.size(), sched.batch_size, detail::sampler_seed(sched.seed, 3)) {
  int64_t classes = 0;
  labels_ = class_indices(labels, &classes);
  const uint64_t seed = network_seed(sched_.seed, NetworkKind::FaceEmbed);
  auto net = Network::create(NetworkKind::FaceEmbed, cfg_, seed);
  nets_.emplace(NetworkKind::FaceEmbed, net);

  torch::manual_seed(seed + 1);
  classifier_ = torch::nn::Linear(cfg_.embed_dim, classes);
  centers_ = torch::zeros({classes, cfg_.embed_dim});

  auto params = live_parameters(net);
  params.emplace_back("classifier.weight", classifier_->weight);
  params.emplace_back("classifier.bias", classifier_->bias);
  add_optimizer("FACE_EMBED", params);
  add_aux("face_head", {{"classifier.weight", classifier_->weight},
                        {"classifier.bias", classifier_->bias},
                        {"centers", centers_}});
  add_sampler(&sampler_);
  set_total_steps(static_cast<int64_t>(sched_.epochs_face) * sampler_.steps_per_epoch());
}

StepRecord FaceTrainer::step() {
  require_unfinished();
  const auto idx = sampler_.next();
  const auto x = detail::gather(hr_, idx);
  const auto y = labels_.index_select(0, torch::tensor(idx, torch::kLong));
  auto& embedder = dynamic_cast<FaceEmbedderImpl&>(nets_.at(NetworkKind::FaceEmbed).module());

  auto raw = embedder.embed_raw(x);
  auto softmax = torch::nn::functional::cross_entropy(classifier_(raw), y);
  auto center = center_loss(raw, y, centers_);
  auto loss = softmax + sched_.center_loss_weight * center;

  auto& opt = optimizer("FACE_EMBED");
  opt.zero_grad();
  loss.backward();
  opt.step();
  update_centers(centers_, raw, y, sched_.center_alpha);

  StepRecord record;
  record.stage = stage_;
  record.report.total = detail::scalar(loss);
  record.extra = {{"L_softmax", detail::scalar(softmax)}, {"L_center", detail::scalar(center)}};
  record.step = ++step_;
  return record;
}

Network stage1_train_face_embed(const TrainingSchedule& sched, const NetworkConfig& cfg,
                                const ImageBatch& hr, const std::vector<int>& labels,
                                const StepCallback& callback) {
  FaceTrainer trainer(sched, cfg, hr, labels);
  trainer.run(callback);
  return trainer.network(NetworkKind::FaceEmbed);
}

}  // namespace crsr
