// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. CRSR_ACCEPT_ONLY=4,5 runs a subset.
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crsr/checkpoint.hpp"
#include "crsr/cli.hpp"
#include "crsr/error.hpp"
#include "crsr/imaging.hpp"
#include "crsr/losses.hpp"
#include "crsr/metrics.hpp"
#include "crsr/networks.hpp"
#include "crsr/toy_faces.hpp"
#include "crsr/training.hpp"

namespace fs = std::filesystem;
using namespace crsr;

namespace {

// ---------------------------------------------------------------- reporting

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// -------------------------------------------------------------- toy fixture

const fs::path kData = CRSR_DATA_DIR;

struct ToyData {
  ImageBatch hr;
  std::vector<int> labels;
  ImageBatch heldout;
  // 256 fresh renders of the training identities, for distribution metrics.
  ImageBatch probe_hr;
};

ToyData load_toy() {
  auto train = load_image_folder(kData / "toy" / "hr", kHrSize, Role::AuxHr);
  auto held = load_image_folder(kData / "toy" / "heldout", kHrSize, Role::AuxHr);
  auto labels = read_labels(kData / "toy" / "hr" / "labels.txt", train.names);
  auto probe = make_toy_faces({4, 64, 1, 3});
  return {train.images, labels, held.images, probe.images};
}

TrainingSchedule toy_schedule() {
  TrainingSchedule s;
  s.seed = 7;
  s.batch_size = 16;
  s.epochs_sr = 100;   // 200 steps on 32 images
  s.epochs_cc = 500;   // 1000 steps; the adversarial pair needs ~900 to settle here
  s.epochs_face = 50;
  s.epochs_joint = 50;  // 100 steps
  return s;
}

DegradationConfig toy_degradation(uint64_t seed) {
  DegradationConfig d;
  d.seed = seed;
  return d;
}

double window_mean(const std::vector<double>& v, size_t begin, size_t n) {
  double total = 0.0;
  for (size_t i = begin; i < begin + n; ++i) total += v[i];
  return total / static_cast<double>(n);
}

// Fréchet distance of two LR batches in the face-embedding space, after
// bicubic upsampling.
double lr_fid(const Network& face, const ImageBatch& a, const ImageBatch& b) {
  auto ea = forward_face_embed(face, bicubic_upsample(a));
  auto eb = forward_face_embed(face, bicubic_upsample(b));
  return fid(gaussian_stats(ea), gaussian_stats(eb));
}

// Stage-1 products shared by criteria 4, 5 and 7.
struct StageOne {
  Network sr;
  NetworkSet cc;
  Network face;
  std::vector<double> sr_losses;
  double sr_seconds = 0.0;
  double cc_seconds = 0.0;
  double face_seconds = 0.0;
};

std::optional<StageOne> g_stage_one;

const StageOne& stage_one(const ToyData& data) {
  if (g_stage_one) return *g_stage_one;
  const auto sched = toy_schedule();
  const NetworkConfig cfg;
  std::vector<double> sr_losses;
  auto t0 = std::chrono::steady_clock::now();
  Network sr = stage1_pretrain_sr(sched, cfg, data.hr,
                                  [&](const StepRecord& r) { sr_losses.push_back(r.report.sr); });
  const double sr_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const ImageBatch genuine = degrade_to_genuine_like(data.hr, toy_degradation(11));
  const ImageBatch artificial = bicubic_downsample(data.hr);
  NetworkSet cc = stage1_pretrain_cc(sched, cfg, LossWeights{}, genuine, artificial);
  const double cc_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  Network face = stage1_train_face_embed(sched, cfg, data.hr, data.labels);
  const double face_s = seconds_since(t0);
  g_stage_one = StageOne{sr, cc, face, sr_losses, sr_s, cc_s, face_s};
  return *g_stage_one;
}

NetworkSet stage_one_set(const StageOne& s1) {
  NetworkSet nets = s1.cc;
  nets.insert_or_assign(NetworkKind::SrGen, s1.sr);
  nets.insert_or_assign(NetworkKind::FaceEmbed, s1.face);
  return nets;
}

// ------------------------------------------------------------ criterion 1

// FID via the general (non-symmetric) eigenvalues of cov_a * cov_b.
double brute_force_fid(const GaussianStats& a, const GaussianStats& b) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a.cov * b.cov);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    trace_sqrt += std::sqrt(std::max(0.0, solver.eigenvalues()(i).real()));
  }
  return (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
}

GaussianStats stats_of(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  GaussianStats s;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.n = 2;
  return s;
}

Outcome criterion1() {
  Outcome o;
  auto one_d = [](double mu, double var) {
    return stats_of(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, var));
  };
  o.check(std::abs(fid(one_d(0, 1), one_d(0, 1))) < 1e-6, "fid(N(0,1), N(0,1)) = 0");
  o.check(std::abs(fid(one_d(0, 1), one_d(2, 1)) - 4.0) < 1e-6, "fid mean shift 2 = 4");
  o.check(std::abs(fid(one_d(0, 1), one_d(0, 4)) - 1.0) < 1e-6, "fid var 1 vs 4 = 1");
  {
    Eigen::VectorXd v1(3), v2(3);
    v1 << 1.0, 4.0, 0.25;
    v2 << 4.0, 1.0, 0.25;
    const double expected = 1.0 + 1.0 + 0.0;  // sum (sqrt a - sqrt b)^2
    const double got = fid(stats_of(Eigen::VectorXd::Zero(3), v1.asDiagonal().toDenseMatrix()),
                           stats_of(Eigen::VectorXd::Zero(3), v2.asDiagonal().toDenseMatrix()));
    o.check(std::abs(got - expected) < 1e-6, "fid diagonal case = " + fmt(got));
  }
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto random_psd = [&] {
      Eigen::MatrixXd a(8, 8);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
      return Eigen::MatrixXd(a * a.transpose() / 8.0);
    };
    Eigen::VectorXd m1(8), m2(8);
    for (int i = 0; i < 8; ++i) {
      m1(i) = normal(rng);
      m2(i) = normal(rng);
    }
    const auto a = stats_of(m1, random_psd());
    const auto b = stats_of(m2, random_psd());
    worst = std::max(worst, std::abs(fid(a, b) - brute_force_fid(a, b)));
  }
  o.check(worst < 1e-4, "fid vs eigendecomposition oracle, 50 random 8-D pairs, max err " +
                            fmt(worst, 3));
  const double p = psnr_from_mse(1.0);
  o.check(std::abs(p - 48.1308) < 1e-3, "psnr(MSE=1) = " + fmt(p, 8));
  const double s = ssim_plane(Eigen::MatrixXd::Constant(64, 64, 100.0),
                              Eigen::MatrixXd::Constant(64, 64, 150.0));
  o.check(std::abs(s - 0.9225) < 1e-3, "ssim constant 100 vs 150 = " + fmt(s, 6));
  return o;
}

// ------------------------------------------------------------ criterion 2

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

// Checks d f / d inputs[k] for every element of every input, in double.
double worst_input_gradient(const std::vector<torch::Tensor>& inputs,
                            const std::function<torch::Tensor(const std::vector<torch::Tensor>&)>& f) {
  std::vector<torch::Tensor> leaves;
  for (const auto& t : inputs) leaves.push_back(t.to(torch::kFloat64).detach().requires_grad_(true));
  auto out = f(leaves);
  out.backward();
  double worst = 0.0;
  const double h = 1e-6;
  for (size_t k = 0; k < leaves.size(); ++k) {
    // Inputs a loss ignores get no gradient at all.
    auto grad = leaves[k].grad().defined() ? leaves[k].grad().reshape({-1})
                                           : torch::zeros({leaves[k].numel()}, torch::kFloat64);
    for (int64_t i = 0; i < leaves[k].numel(); ++i) {
      std::vector<torch::Tensor> plus, minus;
      for (const auto& l : leaves) {
        plus.push_back(l.detach().clone());
        minus.push_back(l.detach().clone());
      }
      plus[k].reshape({-1})[i] += h;
      minus[k].reshape({-1})[i] -= h;
      torch::NoGradGuard no_grad;
      const double numeric = (f(plus).item<double>() - f(minus).item<double>()) / (2.0 * h);
      worst = std::max(worst, relative_error(grad[i].item<double>(), numeric));
    }
  }
  return worst;
}

double worst_parameter_gradient(NetworkKind kind, uint64_t seed) {
  NetworkConfig cfg;
  Network net = Network::create(kind, cfg, seed);
  net.module().to(torch::kFloat64);
  torch::manual_seed(seed + 99);
  torch::Tensor x;
  switch (kind) {
    case NetworkKind::SrGen:
    case NetworkKind::CrGen:
    case NetworkKind::InvCrGen:
    case NetworkKind::DiscCr:
    case NetworkKind::DiscInvCr:
      x = torch::rand({2, 3, kLrSize, kLrSize}, torch::kFloat64) * 1.6 - 0.8;
      break;
    case NetworkKind::FaceEmbed:
      x = torch::rand({2, 3, kHrSize, kHrSize}, torch::kFloat64) * 1.6 - 0.8;
      break;
    case NetworkKind::DiscFeat:
      x = torch::nn::functional::normalize(torch::randn({2, cfg.embed_dim}, torch::kFloat64),
                                           torch::nn::functional::NormalizeFuncOptions().dim(1));
      break;
  }
  // Random linear read-out so every output element matters.
  const auto probe = net(x);
  const auto weights = torch::randn(probe.sizes(), torch::kFloat64);
  auto f = [&] { return (net(x) * weights).sum(); };

  auto params = net.parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  f().backward();

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const double h = 1e-6;
  for (int sample = 0; sample < 10; ++sample) {
    auto& p = params[rng() % params.size()];
    const int64_t i = static_cast<int64_t>(rng() % static_cast<uint64_t>(p.numel()));
    const double analytic = p.grad().reshape({-1})[i].item<double>();
    torch::NoGradGuard no_grad;
    auto flat = p.view({-1});
    const double original = flat[i].item<double>();
    flat[i] = original + h;
    const double up = f().item<double>();
    flat[i] = original - h;
    const double down = f().item<double>();
    flat[i] = original;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2.0 * h)));
  }
  return worst;
}

Outcome criterion2() {
  Outcome o;
  torch::manual_seed(5);
  const double tol = 1e-3;
  auto img = [] { return torch::rand({1, 3, 2, 2}) * 1.6 - 0.8; };
  auto prob = [] { return torch::rand({4}) * 0.8 + 0.1; };
  const LossWeights w;

  double e = worst_input_gradient({img(), img()}, [](const auto& v) { return sr_mse_loss(v[0], v[1]); });
  o.check(e < tol, "sr_mse_loss input gradient, rel err " + fmt(e, 3));
  for (int which = 0; which < 2; ++which) {
    e = worst_input_gradient({prob(), prob()}, [which](const auto& v) {
      auto l = gan_loss_cr(v[0], v[1]);
      return which == 0 ? l.disc : l.gen;
    });
    o.check(e < tol, std::string("gan_loss_cr ") + (which ? "gen" : "disc") + ", rel err " + fmt(e, 3));
    e = worst_input_gradient({prob(), prob()}, [which](const auto& v) {
      auto l = gan_loss_inverse_cr(v[0], v[1]);
      return which == 0 ? l.disc : l.gen;
    });
    o.check(e < tol,
            std::string("gan_loss_inverse_cr ") + (which ? "gen" : "disc") + ", rel err " + fmt(e, 3));
    e = worst_input_gradient({prob(), prob()}, [which](const auto& v) {
      auto l = semantic_adaptation_loss(v[0], v[1]);
      return which == 0 ? l.disc : l.gen;
    });
    o.check(e < tol, std::string("semantic_adaptation_loss ") + (which ? "gen" : "disc") +
                         ", rel err " + fmt(e, 3));
  }
  e = worst_input_gradient({img(), img(), torch::rand({}) + 0.5}, [&w](const auto& v) {
    return cr_composite_loss(v[0], v[1], v[2], w);
  });
  o.check(e < tol, "cr_composite_loss, rel err " + fmt(e, 3));
  e = worst_input_gradient({torch::rand({1, 3, 8, 8}) * 1.6 - 0.8, img()},
                           [](const auto& v) { return cr_sr_loss(v[0], v[1]); });
  o.check(e < tol, "cr_sr_loss (8x8 -> 2x2), rel err " + fmt(e, 3));
  e = worst_input_gradient({torch::rand({}), torch::rand({}), torch::rand({}), torch::rand({}),
                            torch::rand({})},
                           [&w](const auto& v) {
                             return total_loss(LossTerms<torch::Tensor>{v[0], v[1], v[2], v[3], v[4]}, w);
                           });
  o.check(e < tol, "total_loss, rel err " + fmt(e, 3));

  for (auto kind : kAllNetworkKinds) {
    e = worst_parameter_gradient(kind, 40 + static_cast<uint64_t>(kind));
    o.check(e < tol, std::string(to_string(kind)) + " parameter gradients, rel err " + fmt(e, 3));
  }
  return o;
}

// ------------------------------------------------------------ criterion 3

Outcome criterion3() {
  Outcome o;
  const NetworkConfig cfg;
  NetworkSet nets;
  for (auto kind : kAllNetworkKinds) nets.emplace(kind, Network::create(kind, cfg, 3));
  for (int64_t b : {1, 2, 16}) {
    torch::manual_seed(b);
    const ImageBatch lr(torch::rand({b, 3, kLrSize, kLrSize}) * 2 - 1, Role::GenuineLr);
    const ImageBatch hr(torch::rand({b, 3, kHrSize, kHrSize}) * 2 - 1, Role::AuxHr);
    const std::string tag = " (batch " + std::to_string(b) + ")";
    for (auto kind : {NetworkKind::CrGen, NetworkKind::InvCrGen}) {
      auto y = forward_cr(nets.at(kind), lr);
      o.check(y.size() == b && y.height() == kLrSize && y.width() == kLrSize &&
                  y.data().abs().max().item<float>() <= 1.0f,
              std::string(to_string(kind)) + " 16x16 -> 16x16 in [-1,1]" + tag);
    }
    auto sr = forward_sr(nets.at(NetworkKind::SrGen), lr);
    o.check(sr.size() == b && sr.height() == kHrSize && sr.width() == kHrSize &&
                sr.data().abs().max().item<float>() <= 1.0f,
            "SR_GEN 16x16 -> 64x64 in [-1,1]" + tag);
    for (auto kind : {NetworkKind::DiscCr, NetworkKind::DiscInvCr}) {
      auto p = forward_disc(nets.at(kind), lr);
      o.check(p.dim() == 1 && p.size(0) == b && p.gt(0).all().item<bool>() &&
                  p.lt(1).all().item<bool>(),
              std::string(to_string(kind)) + " scores in (0,1)" + tag);
    }
    auto e = forward_face_embed(nets.at(NetworkKind::FaceEmbed), hr);
    o.check(e.size(0) == b && e.size(1) == cfg.embed_dim, "FACE_EMBED shape" + tag);
    auto p = forward_feature_disc(nets.at(NetworkKind::DiscFeat), e);
    o.check(p.dim() == 1 && p.size(0) == b && p.gt(0).all().item<bool>() &&
                p.lt(1).all().item<bool>(),
            "DISC_FEAT scores in (0,1)" + tag);
  }
  return o;
}

// ------------------------------------------------------------ criterion 4

Outcome criterion4(const ToyData& data) {
  Outcome o;
  const StageOne& s1 = stage_one(data);
  const auto& l = s1.sr_losses;
  o.check(l.size() == 200, "SR pretraining ran " + std::to_string(l.size()) + " steps");
  if (l.size() >= 40) {
    const double first = window_mean(l, 0, 20);
    const double last = window_mean(l, l.size() - 20, 20);
    o.check(last <= 0.5 * first, "running L_sr (20-step mean) " + fmt(first, 4) + " -> " +
                                     fmt(last, 4) + ", ratio " + fmt(last / first, 3));
  }
  const ImageBatch genuine = degrade_to_genuine_like(data.probe_hr, toy_degradation(99));
  const ImageBatch artificial = bicubic_downsample(data.probe_hr);
  const ImageBatch regulated = forward_cr(s1.cc.at(NetworkKind::CrGen), genuine);
  const double before = lr_fid(s1.face, genuine, artificial);
  const double after = lr_fid(s1.face, regulated, artificial);
  o.check(after < before, "FID(regulated, artificial) " + fmt(after, 4) +
                              " < FID(genuine-like, artificial) " + fmt(before, 4));
  const double minutes = (s1.sr_seconds + s1.cc_seconds + s1.face_seconds) / 60.0;
  o.check(minutes < 15.0, "stage-1 runtime " + fmt(minutes, 3) + " min (SR " +
                              fmt(s1.sr_seconds, 3) + " s, CC " + fmt(s1.cc_seconds, 3) +
                              " s, face " + fmt(s1.face_seconds, 3) + " s)");
  return o;
}

// ------------------------------------------------------------ criterion 5

struct JointRun {
  NetworkSet nets;
  std::vector<double> totals;
};

JointRun joint_run(const ToyData& data, const NetworkSet& stage1, std::set<Ablation> ablation) {
  auto sched = toy_schedule();
  sched.ablation = std::move(ablation);
  const JointData jd{data.hr, degrade_to_genuine_like(data.hr, toy_degradation(11))};
  JointRun run;
  run.nets = stage2_joint_finetune(sched, NetworkConfig{}, LossWeights{}, stage1, jd,
                                   [&](const StepRecord& r) { run.totals.push_back(r.report.total); });
  return run;
}

double sr_fid(const NetworkSet& nets, const ImageBatch& hr, bool use_cr) {
  const ImageBatch genuine = degrade_to_genuine_like(hr, toy_degradation(99));
  const ImageBatch reg = use_cr ? forward_cr(nets.at(NetworkKind::CrGen), genuine) : genuine;
  const ImageBatch sr = forward_sr(nets.at(NetworkKind::SrGen), reg);
  const Network& face = nets.at(NetworkKind::FaceEmbed);
  return fid(gaussian_stats(forward_face_embed(face, sr)),
             gaussian_stats(forward_face_embed(face, hr)));
}

Outcome criterion5(const ToyData& data) {
  Outcome o;
  const NetworkSet stage1 = stage_one_set(stage_one(data));
  auto t0 = std::chrono::steady_clock::now();
  const JointRun full = joint_run(data, stage1, {});
  const JointRun no_cr = joint_run(data, stage1, {Ablation::NoCr});
  const double minutes = seconds_since(t0) / 60.0;

  const auto& t = full.totals;
  o.check(t.size() == 100, "joint fine-tuning ran " + std::to_string(t.size()) + " steps");
  if (t.size() >= 40) {
    const double first = window_mean(t, 0, 20);
    const double last = window_mean(t, t.size() - 20, 20);
    o.check(last < first, "20-step moving average of L_total " + fmt(first, 5) + " -> " +
                              fmt(last, 5));
  }
  const double fid_full = sr_fid(full.nets, data.probe_hr, true);
  const double fid_no_cr = sr_fid(no_cr.nets, data.probe_hr, false);
  o.check(fid_no_cr > fid_full,
          "FID(SR, HR) NO_CR " + fmt(fid_no_cr, 4) + " > full " + fmt(fid_full, 4));
  o.check(minutes < 20.0, "stage-2 runtime (two runs) " + fmt(minutes, 3) + " min");
  return o;
}

// ------------------------------------------------------------ criterion 6

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome criterion6(const ToyData& data, const fs::path& scratch) {
  Outcome o;
  NetworkConfig cfg;
  cfg.base_channels = 8;
  cfg.sr_group_blocks = {2, 1, 1};
  cfg.embed_dim = 32;
  TrainingSchedule sched = toy_schedule();
  sched.epochs_sr = 5;
  sched.epochs_cc = 5;
  sched.epochs_face = 5;
  sched.epochs_joint = 10;  // 20 steps
  const ImageBatch genuine = degrade_to_genuine_like(data.hr, toy_degradation(11));
  const ImageBatch artificial = bicubic_downsample(data.hr);

  auto log_of = [](StageTrainer& t) {
    std::string log;
    t.run([&](const StepRecord& r) { log += to_json(r).dump() + "\n"; });
    return log;
  };
  auto make = [&](Stage stage, const NetworkSet& stage1) -> std::unique_ptr<StageTrainer> {
    switch (stage) {
      case Stage::SrPretrain:
        return std::make_unique<SrPretrainer>(sched, cfg, data.hr);
      case Stage::CcPretrain:
        return std::make_unique<CcPretrainer>(sched, cfg, LossWeights{}, genuine, artificial);
      case Stage::FacePretrain:
        return std::make_unique<FaceTrainer>(sched, cfg, data.hr, data.labels);
      case Stage::Joint:
        return std::make_unique<JointTrainer>(sched, cfg, LossWeights{}, stage1,
                                              JointData{data.hr, genuine});
    }
    return nullptr;
  };

  NetworkSet stage1;
  for (auto stage : {Stage::SrPretrain, Stage::CcPretrain, Stage::FacePretrain, Stage::Joint}) {
    const std::string name(to_string(stage));
    auto a = make(stage, stage1);
    auto b = make(stage, stage1);
    const std::string log_a = log_of(*a);
    const std::string log_b = log_of(*b);
    a->save(scratch / (name + "_a.ckpt"));
    b->save(scratch / (name + "_b.ckpt"));
    o.check(!log_a.empty() && log_a == log_b, name + ": two runs give bit-identical loss logs");
    o.check(file_bytes(scratch / (name + "_a.ckpt")) == file_bytes(scratch / (name + "_b.ckpt")),
            name + ": two runs give byte-identical checkpoints");

    // Interrupted run: stop halfway, save, resume in a fresh trainer.
    auto first = make(stage, stage1);
    std::vector<std::string> lines;
    const int64_t half = first->total_steps() / 2;
    for (int64_t i = 0; i < half; ++i) lines.push_back(to_json(first->step()).dump());
    first->save(scratch / (name + "_mid.ckpt"));
    first.reset();
    auto resumed = make(stage, stage1);
    resumed->resume(scratch / (name + "_mid.ckpt"));
    resumed->run([&](const StepRecord& r) { lines.push_back(to_json(r).dump()); });
    std::string log_resumed;
    for (const auto& l : lines) log_resumed += l + "\n";
    o.check(log_resumed == log_a, name + ": save/resume at step " + std::to_string(half) +
                                      " reproduces the uninterrupted loss sequence");
    resumed->save(scratch / (name + "_resumed.ckpt"));
    o.check(file_bytes(scratch / (name + "_resumed.ckpt")) ==
                file_bytes(scratch / (name + "_a.ckpt")),
            name + ": resumed run ends with a byte-identical checkpoint");

    for (const auto& [kind, net] : a->networks()) stage1.insert_or_assign(kind, net);
  }
  return o;
}

// ------------------------------------------------------------ criterion 7

Outcome criterion7(const ToyData& data, const fs::path& scratch) {
  Outcome o;
  const StageOne& s1 = stage_one(data);
  const fs::path ckpt = scratch / "sr_stage1.ckpt";
  save_checkpoint(ckpt, TrainState{}, {{NetworkKind::SrGen, s1.sr}});

  // Held-out inputs go through disk exactly as a user would supply them.
  const ImageBatch lr = bicubic_downsample(data.heldout);
  std::vector<std::string> names;
  for (int64_t i = 0; i < lr.size(); ++i) names.push_back("h" + std::to_string(i) + ".png");
  save_images(lr, scratch / "heldout_lr", names);

  std::ostringstream out, err;
  const int code = run_command({"sr", "--checkpoint", ckpt.string(), "--input",
                                (scratch / "heldout_lr").string(), "--output",
                                (scratch / "heldout_sr").string(), "--bypass-cr"},
                               out, err);
  o.check(code == 0, "sr --bypass-cr exit code " + std::to_string(code) + " " + err.str());
  if (code != 0) return o;

  auto sr = load_image_folder(scratch / "heldout_sr", kHrSize, Role::SuperResolved);
  auto lr_disk = load_image_folder(scratch / "heldout_lr", kLrSize, Role::ArtificialLr);
  // Same 8-bit quantisation for the baseline as for the network output.
  const ImageBatch bicubic = bicubic_upsample(lr_disk.images);
  const ImageBatch bicubic_8bit(torch::round((bicubic.data() + 1) * 127.5) / 127.5 - 1,
                                Role::SuperResolved);
  const ImageBatch hr_ordered = data.heldout.select([&] {
    std::vector<int64_t> idx;
    for (const auto& n : sr.names) idx.push_back(std::stoll(n.substr(1, n.size() - 5)));
    return idx;
  }());
  const double p_sr = psnr(sr.images, hr_ordered);
  const double p_bicubic = psnr(bicubic_8bit.with_role(Role::SuperResolved), hr_ordered);
  o.check(p_sr > p_bicubic, "held-out PSNR: bypass-CR SR " + fmt(p_sr, 5) + " dB > bicubic " +
                                fmt(p_bicubic, 5) + " dB");
  return o;
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  std::set<int> only;
  if (const char* env = std::getenv("CRSR_ACCEPT_ONLY")) {
    std::stringstream ss(env);
    std::string item;
    while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
  }
  const fs::path scratch = fs::temp_directory_path() / "crsr_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  std::optional<ToyData> data;
  auto toy = [&]() -> const ToyData& {
    if (!data) data = load_toy();
    return *data;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracles", [] { return criterion1(); }},
      {"gradient suite", [] { return criterion2(); }},
      {"shape/range suite", [] { return criterion3(); }},
      {"toy training, stage 1", [&] { return criterion4(toy()); }},
      {"toy training, stage 2", [&] { return criterion5(toy()); }},
      {"determinism and persistence", [&] { return criterion6(toy(), scratch); }},
      {"bypass-CR path", [&] { return criterion7(toy(), scratch); }},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.check(false, std::string("threw: ") + e.what());
    }
    for (const auto& note : outcome.notes) std::cout << "    " << note << '\n';
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << number << ": "
              << criteria[i].first << " (" << fmt(seconds_since(t0), 3) << " s)" << std::endl;
    if (!outcome.pass) ++failures;
  }
  fs::remove_all(scratch);
  return failures == 0 ? 0 : 1;
}
