#include "crsr/cli.hpp"

#include "crsr/config.hpp"
#include "crsr/error.hpp"
#include "crsr/metrics.hpp"
#include "crsr/toy_faces.hpp"
#include "crsr/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>

namespace crsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSrCheckpoint = "sr.ckpt";
constexpr const char* kCcCheckpoint = "cc.ckpt";
constexpr const char* kFaceCheckpoint = "face.ckpt";
constexpr const char* kJointCheckpoint = "joint.ckpt";

struct LabelledImages {
  ImageBatch images;
  std::vector<std::string> names;
  std::vector<int> labels;  // empty when no labels file is known
};

void warn_all(const ImageFolder& folder, std::ostream& err) {
  for (const auto& w : folder.warnings) err << "warning: " << w << '\n';
}

LabelledImages load_labelled(const fs::path& dir, const fs::path& labels_file, bool need_labels,
                             std::ostream& err) {
  ImageFolder folder = load_image_folder(dir, kHrSize, Role::AuxHr);
  warn_all(folder, err);
  LabelledImages out{folder.images, folder.names, {}};
  if (!labels_file.empty()) {
    out.labels = read_labels(labels_file, folder.names);
  } else if (need_labels) {
    throw ConfigError("labels_file", "no labels for " + dir.string());
  }
  return out;
}

const fs::path& require_dir(const fs::path& p, const char* key) {
  if (p.empty()) throw ConfigError(key, "required by this command");
  return p;
}

LabelledImages load_training_hr(const ExperimentConfig& cfg, bool need_labels, std::ostream& err) {
  return load_labelled(require_dir(cfg.hr_dir, "hr_dir"), cfg.labels_file, need_labels, err);
}

ImageBatch load_genuine(const ExperimentConfig& cfg, const ImageBatch& hr, std::ostream& err) {
  if (!cfg.genuine_lr_dir.empty()) {
    ImageFolder folder = load_image_folder(cfg.genuine_lr_dir, kLrSize, Role::GenuineLr);
    warn_all(folder, err);
    return folder.images;
  }
  if (cfg.degrade_from_hr) return degrade_to_genuine_like(hr, cfg.degradation);
  throw ConfigError("genuine_lr_dir", "set genuine_lr_dir or degrade_from_hr");
}

void prepare_output(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "config.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (cfg.output_dir / "config.json").string());
  out << to_json(cfg).dump(2) << '\n';
}

// Streams one JSON line per step; the file is truncated first.
class LossLog {
 public:
  explicit LossLog(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  StepCallback callback() {
    return [this](const StepRecord& r) {
      out_ << to_json(r).dump() << '\n';
      last_ = r.report.total;
      ++steps_;
    };
  }
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }
  int64_t steps() const { return steps_; }
  double last_total() const { return last_; }

 private:
  fs::path path_;
  std::ofstream out_;
  int64_t steps_ = 0;
  double last_ = 0.0;
};

void report_training(std::ostream& out, const char* name, const LossLog& log,
                     const fs::path& ckpt) {
  out << name << ": " << log.steps() << " steps";
  if (log.steps() > 0) out << ", final L_total " << log.last_total();
  out << ", wrote " << ckpt.string() << '\n';
}

NetworkSet load_nets(const fs::path& path, const NetworkConfig& cfg) {
  if (!fs::exists(path)) throw StateError("missing checkpoint " + path.string());
  return load_checkpoint(path, cfg).nets;
}

NetworkSet fresh_networks(const ExperimentConfig& cfg) {
  NetworkSet nets;
  for (auto kind : kAllNetworkKinds) {
    nets.emplace(kind, Network::create(kind, cfg.network, network_seed(cfg.schedule.seed, kind)));
  }
  return nets;
}

// An SR image discriminator shares DISC_CR's slot in sr.ckpt; the CC one wins.
NetworkSet stage1_networks(const ExperimentConfig& cfg) {
  NetworkSet nets;
  for (const char* file : {kSrCheckpoint, kCcCheckpoint, kFaceCheckpoint}) {
    const fs::path path = cfg.output_dir / file;
    if (!fs::exists(path)) {
      throw StateError("missing stage-1 checkpoint " + path.string() +
                       " (run train-sr, train-cc and train-face first, or pass --from-scratch)");
    }
    for (auto& [kind, net] : load_checkpoint(path, cfg.network).nets) nets.insert_or_assign(kind, net);
  }
  return nets;
}

NetworkSet trained_networks(const ExperimentConfig& cfg) {
  const fs::path joint = cfg.output_dir / kJointCheckpoint;
  if (fs::exists(joint)) return load_nets(joint, cfg.network);
  return stage1_networks(cfg);
}

const Network& need(const NetworkSet& nets, NetworkKind kind, const fs::path& source) {
  auto it = nets.find(kind);
  if (it == nets.end()) {
    throw StateError(source.string() + " holds no " + std::string(to_string(kind)) + " network");
  }
  return it->second;
}

// --- subcommands ---------------------------------------------------------

int cmd_train_sr(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto hr = load_training_hr(cfg, false, err);
  prepare_output(cfg);
  SrPretrainer trainer(cfg.schedule, cfg.network, hr.images);
  LossLog log(cfg.output_dir / "sr_loss.jsonl");
  trainer.run(log.callback());
  log.close();
  trainer.save(cfg.output_dir / kSrCheckpoint);
  report_training(out, "train-sr", log, cfg.output_dir / kSrCheckpoint);
  return kExitOk;
}

int cmd_train_cc(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto hr = load_training_hr(cfg, false, err);
  const ImageBatch genuine = load_genuine(cfg, hr.images, err);
  const ImageBatch artificial = bicubic_downsample(hr.images);
  prepare_output(cfg);
  CcPretrainer trainer(cfg.schedule, cfg.network, cfg.weights, genuine, artificial);
  LossLog log(cfg.output_dir / "cc_loss.jsonl");
  trainer.run(log.callback());
  log.close();
  trainer.save(cfg.output_dir / kCcCheckpoint);
  report_training(out, "train-cc", log, cfg.output_dir / kCcCheckpoint);
  return kExitOk;
}

int cmd_train_face(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto hr = load_training_hr(cfg, true, err);
  prepare_output(cfg);
  FaceTrainer trainer(cfg.schedule, cfg.network, hr.images, hr.labels);
  LossLog log(cfg.output_dir / "face_loss.jsonl");
  trainer.run(log.callback());
  log.close();
  trainer.save(cfg.output_dir / kFaceCheckpoint);
  report_training(out, "train-face", log, cfg.output_dir / kFaceCheckpoint);
  return kExitOk;
}

void write_joint_samples(const NetworkSet& nets, const ImageBatch& genuine, bool use_cr,
                         const fs::path& path) {
  const int64_t n = std::min<int64_t>(3, genuine.size());
  const ImageBatch g = genuine.slice(0, n);
  const ImageBatch reg = use_cr ? forward_cr(nets.at(NetworkKind::CrGen), g) : g;
  const ImageBatch sr = forward_sr(nets.at(NetworkKind::SrGen), reg);
  std::vector<ImageBatch> tiles;
  for (int64_t i = 0; i < n; ++i) {
    tiles.push_back(nearest_upsample(g.slice(i, i + 1)));
    tiles.push_back(nearest_upsample(reg.slice(i, i + 1)));
    tiles.push_back(sr.slice(i, i + 1));
  }
  save_image_grid(concat(tiles), path);
}

int cmd_train_joint(const ExperimentConfig& cfg, bool from_scratch, std::ostream& out,
                    std::ostream& err) {
  const auto hr = load_training_hr(cfg, false, err);
  const ImageBatch genuine = load_genuine(cfg, hr.images, err);
  const NetworkSet stage1 = from_scratch ? fresh_networks(cfg) : stage1_networks(cfg);
  prepare_output(cfg);
  JointTrainer trainer(cfg.schedule, cfg.network, cfg.weights, stage1, {hr.images, genuine});
  LossLog log(cfg.output_dir / "joint_loss.jsonl");
  trainer.run(log.callback());
  log.close();
  trainer.save(cfg.output_dir / kJointCheckpoint);
  write_joint_samples(trainer.networks(), genuine, !cfg.schedule.has(Ablation::NoCr),
                      cfg.output_dir / "joint_samples.png");
  report_training(out, "train-joint", log, cfg.output_dir / kJointCheckpoint);
  return kExitOk;
}

RecognitionSplit recognition_split(const torch::Tensor& gallery_pool,
                                   const torch::Tensor& probe_pool, const std::vector<int>& ids) {
  RecognitionSplit split;
  std::vector<int64_t> gallery_rows;
  std::vector<int64_t> probe_rows;
  std::map<int, bool> seen;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!seen[ids[i]]) {
      seen[ids[i]] = true;
      gallery_rows.push_back(static_cast<int64_t>(i));
      split.gallery_ids.push_back(ids[i]);
    } else {
      probe_rows.push_back(static_cast<int64_t>(i));
      split.probe_ids.push_back(ids[i]);
    }
  }
  if (probe_rows.empty()) throw NoDataError("eval needs two or more images of some identity");
  split.gallery = to_eigen(gallery_pool.index_select(0, torch::tensor(gallery_rows, torch::kLong)));
  split.probes = to_eigen(probe_pool.index_select(0, torch::tensor(probe_rows, torch::kLong)));
  return split;
}

int cmd_eval(const ExperimentConfig& cfg, bool untrained, std::ostream& out, std::ostream& err) {
  const fs::path dir = cfg.heldout_dir.empty() ? require_dir(cfg.hr_dir, "hr_dir") : cfg.heldout_dir;
  fs::path labels = cfg.labels_file;
  if (!cfg.heldout_dir.empty()) {
    labels = fs::exists(dir / "labels.txt") ? dir / "labels.txt" : fs::path();
  }
  const auto eval_set = load_labelled(dir, labels, true, err);
  const NetworkSet nets = untrained ? fresh_networks(cfg) : trained_networks(cfg);
  const fs::path source = untrained ? fs::path("untrained networks") : cfg.output_dir;
  const Network& sr = need(nets, NetworkKind::SrGen, source);
  const Network& face = need(nets, NetworkKind::FaceEmbed, source);
  const bool use_cr = !cfg.schedule.has(Ablation::NoCr);

  const ImageBatch& hr = eval_set.images;
  const ImageBatch bypass = forward_sr(sr, bicubic_downsample(hr));
  const double psnr_mean = psnr(bypass, hr);
  const double ssim_mean = ssim(bypass, hr);

  const ImageBatch genuine = degrade_to_genuine_like(hr, cfg.degradation);
  const ImageBatch regulated =
      use_cr ? forward_cr(need(nets, NetworkKind::CrGen, source), genuine) : genuine;
  const ImageBatch resolved = forward_sr(sr, regulated);
  const auto real_embed = forward_face_embed(face, hr);
  const auto fake_embed = forward_face_embed(face, resolved);
  const double fid_value = fid(gaussian_stats(fake_embed), gaussian_stats(real_embed));
  const double rank1_value = rank1(recognition_split(real_embed, fake_embed, eval_set.labels));

  const json report = {{"fid", fid_value},
                       {"psnr_mean", psnr_mean},
                       {"ssim_mean", ssim_mean},
                       {"rank1", rank1_value},
                       {"n_images", hr.size()},
                       {"embed_dim", cfg.network.embed_dim},
                       {"config_fingerprint", fingerprint_hex(cfg.network.fingerprint())}};
  fs::create_directories(cfg.output_dir);
  std::ofstream file(cfg.output_dir / "eval.json", std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + (cfg.output_dir / "eval.json").string());
  file << report.dump(2) << '\n';
  out << report.dump() << '\n';
  return kExitOk;
}

int cmd_sr(const fs::path& checkpoint, const fs::path& input, const fs::path& output,
           bool bypass_cr, std::ostream& out, std::ostream& err) {
  const LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  const Network& sr = need(loaded.nets, NetworkKind::SrGen, checkpoint);
  ImageFolder folder =
      load_image_folder(input, kLrSize, bypass_cr ? Role::ArtificialLr : Role::GenuineLr);
  warn_all(folder, err);
  ImageBatch lr = folder.images;
  if (!bypass_cr) lr = forward_cr(need(loaded.nets, NetworkKind::CrGen, checkpoint), lr);
  fs::create_directories(output);
  save_images(forward_sr(sr, lr), output, folder.names);
  out << "sr: wrote " << folder.names.size() << " images to " << output.string()
      << (bypass_cr ? " (CR bypassed)" : "") << '\n';
  return kExitOk;
}

int cmd_degrade(const fs::path& input, const fs::path& output, uint64_t seed,
                const std::optional<ExperimentConfig>& cfg, std::ostream& out, std::ostream& err) {
  DegradationConfig dcfg = cfg ? cfg->degradation : DegradationConfig{};
  dcfg.seed = seed;
  dcfg.validate();
  ImageFolder folder = load_image_folder(input, kHrSize, Role::AuxHr);
  warn_all(folder, err);
  if (fs::exists(output) && fs::equivalent(input, output)) {
    throw ConfigError("output", "must differ from the input directory");
  }
  fs::create_directories(output);
  save_images(degrade_to_genuine_like(folder.images, dcfg), output, folder.names);
  if (fs::exists(input / "labels.txt")) {
    fs::copy_file(input / "labels.txt", output / "labels.txt",
                  fs::copy_options::overwrite_existing);
  }
  out << "degrade: wrote " << folder.names.size() << " images to " << output.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Characteristic-regularised face super-resolution", "crsr"};
  app.require_subcommand(1);

  std::string config_path;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", config_path, "Experiment config (JSON)");
    if (required) opt->required();
  };
  auto* train_sr = app.add_subcommand("train-sr", "Stage 1: supervised SR pretraining");
  add_config(train_sr, true);
  auto* train_cc = app.add_subcommand("train-cc", "Stage 1: characteristic consistifying");
  add_config(train_cc, true);
  auto* train_face = app.add_subcommand("train-face", "Stage 1: face embedder");
  add_config(train_face, true);
  auto* train_joint = app.add_subcommand("train-joint", "Stage 2: joint fine-tuning");
  add_config(train_joint, true);
  bool from_scratch = false;
  train_joint->add_flag("--from-scratch", from_scratch, "Start from untrained networks");
  auto* eval = app.add_subcommand("eval", "FID, PSNR, SSIM and rank-1 report");
  add_config(eval, true);
  bool untrained = false;
  eval->add_flag("--untrained", untrained, "Evaluate freshly initialised networks");

  auto* sr = app.add_subcommand("sr", "Super-resolve a folder of LR images");
  std::string checkpoint;
  std::string input;
  std::string output;
  bool bypass_cr = false;
  sr->add_option("--checkpoint", checkpoint, "Checkpoint holding SR_GEN (and CR_GEN)")->required();
  sr->add_option("--input", input, "Folder of LR PNGs")->required();
  sr->add_option("--output", output, "Output folder")->required();
  sr->add_flag("--bypass-cr", bypass_cr, "Skip the characteristic regulation stage");

  auto* degrade = app.add_subcommand("degrade", "Synthesise genuine-like LR images from HR");
  uint64_t seed = 0;
  degrade->add_option("--input", input, "Folder of HR PNGs")->required();
  degrade->add_option("--output", output, "Output folder")->required();
  degrade->add_option("--seed", seed, "Degradation seed");
  add_config(degrade, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    auto config = [&] { return parse_config(config_path); };
    if (train_sr->parsed()) return cmd_train_sr(config(), out, err);
    if (train_cc->parsed()) return cmd_train_cc(config(), out, err);
    if (train_face->parsed()) return cmd_train_face(config(), out, err);
    if (train_joint->parsed()) return cmd_train_joint(config(), from_scratch, out, err);
    if (eval->parsed()) return cmd_eval(config(), untrained, out, err);
    if (sr->parsed()) return cmd_sr(checkpoint, input, output, bypass_cr, out, err);
    if (degrade->parsed()) {
      std::optional<ExperimentConfig> cfg;
      if (!config_path.empty()) cfg = config();
      return cmd_degrade(input, output, seed, cfg, out, err);
    }
  } catch (const std::exception& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    err << "error: " << message << '\n';
    return kExitError;
  }
  err << "usage error: no subcommand\n" << app.help();
  return kExitUsage;
}

}  // namespace crsr
