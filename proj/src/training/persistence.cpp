#include "crsr/error.hpp"
#include "crsr/training.hpp"

#include <set>

namespace crsr {

namespace {

constexpr const char* kNetPrefix = "NET:";
constexpr const char* kAdamPrefix = "ADAM:";
constexpr const char* kAuxPrefix = "AUX:";

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

nlohmann::json state_to_json(const TrainState& state) {
  return {{"stage", std::string(to_string(state.stage))},
          {"step", state.step},
          {"total_steps", state.total_steps},
          {"samplers", state.samplers}};
}

}  // namespace

nlohmann::json to_json(const NetworkConfig& cfg) {
  return {{"base_channels", cfg.base_channels},
          {"cr_res_blocks", cfg.cr_res_blocks},
          {"sr_group_blocks", cfg.sr_group_blocks},
          {"disc_res_blocks", cfg.disc_res_blocks},
          {"feat_disc_fc_layers", cfg.feat_disc_fc_layers},
          {"embed_dim", cfg.embed_dim},
          {"sr_image_gan", cfg.sr_image_gan}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> keys = {"base_channels",   "cr_res_blocks",
                                             "sr_group_blocks", "disc_res_blocks",
                                             "feat_disc_fc_layers", "embed_dim", "sr_image_gan"};
  if (!j.is_object()) throw StateError("network config must be a JSON object");
  for (const auto& item : j.items()) {
    if (!keys.contains(item.key())) throw StateError("unknown network config key " + item.key());
  }
  try {
    NetworkConfig cfg;
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.cr_res_blocks = j.at("cr_res_blocks").get<int>();
    cfg.sr_group_blocks = j.at("sr_group_blocks").get<std::array<int, 3>>();
    cfg.disc_res_blocks = j.at("disc_res_blocks").get<int>();
    cfg.feat_disc_fc_layers = j.at("feat_disc_fc_layers").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.sr_image_gan = j.at("sr_image_gan").get<bool>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw StateError(std::string("bad network config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const NetworkSet& nets) {
  if (nets.empty()) throw StateError("nothing to save: empty network set");
  const NetworkConfig& cfg = nets.begin()->second.config();
  for (const auto& [kind, net] : nets) {
    if (net.config().fingerprint() != cfg.fingerprint()) {
      throw StateError("networks in one checkpoint must share a config");
    }
  }
  CheckpointFile file;
  file.fingerprint = cfg.fingerprint();
  file.metadata = nlohmann::json{{"network_config", to_json(cfg)}, {"state", state_to_json(state)}}
                      .dump();
  for (const auto& [kind, net] : nets) {
    file.sections.push_back({kNetPrefix + std::string(to_string(kind)), net.named_arrays()});
  }
  for (const auto& section : state.optimizers) {
    file.sections.push_back({kAdamPrefix + section.name, section.arrays});
  }
  for (const auto& section : state.aux) {
    file.sections.push_back({kAuxPrefix + section.name, section.arrays});
  }
  write_checkpoint_file(path, file);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(file.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": unreadable checkpoint metadata");
  }
  LoadedCheckpoint out;
  out.config = network_config_from_json(meta.at("network_config"));
  if (out.config.fingerprint() != file.fingerprint) {
    throw IoError(path.string() + ": metadata does not match the stored fingerprint");
  }
  const auto& st = meta.at("state");
  out.state.stage = stage_from_string(st.at("stage").get<std::string>());
  out.state.step = st.at("step").get<int64_t>();
  out.state.total_steps = st.at("total_steps").get<int64_t>();
  out.state.samplers = st.at("samplers");

  for (const auto& section : file.sections) {
    if (starts_with(section.name, kNetPrefix)) {
      const NetworkKind kind = network_kind_from_string(section.name.substr(4));
      Network net = Network::create(kind, out.config, 0);
      net.load_arrays(section.arrays);
      out.nets.emplace(kind, net);
    } else if (starts_with(section.name, kAdamPrefix)) {
      out.state.optimizers.push_back({section.name.substr(5), section.arrays});
    } else if (starts_with(section.name, kAuxPrefix)) {
      out.state.aux.push_back({section.name.substr(4), section.arrays});
    } else {
      throw IoError(path.string() + ": unknown section " + section.name);
    }
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const NetworkConfig& expected) {
  const CheckpointFile header = read_checkpoint_file(path);
  if (header.fingerprint != expected.fingerprint()) {
    throw StateError(path.string() + ": config fingerprint " + fingerprint_hex(header.fingerprint) +
                     " does not match expected " + fingerprint_hex(expected.fingerprint()));
  }
  return load_checkpoint(path);
}

StageTrainer::StageTrainer(Stage stage, TrainingSchedule sched, NetworkConfig cfg)
    : sched_(std::move(sched)), cfg_(std::move(cfg)), stage_(stage) {
  sched_.validate();
  cfg_.validate();
}

const Network& StageTrainer::network(NetworkKind kind) const {
  auto it = nets_.find(kind);
  if (it == nets_.end()) {
    throw StateError("stage " + std::string(to_string(stage_)) + " has no network " +
                     std::string(to_string(kind)));
  }
  return it->second;
}

NamedTensors StageTrainer::live_parameters(const Network& net) {
  NamedTensors out;
  for (const auto& item : net.module().named_parameters(true)) {
    out.emplace_back(std::string(to_string(net.kind())) + "." + item.key(), item.value());
  }
  return out;
}

torch::optim::Adam& StageTrainer::add_optimizer(const std::string& name, NamedTensors live_params) {
  std::vector<torch::Tensor> params;
  for (const auto& [n, p] : live_params) params.push_back(p);
  auto adam = std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(sched_.lr).betas({0.9, 0.999}));
  optimizers_.push_back({name, std::move(live_params), std::move(adam)});
  return *optimizers_.back().adam;
}

torch::optim::Adam& StageTrainer::optimizer(const std::string& name) {
  for (auto& group : optimizers_) {
    if (group.name == name) return *group.adam;
  }
  throw StateError("no optimizer named " + name);
}

void StageTrainer::add_aux(const std::string& name, NamedTensors live_arrays) {
  aux_.emplace_back(name, std::move(live_arrays));
}

void StageTrainer::require_unfinished() const {
  if (finished()) {
    throw StateError("stage " + std::string(to_string(stage_)) + " already ran all " +
                     std::to_string(total_) + " steps");
  }
}

std::vector<StepRecord> StageTrainer::run(const StepCallback& callback) {
  std::vector<StepRecord> records;
  while (!finished()) {
    records.push_back(step());
    if (callback) callback(records.back());
  }
  return records;
}

TrainState StageTrainer::state() const {
  TrainState st;
  st.stage = stage_;
  st.step = step_;
  st.total_steps = total_;
  for (const EpochSampler* s : samplers_) st.samplers.push_back(s->state());
  for (const auto& group : optimizers_) {
    CheckpointSection section{group.name, {}};
    const auto& states = group.adam->state();
    for (const auto& [name, p] : group.params) {
      auto it = states.find(p.unsafeGetTensorImpl());
      if (it == states.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      section.arrays.emplace_back(name + "#step",
                                  torch::tensor({static_cast<float>(s.step())}, torch::kFloat32));
      section.arrays.emplace_back(name + "#exp_avg", s.exp_avg().detach().clone());
      section.arrays.emplace_back(name + "#exp_avg_sq", s.exp_avg_sq().detach().clone());
    }
    st.optimizers.push_back(std::move(section));
  }
  for (const auto& [name, arrays] : aux_) {
    CheckpointSection section{name, {}};
    for (const auto& [n, t] : arrays) section.arrays.emplace_back(n, t.detach().clone());
    st.aux.push_back(std::move(section));
  }
  return st;
}

void StageTrainer::save(const std::filesystem::path& path) const {
  save_checkpoint(path, state(), nets_);
}

void StageTrainer::resume(const std::filesystem::path& path) {
  LoadedCheckpoint loaded = load_checkpoint(path, cfg_);
  const TrainState& st = loaded.state;
  if (st.stage != stage_) {
    throw StateError(path.string() + " holds stage " + std::string(to_string(st.stage)) +
                     ", expected " + std::string(to_string(stage_)));
  }
  if (st.total_steps != total_) {
    throw StateError(path.string() + " was saved with a different step budget");
  }
  for (auto& [kind, net] : nets_) {
    auto it = loaded.nets.find(kind);
    if (it == loaded.nets.end()) {
      throw StateError(path.string() + " lacks network " + std::string(to_string(kind)));
    }
    net.load_arrays(it->second.named_arrays());
  }
  if (st.samplers.size() != samplers_.size()) {
    throw StateError(path.string() + ": sampler count mismatch");
  }
  for (size_t i = 0; i < samplers_.size(); ++i) samplers_[i]->restore(st.samplers[i]);

  torch::NoGradGuard no_grad;
  for (auto& group : optimizers_) {
    const CheckpointSection* section = nullptr;
    for (const auto& s : st.optimizers) {
      if (s.name == group.name) section = &s;
    }
    if (section == nullptr) throw StateError(path.string() + ": no optimizer " + group.name);
    std::map<std::string, torch::Tensor> arrays(section->arrays.begin(), section->arrays.end());
    auto& states = group.adam->state();
    states.clear();
    for (const auto& [name, p] : group.params) {
      auto step_it = arrays.find(name + "#step");
      if (step_it == arrays.end()) continue;
      auto s = std::make_unique<torch::optim::AdamParamState>();
      s->step(static_cast<int64_t>(step_it->second.item<float>()));
      s->exp_avg(arrays.at(name + "#exp_avg").clone().view(p.sizes()));
      s->exp_avg_sq(arrays.at(name + "#exp_avg_sq").clone().view(p.sizes()));
      states[p.unsafeGetTensorImpl()] = std::move(s);
    }
  }
  for (auto& [name, live] : aux_) {
    const CheckpointSection* section = nullptr;
    for (const auto& s : st.aux) {
      if (s.name == name) section = &s;
    }
    if (section == nullptr || section->arrays.size() != live.size()) {
      throw StateError(path.string() + ": aux arrays " + name + " missing or mismatched");
    }
    for (size_t i = 0; i < live.size(); ++i) {
      if (section->arrays[i].first != live[i].first ||
          section->arrays[i].second.sizes() != live[i].second.sizes()) {
        throw StateError(path.string() + ": aux array " + live[i].first + " mismatched");
      }
      live[i].second.copy_(section->arrays[i].second);
    }
  }
  step_ = st.step;
}

}  // namespace crsr
