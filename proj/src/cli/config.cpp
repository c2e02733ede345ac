#include "crsr/config.hpp"

#include "crsr/error.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace crsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "wrong type: " + value.dump());
  }
}

Ratio parse_ratio(const json& value) {
  const auto text = get_as<std::string>(value, "paired_unpaired_ratio");
  Ratio r;
  char colon = 0;
  std::istringstream is(text);
  if (!(is >> r.paired >> colon >> r.unpaired) || colon != ':' || !is.eof()) {
    throw ConfigError("paired_unpaired_ratio", "expected \"p:u\", got \"" + text + "\"");
  }
  return r;
}

fs::path resolve_input(const json& value, const std::string& key, const fs::path& base) {
  fs::path p = get_as<std::string>(value, key);
  if (p.empty()) return p;
  if (p.is_relative()) p = base / p;
  if (!fs::exists(p)) throw ConfigError(key, "path does not exist: " + p.string());
  return fs::absolute(p).lexically_normal();
}

fs::path resolve_output(const fs::path& p) {
  if (p.is_absolute()) return p;
  const char* root = std::getenv(kOutputRootEnv);
  const fs::path base = (root != nullptr && *root != '\0') ? fs::path(root) : fs::current_path();
  return fs::absolute(base / p).lexically_normal();
}

using Setter = std::function<void(ExperimentConfig&, const json&, const fs::path&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["hr_dir"] = [](auto& c, const json& v, const fs::path& b) {
      c.hr_dir = resolve_input(v, "hr_dir", b);
    };
    t["genuine_lr_dir"] = [](auto& c, const json& v, const fs::path& b) {
      c.genuine_lr_dir = resolve_input(v, "genuine_lr_dir", b);
    };
    t["degrade_from_hr"] = [](auto& c, const json& v, const fs::path&) {
      c.degrade_from_hr = get_as<bool>(v, "degrade_from_hr");
    };
    t["labels_file"] = [](auto& c, const json& v, const fs::path& b) {
      c.labels_file = resolve_input(v, "labels_file", b);
    };
    t["heldout_dir"] = [](auto& c, const json& v, const fs::path& b) {
      c.heldout_dir = resolve_input(v, "heldout_dir", b);
    };
    t["output_dir"] = [](auto& c, const json& v, const fs::path&) {
      c.output_dir = get_as<std::string>(v, "output_dir");
    };

    t["base_channels"] = [](auto& c, const json& v, const fs::path&) {
      c.network.base_channels = get_as<int>(v, "base_channels");
    };
    t["cr_res_blocks"] = [](auto& c, const json& v, const fs::path&) {
      c.network.cr_res_blocks = get_as<int>(v, "cr_res_blocks");
    };
    t["sr_group_blocks"] = [](auto& c, const json& v, const fs::path&) {
      c.network.sr_group_blocks = get_as<std::array<int, 3>>(v, "sr_group_blocks");
    };
    t["disc_res_blocks"] = [](auto& c, const json& v, const fs::path&) {
      c.network.disc_res_blocks = get_as<int>(v, "disc_res_blocks");
    };
    t["feat_disc_fc_layers"] = [](auto& c, const json& v, const fs::path&) {
      c.network.feat_disc_fc_layers = get_as<int>(v, "feat_disc_fc_layers");
    };
    t["embed_dim"] = [](auto& c, const json& v, const fs::path&) {
      c.network.embed_dim = get_as<int>(v, "embed_dim");
    };
    t["sr_image_gan"] = [](auto& c, const json& v, const fs::path&) {
      c.network.sr_image_gan = get_as<bool>(v, "sr_image_gan");
    };

    t["lr"] = [](auto& c, const json& v, const fs::path&) { c.schedule.lr = get_as<double>(v, "lr"); };
    t["batch_size"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.batch_size = get_as<int>(v, "batch_size");
    };
    t["epochs_sr"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.epochs_sr = get_as<int>(v, "epochs_sr");
    };
    t["epochs_cc"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.epochs_cc = get_as<int>(v, "epochs_cc");
    };
    t["epochs_joint"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.epochs_joint = get_as<int>(v, "epochs_joint");
    };
    t["epochs_face"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.epochs_face = get_as<int>(v, "epochs_face");
    };
    t["seed"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.seed = get_as<uint64_t>(v, "seed");
    };
    t["paired_unpaired_ratio"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.paired_unpaired = parse_ratio(v);
    };
    t["ablation"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.ablation.clear();
      for (const auto& name : get_as<std::vector<std::string>>(v, "ablation")) {
        c.schedule.ablation.insert(ablation_from_string(name));
      }
    };
    t["center_loss_weight"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.center_loss_weight = get_as<double>(v, "center_loss_weight");
    };
    t["center_alpha"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.center_alpha = get_as<double>(v, "center_alpha");
    };
    t["sr_gan_weight"] = [](auto& c, const json& v, const fs::path&) {
      c.schedule.sr_gan_weight = get_as<double>(v, "sr_gan_weight");
    };

    t["lambda_inner"] = [](auto& c, const json& v, const fs::path&) {
      c.weights.lambda_inner = get_as<double>(v, "lambda_inner");
    };
    t["lambda_cr"] = [](auto& c, const json& v, const fs::path&) {
      c.weights.lambda_cr = get_as<double>(v, "lambda_cr");
    };
    t["lambda_cr_sr"] = [](auto& c, const json& v, const fs::path&) {
      c.weights.lambda_cr_sr = get_as<double>(v, "lambda_cr_sr");
    };
    t["lambda_cr_gan"] = [](auto& c, const json& v, const fs::path&) {
      c.weights.lambda_cr_gan = get_as<double>(v, "lambda_cr_gan");
    };

    t["blur_sigma_range"] = [](auto& c, const json& v, const fs::path&) {
      c.degradation.blur_sigma_range = get_as<std::array<double, 2>>(v, "blur_sigma_range");
    };
    t["noise_sigma_range"] = [](auto& c, const json& v, const fs::path&) {
      c.degradation.noise_sigma_range = get_as<std::array<double, 2>>(v, "noise_sigma_range");
    };
    t["compression_quality_range"] = [](auto& c, const json& v, const fs::path&) {
      c.degradation.compression_quality_range =
          get_as<std::array<int, 2>>(v, "compression_quality_range");
    };
    t["degradation_seed"] = [](auto& c, const json& v, const fs::path&) {
      c.degradation.seed = get_as<uint64_t>(v, "degradation_seed");
    };
    return t;
  }();
  return table;
}

std::string ratio_text(const Ratio& r) {
  return std::to_string(r.paired) + ":" + std::to_string(r.unpaired);
}

}  // namespace

void ExperimentConfig::validate() const {
  network.validate();
  schedule.validate();
  weights.validate();
  degradation.validate();
  if (!genuine_lr_dir.empty() && degrade_from_hr) {
    throw ConfigError("degrade_from_hr", "set either genuine_lr_dir or degrade_from_hr, not both");
  }
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

ExperimentConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be a JSON object");

  ExperimentConfig cfg;
  const auto& table = setters();
  for (const auto& item : doc.items()) {
    auto it = table.find(item.key());
    if (it == table.end()) throw ConfigError(item.key(), "unknown key");
    it->second(cfg, item.value(), base_dir);
  }
  cfg.output_dir = resolve_output(cfg.output_dir);
  if (cfg.labels_file.empty() && !cfg.hr_dir.empty() && fs::exists(cfg.hr_dir / "labels.txt")) {
    cfg.labels_file = cfg.hr_dir / "labels.txt";
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), fs::absolute(path).parent_path());
}

json to_json(const ExperimentConfig& c) {
  json ablation = json::array();
  for (auto a : c.schedule.ablation) ablation.push_back(std::string(to_string(a)));
  json j = {
      {"hr_dir", c.hr_dir.string()},
      {"genuine_lr_dir", c.genuine_lr_dir.string()},
      {"degrade_from_hr", c.degrade_from_hr},
      {"labels_file", c.labels_file.string()},
      {"heldout_dir", c.heldout_dir.string()},
      {"output_dir", c.output_dir.string()},
      {"lr", c.schedule.lr},
      {"batch_size", c.schedule.batch_size},
      {"epochs_sr", c.schedule.epochs_sr},
      {"epochs_cc", c.schedule.epochs_cc},
      {"epochs_joint", c.schedule.epochs_joint},
      {"epochs_face", c.schedule.epochs_face},
      {"seed", c.schedule.seed},
      {"paired_unpaired_ratio", ratio_text(c.schedule.paired_unpaired)},
      {"ablation", ablation},
      {"center_loss_weight", c.schedule.center_loss_weight},
      {"center_alpha", c.schedule.center_alpha},
      {"sr_gan_weight", c.schedule.sr_gan_weight},
      {"lambda_inner", c.weights.lambda_inner},
      {"lambda_cr", c.weights.lambda_cr},
      {"lambda_cr_sr", c.weights.lambda_cr_sr},
      {"lambda_cr_gan", c.weights.lambda_cr_gan},
      {"blur_sigma_range", c.degradation.blur_sigma_range},
      {"noise_sigma_range", c.degradation.noise_sigma_range},
      {"compression_quality_range", c.degradation.compression_quality_range},
      {"degradation_seed", c.degradation.seed},
  };
  j.update(to_json(c.network));
  return j;
}

}  // namespace crsr
