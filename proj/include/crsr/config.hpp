#pragma once

#include <filesystem>
#include <string_view>

#include <json.hpp>

#include "crsr/imaging.hpp"
#include "crsr/losses.hpp"
#include "crsr/networks.hpp"
#include "crsr/training.hpp"

namespace crsr {

/// Environment variable that, when set, roots relative output directories.
inline constexpr const char* kOutputRootEnv = "CRSR_OUTPUT_ROOT";

/// One experiment, read from a flat JSON object. Omitted keys keep defaults.
struct ExperimentConfig {
  std::filesystem::path hr_dir;
  /// Genuine LR images; alternatively set degrade_from_hr.
  std::filesystem::path genuine_lr_dir;
  bool degrade_from_hr = false;
  /// Defaults to hr_dir/labels.txt.
  std::filesystem::path labels_file;
  /// Labelled HR images used by eval; defaults to hr_dir.
  std::filesystem::path heldout_dir;
  std::filesystem::path output_dir = "crsr_out";

  NetworkConfig network;
  TrainingSchedule schedule;
  LossWeights weights;
  DegradationConfig degradation;

  void validate() const;
};

/// Input paths are resolved against `base_dir` and must exist. A relative
/// output_dir is resolved against $CRSR_OUTPUT_ROOT, or the working directory.
/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config_text(std::string_view text, const std::filesystem::path& base_dir);

/// Throws IoError if the file cannot be read.
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Every key, with resolved absolute paths; parses back to the same config.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace crsr
