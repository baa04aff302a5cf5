#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zseg/evaluation.hpp"
#include "zseg/phantom.hpp"
#include "zseg/trainer.hpp"

namespace zseg {

enum class Profile { desk, full };

std::string to_string(Profile profile);
/// Throws ConfigError on an unknown name.
Profile parse_profile(const std::string& name);

/// Flat key -> value settings from a config file or command-line flags.
using Settings = std::map<std::string, std::string>;

/// One `key = value` per line; `#` starts a comment; blank lines are
/// skipped. Throws ConfigError on a malformed line or a repeated key.
Settings parse_settings(const std::string& text, const std::string& source = "config");
/// Throws DataError when the file cannot be read.
Settings read_settings(const std::filesystem::path& path);

/// Every key `make_experiment_config` accepts.
const std::vector<std::string>& setting_keys();

/// Everything one CLI invocation needs. Optional fields override the
/// profile defaults only when set.
struct ExperimentConfig {
  Profile profile = Profile::full;
  std::optional<std::uint64_t> seed;
  Architecture arch = Architecture::unet;
  TrainRegime regime = TrainRegime::mixed;
  std::filesystem::path data_root = "data";
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> pretrained;
  std::optional<std::filesystem::path> checkpoint;
  bool resume = true;

  std::optional<int> base_width;
  std::optional<int> levels;
  std::optional<int> discriminator_levels;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> disc_lr;
  std::optional<double> momentum;
  std::optional<double> weight_decay;
  std::optional<double> lambda_seg;

  // Phantom generation.
  std::optional<int> patients;
  std::optional<int> slices;
  std::optional<int> divisor;

  // Single-slice commands.
  std::optional<DatasetId> dataset;
  std::optional<int> patient;
  std::optional<int> slice;

  /// Throws ConfigError when no seed was given.
  std::uint64_t require_seed() const;
  /// Profile defaults for `arch` with the overrides applied and validated.
  TrainConfig train_config() const;
  /// Phantom layout of one dataset. Full size keeps the clinical geometry
  /// and counts (21, 19 and 50 patients); desk divides matrix sizes by 4,
  /// uses 12 slices for d1/d2 and 8 pre-training samples. `patients`,
  /// `slices` and `divisor` override; pre-training samples keep 32 slices.
  PhantomConfig phantom_layout(DatasetId id) const;
};

/// Throws ConfigError on unknown keys or unparsable values.
ExperimentConfig make_experiment_config(const Settings& settings);

}  // namespace zseg
