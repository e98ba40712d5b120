#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace venom {

// [dataset]
struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | file
  int classes = 4;
  int train_per_class = 150;
  int test_per_class = 50;
  int image_size = 16;
  int channels = 1;
  std::string path;       // kind=file: training dataset
  std::string test_path;  // kind=file: test dataset

  bool operator==(const DatasetConfig&) const = default;
};

// [attack]
struct AttackConfig {
  std::string trigger;  // patch | blend; required
  double poison_rate = 0.1;
  int target = 0;
  int patch_size = 3;
  double patch_value = 1.0;
  std::string patch_pattern = "solid";  // solid | checker
  int patch_row = -1;  // -1: bottom-right corner
  int patch_col = -1;
  double blend_alpha = 0.2;
  std::string blend_pattern = "noise";  // noise | gradient

  bool operator==(const AttackConfig&) const = default;
};

// [venom]
struct VenomConfig {
  bool enabled = true;
  std::string layer = "conv2";
  double eps1 = 0.9;
  double eps2 = 0.7;
  int k = 10;
  int s = 3;
  int max_group = 50;  // 0 disables the similarity group cap

  bool operator==(const VenomConfig&) const = default;
};

// [training]
struct TrainingConfig {
  int epochs = 30;
  double micro_fraction = 0.05;
  int batch_size = 128;
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int width_multiplier = 1;

  bool operator==(const TrainingConfig&) const = default;
};

// [defense.N]
struct DefenseEntry {
  std::string kind;  // ft | fp; required
  double clean_fraction = 0.05;
  int epochs = 10;
  double lr = 0.01;
  double ratio = 0.6;          // fp only
  std::string layer = "conv2";  // fp only
  std::vector<double> sweep;   // fp only; extra ratios swept for reporting
  int batch = 8;               // defender fine-tune batch size

  bool operator==(const DefenseEntry&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  DatasetConfig dataset;
  AttackConfig attack;
  VenomConfig venom;
  TrainingConfig training;
  std::vector<DefenseEntry> defenses;

  bool operator==(const ExperimentConfig&) const = default;
  void validate() const;  // semantic checks beyond parsing
};

// Parses the INI-like "key = value" format with sections
// [dataset] [attack] [venom] [training] [defense.N]. Unknown keys,
// malformed lines and out-of-range values raise ConfigError with the
// 1-based line number. Defaults fill everything left unset.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig parse_config_file(const std::string& path);

// Canonical text form; parse(render(c)) == c.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace venom
