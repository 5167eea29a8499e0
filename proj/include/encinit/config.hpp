#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "encinit/augmented_model.hpp"
#include "encinit/encoder_init.hpp"
#include "encinit/msd.hpp"

namespace encinit {

/// Everything an experiment run depends on besides the command-line seed override.
struct ExperimentConfig {
  MsdParams system = MsdParams::system();
  double baseline_d1 = MsdParams::baseline().d1;
  SimConfig data{};
  std::uint64_t seed = 1;

  Index n_a = 9;
  Index n_b = 9;
  std::vector<Index> encoder_hidden{16, 16};
  std::vector<Index> augmentation_hidden{16, 16};

  TrainConfig train{};
  PretrainConfig pretrain{};

  Index mc_runs = 10;
  Index mc_workers = 1;
  std::vector<InitMethod> mc_methods{InitMethod::model_based, InitMethod::data_based_ann, InitMethod::random};

  MsdParams baseline_params() const;
  /// Propagates `seed`, n_a and n_b into the nested configs.
  void sync();
  void validate() const;
};

/**
 * INI-style text: `[section]` headers and `key = value` lines, `#` or `;`
 * comments, lists comma separated. Every key must be present; a missing key
 * raises ConfigError naming `section.key`, as does an unknown one.
 */
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
void write_config(const ExperimentConfig& cfg, std::ostream& os);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace encinit
