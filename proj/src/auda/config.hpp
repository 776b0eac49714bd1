#pragma once
// Flat key=value configuration shared by every command.  Unknown keys are
// rejected so a typo cannot silently fall back to a default, and the
// resolved config snapshots byte-identically.

#include <cstdint>
#include <string>
#include <vector>

#include "auda/losses.hpp"
#include "auda/model.hpp"

namespace auda {

struct TrainConfig {
  double gamma1 = 1.0, gamma2 = 5.0, gamma3 = 0.1, gamma4 = 1.0;
  double lambda = 0.1;
  double tau = 0.07;
  double alpha = 0.1;
  std::size_t batch_pairs = 32;  // N source/target pairs per step
  double learning_rate = 0.001;
  double beta1 = 0.5, beta2 = 0.999;
  std::size_t epochs = 20;
  std::size_t d_au = 64, d_dm = 64, d_proj = 32;
  std::size_t num_au = 5;  // K
  std::uint64_t seed = 1;
  bool disable_icl = false, disable_fcl = false;
  bool source_only = false;  // supervised L_au^s baseline, no adaptation
  std::size_t fcl_per_anchor = 2;
  std::size_t checkpoint_every_epochs = 5;

  LossWeights weights() const;
  ModelConfig model() const;
  void validate() const;
};

// Dataset-generation settings carried in the same file; the domain and
// output root come from the command line.
struct GenSettings {
  std::size_t subjects = 20;
  std::size_t frames_per_subject = 12;
  std::vector<double> marginals = {0.5, 0.5, 0.5, 0.5, 0.5};
  std::size_t height = 64, width = 64;
};

struct Config {
  TrainConfig train;
  GenSettings gen;
};

Config default_config();
Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);

// Applies one "key=value" override (command-line form); same key set and
// validation as the file loader.
void apply_override(Config& cfg, const std::string& assignment);

}  // namespace auda
