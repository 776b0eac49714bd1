#pragma once
// Binary checkpoints: model parameters plus both optimizer states and the
// step/epoch counters, restoring to a bit-identical training trajectory.

#include <cstdint>
#include <string>

#include "auda/adam.hpp"
#include "auda/model.hpp"

namespace auda {

struct TrainCheckpoint {
  Model<float> model;
  Adam<float> opt_gen, opt_disc;
  std::uint64_t step = 0, epoch = 0;
};

void save_checkpoint(const std::string& path, const TrainCheckpoint& ck);

// Rebuilds the model from the stored config, then overwrites every
// parameter; refuses files whose layout or version does not match.
TrainCheckpoint load_checkpoint(const std::string& path);

}  // namespace auda
