#pragma once

#include <string>

#include "mmcd/adam.hpp"
#include "mmcd/model.hpp"

namespace mmcd {

struct Checkpoint {
  CoupledModel<float> model;
  grad::AdamState<float> adam_main;
  grad::AdamState<float> adam_code;
  int epoch = 0;
  std::string rng_state;
};

// File format: "MMCDCKPT1\n", one JSON manifest line (shapes, epoch, RNG
// state, Adam step counts), '\n', then the raw little-endian f32 arrays in
// manifest order.
void save_checkpoint(const std::string& path, const CoupledModel<float>& model,
                     const grad::AdamState<float>& adam_main,
                     const grad::AdamState<float>& adam_code, int epoch,
                     const std::string& rng_state);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mmcd
