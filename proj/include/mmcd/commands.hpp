#pragma once

#include <string>

#include "mmcd/synthgen.hpp"
#include "mmcd/trainer.hpp"

namespace mmcd::cli {

// One flat configuration namespace for the whole pipeline. A JSON config
// file may preload any subset of fields; command-line flags override file
// values; unknown keys in the file are rejected.
struct RunConfig {
  TrainConfig train;
  SynthConfig synth;

  double filter_sigma = 2.0;
  int otsu_bins = 256;
  bool use_root = false;
  bool kappa_standard = false;

  std::string x_path;
  std::string y_path;
  std::string gt_path;
  std::string map_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  bool json_output = false;

  // prep options
  std::string input_path;
  std::string output_path;
  bool prep_log = false;
  double prep_epsilon = 1e-6;
  bool prep_normalize = false;
};

void apply_config_file(RunConfig& cfg, const std::string& path);

std::string config_json(const RunConfig& cfg);

void run_synth(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_detect(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);
void run_prep(const RunConfig& cfg);

}  // namespace mmcd::cli
