#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmcd/commands.hpp"

using mmcd::cli::RunConfig;

namespace {

void add_common_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--out-dir", cfg.out_dir, "Directory for output files");
}

void add_train_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--epochs", cfg.train.epochs, "Training epochs");
  cmd->add_option("--batches", cfg.train.batches_per_epoch, "Batches per epoch");
  cmd->add_option("--batch-size", cfg.train.batch_size, "Patches per batch");
  cmd->add_option("--patch", cfg.train.patch_size, "Training patch side length");
  cmd->add_option("--crop", cfg.train.affinity_crop, "Inner affinity/code crop side length");
  cmd->add_option("--lr", cfg.train.lr_base, "Base learning rate");
  cmd->add_option("--decay-main", cfg.train.lr_decay_main, "Staircase decay of the main rate");
  cmd->add_option("--decay-code", cfg.train.lr_decay_code, "Staircase decay of the code-loss rate");
  cmd->add_option("--decay-every", cfg.train.lr_decay_every, "Epochs per staircase step");
  cmd->add_option("--prior-epochs", cfg.train.prior_update_epochs,
                  "Epochs after which the change prior is refreshed")
      ->delimiter(',');
  cmd->add_option("--lambda-r", cfg.train.weights.lambda_r, "Reconstruction loss weight");
  cmd->add_option("--lambda-c", cfg.train.weights.lambda_c, "Cycle loss weight");
  cmd->add_option("--lambda-t", cfg.train.weights.lambda_t, "Translation loss weight");
  cmd->add_option("--lambda-z", cfg.train.weights.lambda_z, "Code correlation loss weight");
  cmd->add_flag("--amsgrad", cfg.train.amsgrad, "Enable the AMSGrad max correction");
  cmd->add_option("--tile", cfg.train.infer_tile, "Full-image inference tile size");
  cmd->add_option("--overlap", cfg.train.infer_overlap, "Inference tile overlap");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  // The config file seeds every field before flags are parsed, so any flag
  // present on the command line overrides the file value.
  std::string config_path;
  for (int i = 1; i < argc - 1; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  if (!config_path.empty()) {
    try {
      mmcd::cli::apply_config_file(cfg, config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"Unsupervised multimodal change detection with code-aligned autoencoders"};
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "JSON config file; flags override file values");

  int size = 0;
  std::uint64_t seed = cfg.train.seed;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic co-registered pair with ground truth");
  synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--size", size, "Square image side length");
  synth->add_option("--height", cfg.synth.height, "Image height");
  synth->add_option("--width", cfg.synth.width, "Image width");
  synth->add_option("--classes", cfg.synth.num_classes, "Latent class count");
  synth->add_option("--channels-x", cfg.synth.channels_x, "Sensor X channel count");
  synth->add_option("--channels-y", cfg.synth.channels_y, "Sensor Y channel count");
  synth->add_option("--change-fraction", cfg.synth.change_fraction, "Fraction of changed pixels");
  synth->add_option("--noise-x", cfg.synth.noise_std_x, "Sensor X noise stddev");
  synth->add_option("--noise-y", cfg.synth.noise_std_y, "Sensor Y noise stddev");
  synth->add_option("--smoothness", cfg.synth.smoothness, "Latent field correlation length (px)");
  synth->add_flag("--speckle", cfg.synth.speckle_y, "Multiplicative noise on sensor Y");
  add_common_flags(synth, cfg);

  auto* train = app.add_subcommand("train", "Train the coupled autoencoders");
  train->add_option("--x", cfg.x_path, "Normalized raster at time 1");
  train->add_option("--y", cfg.y_path, "Normalized raster at time 2");
  train->add_option("--seed", seed, "RNG seed");
  bool print_config = false;
  train->add_flag("--print-config", print_config, "Print the effective config and exit");
  add_train_flags(train, cfg);
  add_common_flags(train, cfg);

  auto* detect = app.add_subcommand("detect", "Produce translation, difference and change-map products");
  detect->add_option("--x", cfg.x_path, "Normalized raster at time 1");
  detect->add_option("--y", cfg.y_path, "Normalized raster at time 2");
  detect->add_option("--checkpoint", cfg.checkpoint_path, "Trained model checkpoint");
  detect->add_option("--filter-sigma", cfg.filter_sigma, "Gaussian smoothing sigma (0 = off)");
  detect->add_option("--bins", cfg.otsu_bins, "Histogram bins for the threshold search");
  detect->add_flag("--root", cfg.use_root, "Unsquared per-pixel norms in the difference image");
  detect->add_option("--tile", cfg.train.infer_tile, "Inference tile size");
  detect->add_option("--overlap", cfg.train.infer_overlap, "Inference tile overlap");
  add_common_flags(detect, cfg);

  auto* evaluate = app.add_subcommand("evaluate", "Score a change map against ground truth");
  evaluate->add_option("--map", cfg.map_path, "Binary change map raster");
  evaluate->add_option("--gt", cfg.gt_path, "Binary ground-truth raster");
  evaluate->add_flag("--kappa-standard", cfg.kappa_standard, "Textbook chance-agreement pairing");
  evaluate->add_flag("--json", cfg.json_output, "Machine-readable metrics on stdout");
  add_common_flags(evaluate, cfg);

  auto* prep = app.add_subcommand("prep", "Log-transform and/or normalize a raster");
  prep->add_option("--input", cfg.input_path, "Input raster");
  prep->add_option("--output", cfg.output_path, "Output raster");
  prep->add_flag("--log", cfg.prep_log, "Apply v -> ln(v + epsilon)");
  prep->add_option("--epsilon", cfg.prep_epsilon, "Offset for the log transform");
  prep->add_flag("--normalize", cfg.prep_normalize, "Percentile-scale to [-1, 1]");

  CLI11_PARSE(app, argc, argv);

  if (synth->count("--size")) cfg.synth.height = cfg.synth.width = size;
  if (synth->count("--seed") || train->count("--seed")) {
    cfg.train.seed = seed;
    cfg.synth.seed = seed;
  }

  try {
    if (app.got_subcommand(synth)) {
      mmcd::cli::run_synth(cfg);
    } else if (app.got_subcommand(train)) {
      if (print_config) {
        std::cout << mmcd::cli::config_json(cfg) << "\n";
        return 0;
      }
      mmcd::cli::run_train(cfg);
    } else if (app.got_subcommand(detect)) {
      mmcd::cli::run_detect(cfg);
    } else if (app.got_subcommand(evaluate)) {
      mmcd::cli::run_evaluate(cfg);
    } else if (app.got_subcommand(prep)) {
      mmcd::cli::run_prep(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
