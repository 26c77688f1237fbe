#include "mmcd/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "mmcd/changemap.hpp"
#include "mmcd/checkpoint.hpp"
#include "mmcd/png_io.hpp"

namespace mmcd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kConfigKeys = {
    "epochs",        "batches_per_epoch", "batch_size",     "patch_size",
    "affinity_crop", "lr_base",           "lr_decay_main",  "lr_decay_code",
    "lr_decay_every", "prior_update_epochs", "lambda_r",    "lambda_c",
    "lambda_t",      "lambda_z",          "seed",           "amsgrad",
    "infer_tile",    "infer_overlap",     "height",         "width",
    "num_classes",   "channels_x",        "channels_y",     "change_fraction",
    "noise_std_x",   "noise_std_y",       "smoothness",     "speckle_y",
    "filter_sigma",  "otsu_bins",         "use_root",       "kappa_standard",
    "x",             "y",                 "gt",             "map",
    "checkpoint",    "out_dir"};

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string("missing required option --") + flag);
}

void check_normalized(const RasterImage& img, const std::string& name) {
  for (float v : img.values)
    if (v < -1.0f || v > 1.0f)
      throw std::invalid_argument(name + " is not normalized to [-1,1]; run `prep --normalize` first");
}

json metrics_json(const ScoreResult& s) {
  return json{{"TP", s.confusion.tp},
              {"TN", s.confusion.tn},
              {"FP", s.confusion.fp},
              {"FN", s.confusion.fn},
              {"OA", s.oa},
              {"p_e", s.p_e},
              {"kappa", s.kappa},
              {"degenerate_kappa", s.degenerate_kappa},
              {"kappa_variant",
               s.variant == KappaVariant::AsReported ? "as-reported" : "standard"}};
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed config file " + path + ": " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (!kConfigKeys.count(key)) throw std::runtime_error("unknown config key: " + key);
    (void)value;
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("epochs", cfg.train.epochs);
  get("batches_per_epoch", cfg.train.batches_per_epoch);
  get("batch_size", cfg.train.batch_size);
  get("patch_size", cfg.train.patch_size);
  get("affinity_crop", cfg.train.affinity_crop);
  get("lr_base", cfg.train.lr_base);
  get("lr_decay_main", cfg.train.lr_decay_main);
  get("lr_decay_code", cfg.train.lr_decay_code);
  get("lr_decay_every", cfg.train.lr_decay_every);
  get("prior_update_epochs", cfg.train.prior_update_epochs);
  get("lambda_r", cfg.train.weights.lambda_r);
  get("lambda_c", cfg.train.weights.lambda_c);
  get("lambda_t", cfg.train.weights.lambda_t);
  get("lambda_z", cfg.train.weights.lambda_z);
  get("seed", cfg.train.seed);
  get("amsgrad", cfg.train.amsgrad);
  get("infer_tile", cfg.train.infer_tile);
  get("infer_overlap", cfg.train.infer_overlap);
  get("height", cfg.synth.height);
  get("width", cfg.synth.width);
  get("num_classes", cfg.synth.num_classes);
  get("channels_x", cfg.synth.channels_x);
  get("channels_y", cfg.synth.channels_y);
  get("change_fraction", cfg.synth.change_fraction);
  get("noise_std_x", cfg.synth.noise_std_x);
  get("noise_std_y", cfg.synth.noise_std_y);
  get("smoothness", cfg.synth.smoothness);
  get("speckle_y", cfg.synth.speckle_y);
  get("filter_sigma", cfg.filter_sigma);
  get("otsu_bins", cfg.otsu_bins);
  get("use_root", cfg.use_root);
  get("kappa_standard", cfg.kappa_standard);
  get("x", cfg.x_path);
  get("y", cfg.y_path);
  get("gt", cfg.gt_path);
  get("map", cfg.map_path);
  get("checkpoint", cfg.checkpoint_path);
  get("out_dir", cfg.out_dir);
  if (j.contains("seed")) cfg.synth.seed = cfg.train.seed;
}

std::string config_json(const RunConfig& cfg) {
  json j = {{"epochs", cfg.train.epochs},
            {"batches_per_epoch", cfg.train.batches_per_epoch},
            {"batch_size", cfg.train.batch_size},
            {"patch_size", cfg.train.patch_size},
            {"affinity_crop", cfg.train.affinity_crop},
            {"lambda_r", cfg.train.weights.lambda_r},
            {"lambda_c", cfg.train.weights.lambda_c},
            {"lambda_t", cfg.train.weights.lambda_t},
            {"lambda_z", cfg.train.weights.lambda_z},
            {"lr_base", cfg.train.lr_base},
            {"lr_decay_main", cfg.train.lr_decay_main},
            {"lr_decay_code", cfg.train.lr_decay_code},
            {"lr_decay_every", cfg.train.lr_decay_every},
            {"prior_update_epochs", cfg.train.prior_update_epochs},
            {"seed", cfg.train.seed},
            {"amsgrad", cfg.train.amsgrad},
            {"infer_tile", cfg.train.infer_tile},
            {"infer_overlap", cfg.train.infer_overlap},
            {"filter_sigma", cfg.filter_sigma},
            {"otsu_bins", cfg.otsu_bins},
            {"use_root", cfg.use_root},
            {"kappa_standard", cfg.kappa_standard}};
  return j.dump(2);
}

void run_synth(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const SynthPair pair = generate_pair(cfg.synth);
  save_raster(pair.x, cfg.out_dir + "/x.mmcd");
  save_raster(pair.y, cfg.out_dir + "/y.mmcd");
  save_raster(pair.gt, cfg.out_dir + "/gt.mmcd");

  json manifest = {{"seed", cfg.synth.seed},
                   {"height", cfg.synth.height},
                   {"width", cfg.synth.width},
                   {"num_classes", cfg.synth.num_classes},
                   {"channels_x", cfg.synth.channels_x},
                   {"channels_y", cfg.synth.channels_y},
                   {"change_fraction", cfg.synth.change_fraction},
                   {"noise_std_x", cfg.synth.noise_std_x},
                   {"noise_std_y", cfg.synth.noise_std_y},
                   {"smoothness", cfg.synth.smoothness},
                   {"speckle_y", cfg.synth.speckle_y},
                   {"files", {"x.mmcd", "y.mmcd", "gt.mmcd"}}};
  std::ofstream mf(cfg.out_dir + "/manifest.json");
  mf << manifest.dump(2) << '\n';
  std::cerr << "synth: wrote " << cfg.synth.height << "x" << cfg.synth.width << " pair to "
            << cfg.out_dir << "\n";
}

void run_train(const RunConfig& cfg) {
  require_path(cfg.x_path, "x");
  require_path(cfg.y_path, "y");
  const RasterImage x = load_raster(cfg.x_path);
  const RasterImage y = load_raster(cfg.y_path);
  check_normalized(x, "--x input");
  check_normalized(y, "--y input");

  fs::create_directories(cfg.out_dir);
  FitResult result = fit(x, y, cfg.train, cfg.out_dir);

  std::ofstream hist(cfg.out_dir + "/history.jsonl");
  for (const auto& e : result.history) {
    hist << json{{"epoch", e.epoch}, {"l_r", e.l_r},         {"l_c", e.l_c},
                 {"l_t", e.l_t},     {"l_z", e.l_z},         {"total", e.total},
                 {"lr_main", e.lr_main}, {"lr_code", e.lr_code}}
                .dump()
         << '\n';
  }
  save_checkpoint(cfg.out_dir + "/checkpoint.mmcdckpt", result.trainer.model(),
                  result.trainer.adam_main(), result.trainer.adam_code(), cfg.train.epochs,
                  result.trainer.rng().state());
  save_raster(result.prior.values, cfg.out_dir + "/prior.mmcd");
  std::cerr << "train: " << result.history.size() << " epochs done; wrote checkpoint, history and prior to "
            << cfg.out_dir << "\n";
}

void run_detect(const RunConfig& cfg) {
  require_path(cfg.x_path, "x");
  require_path(cfg.y_path, "y");
  require_path(cfg.checkpoint_path, "checkpoint");
  const RasterImage x = load_raster(cfg.x_path);
  const RasterImage y = load_raster(cfg.y_path);
  const Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
  if (ck.model.channels_x != x.channels || ck.model.channels_y != y.channels)
    throw std::invalid_argument("detect: checkpoint channels (" + std::to_string(ck.model.channels_x) +
                                "," + std::to_string(ck.model.channels_y) +
                                ") incompatible with inputs (" + std::to_string(x.channels) + "," +
                                std::to_string(y.channels) + ")");

  fs::create_directories(cfg.out_dir);
  const int tile = cfg.train.infer_tile;
  const int overlap = cfg.train.infer_overlap;
  auto emit = [&](Direction dir, const RasterImage& src, const std::string& name) {
    const RasterImage out = infer_full(ck.model, src, dir, tile, overlap);
    save_raster(out, cfg.out_dir + "/" + name + ".mmcd");
    write_raster_png(out, cfg.out_dir + "/" + name + ".png");
    return out;
  };
  const RasterImage x_tilde = emit(Direction::ReconstructX, x, "x_tilde");
  const RasterImage y_tilde = emit(Direction::ReconstructY, y, "y_tilde");
  const RasterImage y_hat = emit(Direction::TranslateXY, x, "y_hat");
  const RasterImage x_hat = emit(Direction::TranslateYX, y, "x_hat");
  emit(Direction::EncodeX, x, "z_x");
  emit(Direction::EncodeY, y, "z_y");

  const RasterImage delta = difference_image(x, x_hat, y, y_hat, -1.0, -1.0, cfg.use_root);
  const RasterImage filtered = gaussian_filter(delta, cfg.filter_sigma);
  const double threshold = otsu_threshold(filtered, cfg.otsu_bins);
  const RasterImage map = binarize(filtered, threshold);

  save_raster(delta, cfg.out_dir + "/delta.mmcd");
  save_raster(filtered, cfg.out_dir + "/delta_filtered.mmcd");
  save_raster(map, cfg.out_dir + "/change_map.mmcd");
  write_raster_png(delta, cfg.out_dir + "/delta.png");
  write_raster_png(filtered, cfg.out_dir + "/delta_filtered.png");
  write_raster_png(map, cfg.out_dir + "/change_map.png");

  json report = {{"threshold", threshold},
                 {"filter_sigma", cfg.filter_sigma},
                 {"otsu_bins", cfg.otsu_bins},
                 {"use_root", cfg.use_root}};
  std::ofstream rf(cfg.out_dir + "/detect.json");
  rf << report.dump(2) << '\n';
  std::cerr << "detect: threshold " << threshold << "; products written to " << cfg.out_dir << "\n";
}

void run_evaluate(const RunConfig& cfg) {
  require_path(cfg.map_path, "map");
  require_path(cfg.gt_path, "gt");
  const RasterImage map = load_raster(cfg.map_path);
  const RasterImage gt = load_raster(cfg.gt_path);
  const ScoreResult s =
      score(map, gt, cfg.kappa_standard ? KappaVariant::Standard : KappaVariant::AsReported);

  fs::create_directories(cfg.out_dir);
  // Fixed color mapping; a min-max stretch would blank out single-class maps.
  std::vector<std::uint8_t> rgb(s.confusion_map.values.size());
  for (size_t i = 0; i < rgb.size(); ++i)
    rgb[i] = s.confusion_map.values[i] == 1.0f ? 255 : 0;
  json report = metrics_json(s);
  // The threshold belongs to the detect step; carry it over when the map
  // sits next to a detect report.
  report["threshold"] = nullptr;
  const fs::path detect_report = fs::path(cfg.map_path).parent_path() / "detect.json";
  if (fs::exists(detect_report)) {
    try {
      json dj;
      std::ifstream(detect_report) >> dj;
      if (dj.contains("threshold")) report["threshold"] = dj["threshold"];
    } catch (const json::exception&) {
      // leave threshold null if the report is unreadable
    }
  }
  std::ofstream mf(cfg.out_dir + "/metrics.json");
  mf << report.dump(2) << '\n';
  write_png(cfg.out_dir + "/confusion.png", map.width, map.height, 3, rgb);

  if (cfg.json_output) {
    std::cout << report.dump() << "\n";
  } else {
    std::cout << "TP " << s.confusion.tp << "  TN " << s.confusion.tn << "  FP " << s.confusion.fp
              << "  FN " << s.confusion.fn << "\n"
              << "OA    " << s.oa << "\n"
              << "kappa " << s.kappa << (s.degenerate_kappa ? "  (degenerate)" : "") << "  ["
              << (s.variant == KappaVariant::AsReported ? "as-reported" : "standard") << "]\n";
  }
}

void run_prep(const RunConfig& cfg) {
  require_path(cfg.input_path, "input");
  require_path(cfg.output_path, "output");
  RasterImage img = load_raster(cfg.input_path);
  if (cfg.prep_log) img = log_transform(img, static_cast<float>(cfg.prep_epsilon));
  if (cfg.prep_normalize) img = normalize(img, compute_stats(img));
  save_raster(img, cfg.output_path);
  std::cerr << "prep: wrote " << cfg.output_path << "\n";
}

}  // namespace mmcd::cli
