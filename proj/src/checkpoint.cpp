#include "mmcd/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mmcd {

namespace {

constexpr char kMagic[] = "MMCDCKPT1";

const char* kNetNames[4] = {"encoder_x", "encoder_y", "decoder_x", "decoder_y"};

void write_array(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
}

void read_array(std::ifstream& in, std::vector<float>& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
  if (static_cast<size_t>(in.gcount()) != v.size() * 4)
    throw std::runtime_error("load_checkpoint: truncated array data in " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const CoupledModel<float>& model,
                     const grad::AdamState<float>& adam_main,
                     const grad::AdamState<float>& adam_code, int epoch,
                     const std::string& rng_state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);

  nlohmann::json layers = nlohmann::json::array();
  const std::array<const std::array<grad::ConvLayer<float>, 3>*, 4> nets = {
      &model.encoder_x, &model.encoder_y, &model.decoder_x, &model.decoder_y};
  for (int ni = 0; ni < 4; ++ni)
    for (int li = 0; li < 3; ++li) {
      const auto& layer = (*nets[ni])[li];
      layers.push_back({{"name", std::string(kNetNames[ni]) + "." + std::to_string(li)},
                        {"cin", layer.cin()},
                        {"cout", layer.cout()},
                        {"activation", grad::activation_name(layer.act)}});
    }

  nlohmann::json manifest = {{"channels_x", model.channels_x},
                             {"channels_y", model.channels_y},
                             {"hidden_channels", model.hidden_channels},
                             {"code_channels", model.code_channels},
                             {"epoch", epoch},
                             {"rng", rng_state},
                             {"adam_main_t", adam_main.t},
                             {"adam_code_t", adam_code.t},
                             {"amsgrad", adam_main.amsgrad},
                             {"layers", layers}};
  out << kMagic << '\n' << manifest.dump() << '\n';

  for (const auto& p : model.parameters()) write_array(out, p->v);
  for (const auto& m : adam_main.m) write_array(out, m);
  for (const auto& v : adam_main.v) write_array(out, v);
  for (const auto& m : adam_code.m) write_array(out, m);
  for (const auto& v : adam_code.v) write_array(out, v);
  if (adam_main.amsgrad) {
    for (const auto& v : adam_main.vmax) write_array(out, v);
    for (const auto& v : adam_code.vmax) write_array(out, v);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::string manifest_line;
  if (!std::getline(in, manifest_line))
    throw std::runtime_error("load_checkpoint: missing manifest in " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: malformed manifest in " + path + ": " + e.what());
  }

  Checkpoint ck;
  ck.epoch = manifest["epoch"].get<int>();
  ck.rng_state = manifest["rng"].get<std::string>();
  const bool amsgrad = manifest.value("amsgrad", false);

  // Rebuild the model skeleton, then overwrite the parameter arrays.
  Rng scratch(0);
  ck.model = CoupledModel<float>::create(manifest["channels_x"].get<int>(),
                                         manifest["channels_y"].get<int>(), scratch,
                                         manifest["hidden_channels"].get<int>(),
                                         manifest["code_channels"].get<int>());
  for (const auto& p : ck.model.parameters()) read_array(in, p->v, path);

  ck.adam_main.amsgrad = amsgrad;
  ck.adam_code.amsgrad = amsgrad;
  ck.adam_main.init(ck.model.parameters());
  ck.adam_code.init(ck.model.encoder_parameters());
  ck.adam_main.t = manifest["adam_main_t"].get<std::int64_t>();
  ck.adam_code.t = manifest["adam_code_t"].get<std::int64_t>();
  for (auto& m : ck.adam_main.m) read_array(in, m, path);
  for (auto& v : ck.adam_main.v) read_array(in, v, path);
  for (auto& m : ck.adam_code.m) read_array(in, m, path);
  for (auto& v : ck.adam_code.v) read_array(in, v, path);
  if (amsgrad) {
    for (auto& v : ck.adam_main.vmax) read_array(in, v, path);
    for (auto& v : ck.adam_code.vmax) read_array(in, v, path);
  }
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("load_checkpoint: trailing bytes in " + path);
  return ck;
}

}  // namespace mmcd
