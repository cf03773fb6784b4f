#include "linefix/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "linefix/util.hpp"

namespace linefix {
namespace {

constexpr char kMagic[8] = {'L', 'F', 'X', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

nlohmann::json config_to_json(const NetConfig& c) {
  return nlohmann::json{{"vocab_size", c.vocab_size}, {"emb_dim", c.emb_dim},
                        {"rnn_size", c.rnn_size},     {"layers", c.layers},
                        {"use_bridge", c.use_bridge}, {"use_copy", c.use_copy},
                        {"max_target_len", c.max_target_len}};
}

NetConfig config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.emb_dim = j.at("emb_dim").get<int>();
  c.rnn_size = j.at("rnn_size").get<int>();
  c.layers = j.at("layers").get<int>();
  c.use_bridge = j.at("use_bridge").get<bool>();
  c.use_copy = j.at("use_copy").get<bool>();
  c.max_target_len = j.at("max_target_len").get<int>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     uint64_t vocab_hash, long long iteration) {
  ModelParams& mutable_params = const_cast<ModelParams&>(params);
  nlohmann::json header;
  header["config"] = config_to_json(params.cfg);
  header["vocab_hash"] = to_hex(vocab_hash);
  header["iteration"] = iteration;
  nlohmann::json manifest = nlohmann::json::array();
  for (TensorRef& t : mutable_params.tensors()) {
    manifest.push_back({{"name", t.name}, {"size", t.size}});
  }
  header["tensors"] = manifest;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (TensorRef& t : mutable_params.tensors()) {
    out.write(reinterpret_cast<const char*>(t.data),
              static_cast<std::streamsize>(t.size * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  nlohmann::json header = nlohmann::json::parse(header_str);

  Checkpoint ck;
  ck.meta.cfg = config_from_json(header.at("config"));
  ck.meta.vocab_hash = from_hex(header.at("vocab_hash").get<std::string>());
  ck.meta.iteration = header.at("iteration").get<long long>();
  ck.params = make_params(ck.meta.cfg);

  auto manifest = header.at("tensors");
  auto tensors = ck.params.tensors();
  if (manifest.size() != tensors.size()) {
    throw std::runtime_error("checkpoint tensor manifest mismatch: " + path);
  }
  for (size_t i = 0; i < tensors.size(); i++) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != tensors[i].name ||
        entry.at("size").get<size_t>() != tensors[i].size) {
      throw std::runtime_error("checkpoint tensor '" + tensors[i].name +
                               "' does not match the model config: " + path);
    }
    in.read(reinterpret_cast<char*>(tensors[i].data),
            static_cast<std::streamsize>(tensors[i].size * sizeof(double)));
  }
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  return ck;
}

}  // namespace linefix
