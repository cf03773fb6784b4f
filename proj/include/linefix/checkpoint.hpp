#pragma once

#include <cstdint>
#include <string>

#include "linefix/net.hpp"

namespace linefix {

struct CheckpointMeta {
  NetConfig cfg;
  uint64_t vocab_hash = 0;
  long long iteration = 0;
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

// Self-describing binary container: magic + version, a JSON header carrying
// the config, vocabulary hash, iteration count and tensor manifest, then the
// raw little-endian float64 tensors in manifest order.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     uint64_t vocab_hash, long long iteration);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace linefix
