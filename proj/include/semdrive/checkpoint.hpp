#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "semdrive/mlp.hpp"

namespace semdrive {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Manifest = std::map<std::string, std::string>;

// A checkpoint is a directory holding
//   manifest.txt  key=value lines: format, input_dim, layer_sizes,
//                 activation, output_activation, training_step, param_count,
//                 plus caller-supplied keys
//   params.bin    little-endian float32; for each layer in order, the weight
//                 matrix row-major (outputs x inputs) followed by the bias.
// The directory is written under a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& dir, const NetworkParams& params,
                     std::int64_t training_step, const Manifest& extra = {});

struct LoadedCheckpoint {
  NetworkParams params;
  Manifest manifest;
  std::int64_t training_step = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

Manifest read_manifest(const std::filesystem::path& file);

}  // namespace semdrive
