#include "semdrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace semdrive {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "semdrive-mlp-v1";

void put_f32(std::ostream& os, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
      static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

double get_f32(std::istream& is) {
  unsigned char bytes[4];
  if (!is.read(reinterpret_cast<char*>(bytes), 4)) throw CheckpointError("params.bin truncated");
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

const std::string& require(const Manifest& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw CheckpointError("manifest missing key '" + key + "'");
  return it->second;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const NetworkParams& params, std::int64_t training_step,
                     const Manifest& extra) {
  fs::path tmp = dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  Manifest m = extra;
  m["format"] = kFormat;
  m["input_dim"] = std::to_string(params.input_dim());
  m["layer_sizes"] = join(params.layer_sizes());
  m["activation"] = "relu";
  m["output_activation"] = "linear";
  m["training_step"] = std::to_string(training_step);
  m["param_count"] = std::to_string(params.parameter_count());
  m["dtype"] = "float32-le";
  {
    std::ofstream os(tmp / "manifest.txt");
    if (!os) throw CheckpointError("cannot write " + (tmp / "manifest.txt").string());
    for (const auto& [k, v] : m) os << k << '=' << v << '\n';
  }
  {
    std::ofstream os(tmp / "params.bin", std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + (tmp / "params.bin").string());
    for (const auto& layer : params.layers) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) put_f32(os, layer.weights(r, c));
      }
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f32(os, layer.bias(r));
    }
    if (!os) throw CheckpointError("write failed for params.bin");
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

Manifest read_manifest(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw CheckpointError("cannot open " + file.string());
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed manifest line: " + line);
    m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  LoadedCheckpoint out;
  out.manifest = read_manifest(dir / "manifest.txt");
  if (require(out.manifest, "format") != kFormat) {
    throw CheckpointError("unsupported checkpoint format " + out.manifest["format"]);
  }
  const std::vector<int> sizes = split_ints(require(out.manifest, "layer_sizes"));
  if (sizes.size() < 2) throw CheckpointError("layer_sizes needs at least two entries");
  out.training_step = std::stoll(require(out.manifest, "training_step"));

  std::ifstream is(dir / "params.bin", std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + (dir / "params.bin").string());
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    DenseLayer layer{Eigen::MatrixXd(sizes[i], sizes[i - 1]), Eigen::VectorXd(sizes[i])};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = get_f32(is);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get_f32(is);
    out.params.layers.push_back(std::move(layer));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("params.bin has trailing bytes");
  if (std::to_string(out.params.parameter_count()) != require(out.manifest, "param_count")) {
    throw CheckpointError("param_count mismatch");
  }
  if (!out.params.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
  return out;
}

}  // namespace semdrive
