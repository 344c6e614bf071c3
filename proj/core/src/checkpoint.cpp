#include "sfnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "sfnn/error.hpp"

namespace sfnn {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw CheckpointError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

std::uint64_t flags_of(const SFNNConfig& c) {
  return (c.use_mean_centering ? 1u : 0u) | (c.use_series_mixing ? 2u : 0u) | (c.use_layer_norm ? 4u : 0u) |
         (c.layer_norm_affine ? 8u : 0u);
}

}  // namespace

std::filesystem::path checkpoint_metadata_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.txt");
}

void save_checkpoint(const std::filesystem::path& path, const SFNNConfig& config, const SFNNParams& params,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  for (std::uint64_t v : {config.lookback, config.horizon, config.hidden_width, config.num_blocks, config.n_series,
                          config.num_mixing_blocks}) {
    put_u64(out, v);
  }
  put_u64(out, flags_of(config));
  const auto tensors = params.tensors();
  put_u64(out, tensors.size());
  for (auto t : tensors) {
    put_u64(out, t.size());
    for (double v : t) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());

  std::ofstream meta(checkpoint_metadata_path(path));
  meta << "format = sfnn-checkpoint-v" << kCheckpointVersion << '\n'
       << "lookback = " << config.lookback << '\n'
       << "horizon = " << config.horizon << '\n'
       << "hidden_width = " << config.hidden_width << '\n'
       << "num_blocks = " << config.num_blocks << '\n'
       << "n_series = " << config.n_series << '\n'
       << "num_mixing_blocks = " << config.num_mixing_blocks << '\n'
       << "modules = " << config.modules_string() << '\n'
       << "parameter_count = " << params.parameter_count() << '\n';
  const auto names = params.tensor_names();
  for (std::size_t i = 0; i < names.size(); ++i) meta << "tensor." << i << " = " << names[i] << '\n';
  for (const auto& [k, v] : metadata) meta << k << " = " << v << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": no such file or unreadable");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError(path.string() + " is not an sfnn checkpoint");
  }
  if (const auto version = get_u32(in); version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config.lookback = get_u64(in);
  ck.config.horizon = get_u64(in);
  ck.config.hidden_width = get_u64(in);
  ck.config.num_blocks = get_u64(in);
  ck.config.n_series = get_u64(in);
  ck.config.num_mixing_blocks = get_u64(in);
  const auto flags = get_u64(in);
  ck.config.use_mean_centering = flags & 1u;
  ck.config.use_series_mixing = flags & 2u;
  ck.config.use_layer_norm = flags & 4u;
  ck.config.layer_norm_affine = flags & 8u;
  ck.config.validate();

  ck.params = zero_params(ck.config);
  auto tensors = ck.params.tensors();
  if (get_u64(in) != tensors.size()) throw CheckpointError("tensor count does not match config");
  for (auto t : tensors) {
    if (get_u64(in) != t.size()) throw CheckpointError("tensor size does not match config");
    for (double& v : t) v = std::bit_cast<double>(get_u64(in));
  }
  return ck;
}

}  // namespace sfnn
