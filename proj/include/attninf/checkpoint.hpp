#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attninf/config.hpp"

namespace attninf {

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> values;  // row-major
};

struct TensorShape {
  std::string name;
  std::vector<std::size_t> shape;
};

// Required tensors for a config, in canonical file order:
// token_embedding, layers.{i}.{attn_norm,wq,wk,wv,wo,ffn_norm,w_gate,w_up,w_down},
// final_norm, and lm_head unless embeddings are tied. Linear weights are
// stored [out_features, in_features].
std::vector<TensorShape> tensor_layout(const ModelConfig& config);

struct LayerWeights {
  std::span<const float> attn_norm, wq, wk, wv, wo, ffn_norm, w_gate, w_up, w_down;
};

/// Configuration plus the named weights of a decoder. Immutable once built;
/// construction validates names, shapes and finiteness.
class ModelCheckpoint {
 public:
  ModelCheckpoint(ModelConfig config, std::vector<Tensor> tensors);

  const ModelConfig& config() const { return config_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  std::span<const float> tensor(std::string_view name) const;
  std::span<const float> token_embedding() const { return tensors_[0].values; }
  std::span<const float> final_norm() const;
  // The embedding matrix when embeddings are tied.
  std::span<const float> lm_head() const;
  LayerWeights layer(std::size_t index) const;

  // SHA-256 over config fingerprint and all tensor payloads.
  std::string weights_fingerprint() const;

 private:
  ModelConfig config_;
  std::vector<Tensor> tensors_;  // canonical order
};

// AIWF on-disk format:
//   "AIWF0001" | u64 little-endian header length | UTF-8 JSON header | tensor data
// The header is {"config": {...}, "tensors": [{"name", "shape", "offset", "length"}]}
// with offset/length in bytes relative to the start of the data section. Values
// are IEEE-754 float32 little-endian.
inline constexpr std::string_view kAiwfMagic = "AIWF0001";

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// One entry of a training run's checkpoint list: {"step", "path", "train_loss"}.
struct CheckpointEntry {
  std::uint64_t step = 0;
  std::filesystem::path path;  // resolved against the list's directory when relative
  double train_loss = 0.0;
};

// Reads a checkpoint list (a JSON array of entries, or an object holding one
// under "checkpoints") and returns it ordered by step. Steps must be unique.
std::vector<CheckpointEntry> read_checkpoint_list(const std::filesystem::path& path);

// Gaussian init: std 1/sqrt(fan_in) for matrices, 1 + 0.1 N(0,1) for norm gains.
ModelCheckpoint random_checkpoint(const ModelConfig& config, std::uint64_t seed);

}  // namespace attninf
