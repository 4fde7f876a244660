#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace attninf {

/// Shape of a LLaMA2-style decoder. Grouped-query attention is expressed as
/// n_heads query heads sharing n_kv_heads key/value heads.
struct ModelConfig {
  std::size_t vocab_size = 258;
  std::size_t hidden_size = 128;
  std::size_t ffn_inner = 352;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t n_kv_heads = 2;
  std::size_t max_seq_len = 512;
  double rope_theta = 10000.0;
  double norm_eps = 1e-5;
  bool tie_embeddings = false;

  std::size_t head_dim() const { return hidden_size / n_heads; }
  std::size_t kv_dim() const { return n_kv_heads * head_dim(); }
  std::size_t total_heads() const { return n_layers * n_heads; }
  std::size_t group_size() const { return n_heads / n_kv_heads; }

  // Throws DataError on a violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

struct HeadId {
  std::size_t layer = 0;
  std::size_t head = 0;

  auto operator<=>(const HeadId&) const = default;
};

/// A set of heads whose attention is replaced by uniform weights over the
/// visible prefix. Kept sorted and duplicate-free.
class HeadMask {
 public:
  HeadMask() = default;
  explicit HeadMask(std::vector<HeadId> heads);

  void insert(HeadId id);
  bool contains(HeadId id) const;
  bool empty() const { return heads_.empty(); }
  std::size_t size() const { return heads_.size(); }
  const std::vector<HeadId>& heads() const { return heads_; }

  // Throws std::invalid_argument if any id is out of range for config.
  void validate(const ModelConfig& config) const;

  // Dense per-(layer, head) flags, layer-major.
  std::vector<std::uint8_t> dense(const ModelConfig& config) const;

  bool operator==(const HeadMask&) const = default;

 private:
  std::vector<HeadId> heads_;
};

/// SHA-256 over the canonical JSON rendering of the config.
std::string config_fingerprint(const ModelConfig& config);

}  // namespace attninf
