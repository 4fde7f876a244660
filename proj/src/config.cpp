#include "attninf/config.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attninf/errors.hpp"
#include "attninf/hashing.hpp"

namespace attninf {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DataError(std::string("invalid model config: ") + what);
  };
  require(vocab_size >= 1 && hidden_size >= 1 && ffn_inner >= 1 && n_layers >= 1 &&
              n_heads >= 1 && n_kv_heads >= 1 && max_seq_len >= 1,
          "all counts must be >= 1");
  require(n_heads % n_kv_heads == 0, "n_heads must be a multiple of n_kv_heads");
  require(hidden_size % n_heads == 0, "hidden_size must be a multiple of n_heads");
  require(head_dim() % 2 == 0, "head_dim must be even for rotary embeddings");
  require(std::isfinite(rope_theta) && rope_theta > 0, "rope_theta must be positive");
  require(std::isfinite(norm_eps) && norm_eps > 0, "norm_eps must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"hidden_size", c.hidden_size},
          {"ffn_inner", c.ffn_inner},   {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"n_kv_heads", c.n_kv_heads},
          {"max_seq_len", c.max_seq_len}, {"rope_theta", c.rope_theta},
          {"norm_eps", c.norm_eps},     {"tie_embeddings", c.tie_embeddings}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.ffn_inner = j.at("ffn_inner").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_kv_heads = j.at("n_kv_heads").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.rope_theta = j.value("rope_theta", 10000.0);
    c.norm_eps = j.value("norm_eps", 1e-5);
    c.tie_embeddings = j.at("tie_embeddings").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

HeadMask::HeadMask(std::vector<HeadId> heads) : heads_(std::move(heads)) {
  std::sort(heads_.begin(), heads_.end());
  heads_.erase(std::unique(heads_.begin(), heads_.end()), heads_.end());
}

void HeadMask::insert(HeadId id) {
  auto it = std::lower_bound(heads_.begin(), heads_.end(), id);
  if (it == heads_.end() || *it != id) heads_.insert(it, id);
}

bool HeadMask::contains(HeadId id) const {
  return std::binary_search(heads_.begin(), heads_.end(), id);
}

void HeadMask::validate(const ModelConfig& config) const {
  for (const auto& h : heads_) {
    if (h.layer >= config.n_layers || h.head >= config.n_heads) {
      throw std::invalid_argument("head mask entry (" + std::to_string(h.layer) + ", " +
                                  std::to_string(h.head) + ") out of range");
    }
  }
}

std::vector<std::uint8_t> HeadMask::dense(const ModelConfig& config) const {
  validate(config);
  std::vector<std::uint8_t> flags(config.total_heads(), 0);
  for (const auto& h : heads_) flags[h.layer * config.n_heads + h.head] = 1;
  return flags;
}

std::string config_fingerprint(const ModelConfig& config) {
  return sha256_hex(to_json(config).dump());
}

}  // namespace attninf
