#include "attninf/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "attninf/errors.hpp"
#include "attninf/hashing.hpp"
#include "attninf/rng.hpp"

namespace attninf {
namespace {

std::string layer_name(std::size_t layer, const char* suffix) {
  return "layers." + std::to_string(layer) + "." + suffix;
}

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::vector<TensorShape> tensor_layout(const ModelConfig& c) {
  const std::size_t h = c.hidden_size;
  std::vector<TensorShape> layout_out;
  layout_out.push_back({"token_embedding", {c.vocab_size, h}});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    layout_out.push_back({layer_name(l, "attn_norm"), {h}});
    layout_out.push_back({layer_name(l, "wq"), {c.n_heads * c.head_dim(), h}});
    layout_out.push_back({layer_name(l, "wk"), {c.kv_dim(), h}});
    layout_out.push_back({layer_name(l, "wv"), {c.kv_dim(), h}});
    layout_out.push_back({layer_name(l, "wo"), {h, c.n_heads * c.head_dim()}});
    layout_out.push_back({layer_name(l, "ffn_norm"), {h}});
    layout_out.push_back({layer_name(l, "w_gate"), {c.ffn_inner, h}});
    layout_out.push_back({layer_name(l, "w_up"), {c.ffn_inner, h}});
    layout_out.push_back({layer_name(l, "w_down"), {h, c.ffn_inner}});
  }
  layout_out.push_back({"final_norm", {h}});
  if (!c.tie_embeddings) layout_out.push_back({"lm_head", {c.vocab_size, h}});
  return layout_out;
}

ModelCheckpoint::ModelCheckpoint(ModelConfig config, std::vector<Tensor> tensors)
    : config_(std::move(config)) {
  config_.validate();
  std::map<std::string, Tensor*> by_name;
  for (auto& t : tensors) {
    if (!by_name.emplace(t.name, &t).second) throw DataError("duplicate tensor '" + t.name + "'");
  }
  const auto layout = tensor_layout(config_);
  for (const auto& entry : layout) {
    auto it = by_name.find(entry.name);
    if (it == by_name.end()) throw DataError("missing tensor '" + entry.name + "'");
    Tensor& t = *it->second;
    if (t.shape != entry.shape) {
      throw DataError("shape mismatch for '" + entry.name + "': got " + shape_str(t.shape) +
                      ", config implies " + shape_str(entry.shape));
    }
    if (t.values.size() != numel(entry.shape)) {
      throw DataError("tensor '" + entry.name + "' has " + std::to_string(t.values.size()) +
                      " values, shape implies " + std::to_string(numel(entry.shape)));
    }
    if (!std::all_of(t.values.begin(), t.values.end(), [](float v) { return std::isfinite(v); })) {
      throw DataError("non-finite value in tensor '" + entry.name + "'");
    }
    tensors_.push_back(std::move(t));
    by_name.erase(it);
  }
  if (!by_name.empty()) throw DataError("unknown tensor '" + by_name.begin()->first + "'");
}

std::span<const float> ModelCheckpoint::tensor(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t.values;
  }
  throw std::out_of_range("no tensor named " + std::string(name));
}

std::span<const float> ModelCheckpoint::final_norm() const {
  return tensors_[1 + 9 * config_.n_layers].values;
}

std::span<const float> ModelCheckpoint::lm_head() const {
  return config_.tie_embeddings ? token_embedding() : tensors_.back().values;
}

LayerWeights ModelCheckpoint::layer(std::size_t index) const {
  const std::size_t base = 1 + 9 * index;
  auto at = [&](std::size_t k) { return std::span<const float>(tensors_[base + k].values); };
  return {at(0), at(1), at(2), at(3), at(4), at(5), at(6), at(7), at(8)};
}

std::string ModelCheckpoint::weights_fingerprint() const {
  std::string acc = config_fingerprint(config_);
  for (const auto& t : tensors_) acc += t.name + ":" + sha256_hex(std::span<const float>(t.values));
  return sha256_hex(acc);
}

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint) {
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : checkpoint.tensors()) {
    const std::size_t length = t.values.size() * 4;
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"length", length}});
    offset += length;
  }
  const nlohmann::json header = {{"config", to_json(checkpoint.config())}, {"tensors", table}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(kAiwfMagic.size() + 8 + header_text.size() + offset);
  out.append(kAiwfMagic);
  const auto header_len = static_cast<std::uint64_t>(header_text.size());
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((header_len >> (8 * b)) & 0xFF));
  out.append(header_text);
  for (const auto& t : checkpoint.tensors()) {
    for (float v : t.values) put_u32_le(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelCheckpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kAiwfMagic.size() || bytes.substr(0, kAiwfMagic.size()) != kAiwfMagic) {
    throw DataError("bad magic: not an AIWF0001 checkpoint");
  }
  if (bytes.size() < kAiwfMagic.size() + 8) throw DataError("truncated checkpoint: no header length");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kAiwfMagic.size();
  std::uint64_t header_len = 0;
  for (int b = 0; b < 8; ++b) header_len |= std::uint64_t{p[b]} << (8 * b);
  const std::size_t header_start = kAiwfMagic.size() + 8;
  if (header_len > bytes.size() - header_start) throw DataError("truncated checkpoint: header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_start, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (!header.contains("config") || !header.contains("tensors")) {
    throw DataError("malformed checkpoint header: needs 'config' and 'tensors'");
  }
  const ModelConfig config = config_from_json(header.at("config"));
  const std::string_view data = bytes.substr(header_start + header_len);
  const auto* base = reinterpret_cast<const unsigned char*>(data.data());

  std::vector<Tensor> tensors;
  try {
    for (const auto& entry : header.at("tensors")) {
      Tensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto length = entry.at("length").get<std::uint64_t>();
      if (length != numel(t.shape) * 4) {
        throw DataError("tensor '" + t.name + "' length disagrees with shape " + shape_str(t.shape));
      }
      if (offset > data.size() || length > data.size() - offset) {
        throw DataError("truncated checkpoint: tensor '" + t.name + "' extends past end of file");
      }
      t.values.resize(length / 4);
      for (std::size_t i = 0; i < t.values.size(); ++i) {
        t.values[i] = std::bit_cast<float>(get_u32_le(base + offset + 4 * i));
      }
      tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed tensor table: ") + e.what());
  }
  return ModelCheckpoint(config, std::move(tensors));
}

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_checkpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ModelCheckpoint random_checkpoint(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<Tensor> tensors;
  for (auto& entry : tensor_layout(config)) {
    Tensor t{entry.name, entry.shape, std::vector<float>(numel(entry.shape))};
    if (entry.shape.size() == 1) {
      for (auto& v : t.values) v = static_cast<float>(1.0 + 0.1 * rng.normal());
    } else {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(entry.shape[1]));
      for (auto& v : t.values) v = static_cast<float>(rng.normal() * stddev);
    }
    tensors.push_back(std::move(t));
  }
  return ModelCheckpoint(config, std::move(tensors));
}

std::vector<CheckpointEntry> read_checkpoint_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint list " + path.string());
  std::vector<CheckpointEntry> entries;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& list = j.is_object() ? j.at("checkpoints") : j;
    if (!list.is_array()) throw DataError(path.string() + ": expected an array of checkpoints");
    for (const auto& item : list) {
      CheckpointEntry e;
      e.step = item.at("step").get<std::uint64_t>();
      e.path = item.at("path").get<std::string>();
      e.train_loss = item.at("train_loss").get<double>();
      if (e.path.is_relative()) e.path = path.parent_path() / e.path;
      entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint list: " + e.what());
  }
  if (entries.empty()) throw DataError(path.string() + ": checkpoint list is empty");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].step == entries[i - 1].step) {
      throw DataError(path.string() + ": duplicate step " + std::to_string(entries[i].step));
    }
  }
  return entries;
}

}  // namespace attninf
