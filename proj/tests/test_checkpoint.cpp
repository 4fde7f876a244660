#include <bit>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "json.hpp"

#include "attninf/checkpoint.hpp"
#include "attninf/errors.hpp"
#include "attninf/inference.hpp"
#include "support/test_util.hpp"

using namespace attninf;
using namespace attninf::testing;

namespace {

// Independent AIWF writer: tensors in the order given, packed back to back.
std::string hand_written_aiwf(const nlohmann::json& config, const std::vector<Tensor>& tensors) {
  nlohmann::json header;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  std::string data;
  for (const auto& t : tensors) {
    header["tensors"].push_back(
        {{"name", t.name}, {"shape", t.shape}, {"offset", data.size()}, {"length", t.values.size() * 4}});
    for (float v : t.values) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) data.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
    }
  }
  const std::string h = header.dump();
  std::string out = "AIWF0001";
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((std::uint64_t{h.size()} >> (8 * b)) & 0xFF));
  return out + h + data;
}

ModelConfig micro_config(bool tied) {
  ModelConfig c;
  c.vocab_size = 258;
  c.hidden_size = 8;
  c.ffn_inner = 12;
  c.n_layers = 1;
  c.n_heads = 2;
  c.n_kv_heads = 1;
  c.max_seq_len = 16;
  c.tie_embeddings = tied;
  return c;
}

}  // namespace

TEST_CASE("layout lists tensors in canonical order") {
  const auto untied = tensor_layout(micro_config(false));
  REQUIRE(untied.size() == 1 + 9 + 2);
  CHECK(untied.front().name == "token_embedding");
  CHECK(untied[1].name == "layers.0.attn_norm");
  CHECK(untied[2].shape == std::vector<std::size_t>{8, 8});
  CHECK(untied[3].shape == std::vector<std::size_t>{4, 8});  // wk: kv_dim x hidden
  CHECK(untied[9].shape == std::vector<std::size_t>{8, 12});  // w_down
  CHECK(untied.back().name == "lm_head");
  CHECK(tensor_layout(micro_config(true)).back().name == "final_norm");
}

TEST_CASE("serialize then parse round-trips bit for bit") {
  for (bool tied : {false, true}) {
    const auto ckpt = random_checkpoint(micro_config(tied), 5);
    const auto bytes = serialize_checkpoint(ckpt);
    const auto back = parse_checkpoint(bytes);
    CHECK(back.config() == ckpt.config());
    CHECK(back.weights_fingerprint() == ckpt.weights_fingerprint());
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("save and load through the filesystem") {
  TempDir dir("ckpt");
  const auto ckpt = random_checkpoint(tiny_config(), 11);
  save_checkpoint(ckpt, dir / "m.aiwf");
  const auto back = load_checkpoint(dir / "m.aiwf");
  CHECK(back.weights_fingerprint() == ckpt.weights_fingerprint());
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.aiwf"), DataError);
}

TEST_CASE("a hand-written file loads and predicts as constructed") {
  // Zero weights everywhere except lm_head row 5, which is all ones: every
  // position predicts token 5 through the unit norm gains.
  const auto cfg = micro_config(false);
  std::vector<Tensor> tensors;
  for (const auto& entry : tensor_layout(cfg)) {
    std::size_t n = 1;
    for (auto d : entry.shape) n *= d;
    const bool is_norm = entry.name.find("norm") != std::string::npos;
    tensors.push_back({entry.name, entry.shape, std::vector<float>(n, is_norm ? 1.0f : 0.0f)});
  }
  auto& emb = tensors.front().values;
  for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = static_cast<float>((i % 7) + 1) * 0.1f;
  auto& head = tensors.back().values;
  for (std::size_t i = 0; i < 8; ++i) head[5 * 8 + i] = 1.0f;

  // Write in a scrambled order to show offsets, not position, decide placement.
  std::vector<Tensor> shuffled(tensors.rbegin(), tensors.rend());
  const auto ckpt = parse_checkpoint(hand_written_aiwf(to_json(cfg), shuffled));
  CHECK(ckpt.tensors().front().name == "token_embedding");
  const auto r = forward_with_trace(ckpt, TokenSeq{256, 3, 9}, {});
  for (std::size_t t = 0; t < 3; ++t) {
    const auto row = r.logits_at(t);
    CHECK(std::max_element(row.begin(), row.end()) - row.begin() == 5);
  }
}

TEST_CASE("corrupt files are rejected with specific errors") {
  const auto ckpt = random_checkpoint(micro_config(false), 3);
  const auto bytes = serialize_checkpoint(ckpt);

  CHECK_THROWS_WITH_AS(parse_checkpoint("GGUF" + bytes.substr(4)), doctest::Contains("bad magic"), DataError);
  CHECK_THROWS_WITH_AS(parse_checkpoint(bytes.substr(0, 10)), doctest::Contains("truncated"), DataError);
  CHECK_THROWS_WITH_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), doctest::Contains("truncated"),
                       DataError);

  auto tensors = ckpt.tensors();
  auto bad_shape = tensors;
  bad_shape[2].shape = {4, 16};
  CHECK_THROWS_WITH_AS(parse_checkpoint(hand_written_aiwf(to_json(ckpt.config()), bad_shape)),
                       doctest::Contains("shape mismatch"), DataError);

  auto extra = tensors;
  extra.push_back({"layers.0.bias", {8}, std::vector<float>(8, 0.0f)});
  CHECK_THROWS_WITH_AS(parse_checkpoint(hand_written_aiwf(to_json(ckpt.config()), extra)),
                       doctest::Contains("unknown tensor"), DataError);

  auto missing = tensors;
  missing.erase(missing.begin() + 4);
  CHECK_THROWS_WITH_AS(parse_checkpoint(hand_written_aiwf(to_json(ckpt.config()), missing)),
                       doctest::Contains("missing tensor"), DataError);

  auto nan = tensors;
  nan[1].values[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH_AS(parse_checkpoint(hand_written_aiwf(to_json(ckpt.config()), nan)),
                       doctest::Contains("non-finite"), DataError);

  auto bad_cfg = to_json(ckpt.config());
  bad_cfg["n_kv_heads"] = 3;
  CHECK_THROWS_AS(parse_checkpoint(hand_written_aiwf(bad_cfg, tensors)), DataError);
}

TEST_CASE("config validation and fingerprints") {
  auto c = tiny_config();
  CHECK_NOTHROW(c.validate());
  CHECK(config_from_json(to_json(c)) == c);
  auto odd = c;
  odd.hidden_size = 12;  // head_dim 3
  CHECK_THROWS_AS(odd.validate(), DataError);
  auto other = c;
  other.rope_theta = 500.0;
  CHECK(config_fingerprint(c) != config_fingerprint(other));
  CHECK(config_fingerprint(c) == config_fingerprint(tiny_config()));
}

TEST_CASE("random init is deterministic per seed") {
  const auto a = random_checkpoint(tiny_config(), 1);
  CHECK(a.weights_fingerprint() == random_checkpoint(tiny_config(), 1).weights_fingerprint());
  CHECK(a.weights_fingerprint() != random_checkpoint(tiny_config(), 2).weights_fingerprint());
}

TEST_CASE("checkpoint lists are ordered by step and resolve relative paths") {
  TempDir dir("ckpt_list");
  spit(dir / "run.json", R"({"checkpoints": [
    {"step": 300, "path": "c300.aiwf", "train_loss": 2.1},
    {"step": 100, "path": "c100.aiwf", "train_loss": 3.5},
    {"step": 200, "path": "/abs/c200.aiwf", "train_loss": 2.7}]})");
  const auto list = read_checkpoint_list(dir / "run.json");
  REQUIRE(list.size() == 3);
  CHECK(list[0].step == 100);
  CHECK(list[0].path == dir / "c100.aiwf");
  CHECK(list[0].train_loss == 3.5);
  CHECK(list[1].path == std::filesystem::path("/abs/c200.aiwf"));
  CHECK(list[2].step == 300);

  spit(dir / "bare.json", R"([{"step": 1, "path": "a.aiwf", "train_loss": 1}])");
  CHECK(read_checkpoint_list(dir / "bare.json").size() == 1);

  spit(dir / "dup.json", R"([{"step": 1, "path": "a", "train_loss": 1}, {"step": 1, "path": "b", "train_loss": 1}])");
  CHECK_THROWS_WITH_AS(read_checkpoint_list(dir / "dup.json"), doctest::Contains("duplicate step 1"), DataError);
  spit(dir / "noloss.json", R"([{"step": 1, "path": "a"}])");
  CHECK_THROWS_AS(read_checkpoint_list(dir / "noloss.json"), DataError);
  spit(dir / "badstep.json", R"([{"step": "1", "path": "a", "train_loss": 1}])");
  CHECK_THROWS_AS(read_checkpoint_list(dir / "badstep.json"), DataError);
  spit(dir / "empty.json", "[]");
  CHECK_THROWS_AS(read_checkpoint_list(dir / "empty.json"), DataError);
  CHECK_THROWS_AS(read_checkpoint_list(dir / "missing.json"), DataError);
}

TEST_CASE("export, load, export gives identical bytes") {
  TempDir dir("ckpt_bytes");
  for (bool tied : {false, true}) {
    auto cfg = tiny_config();
    cfg.tie_embeddings = tied;
    save_checkpoint(random_checkpoint(cfg, 21), dir / "a.aiwf");
    save_checkpoint(load_checkpoint(dir / "a.aiwf"), dir / "b.aiwf");
    CHECK(slurp(dir / "a.aiwf") == slurp(dir / "b.aiwf"));
  }
}
