#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "attninf/corpus_io.hpp"
#include "attninf/hashing.hpp"
#include "cli.hpp"
#include "support/test_util.hpp"

using namespace attninf;
using namespace attninf::testing;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_corpus(const TempDir& dir) {
  const auto path = (dir / "corpus.jsonl").string();
  std::string text;
  const char* bodies[] = {"Proof of the lemma follows by induction on n.", "int main() { return 0; }",
                          "The river rose after the storm.", "We sum the series term by term.",
                          "Cache misses dominate the inner loop."};
  for (int i = 0; i < 20; ++i) {
    text += R"({"id": "d)" + std::to_string(i) + R"(", "domain": ")" + (i % 2 ? "web" : "code") +
            R"(", "text": ")" + bodies[i % 5] + "\"}\n";
  }
  text += "{\"id\": \"bad\"}\n";
  spit(path, text);
  return path;
}

}  // namespace

TEST_CASE("end-to-end pipeline through the command interface") {
  TempDir dir("cli");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  const std::string corpus = write_corpus(dir);

  REQUIRE(run({"init-model", "--hidden", "16", "--ffn", "24", "--layers", "2", "--heads", "4", "--kv-heads", "2",
               "--max-seq", "1024", "--seed", "3", "--out", p("model.aiwf")})
              .code == 0);
  REQUIRE(run({"gen-proxy", "--n", "3", "--max-len", "1024", "--seed", "1", "--out", p("proxy.jsonl")}).code == 0);

  const auto det = run({"detect-heads", "--model", p("model.aiwf"), "--proxy", p("proxy.jsonl"), "--top-frac", "0.25",
                        "--out", p("heads.json")});
  REQUIRE(det.code == 0);
  const auto heads = nlohmann::json::parse(slurp(p("heads.json")));
  CHECK(heads.at("selected").size() == 2);
  CHECK(heads.at("scores").size() == 8);

  const auto manifest = nlohmann::json::parse(slurp(p("heads.json") + ".manifest.json"));
  CHECK(manifest.at("subcommand") == "detect-heads");
  CHECK(manifest.at("inputs").dump().find(sha256_file(p("model.aiwf"))) != std::string::npos);

  const auto sc = run({"score", "--model", p("model.aiwf"), "--heads", p("heads.json"), "--corpus", corpus,
                       "--workers", "2", "--out", p("scored.jsonl")});
  REQUIRE(sc.code == 0);
  CHECK(sc.err.find("21") != std::string::npos);  // the skipped line number is reported
  const auto scored = read_scored(p("scored.jsonl"));
  REQUIRE(scored.size() == 20);
  for (const auto& d : scored) CHECK_FALSE(d.rank_in_domain.has_value());

  REQUIRE(run({"select", "--scored", p("scored.jsonl"), "--top-frac", "0.2", "--per-domain", "--out",
               p("selected.jsonl")})
              .code == 0);
  const auto selected = read_scored(p("selected.jsonl"));
  CHECK(std::count_if(selected.begin(), selected.end(), [](auto& d) { return d.selected; }) == 4);

  REQUIRE(run({"select", "--scored", p("scored.jsonl"), "--top-frac", "0.2", "--selected-only", "--out",
               p("top.jsonl")})
              .code == 0);
  CHECK(read_scored(p("top.jsonl")).size() == 4);

  REQUIRE(run({"mask-random", "--heads", p("heads.json"), "--count", "2", "--exclude-top", "0.25", "--seed", "4",
               "--out", p("mask.json")})
              .code == 0);
  const auto mask = nlohmann::json::parse(slurp(p("mask.json")));
  CHECK(mask.at("heads").size() == 2);
  CHECK(mask.at("heads").dump().find(heads.at("selected")[0].dump()) == std::string::npos);

  const auto ev = run({"eval-proxy", "--model", p("model.aiwf"), "--proxy", p("proxy.jsonl"), "--heads", p("mask.json")});
  REQUIRE(ev.code == 0);
  const auto ev_json = nlohmann::json::parse(ev.out);
  CHECK(ev_json.contains("exact_match_rate"));

  const auto ov = run({"analyze", "overlap", "--a", p("selected.jsonl"), "--b", p("scored.jsonl"), "--corpus", corpus,
                       "--top-k", "5", "--out", p("overlap.json")});
  CHECK(ov.code == 0);
  const auto su = run({"analyze", "summary", "--scored", p("scored.jsonl")});
  CHECK(su.code == 0);
  CHECK(su.out.find("code") != std::string::npos);
  const auto st = run({"analyze", "head-stability", "--heads", p("heads.json"), p("heads.json")});
  CHECK(st.code == 0);
}

TEST_CASE("usage errors exit 1, data errors exit 2") {
  TempDir dir("cli_err");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);

  spit(p("s.jsonl"), R"({"id":"x","domain":"web","n_tokens":3,"truncated":false,"loss_base":1,"loss_ref":1.2,"score":0.2,"rank_in_domain":null,"selected":false})"
                     "\n");
  CHECK(run({"select", "--scored", p("s.jsonl"), "--top-frac", "0", "--out", p("o.jsonl")}).code == 1);
  CHECK(run({"select", "--scored", p("s.jsonl"), "--top-frac", "1.5", "--out", p("o.jsonl")}).code == 1);
  CHECK(run({"select", "--scored", p("missing.jsonl"), "--out", p("o.jsonl")}).code == 1);
  CHECK(run({"select", "--scored", p("s.jsonl"), "--top-frac", "1", "--out", p("o.jsonl")}).code == 0);

  spit(p("bad.jsonl"), "{\"id\": 1}\n");
  CHECK(run({"select", "--scored", p("bad.jsonl"), "--out", p("o.jsonl")}).code == 2);

  // heads from one architecture applied to another
  REQUIRE(run({"init-model", "--hidden", "16", "--ffn", "24", "--layers", "2", "--heads", "4", "--kv-heads", "2",
               "--max-seq", "1024", "--out", p("a.aiwf")})
              .code == 0);
  REQUIRE(run({"init-model", "--hidden", "16", "--ffn", "24", "--layers", "3", "--heads", "4", "--kv-heads", "2",
               "--max-seq", "1024", "--out", p("b.aiwf")})
              .code == 0);
  REQUIRE(run({"gen-proxy", "--n", "2", "--max-len", "1024", "--seed", "1", "--out", p("proxy.jsonl")}).code == 0);
  REQUIRE(run({"detect-heads", "--model", p("a.aiwf"), "--proxy", p("proxy.jsonl"), "--out", p("heads.json")}).code ==
          0);
  spit(p("c.jsonl"), "{\"id\": \"1\", \"domain\": \"web\", \"text\": \"hello there\"}\n");
  const auto mismatch =
      run({"score", "--model", p("b.aiwf"), "--heads", p("heads.json"), "--corpus", p("c.jsonl"), "--out", p("x.jsonl")});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("fingerprint") != std::string::npos);

  CHECK(run({"gen-proxy", "--n", "1", "--max-len", "256", "--seed", "1", "--out", p("tiny.jsonl")}).code == 2);
  spit(p("strict.jsonl"), "{\"id\": \"1\", \"domain\": \"web\", \"text\": \"hello\"}\nnot json\n");
  CHECK(run({"score", "--model", p("a.aiwf"), "--heads", p("heads.json"), "--corpus", p("strict.jsonl"), "--strict",
             "--out", p("y.jsonl")})
            .code == 2);
}

TEST_CASE("head stability over a training run's checkpoint list") {
  TempDir dir("cli_run");
  const auto p = [&](const char* name) { return (dir / name).string(); };
  for (const char* seed : {"1", "2", "3"}) {
    const std::string out = p("ckpt") + std::string(seed) + ".aiwf";
    REQUIRE(run({"init-model", "--hidden", "16", "--ffn", "24", "--layers", "2", "--heads", "4", "--kv-heads", "2",
                 "--max-seq", "1024", "--seed", seed, "--out", out})
                .code == 0);
  }
  REQUIRE(run({"gen-proxy", "--n", "2", "--max-len", "1024", "--seed", "5", "--out", p("proxy.jsonl")}).code == 0);
  // listed out of order; relative paths resolve against the list's directory
  spit(p("run.json"), R"([{"step": 20, "path": "ckpt2.aiwf", "train_loss": 4.0},
                          {"step": 10, "path": "ckpt1.aiwf", "train_loss": 5.0},
                          {"step": 30, "path": "ckpt3.aiwf", "train_loss": 3.0}])");

  const auto st = run({"analyze", "head-stability", "--checkpoints", p("run.json"), "--proxy", p("proxy.jsonl"),
                       "--top-frac", "0.25", "--out", p("stab.json")});
  REQUIRE(st.code == 0);
  const auto j = nlohmann::json::parse(slurp(p("stab.json")));
  CHECK(j.at("labels") == nlohmann::json({"step10", "step20", "step30"}));
  CHECK(j.at("jaccard")[0][0] == 1.0);

  // The same tables detected one by one give the same matrix.
  for (const char* seed : {"1", "2", "3"}) {
    const std::string m = p("ckpt") + std::string(seed) + ".aiwf";
    const std::string h = p("h") + std::string(seed) + ".json";
    REQUIRE(run({"detect-heads", "--model", m, "--proxy", p("proxy.jsonl"), "--top-frac", "0.25", "--out", h}).code == 0);
  }
  REQUIRE(run({"analyze", "head-stability", "--heads", p("h1.json"), p("h2.json"), p("h3.json"), "--out",
               p("stab2.json")})
              .code == 0);
  const auto j2 = nlohmann::json::parse(slurp(p("stab2.json")));
  CHECK(j2.at("jaccard") == j.at("jaccard"));
  CHECK(j2.at("rank_correlation") == j.at("rank_correlation"));

  const auto manifest = nlohmann::json::parse(slurp(p("stab.json") + ".manifest.json"));
  CHECK(manifest.at("inputs").dump().find(sha256_file(p("ckpt3.aiwf"))) != std::string::npos);

  CHECK(run({"analyze", "head-stability", "--checkpoints", p("run.json")}).code == 1);  // needs --proxy
  CHECK(run({"analyze", "head-stability"}).code == 1);
  CHECK(run({"analyze", "head-stability", "--heads", p("h1.json"), p("h2.json"), "--checkpoints", p("run.json"),
             "--proxy", p("proxy.jsonl")})
            .code == 1);
  spit(p("dup.json"), R"([{"step": 1, "path": "ckpt1.aiwf", "train_loss": 1}, {"step": 1, "path": "ckpt2.aiwf", "train_loss": 1}])");
  CHECK(run({"analyze", "head-stability", "--checkpoints", p("dup.json"), "--proxy", p("proxy.jsonl")}).code == 2);
}
