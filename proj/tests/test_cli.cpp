#include <sstream>

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"
#include "tilevae/cli.hpp"
#include "tilevae/latent.hpp"
#include "tilevae/service.hpp"

using namespace tilevae;
using namespace tilevae::testing;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tilevae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

struct Workspace {
  ScratchDir dir{"cli"};
  std::string model, next, cond, corpus;
  Workspace() {
    populate_data_dir(dir.path());
    model = (dir / "models/toy-rec.ckpt").string();
    next = (dir / "models/toy-next.ckpt").string();
    cond = (dir / "models/toy-cond.ckpt").string();
    corpus = (dir / "corpora/toy.json").string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"dance"}).code == 2);
  CHECK(cli({"generate"}).code == 2);  // --model is required
  CHECK(cli({"generate", "--model", "/nonexistent.ckpt"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("operation errors exit with 1 and a message") {
  auto r = cli({"condition", "--model", ws().model, "--label", "[1, 0]"});
  CHECK(r.code == 1);
  CHECK(r.err.find("BadConfig") != std::string::npos);
  r = cli({"interpolate", "--model", ws().model, "--a", "nowhere", "--b", "nowhere"});
  CHECK(r.code == 1);
  CHECK(r.err.find("NotFound") != std::string::npos);
  r = cli({"blend-canvas", "--model", ws().model, "--corpus", ws().corpus, "--weight", "smb=lots"});
  CHECK(r.code == 1);
  CHECK(r.err.find("BadWeights") != std::string::npos);
}

TEST_CASE("ingest builds the bundled corpus") {
  const auto out = ws().path("ingested.json");
  const auto root = source_dir() / "data";
  auto r = cli({"ingest", "--games-dir", (root / "games").string(), "--levels-dir", (root / "levels").string(), "--out", out});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("200 segments") != std::string::npos);
  const Corpus c = load_corpus(out);
  CHECK(c.segments.size() == toy_corpus().segments.size());
  for (std::size_t i = 0; i < c.segments.size(); ++i) CHECK(c.segments[i].cells == toy_corpus().segments[i].cells);
  CHECK(cli({"ingest", "--games-dir", (root / "games").string(), "--level", "zelda=x.txt", "--out", out}).code == 1);
}

TEST_CASE("train writes a checkpoint and sidecar") {
  const auto out = ws().path("trained.ckpt");
  auto r = cli({"train", "--corpus", ws().corpus, "--epochs", "2", "--hidden", "16", "--latent", "3", "--seed", "5", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(lines(r.out).size() == 2);
  const ModelParams m = load_checkpoint(out);
  CHECK(m.dims.latent == 3);
  const Json meta = parse_json(read_text_file(ws().path("trained.json")));
  CHECK(meta["corpus_id"] == "toy");
  CHECK(meta["train_config"]["epochs"] == 2);
  CHECK(cli({"train", "--corpus", ws().corpus, "--epochs", "0", "--out", out}).code == 1);
}

TEST_CASE("generate gives a 16 x 64 grid, deterministic in the seed") {
  const auto out = ws().path("lvl.txt");
  REQUIRE(cli({"generate", "--model", ws().model, "--segments", "4", "--seed", "7", "--out", out}).code == 0);
  const auto rows = lines(read_text_file(out));
  CHECK(rows.size() == 16);
  for (const auto& row : rows) CHECK(row.size() == 64);
  const auto again = cli({"generate", "--model", ws().model, "--segments", "4", "--seed", "7"});
  CHECK(again.out == read_text_file(out));
  CHECK(cli({"generate", "--model", ws().model, "--segments", "4", "--seed", "8"}).out != again.out);
  CHECK(cli({"generate", "--model", ws().model, "--next-model", ws().next, "--segments", "3", "--seed", "1"}).code == 0);
}

TEST_CASE("interpolate prints steps + 1 renders ending at the decoded endpoints") {
  const Segment& a = toy_corpus().segments.front();
  const Segment& b = toy_corpus().segments.back();
  auto r = cli({"interpolate", "--model", ws().model, "--corpus", ws().corpus, "--a", a.id, "--b", b.id, "--steps", "4"});
  REQUIRE(r.code == 0);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 5 * 16 + 4);  // blank line between renders
  const auto& m = small_model();
  const GlyphTable glyphs = GlyphTable::unified(toy_corpus().alphabet);
  auto block = [&](int k) {
    std::string s;
    for (int i = 0; i < 16; ++i) s += rows[k * 17 + i] + "\n";
    return s;
  };
  CHECK(block(0) == render_text(decode_segment(m, embed(m, a).values), glyphs));
  CHECK(block(4) == render_text(decode_segment(m, embed(m, b).values), glyphs));

  // file references: a 16-line text grid and a segment document
  write_text_file(ws().path("a.txt"), render_text(a, glyphs));
  write_text_file(ws().path("b.json"), to_text(segment_doc(b, toy_corpus().alphabet)));
  auto f = cli({"interpolate", "--model", ws().model, "--a", ws().path("a.txt"), "--b", ws().path("b.json"), "--steps", "4"});
  CHECK(f.code == 0);
  CHECK(f.out == r.out);
}

TEST_CASE("remaining generative subcommands are deterministic") {
  const auto& w = ws();
  const std::string seg = toy_corpus().segments[3].id;
  const std::vector<std::vector<std::string>> commands{
      {"continue", "--model", w.next, "--corpus", w.corpus, "--seed-segment", seg, "--n-more", "2", "--seed", "3"},
      {"continue", "--model", w.next, "--corpus", w.corpus, "--seed-segment", seg, "--mode", "sampled", "--seed", "3"},
      {"search", "--model", w.model, "--corpus", w.corpus, "--input", seg, "--metric", "leniency", "--population", "8",
       "--parents", "2", "--generations", "3", "--seed", "4"},
      {"condition", "--model", w.cond, "--corpus", w.corpus, "--game", "kid_icarus", "--tercile", "0", "--hazard", "--seed", "2"},
      {"blend-canvas", "--model", w.model, "--corpus", w.corpus, "--weight", "smb=1", "--weight", "kid_icarus=-0.5"},
      {"blend-progression", "--model", w.model, "--corpus", w.corpus, "--schedule",
       R"([{"fraction": 1, "weights": {"smb": 0.5, "kid_icarus": 0.5}}])", "--segments", "3", "--es-config",
       R"({"population": 8, "parents": 2, "generations": 2})", "--seed", "6"},
      {"project", "--model", w.model, "--corpus", w.corpus, "--config", R"({"iterations": 300})", "--seed", "1"},
  };
  for (const auto& cmd : commands) {
    CAPTURE(cmd[0]);
    const auto first = cli(cmd);
    CHECK(first.code == 0);
    CHECK(first.err.empty());
    CHECK(!first.out.empty());
    CHECK(cli(cmd).out == first.out);
  }
  const auto svg = w.path("map.svg");
  REQUIRE(cli({"project", "--model", w.model, "--corpus", w.corpus, "--config", R"({"iterations": 300})", "--out", svg}).code == 0);
  CHECK(read_text_file(svg).rfind("<svg", 0) == 0);
}

TEST_CASE("render turns documents back into the same text") {
  const auto& w = ws();
  const auto doc = w.path("level.json"), txt = w.path("level.txt");
  REQUIRE(cli({"generate", "--model", w.model, "--segments", "3", "--seed", "9", "--out", doc}).code == 0);
  REQUIRE(cli({"generate", "--model", w.model, "--segments", "3", "--seed", "9", "--out", txt}).code == 0);
  auto r = cli({"render", "--in", doc});
  REQUIRE(r.code == 0);
  CHECK(r.out == read_text_file(txt));

  const auto strip = w.path("strip.json");
  REQUIRE(cli({"interpolate", "--model", w.model, "--corpus", w.corpus, "--a", toy_corpus().segments[0].id, "--b",
               toy_corpus().segments[1].id, "--steps", "2", "--out", strip})
              .code == 0);
  const auto strip_text = cli({"interpolate", "--model", w.model, "--corpus", w.corpus, "--a",
                               toy_corpus().segments[0].id, "--b", toy_corpus().segments[1].id, "--steps", "2"});
  CHECK(cli({"render", "--in", strip}).out == strip_text.out);
}

TEST_CASE("CLI and service artifacts are byte-identical") {
  const auto& w = ws();
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.data_dir = w.dir.path();
  Service service(cfg);
  service.start();
  httplib::Client client("127.0.0.1", service.port());
  client.set_read_timeout(600, 0);
  auto served = [&](const std::string& path, Json body) {
    body["model_id"] = "toy-rec";
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    return res->body;
  };
  const Segment& a = toy_corpus().segments[5];
  const Segment& b = toy_corpus().segments[120];

  const auto gen = w.path("gen.json");
  REQUIRE(cli({"generate", "--model", w.model, "--segments", "4", "--seed", "21", "--out", gen}).code == 0);
  CHECK(read_text_file(gen) == served("/generate", {{"n_segments", 4}, {"seed", 21}}));

  const auto interp = w.path("interp.json");
  REQUIRE(cli({"interpolate", "--model", w.model, "--corpus", w.corpus, "--a", a.id, "--b", b.id, "--steps", "3", "--out", interp}).code == 0);
  CHECK(read_text_file(interp) == served("/interpolate", {{"segment_a", a.id}, {"segment_b", b.id}, {"steps", 3}}));

  const auto found = w.path("search.json");
  REQUIRE(cli({"search", "--model", w.model, "--corpus", w.corpus, "--input", a.id, "--metric", "density",
               "--population", "8", "--parents", "2", "--generations", "3", "--seed", "13", "--out", found})
              .code == 0);
  ESConfig es;
  es.population = 8;
  es.parents = 2;
  es.generations = 3;
  es.seed = 13;
  CHECK(read_text_file(found) == served("/search", {{"input_segment", a.id}, {"metric", "density"},
                                                   {"condition", "similar"}, {"es_config", es_config_json(es)}}));

  const auto canvas = w.path("canvas.json");
  REQUIRE(cli({"blend-canvas", "--model", w.model, "--corpus", w.corpus, "--weight", "smb=0.25", "--weight",
               "kid_icarus=0.75", "--out", canvas})
              .code == 0);
  CHECK(read_text_file(canvas) == served("/blend/canvas", {{"weights", {{"smb", 0.25}, {"kid_icarus", 0.75}}}}));
  service.stop();
}
