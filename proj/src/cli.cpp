#include "tilevae/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "tilevae/error.hpp"
#include "tilevae/operations.hpp"
#include "tilevae/service.hpp"

namespace tilevae {

namespace fs = std::filesystem;

namespace {

struct Output {
  std::string path;

  bool wants_json() const { return fs::path(path).extension() == ".json"; }

  void emit(std::ostream& out, const Json& doc, const std::string& text) const {
    if (path.empty()) out << text;
    else write_text_file(path, wants_json() ? to_text(doc) : text);
  }
};

/// JSON given inline or as a path to a file holding it.
Json json_arg(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) return parse_json(read_text_file(arg));
  return parse_json(arg);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

/// A segment reference: a .json segment document, a 16-line glyph grid, or a corpus id.
Json segment_ref(const std::string& ref) {
  std::error_code ec;
  if (!fs::is_regular_file(ref, ec)) return Json(ref);
  const std::string text = read_text_file(ref);
  if (fs::path(ref).extension() == ".json") return parse_json(text);
  return Json{{"rows", lines_of(text)}};
}

std::string segment_text(const Json& doc) {
  std::string s;
  for (const auto& row : doc.at("rows")) s += row.get<std::string>() + "\n";
  return s;
}

std::string segments_text(const Json& docs) {
  std::string s;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i) s += "\n";
    s += segment_text(docs[i]);
  }
  return s;
}

struct ModelArgs {
  std::string model;
  std::string corpus;

  ops::ModelContext context() const {
    ops::ModelContext ctx;
    ctx.model = std::make_shared<const ModelParams>(load_checkpoint(model));
    if (!corpus.empty()) ctx.corpus = std::make_shared<const Corpus>(load_corpus(corpus));
    return ctx;
  }
};

void add_model_args(CLI::App* cmd, ModelArgs& m, bool corpus_required = false) {
  cmd->add_option("--model", m.model, "Checkpoint file")->required()->check(CLI::ExistingFile);
  auto* c = cmd->add_option("--corpus", m.corpus, "Corpus file (segment ids, attribute vectors)")->check(CLI::ExistingFile);
  if (corpus_required) c->required();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tile-level VAE workbench"};
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "Use the serial reference kernels");

  Output output;
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", output.path, "Output file (.json for documents, otherwise text)");
  };
  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "Random seed")->capture_default_str(); };

  // ingest ------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Parse game configs and levels into a corpus file");
  std::vector<std::string> game_cfgs, level_args;
  std::string games_dir, levels_dir;
  int stride = kDefaultStride;
  ingest->add_option("--game", game_cfgs, "Game config file (repeatable)");
  ingest->add_option("--games-dir", games_dir, "Directory of *.cfg game configs");
  ingest->add_option("--level", level_args, "GAME=PATH level file (repeatable)");
  ingest->add_option("--levels-dir", levels_dir, "Directory holding <game>/*.txt levels");
  ingest->add_option("--stride", stride, "Window stride")->capture_default_str();
  ingest->add_option("--out", output.path, "Corpus file")->required();

  // train -------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train a model on a corpus");
  std::string corpus_path, variant_name = "reconstruct", train_cfg_arg;
  TrainConfig tc;
  train_cmd->add_option("--corpus", corpus_path, "Corpus file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--variant", variant_name, "reconstruct | next_segment | label_conditional")->capture_default_str();
  train_cmd->add_option("--config", train_cfg_arg, "Train config JSON (inline or file)");
  auto* o_epochs = train_cmd->add_option("--epochs", tc.epochs);
  auto* o_batch = train_cmd->add_option("--batch-size", tc.batch_size);
  auto* o_lr = train_cmd->add_option("--lr", tc.learning_rate);
  auto* o_beta = train_cmd->add_option("--beta", tc.beta);
  auto* o_hidden = train_cmd->add_option("--hidden", tc.hidden);
  auto* o_latent = train_cmd->add_option("--latent", tc.latent);
  auto* o_tseed = train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--out", output.path, "Checkpoint file; metadata goes next to it as .json")->required();

  // generate ----------------------------------------------------------------
  ModelArgs mg;
  auto* gen = app.add_subcommand("generate", "Decode prior samples into a level");
  add_model_args(gen, mg);
  std::string next_model;
  int n_segments = 4;
  gen->add_option("--next-model", next_model, "Next-segment model for seeded continuation")->check(CLI::ExistingFile);
  gen->add_option("--segments", n_segments, "Number of segments")->capture_default_str();
  add_seed(gen);
  add_out(gen);

  // continue ----------------------------------------------------------------
  ModelArgs mc;
  auto* cont = app.add_subcommand("continue", "Extend a seed segment with a next-segment model");
  add_model_args(cont, mc);
  std::string seed_ref, mode = "deterministic";
  int n_more = 3;
  cont->add_option("--seed-segment", seed_ref, "Segment id, .json segment document or 16-line text grid")->required();
  cont->add_option("--n-more", n_more, "Segments to add")->capture_default_str();
  cont->add_option("--mode", mode, "deterministic | sampled")->capture_default_str();
  add_seed(cont);
  add_out(cont);

  // interpolate -------------------------------------------------------------
  ModelArgs mi;
  auto* interp = app.add_subcommand("interpolate", "Decode a linear path between two segments");
  add_model_args(interp, mi);
  std::string ref_a, ref_b;
  int steps = 4;
  interp->add_option("--a", ref_a, "First segment")->required();
  interp->add_option("--b", ref_b, "Second segment")->required();
  interp->add_option("--steps", steps, "Interpolation steps")->capture_default_str();
  add_out(interp);

  // search ------------------------------------------------------------------
  ModelArgs ms;
  auto* search_cmd = app.add_subcommand("search", "Evolve a segment similar or dissimilar to an input");
  add_model_args(search_cmd, ms);
  std::string input_ref, metric = "density", condition_name = "similar", es_arg;
  ESConfig es;
  search_cmd->add_option("--input", input_ref, "Input segment")->required();
  search_cmd->add_option("--metric", metric, "density | leniency | nonlinearity | histogram_distance | latent_distance")
      ->capture_default_str();
  search_cmd->add_option("--condition", condition_name, "similar | dissimilar")->capture_default_str();
  search_cmd->add_option("--es-config", es_arg, "ES config JSON (inline or file)");
  auto* o_pop = search_cmd->add_option("--population", es.population);
  auto* o_par = search_cmd->add_option("--parents", es.parents);
  auto* o_gen = search_cmd->add_option("--generations", es.generations);
  auto* o_sig = search_cmd->add_option("--sigma", es.mutation_sigma);
  add_seed(search_cmd);
  add_out(search_cmd);

  // condition ---------------------------------------------------------------
  ModelArgs mcond;
  auto* cond = app.add_subcommand("condition", "Decode a prior sample under a label vector");
  add_model_args(cond, mcond);
  std::string label_arg, label_game;
  int tercile = 1;
  bool hazard = false, enemy = false;
  cond->add_option("--label", label_arg, "Label vector JSON (flat array or object; inline or file)");
  cond->add_option("--game", label_game, "Game for the label one-hot");
  cond->add_option("--tercile", tercile, "Density tercile 0-2")->capture_default_str();
  cond->add_flag("--hazard", hazard, "Label: has hazards");
  cond->add_flag("--enemy", enemy, "Label: has enemies");
  add_seed(cond);
  add_out(cond);

  // blend-canvas ------------------------------------------------------------
  ModelArgs mb;
  auto* canvas = app.add_subcommand("blend-canvas", "Decode a weighted sum of game attribute vectors");
  add_model_args(canvas, mb, true);
  std::vector<std::string> weight_args;
  canvas->add_option("--weight", weight_args, "GAME=W (repeatable)")->required();
  add_out(canvas);

  // blend-progression -------------------------------------------------------
  ModelArgs mp;
  auto* prog = app.add_subcommand("blend-progression", "Build a level following a blend schedule");
  add_model_args(prog, mp, true);
  std::string schedule_arg, prog_es_arg, direction = "horizontal";
  int prog_segments = 8;
  prog->add_option("--schedule", schedule_arg, "Schedule JSON [{fraction, weights}] (inline or file)")->required();
  prog->add_option("--segments", prog_segments, "Number of segments")->capture_default_str();
  prog->add_option("--es-config", prog_es_arg, "ES config JSON (inline or file)");
  prog->add_option("--direction", direction, "horizontal | vertical")->capture_default_str();
  add_seed(prog);
  add_out(prog);

  // project -----------------------------------------------------------------
  ModelArgs mproj;
  auto* project = app.add_subcommand("project", "t-SNE projection of the corpus embeddings");
  add_model_args(project, mproj, true);
  std::string proj_cfg_arg;
  project->add_option("--config", proj_cfg_arg, "Projection config JSON (inline or file)");
  auto* o_pseed = project->add_option("--seed", seed, "Random seed");
  project->add_option("--out", output.path, "Output file (.json, .svg, otherwise text)");

  // render ------------------------------------------------------------------
  auto* render = app.add_subcommand("render", "Render a level or segment document as a text grid");
  std::string render_in;
  render->add_option("--in", render_in, "Level document, segment document or array of segment documents")
      ->required()
      ->check(CLI::ExistingFile);
  add_out(render);

  // serve -------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_cfg, data_dir, host;
  int port = -1;
  serve->add_option("--config", serve_cfg, "Service config file (default: $TILEVAE_CONFIG)");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data-dir", data_dir, "Data directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  if (serial) kernels::set_default_exec(kernels::Exec::serial);

  try {
    if (*ingest) {
      const TileAlphabet alphabet = TileAlphabet::unified();
      std::vector<GameSpec> games;
      for (const auto& p : game_cfgs) games.push_back(GameSpec::load(p, alphabet));
      if (!games_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(games_dir))
          if (e.path().extension() == ".cfg") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) games.push_back(GameSpec::load(f, alphabet));
      }
      auto spec_of = [&](const std::string& name) -> const GameSpec& {
        for (const auto& g : games)
          if (g.name == name) return g;
        fail(ErrorCode::UnknownGame, "no game config named '" + name + "'");
      };
      std::vector<std::pair<std::string, fs::path>> level_files;
      for (const auto& arg : level_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) fail(ErrorCode::BadConfig, "--level expects GAME=PATH");
        level_files.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
      }
      if (!levels_dir.empty()) {
        for (const auto& g : games) {
          const fs::path dir = fs::path(levels_dir) / g.name;
          if (!fs::is_directory(dir)) continue;
          std::vector<fs::path> files;
          for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".txt") files.push_back(e.path());
          std::sort(files.begin(), files.end());
          for (const auto& f : files) level_files.emplace_back(g.name, f);
        }
      }
      std::vector<LevelGrid> levels;
      for (const auto& [game, path] : level_files) {
        LevelGrid grid = parse_level(read_text_file(path), spec_of(game), alphabet);
        grid.name = game + "/" + path.stem().string();
        levels.push_back(std::move(grid));
      }
      const Corpus corpus = build_corpus(levels, games, alphabet, stride);
      save_corpus(corpus, output.path);
      out << "corpus: " << corpus.segments.size() << " segments";
      for (const auto& g : corpus.game_names()) out << ", " << g << " " << corpus.segments_of(g).size();
      out << "\n";
      return 0;
    }

    if (*train_cmd) {
      TrainConfig cfg = train_cfg_arg.empty() ? TrainConfig{} : train_config_from_json(json_arg(train_cfg_arg));
      if (*o_epochs) cfg.epochs = tc.epochs;
      if (*o_batch) cfg.batch_size = tc.batch_size;
      if (*o_lr) cfg.learning_rate = tc.learning_rate;
      if (*o_beta) cfg.beta = tc.beta;
      if (*o_hidden) cfg.hidden = tc.hidden;
      if (*o_latent) cfg.latent = tc.latent;
      if (*o_tseed) cfg.seed = tc.seed;
      cfg.validate();
      const Corpus corpus = load_corpus(corpus_path);
      const auto result = train(corpus, parse_variant(variant_name), cfg, [&](int epoch, const EpochStats& s) {
        out << "epoch " << epoch + 1 << " total " << s.loss.total << " recon " << s.loss.recon << " kl " << s.loss.kl
            << " accuracy " << s.tile_accuracy << "\n";
      });
      save_checkpoint(result.params, output.path);
      const fs::path sidecar = fs::path(output.path).replace_extension(".json");
      write_text_file(sidecar, to_text(ops::training_metadata(fs::path(corpus_path).stem().string(), cfg, result)));
      return 0;
    }

    if (*gen) {
      const auto ctx = mg.context();
      const Json req = {{"n_segments", n_segments}, {"seed", seed}};
      Json doc;
      if (!next_model.empty()) {
        ModelArgs nm{next_model, mg.corpus};
        const auto next = nm.context();
        doc = ops::generate(ctx, req, &next);
      } else {
        doc = ops::generate(ctx, req);
      }
      output.emit(out, doc, ops::render_level(doc, ctx.alphabet()));
      return 0;
    }

    if (*cont) {
      const auto ctx = mc.context();
      const Json req = {{"seed_segment", segment_ref(seed_ref)}, {"n_more", n_more}, {"mode", mode}, {"seed", seed}};
      const Json doc = ops::continue_level(ctx, req);
      output.emit(out, doc, ops::render_level(doc, ctx.alphabet()));
      return 0;
    }

    if (*interp) {
      const auto ctx = mi.context();
      const Json req = {{"segment_a", segment_ref(ref_a)}, {"segment_b", segment_ref(ref_b)}, {"steps", steps}};
      const Json docs = ops::interpolate(ctx, req);
      output.emit(out, docs, segments_text(docs));
      return 0;
    }

    if (*search_cmd) {
      const auto ctx = ms.context();
      ESConfig cfg = es_arg.empty() ? ESConfig{} : es_config_from_json(json_arg(es_arg));
      if (*o_pop) cfg.population = es.population;
      if (*o_par) cfg.parents = es.parents;
      if (*o_gen) cfg.generations = es.generations;
      if (*o_sig) cfg.mutation_sigma = es.mutation_sigma;
      cfg.seed = seed;
      const Json req = {{"input_segment", segment_ref(input_ref)},
                        {"metric", metric},
                        {"condition", condition_name},
                        {"es_config", es_config_json(cfg)}};
      const Json doc = ops::search(ctx, req);
      output.emit(out, doc, segment_text(doc));
      return 0;
    }

    if (*cond) {
      const auto ctx = mcond.context();
      Json label;
      if (!label_arg.empty()) label = json_arg(label_arg);
      else if (!label_game.empty())
        label = {{"game", label_game}, {"density_tercile", tercile}, {"has_hazard", hazard}, {"has_enemy", enemy}};
      else fail(ErrorCode::BadConfig, "condition needs --label or --game");
      const Json doc = ops::condition(ctx, {{"label_vector", label}, {"seed", seed}});
      output.emit(out, doc, segment_text(doc));
      return 0;
    }

    if (*canvas) {
      const auto ctx = mb.context();
      Json weights = Json::object();
      for (const auto& arg : weight_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) fail(ErrorCode::BadWeights, "--weight expects GAME=W");
        std::size_t used = 0;
        double w = 0.0;
        try {
          w = std::stod(arg.substr(eq + 1), &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != arg.size() - eq - 1) fail(ErrorCode::BadWeights, "bad weight in '" + arg + "'");
        weights[arg.substr(0, eq)] = w;
      }
      const Json doc = ops::blend_canvas(ctx, {{"weights", weights}});
      output.emit(out, doc, segment_text(doc["segment"]));
      return 0;
    }

    if (*prog) {
      const auto ctx = mp.context();
      Json req = {{"schedule", json_arg(schedule_arg)},
                  {"n_segments", prog_segments},
                  {"direction", direction},
                  {"seed", seed}};
      if (!prog_es_arg.empty()) req["es_config"] = json_arg(prog_es_arg);
      const Json doc = ops::blend_progression(ctx, req);
      output.emit(out, doc, ops::render_level(doc, ctx.alphabet()));
      return 0;
    }

    if (*project) {
      const auto ctx = mproj.context();
      Json cfg = proj_cfg_arg.empty() ? Json::object() : json_arg(proj_cfg_arg);
      if (*o_pseed) cfg["seed"] = seed;
      const Json doc = ops::projection(ctx, cfg);
      std::ostringstream text;
      for (const auto& p : doc)
        text << p["segment_id"].get<std::string>() << ' ' << p["x"].get<double>() << ' ' << p["y"].get<double>()
             << ' ' << p["game"].get<std::string>() << '\n';
      if (fs::path(output.path).extension() == ".svg") {
        std::vector<ProjectionPoint> pts;
        for (const auto& p : doc) pts.push_back({p["segment_id"], p["x"], p["y"], p["game"]});
        write_text_file(output.path, projection_svg(pts));
      } else {
        output.emit(out, doc, text.str());
      }
      return 0;
    }

    if (*render) {
      const TileAlphabet alphabet = TileAlphabet::unified();
      const Json doc = parse_json(read_text_file(render_in));
      std::string text;
      if (doc.is_object() && doc.contains("segments")) {
        text = ops::render_level(doc, alphabet);
      } else if (doc.is_array()) {
        for (std::size_t i = 0; i < doc.size(); ++i) {
          if (i) text += "\n";
          text += render_text(segment_from_json(doc[i], alphabet), GlyphTable::unified(alphabet));
        }
      } else {
        text = render_text(segment_from_json(doc, alphabet), GlyphTable::unified(alphabet));
      }
      if (output.path.empty()) out << text;
      else write_text_file(output.path, text);
      return 0;
    }

    if (*serve) {
      ServiceConfig cfg = ServiceConfig::resolve(serve_cfg.empty() ? std::nullopt : std::optional<fs::path>(serve_cfg));
      if (port >= 0) cfg.port = port;
      if (!host.empty()) cfg.host = host;
      if (!data_dir.empty()) cfg.data_dir = data_dir;
      Service service(cfg);
      err << "serving on " << cfg.host << ":" << (cfg.port ? cfg.port : 0) << "\n";
      service.run();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tilevae
