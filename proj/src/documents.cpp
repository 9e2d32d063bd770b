#include "tilevae/documents.hpp"

#include <set>

#include "tilevae/error.hpp"

namespace tilevae {

std::string to_text(const Json& doc) { return doc.dump(2) + "\n"; }

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::BadConfig, std::string("malformed JSON: ") + e.what());
  }
}

namespace {

void check_keys(const Json& doc, std::string_view what, std::initializer_list<std::string_view> allowed) {
  if (!doc.is_object()) fail(ErrorCode::BadConfig, std::string(what) + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(ErrorCode::BadConfig, std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const Json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::BadConfig, std::string("bad value for '") + key + "'");
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    lines.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return lines;
}

TileId tile_from_json(const Json& v, const TileAlphabet& alphabet) {
  if (!v.is_number_integer()) fail(ErrorCode::BadShape, "cells must be integer tile ids");
  const auto id = v.get<long long>();
  if (id < 0 || static_cast<std::size_t>(id) >= alphabet.size())
    fail(ErrorCode::AlphabetMismatch, "tile id " + std::to_string(id) + " outside the alphabet");
  return static_cast<TileId>(id);
}

}  // namespace

Json cells_json(const Segment& seg) {
  Json rows = Json::array();
  for (int r = 0; r < kSegmentSize; ++r) {
    Json row = Json::array();
    for (int c = 0; c < kSegmentSize; ++c) row.push_back(static_cast<int>(seg.at(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json segment_doc(const Segment& seg, const TileAlphabet& alphabet) {
  Json doc;
  doc["id"] = seg.id;
  doc["game"] = seg.game;
  doc["cells"] = cells_json(seg);
  doc["rows"] = split_lines(render_text(seg, GlyphTable::unified(alphabet)));
  return doc;
}

Segment segment_from_json(const Json& doc, const TileAlphabet& alphabet) {
  Segment seg;
  if (doc.is_object() && doc.contains("rows") && !doc.contains("cells")) {
    const Json& rows = doc["rows"];
    if (!rows.is_array() || rows.size() != kSegmentSize) fail(ErrorCode::BadShape, "rows must hold 16 strings");
    std::map<char, TileId> by_glyph;
    for (const auto& t : alphabet.entries()) by_glyph[t.glyph] = static_cast<TileId>(t.id);
    for (int r = 0; r < kSegmentSize; ++r) {
      if (!rows[r].is_string()) fail(ErrorCode::BadShape, "rows must hold 16 strings");
      const auto line = rows[r].get<std::string>();
      if (line.size() != kSegmentSize) fail(ErrorCode::BadShape, "each row must have 16 characters");
      for (int c = 0; c < kSegmentSize; ++c) {
        auto it = by_glyph.find(line[c]);
        if (it == by_glyph.end())
          fail(ErrorCode::UnknownChar, std::string("unknown glyph '") + line[c] + "' at row " + std::to_string(r));
        seg.at(r, c) = it->second;
      }
    }
  } else {
    const Json& cells = doc.is_object() ? doc.value("cells", Json()) : doc;
    if (!cells.is_array()) fail(ErrorCode::BadShape, "segment needs cells or rows");
    if (cells.size() == kSegmentCells) {
      for (int i = 0; i < kSegmentCells; ++i) seg.cells[i] = tile_from_json(cells[i], alphabet);
    } else if (cells.size() == kSegmentSize) {
      for (int r = 0; r < kSegmentSize; ++r) {
        if (!cells[r].is_array() || cells[r].size() != kSegmentSize)
          fail(ErrorCode::BadShape, "cells must be 16 rows of 16 ids");
        for (int c = 0; c < kSegmentSize; ++c) seg.at(r, c) = tile_from_json(cells[r][c], alphabet);
      }
    } else {
      fail(ErrorCode::BadShape, "cells must be 16 x 16");
    }
  }
  if (doc.is_object()) {
    if (doc.contains("id") && doc["id"].is_string()) seg.id = doc["id"].get<std::string>();
    if (doc.contains("game") && doc["game"].is_string()) seg.game = doc["game"].get<std::string>();
  }
  return seg;
}

Json level_doc(const Level& level) {
  Json doc;
  doc["direction"] = std::string(to_string(level.direction));
  Json segs = Json::array();
  for (std::size_t i = 0; i < level.segments.size(); ++i) {
    Json entry;
    entry["cells"] = cells_json(level.segments[i]);
    entry["provenance"] = {{"source", level.provenance[i].source}, {"latent", level.provenance[i].latent}};
    segs.push_back(std::move(entry));
  }
  doc["segments"] = std::move(segs);
  doc["playable"] = level.playable;
  doc["rerolls"] = level.rerolls;
  return doc;
}

Level level_from_json(const Json& doc, const TileAlphabet& alphabet) {
  if (!doc.is_object() || !doc.contains("segments") || !doc["segments"].is_array())
    fail(ErrorCode::BadShape, "level document needs a segments array");
  std::vector<Segment> segs;
  std::vector<Provenance> prov;
  for (const auto& entry : doc["segments"]) {
    segs.push_back(segment_from_json(entry, alphabet));
    Provenance p;
    if (entry.contains("provenance")) {
      const auto& pj = entry["provenance"];
      p.source = pj.value("source", std::string());
      if (pj.contains("latent")) p.latent = vector_from_json(pj["latent"], "latent");
    }
    prov.push_back(std::move(p));
  }
  Level level = stitch(std::move(segs), std::move(prov),
                       parse_progression(doc.value("direction", std::string("horizontal"))));
  level.playable = doc.value("playable", false);
  level.rerolls = doc.value("rerolls", 0);
  return level;
}

Json projection_doc(const std::vector<ProjectionPoint>& points) {
  Json arr = Json::array();
  for (const auto& p : points) arr.push_back({{"segment_id", p.segment_id}, {"x", p.x}, {"y", p.y}, {"game", p.game}});
  return arr;
}

Json error_doc(ErrorCode code, std::string_view message) {
  return {{"code", std::string(to_string(code))}, {"message", std::string(message)}};
}

std::vector<double> vector_from_json(const Json& doc, std::string_view what) {
  if (!doc.is_array()) fail(ErrorCode::BadShape, std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(doc.size());
  for (const auto& v : doc) {
    if (!v.is_number()) fail(ErrorCode::BadShape, std::string(what) + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TrainConfig train_config_from_json(const Json& doc, TrainConfig c) {
  if (doc.is_null()) return c;
  check_keys(doc, "train config",
             {"epochs", "batch_size", "learning_rate", "beta", "seed", "hidden", "latent", "adam_beta1",
              "adam_beta2", "adam_epsilon"});
  read(doc, "epochs", c.epochs);
  read(doc, "batch_size", c.batch_size);
  read(doc, "learning_rate", c.learning_rate);
  read(doc, "beta", c.beta);
  read(doc, "seed", c.seed);
  read(doc, "hidden", c.hidden);
  read(doc, "latent", c.latent);
  read(doc, "adam_beta1", c.adam_beta1);
  read(doc, "adam_beta2", c.adam_beta2);
  read(doc, "adam_epsilon", c.adam_epsilon);
  c.validate();
  return c;
}

Json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"beta", c.beta},             {"seed", c.seed},             {"hidden", c.hidden},
          {"latent", c.latent},         {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

ESConfig es_config_from_json(const Json& doc, ESConfig c) {
  if (doc.is_null()) return c;
  check_keys(doc, "es config", {"population", "parents", "mutation_sigma", "generations", "seed", "init_sigma"});
  read(doc, "population", c.population);
  read(doc, "parents", c.parents);
  read(doc, "mutation_sigma", c.mutation_sigma);
  read(doc, "generations", c.generations);
  read(doc, "seed", c.seed);
  read(doc, "init_sigma", c.init_sigma);
  c.validate();
  return c;
}

Json es_config_json(const ESConfig& c) {
  return {{"population", c.population},   {"parents", c.parents}, {"mutation_sigma", c.mutation_sigma},
          {"generations", c.generations}, {"seed", c.seed},       {"init_sigma", c.init_sigma}};
}

ProjectionConfig projection_config_from_json(const Json& doc, ProjectionConfig c) {
  if (doc.is_null()) return c;
  check_keys(doc, "projection config",
             {"perplexity", "iterations", "learning_rate", "early_exaggeration", "exaggeration_iterations",
              "initial_momentum", "final_momentum", "momentum_switch", "seed"});
  read(doc, "perplexity", c.perplexity);
  read(doc, "iterations", c.iterations);
  read(doc, "learning_rate", c.learning_rate);
  read(doc, "early_exaggeration", c.early_exaggeration);
  read(doc, "exaggeration_iterations", c.exaggeration_iterations);
  read(doc, "initial_momentum", c.initial_momentum);
  read(doc, "final_momentum", c.final_momentum);
  read(doc, "momentum_switch", c.momentum_switch);
  read(doc, "seed", c.seed);
  c.validate();
  return c;
}

Json projection_config_json(const ProjectionConfig& c) {
  return {{"perplexity", c.perplexity},
          {"iterations", c.iterations},
          {"learning_rate", c.learning_rate},
          {"early_exaggeration", c.early_exaggeration},
          {"exaggeration_iterations", c.exaggeration_iterations},
          {"initial_momentum", c.initial_momentum},
          {"final_momentum", c.final_momentum},
          {"momentum_switch", c.momentum_switch},
          {"seed", c.seed}};
}

PlayabilityConfig playability_from_json(const Json& doc, PlayabilityConfig c) {
  if (doc.is_null()) return c;
  check_keys(doc, "playability config", {"max_jump_height", "max_jump_span"});
  read(doc, "max_jump_height", c.max_jump_height);
  read(doc, "max_jump_span", c.max_jump_span);
  c.validate();
  return c;
}

BlendWeights weights_from_json(const Json& doc) {
  if (!doc.is_object()) fail(ErrorCode::BadWeights, "weights must map game names to numbers");
  std::map<std::string, double> w;
  for (const auto& [game, v] : doc.items()) {
    if (!v.is_number()) fail(ErrorCode::BadWeights, "weight for '" + game + "' is not a number");
    w[game] = v.get<double>();
  }
  return BlendWeights(std::move(w));
}

BlendSchedule schedule_from_json(const Json& doc) {
  if (!doc.is_array()) fail(ErrorCode::BadSchedule, "schedule must be an array of phases");
  std::vector<BlendPhase> phases;
  for (const auto& ph : doc) {
    if (!ph.is_object() || !ph.contains("fraction") || !ph["fraction"].is_number() || !ph.contains("weights") ||
        !ph["weights"].is_object())
      fail(ErrorCode::BadSchedule, "each phase needs a numeric fraction and a weights object");
    BlendPhase phase;
    phase.fraction = ph["fraction"].get<double>();
    for (const auto& [game, v] : ph["weights"].items()) {
      if (!v.is_number()) fail(ErrorCode::BadSchedule, "phase weight for '" + game + "' is not a number");
      phase.weights[game] = v.get<double>();
    }
    phases.push_back(std::move(phase));
  }
  return BlendSchedule(std::move(phases));
}

MetricKind metric_from_json(const Json& doc) {
  if (doc.is_string()) return parse_metric_kind(doc.get<std::string>());
  if (doc.is_object() && doc.contains("kind") && doc["kind"].is_string())
    return parse_metric_kind(doc["kind"].get<std::string>());
  fail(ErrorCode::BadConfig, "metric must be a name or {\"kind\": name}");
}

}  // namespace tilevae
