#pragma once

// JSON documents exchanged by the CLI and the HTTP service. Both front-ends
// serialize through these helpers, so equal inputs give equal bytes.

#include "json.hpp"

#include "tilevae/assembly.hpp"
#include "tilevae/corpus.hpp"
#include "tilevae/error.hpp"
#include "tilevae/model.hpp"
#include "tilevae/search.hpp"
#include "tilevae/viz.hpp"

namespace tilevae {

using Json = nlohmann::json;

/// Canonical text form: two-space indent, trailing newline.
std::string to_text(const Json& doc);

/// Parses, mapping syntax errors to BadConfig.
Json parse_json(std::string_view text);

/// 16 x 16 nested array of tile ids.
Json cells_json(const Segment& seg);

/// {id, game, cells, rows}; `rows` renders with the unified glyphs.
Json segment_doc(const Segment& seg, const TileAlphabet& alphabet);

/// Accepts {"cells": 16x16 | 256 ids}, {"rows": 16 strings of unified
/// glyphs}, or a bare 16x16 array.
Segment segment_from_json(const Json& doc, const TileAlphabet& alphabet);

/// {direction, segments: [{cells, provenance: {source, latent}}], playable, rerolls}
Json level_doc(const Level& level);

/// Inverse of level_doc. `playable` and `rerolls` are taken as recorded.
Level level_from_json(const Json& doc, const TileAlphabet& alphabet);

Json projection_doc(const std::vector<ProjectionPoint>& points);

Json error_doc(ErrorCode code, std::string_view message);

std::vector<double> vector_from_json(const Json& doc, std::string_view what);

/// Config readers. Missing keys keep defaults; unknown keys are BadConfig.
TrainConfig train_config_from_json(const Json& doc, TrainConfig base = {});
ESConfig es_config_from_json(const Json& doc, ESConfig base = {});
ProjectionConfig projection_config_from_json(const Json& doc, ProjectionConfig base = {});
PlayabilityConfig playability_from_json(const Json& doc, PlayabilityConfig base = {});

Json train_config_json(const TrainConfig& c);
Json es_config_json(const ESConfig& c);
Json projection_config_json(const ProjectionConfig& c);

/// [{fraction, weights: {game: w}}]
BlendSchedule schedule_from_json(const Json& doc);
BlendWeights weights_from_json(const Json& doc);

/// "density" or {"kind": "density"}
MetricKind metric_from_json(const Json& doc);

}  // namespace tilevae
