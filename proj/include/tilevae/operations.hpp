#pragma once

// Request handlers shared by the CLI and the HTTP service. Each takes a
// loaded model plus a JSON request body and returns the response document.
// Seeds are read from the request and echoed back.

#include <functional>
#include <memory>

#include "tilevae/documents.hpp"

namespace tilevae::ops {

using SegmentLookup = std::function<const Segment*(std::string_view id)>;

struct ModelContext {
  std::shared_ptr<const ModelParams> model;
  /// Training corpus, needed for attribute vectors and labels. May be null.
  std::shared_ptr<const Corpus> corpus;
  /// Resolves {"id": ...} segment references; defaults to the corpus.
  SegmentLookup lookup;

  const ModelParams& params() const { return *model; }
  const TileAlphabet& alphabet() const;
  const Corpus& require_corpus() const;
};

/// A segment given inline (cells/rows) or as {"id": ...} / "id".
Segment resolve_segment(const ModelContext& ctx, const Json& ref);

/// {n_segments, seed} -> Level document. `next` enables seeded continuation.
Json generate(const ModelContext& ctx, const Json& req, const ModelContext* next = nullptr);

/// {seed_segment, n_more, mode, seed} -> Level document
Json continue_level(const ModelContext& ctx, const Json& req);

/// {segment_a, segment_b, steps} or {segment_a, segment_b, t: number | [numbers]}
/// -> [Segment documents]
Json interpolate(const ModelContext& ctx, const Json& req);

/// {input_segment, metric, condition, es_config} -> Segment document
Json search(const ModelContext& ctx, const Json& req);

/// {label_vector, seed} -> Segment document. label_vector is a flat array or
/// {game, density_tercile, has_hazard, has_enemy}.
Json condition(const ModelContext& ctx, const Json& req);

/// {weights} -> {latent, segment, proportions}
Json blend_canvas(const ModelContext& ctx, const Json& req);

/// {schedule, n_segments, es_config, seed, direction} -> Level document with
/// per-segment proportions
Json blend_progression(const ModelContext& ctx, const Json& req);

/// {z} -> Segment document
Json decode_latent(const ModelContext& ctx, const Json& req);

/// Projection config document -> [ProjectionPoint]
Json projection(const ModelContext& ctx, const Json& config);

/// Registry sidecar for a trained model: corpus id, config, dims, final stats.
Json training_metadata(const std::string& corpus_id, const TrainConfig& config, const TrainResult& result);

/// Text grid of a Level document, one line per row, unified glyphs.
std::string render_level(const Json& level, const TileAlphabet& alphabet);

}  // namespace tilevae::ops
