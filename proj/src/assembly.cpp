#include "tilevae/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tilevae/error.hpp"

namespace tilevae {

PlayDirection play_direction(Progression p) {
  return p == Progression::horizontal ? PlayDirection::left_to_right : PlayDirection::bottom_to_top;
}

LevelGrid Level::grid() const {
  LevelGrid g;
  g.game = "generated";
  g.progression = direction;
  const int n = static_cast<int>(segments.size());
  if (n == 0) return g;
  const bool horizontal = direction == Progression::horizontal;
  g.rows = horizontal ? kSegmentSize : kSegmentSize * n;
  g.cols = horizontal ? kSegmentSize * n : kSegmentSize;
  g.cells.assign(static_cast<std::size_t>(g.rows) * g.cols, 0);
  for (int s = 0; s < n; ++s) {
    const int row0 = horizontal ? 0 : (n - 1 - s) * kSegmentSize;
    const int col0 = horizontal ? s * kSegmentSize : 0;
    for (int r = 0; r < kSegmentSize; ++r)
      for (int c = 0; c < kSegmentSize; ++c) g.at(row0 + r, col0 + c) = segments[s].at(r, c);
  }
  return g;
}

Level stitch(std::vector<Segment> segments, std::vector<Provenance> provenance, Progression direction) {
  if (segments.size() != provenance.size()) fail(ErrorCode::BadShape, "one provenance entry per segment");
  Level level;
  level.direction = direction;
  level.segments = std::move(segments);
  level.provenance = std::move(provenance);
  return level;
}

namespace {

void check_playable(Level& level, const TileAlphabet& alphabet, const PlayabilityConfig& play) {
  if (level.segments.empty()) {
    level.playable = false;
    return;
  }
  PlayabilityConfig cfg = play;
  cfg.direction = play_direction(level.direction);
  const LevelGrid g = level.grid();
  level.playable = playable(GridView::of(g), alphabet, cfg).playable;
}

}  // namespace

// ---------------------------------------------------------------------------
// BlendSchedule

BlendSchedule::BlendSchedule(std::vector<BlendPhase> phases) : phases_(std::move(phases)) {
  if (phases_.empty()) fail(ErrorCode::BadSchedule, "schedule needs at least one phase");
  double total = 0.0;
  for (const auto& ph : phases_) {
    if (!(ph.fraction > 0.0 && ph.fraction <= 1.0)) fail(ErrorCode::BadSchedule, "phase fractions must lie in (0, 1]");
    total += ph.fraction;
    double wsum = 0.0;
    for (const auto& [game, w] : ph.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::BadSchedule, "phase weight for '" + game + "' must be >= 0");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) fail(ErrorCode::BadSchedule, "phase weights must sum to 1");
  }
  if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::BadSchedule, "phase fractions must sum to 1");
}

std::vector<int> BlendSchedule::phase_counts(int n) const {
  const std::size_t k = phases_.size();
  std::vector<int> counts(k, 0);
  if (n <= 0) return counts;
  std::vector<double> remainder(k);
  int assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = phases_[i].fraction * n;
    counts[i] = static_cast<int>(std::floor(quota));
    remainder[i] = quota - counts[i];
    assigned += counts[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; i = (i + 1) % k, ++assigned) ++counts[order[i]];
  if (static_cast<std::size_t>(n) >= k) {
    for (std::size_t i = 0; i < k; ++i) {
      if (counts[i] > 0) continue;
      const auto donor = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[i];
    }
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Generation

ContinueMode parse_continue_mode(std::string_view s) {
  if (s == "deterministic") return ContinueMode::deterministic;
  if (s == "sampled") return ContinueMode::sampled;
  fail(ErrorCode::BadConfig, "mode must be deterministic or sampled");
}

Level continue_level(const ModelParams& next_model, const TileAlphabet& alphabet, const Segment& seed, int n_more,
                     Rng& rng, ContinueMode mode, const PlayabilityConfig& play) {
  check_alphabet(next_model, alphabet);
  if (n_more < 0) fail(ErrorCode::OutOfRange, "n_more must be >= 0");
  std::vector<Segment> segs{seed};
  std::vector<Provenance> prov{{seed.id.empty() ? "seed" : seed.id, embed(next_model, seed).values}};
  for (int i = 0; i < n_more; ++i) {
    const auto code = embed(next_model, segs.back());
    std::vector<double> z = code.values;
    if (mode == ContinueMode::sampled) {
      std::vector<double> x(next_model.dims.input, 0.0);
      for (std::size_t cell = 0; cell < kSegmentCells; ++cell)
        x[cell * next_model.dims.channels + segs.back().cells[cell]] = 1.0;
      const auto full = encode(next_model, x);
      z = reparameterize(full.mu, full.logvar, rng);
    }
    segs.push_back(decode_segment(next_model, z));
    prov.push_back({"continued", z});
  }
  Level level = stitch(std::move(segs), std::move(prov), Progression::horizontal);
  check_playable(level, alphabet, play);
  return level;
}

Level generate_level(const ModelParams& model, const TileAlphabet& alphabet, int n_segments, Rng& rng,
                     const ModelParams* next_model, const PlayabilityConfig& play) {
  check_alphabet(model, alphabet);
  if (n_segments < 0) fail(ErrorCode::OutOfRange, "n_segments must be >= 0");
  if (n_segments == 0) return stitch({}, {}, Progression::horizontal);
  if (next_model) {
    const auto z = sample_prior(model.dims.latent, rng);
    Segment seed = decode_segment(model, z.values);
    Level level = continue_level(*next_model, alphabet, seed, n_segments - 1, rng, ContinueMode::deterministic, play);
    level.provenance.front() = {"prior_sample", z.values};
    return level;
  }
  std::vector<Segment> segs;
  std::vector<Provenance> prov;
  for (int i = 0; i < n_segments; ++i) {
    const auto z = sample_prior(model.dims.latent, rng);
    segs.push_back(decode_segment(model, z.values));
    prov.push_back({"prior_sample", z.values});
  }
  Level level = stitch(std::move(segs), std::move(prov), Progression::horizontal);
  check_playable(level, alphabet, play);
  return level;
}

BlendReport blend_progression(const ModelParams& model, const TileAlphabet& alphabet,
                              const std::vector<AttributeVector>& attributes, const BlendSchedule& schedule,
                              int n_segments, const ESConfig& es, Rng& rng, const BlendOptions& options) {
  check_alphabet(model, alphabet);
  if (n_segments < 1) fail(ErrorCode::OutOfRange, "n_segments must be >= 1");
  for (const auto& ph : schedule.phases()) {
    for (const auto& [game, w] : ph.weights) {
      const bool known = std::any_of(attributes.begin(), attributes.end(), [&](const AttributeVector& a) { return a.game == game; });
      if (!known) fail(ErrorCode::MissingAttribute, "no attribute vector for scheduled game '" + game + "'");
    }
  }
  const auto counts = schedule.phase_counts(n_segments);
  BlendReport report;
  std::vector<Segment> segs;
  std::vector<Provenance> prov;
  PlayabilityConfig seg_play = options.playability;
  seg_play.direction = play_direction(options.direction);
  for (std::size_t p = 0; p < counts.size(); ++p) {
    const auto& phase = schedule.phases()[p];
    std::map<std::string, double> nonzero;
    for (const auto& [g, w] : phase.weights)
      if (w > 0.0) nonzero.emplace(g, w);
    const auto center = combine(BlendWeights(nonzero), attributes);

    ObjectiveSpec obj;
    obj.playability_weight = options.playability_weight;
    obj.playability = seg_play;
    ProportionTarget target;
    target.attributes = attributes;
    target.weight = options.proportion_weight;
    target.temperature = options.temperature;
    for (const auto& a : attributes) {
      auto it = phase.weights.find(a.game);
      target.target.push_back(it == phase.weights.end() ? 0.0 : it->second);
    }
    obj.proportion = std::move(target);

    for (int i = 0; i < counts[p]; ++i) {
      ESConfig cfg = es;
      cfg.seed = rng.next_u64();
      cfg.init_center = center.values;
      cfg.init_sigma = options.init_sigma;
      const auto res = evolve(model, alphabet, obj, cfg);
      Segment seg = decode_segment(model, res.best_z.values);
      seg.game = "blend";
      report.proportions.push_back(game_proportions(res.best_z.values, attributes, options.temperature));
      report.segment_playable.push_back(playable(seg, alphabet, seg_play).playable);
      report.phase_of_segment.push_back(static_cast<int>(p));
      segs.push_back(std::move(seg));
      prov.push_back({"blend_phase_" + std::to_string(p), res.best_z.values});
    }
  }
  report.level = stitch(std::move(segs), std::move(prov), options.direction);
  check_playable(report.level, alphabet, options.playability);
  return report;
}

Level stitch_and_repair(std::vector<Segment> segments, std::vector<Provenance> provenance, Progression direction,
                        const PlayabilityConfig& play, int max_rerolls, const RegenerateFn& regenerate,
                        const TileAlphabet& alphabet) {
  if (segments.empty()) fail(ErrorCode::OutOfRange, "stitch_and_repair needs at least one segment");
  PlayabilityConfig cfg = play;
  cfg.direction = play_direction(direction);
  Level current = stitch(std::move(segments), std::move(provenance), direction);
  Level best = current;
  int best_progress = -2;
  for (int attempt = 0;; ++attempt) {
    const LevelGrid g = current.grid();
    const PlayReport rep = playable(GridView::of(g), alphabet, cfg);
    current.playable = rep.playable;
    current.rerolls = attempt;
    if (rep.playable) return current;
    if (rep.progress > best_progress) {
      best = current;
      best_progress = rep.progress;
    }
    if (attempt >= max_rerolls || !regenerate) break;
    const int first_unreached = rep.progress + 1;
    const std::size_t index = std::min(static_cast<std::size_t>(std::max(first_unreached, 0) / kSegmentSize),
                                       current.segments.size() - 1);
    Segment replacement = regenerate(index, attempt);
    current.segments[index] = std::move(replacement);
    current.provenance[index].source = "reroll_" + std::to_string(attempt);
  }
  best.playable = false;
  best.rerolls = regenerate ? max_rerolls : 0;
  return best;
}

}  // namespace tilevae
