#pragma once

// Whole-level construction from segment-level operations.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tilevae/latent.hpp"
#include "tilevae/metrics.hpp"
#include "tilevae/search.hpp"

namespace tilevae {

struct Provenance {
  std::string source;  // corpus segment id, or an origin tag such as "prior_sample"
  std::vector<double> latent;
};

/// Segments laid out along `direction`. Horizontal levels grow to the right;
/// vertical levels grow upward, so segment 0 occupies the bottom rows.
struct Level {
  Progression direction = Progression::horizontal;
  std::vector<Segment> segments;
  std::vector<Provenance> provenance;
  bool playable = false;
  int rerolls = 0;

  LevelGrid grid() const;
};

Level stitch(std::vector<Segment> segments, std::vector<Provenance> provenance,
             Progression direction = Progression::horizontal);

PlayDirection play_direction(Progression p);

struct BlendPhase {
  double fraction = 1.0;
  std::map<std::string, double> weights;  // proportions: >= 0, sum 1
};

class BlendSchedule {
 public:
  /// Fractions in (0, 1] summing to 1 within 1e-9; each phase's weights
  /// non-negative, summing to 1.
  explicit BlendSchedule(std::vector<BlendPhase> phases);

  const std::vector<BlendPhase>& phases() const { return phases_; }

  /// Largest-remainder apportionment of n segments (ties to the earlier
  /// phase). When n >= phase count, every phase gets at least one segment,
  /// taken from the phase holding the most.
  std::vector<int> phase_counts(int n) const;

 private:
  std::vector<BlendPhase> phases_;
};

/// Decodes n prior samples, or with `next_model` decodes one prior sample and
/// continues it deterministically.
Level generate_level(const ModelParams& model, const TileAlphabet& alphabet, int n_segments, Rng& rng,
                     const ModelParams* next_model = nullptr, const PlayabilityConfig& play = {});

enum class ContinueMode { deterministic, sampled };

ContinueMode parse_continue_mode(std::string_view s);

Level continue_level(const ModelParams& next_model, const TileAlphabet& alphabet, const Segment& seed, int n_more,
                     Rng& rng, ContinueMode mode = ContinueMode::deterministic, const PlayabilityConfig& play = {});

struct BlendOptions {
  double proportion_weight = 10.0;
  double playability_weight = 1.0;
  double init_sigma = 0.5;
  double temperature = 1.0;
  Progression direction = Progression::horizontal;
  PlayabilityConfig playability;
};

struct BlendReport {
  Level level;
  std::vector<int> phase_of_segment;
  std::vector<std::vector<double>> proportions;  // measured per segment, game order of `attributes`
  std::vector<bool> segment_playable;
};

/// Per segment: evolve a latent toward the phase's proportions (plus the
/// playability penalty), starting around combine(phase weights).
BlendReport blend_progression(const ModelParams& model, const TileAlphabet& alphabet,
                              const std::vector<AttributeVector>& attributes, const BlendSchedule& schedule,
                              int n_segments, const ESConfig& es, Rng& rng, const BlendOptions& options = {});

using RegenerateFn = std::function<Segment(std::size_t index, int attempt)>;

/// Concatenates, then while the full level is unplayable and rerolls remain,
/// replaces the segment holding the first unreachable column (row for
/// vertical levels). Returns the best attempt, flagged.
Level stitch_and_repair(std::vector<Segment> segments, std::vector<Provenance> provenance, Progression direction,
                        const PlayabilityConfig& play, int max_rerolls, const RegenerateFn& regenerate,
                        const TileAlphabet& alphabet);

}  // namespace tilevae
