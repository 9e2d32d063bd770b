#pragma once

// Scalar segment metrics and the tile-reachability playability checker.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tilevae/corpus.hpp"
#include "tilevae/model.hpp"

namespace tilevae {

enum class MetricKind { density, leniency, nonlinearity, histogram_distance, latent_distance };

std::string_view to_string(MetricKind k);
MetricKind parse_metric_kind(std::string_view s);

struct MetricSpec {
  MetricKind kind = MetricKind::density;
  std::optional<Segment> reference_segment;       // histogram_distance
  std::optional<std::vector<double>> reference_latent;  // latent_distance

  static MetricSpec of(MetricKind kind) { return {kind, std::nullopt, std::nullopt}; }
  static MetricSpec histogram_to(const Segment& ref) { return {MetricKind::histogram_distance, ref, std::nullopt}; }
  static MetricSpec latent_to(std::vector<double> ref) {
    return {MetricKind::latent_distance, std::nullopt, std::move(ref)};
  }

  bool is_distance() const {
    return kind == MetricKind::histogram_distance || kind == MetricKind::latent_distance;
  }
  /// Throws MissingReference when the reference does not match the kind.
  void validate() const;
};

/// Fraction of solid-like tiles.
double density(const Segment& seg, const TileAlphabet& alphabet);

/// 1 - min(1, (hazards + enemies) / 16)
double leniency(const Segment& seg, const TileAlphabet& alphabet);

/// RMS residual of a least-squares line through the per-column surface
/// heights (row count above the topmost solid-like tile, 0 for none).
double nonlinearity(const Segment& seg, const TileAlphabet& alphabet);

/// Jensen-Shannon divergence (nats) of the tile-frequency histograms.
double histogram_distance(const Segment& a, const Segment& b, const TileAlphabet& alphabet);

/// Dispatches on the spec. `model` is required for latent_distance.
double evaluate(const MetricSpec& spec, const Segment& seg, const TileAlphabet& alphabet,
                const ModelParams* model = nullptr);

enum class PlayDirection { left_to_right, bottom_to_top };

struct PlayabilityConfig {
  int max_jump_height = 4;
  int max_jump_span = 4;
  PlayDirection direction = PlayDirection::left_to_right;

  void validate() const;
};

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct PlayReport {
  bool playable = false;
  std::vector<Cell> path;  // start to goal when playable
  int states_visited = 0;
  /// Furthest coordinate reached along the play direction (column for
  /// left_to_right, rows above the bottom for bottom_to_top); -1 if no start.
  int progress = -1;
};

/// Read-only view of any tile grid (a segment or a stitched level).
struct GridView {
  int rows = 0;
  int cols = 0;
  std::span<const TileId> cells;

  TileId at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  static GridView of(const Segment& s) { return {kSegmentSize, kSegmentSize, s.cells}; }
  static GridView of(const LevelGrid& g) { return {g.rows, g.cols, g.cells}; }
};

/// Breadth-first search over standing states. A state is a non-solid,
/// non-hazard cell resting on a solid-like tile or on the bottom row
/// (climbable cells are states too when playing bottom_to_top). Moves:
///   step   one column sideways onto a state;
///   fall   one column sideways into open air, then down to the first state,
///          failing if a hazard is crossed;
///   jump   onto any state rising 1..max_jump_height rows within
///          max_jump_span columns;
///   climb  one row up/down when either cell is climbable (bottom_to_top).
/// left_to_right starts in column 0 and ends in the last column.
/// bottom_to_top starts on the lowest row holding any state and ends on any
/// state fewer than max_jump_height rows below the top edge.
PlayReport playable(const GridView& grid, const TileAlphabet& alphabet, const PlayabilityConfig& config);

inline PlayReport playable(const Segment& seg, const TileAlphabet& alphabet, const PlayabilityConfig& config) {
  return playable(GridView::of(seg), alphabet, config);
}

}  // namespace tilevae
