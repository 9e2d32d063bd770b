#include "tilevae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "tilevae/error.hpp"
#include "tilevae/latent.hpp"

namespace tilevae {

std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::density: return "density";
    case MetricKind::leniency: return "leniency";
    case MetricKind::nonlinearity: return "nonlinearity";
    case MetricKind::histogram_distance: return "histogram_distance";
    case MetricKind::latent_distance: return "latent_distance";
  }
  return "?";
}

MetricKind parse_metric_kind(std::string_view s) {
  for (auto k : {MetricKind::density, MetricKind::leniency, MetricKind::nonlinearity,
                 MetricKind::histogram_distance, MetricKind::latent_distance})
    if (to_string(k) == s) return k;
  fail(ErrorCode::BadConfig, "unknown metric '" + std::string(s) + "'");
}

void MetricSpec::validate() const {
  const bool needs_seg = kind == MetricKind::histogram_distance;
  const bool needs_lat = kind == MetricKind::latent_distance;
  if (needs_seg != reference_segment.has_value() || needs_lat != reference_latent.has_value())
    fail(ErrorCode::MissingReference, "metric " + std::string(to_string(kind)) +
                                          (is_distance() ? " needs exactly its reference" : " takes no reference"));
}

double density(const Segment& seg, const TileAlphabet& alphabet) {
  int n = 0;
  for (TileId t : seg.cells) n += alphabet.is_solid(t);
  return n / static_cast<double>(kSegmentCells);
}

double leniency(const Segment& seg, const TileAlphabet& alphabet) {
  int n = 0;
  for (TileId t : seg.cells) n += alphabet.is_hazard(t) || alphabet.is_enemy(t);
  return 1.0 - std::min(1.0, n / 16.0);
}

double nonlinearity(const Segment& seg, const TileAlphabet& alphabet) {
  constexpr int n = kSegmentSize;
  std::array<double, n> height{};
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      if (alphabet.is_solid(seg.at(r, c))) {
        height[c] = n - r;
        break;
      }
    }
  }
  const double xm = (n - 1) / 2.0;
  double ym = 0.0;
  for (double h : height) ym += h;
  ym /= n;
  double sxy = 0.0, sxx = 0.0;
  for (int c = 0; c < n; ++c) {
    sxy += (c - xm) * (height[c] - ym);
    sxx += (c - xm) * (c - xm);
  }
  const double slope = sxy / sxx;
  double ss = 0.0;
  for (int c = 0; c < n; ++c) {
    const double r = height[c] - (ym + slope * (c - xm));
    ss += r * r;
  }
  return std::sqrt(ss / n);
}

double histogram_distance(const Segment& a, const Segment& b, const TileAlphabet& alphabet) {
  const std::size_t k = alphabet.size();
  std::vector<double> pa(k, 0.0), pb(k, 0.0);
  for (std::size_t i = 0; i < kSegmentCells; ++i) {
    if (a.cells[i] >= k || b.cells[i] >= k) fail(ErrorCode::AlphabetMismatch, "segment tile outside alphabet");
    pa[a.cells[i]] += 1.0 / kSegmentCells;
    pb[b.cells[i]] += 1.0 / kSegmentCells;
  }
  double js = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double m = 0.5 * (pa[i] + pb[i]);
    const double ta = pa[i] > 0.0 ? pa[i] * std::log(pa[i] / m) : 0.0;
    const double tb = pb[i] > 0.0 ? pb[i] * std::log(pb[i] / m) : 0.0;
    js += 0.5 * (ta + tb);  // one rounded sum per bin keeps d(a, b) == d(b, a) exactly
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

double evaluate(const MetricSpec& spec, const Segment& seg, const TileAlphabet& alphabet, const ModelParams* model) {
  spec.validate();
  switch (spec.kind) {
    case MetricKind::density: return density(seg, alphabet);
    case MetricKind::leniency: return leniency(seg, alphabet);
    case MetricKind::nonlinearity: return nonlinearity(seg, alphabet);
    case MetricKind::histogram_distance: return histogram_distance(seg, *spec.reference_segment, alphabet);
    case MetricKind::latent_distance: {
      if (!model) fail(ErrorCode::MissingModel, "latent_distance needs a model");
      const auto z = embed(*model, seg);
      const auto& ref = *spec.reference_latent;
      if (ref.size() != z.size()) fail(ErrorCode::BadShape, "reference latent has wrong length");
      double d2 = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) d2 += (z.values[k] - ref[k]) * (z.values[k] - ref[k]);
      return std::sqrt(d2);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Playability

void PlayabilityConfig::validate() const {
  if (max_jump_height < 1 || max_jump_span < 1)
    fail(ErrorCode::BadConfig, "jump height and span must be >= 1");
}

namespace {

class Reachability {
 public:
  Reachability(const GridView& g, const TileAlphabet& a, const PlayabilityConfig& cfg)
      : g_(g), a_(a), cfg_(cfg), vertical_(cfg.direction == PlayDirection::bottom_to_top) {
    if (vertical_)
      for (int r = g_.rows - 1; r >= 0 && entry_row_ < 0; --r)
        for (int c = 0; c < g_.cols; ++c)
          if (state(r, c)) entry_row_ = r;
  }

  bool open(int r, int c) const {
    const TileId t = g_.at(r, c);
    return !a_.is_solid(t) && !a_.is_hazard(t);
  }

  bool standing(int r, int c) const {
    if (!open(r, c)) return false;
    return r == g_.rows - 1 || a_.is_solid(g_.at(r + 1, c));
  }

  bool state(int r, int c) const {
    return standing(r, c) || (vertical_ && open(r, c) && a_.is_climbable(g_.at(r, c)));
  }

  bool start(int r, int c) const { return vertical_ ? r == entry_row_ : c == 0; }
  // vertical exit: close enough to the top edge to jump out of it
  bool goal(int r, int c) const { return vertical_ ? r < cfg_.max_jump_height : c == g_.cols - 1; }
  int progress(int r, int c) const { return vertical_ ? g_.rows - 1 - r : c; }

  template <class Visit>
  void neighbours(int r, int c, Visit&& visit) const {
    for (int dc : {-1, 1}) {
      const int nc = c + dc;
      if (nc < 0 || nc >= g_.cols) continue;
      if (state(r, nc)) {
        visit(r, nc);
      } else if (open(r, nc)) {
        // fall down the neighbouring column to the first state
        for (int fr = r + 1; fr < g_.rows; ++fr) {
          if (!open(fr, nc)) break;
          if (state(fr, nc)) {
            visit(fr, nc);
            break;
          }
        }
      }
    }
    for (int up = 1; up <= cfg_.max_jump_height; ++up) {
      const int nr = r - up;
      if (nr < 0) break;
      for (int dc = -cfg_.max_jump_span; dc <= cfg_.max_jump_span; ++dc) {
        const int nc = c + dc;
        if (nc < 0 || nc >= g_.cols) continue;
        if (state(nr, nc)) visit(nr, nc);
      }
    }
    if (vertical_) {
      for (int dr : {-1, 1}) {
        const int nr = r + dr;
        if (nr < 0 || nr >= g_.rows) continue;
        if ((a_.is_climbable(g_.at(r, c)) || a_.is_climbable(g_.at(nr, c))) && state(nr, c)) visit(nr, c);
      }
    }
  }

 private:
  const GridView& g_;
  const TileAlphabet& a_;
  const PlayabilityConfig& cfg_;
  bool vertical_;
  int entry_row_ = -1;
};

}  // namespace

PlayReport playable(const GridView& grid, const TileAlphabet& alphabet, const PlayabilityConfig& config) {
  config.validate();
  PlayReport report;
  if (grid.rows <= 0 || grid.cols <= 0) return report;
  const Reachability reach(grid, alphabet, config);
  const auto index = [&](int r, int c) { return static_cast<std::size_t>(r) * grid.cols + c; };
  std::vector<long> parent(static_cast<std::size_t>(grid.rows) * grid.cols, -2);  // -2 unseen, -1 root
  std::deque<std::pair<int, int>> queue;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (reach.start(r, c) && reach.state(r, c)) {
        parent[index(r, c)] = -1;
        queue.emplace_back(r, c);
      }
    }
  }
  long goal = -1;
  while (!queue.empty()) {
    const auto [r, c] = queue.front();
    queue.pop_front();
    ++report.states_visited;
    report.progress = std::max(report.progress, reach.progress(r, c));
    if (goal < 0 && reach.goal(r, c)) {
      goal = static_cast<long>(index(r, c));
      break;
    }
    reach.neighbours(r, c, [&](int nr, int nc) {
      auto& p = parent[index(nr, nc)];
      if (p != -2) return;
      p = static_cast<long>(index(r, c));
      queue.emplace_back(nr, nc);
    });
  }
  if (goal >= 0) {
    report.playable = true;
    for (long at = goal; at >= 0; at = parent[static_cast<std::size_t>(at)])
      report.path.push_back({static_cast<int>(at / grid.cols), static_cast<int>(at % grid.cols)});
    std::reverse(report.path.begin(), report.path.end());
  }
  return report;
}

}  // namespace tilevae
