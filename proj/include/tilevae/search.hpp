#pragma once

// (mu + lambda) evolution strategy over latent vectors, with composable
// objectives evaluated on decoded segments.

#include <functional>
#include <optional>
#include <vector>

#include "tilevae/kernels.hpp"
#include "tilevae/latent.hpp"
#include "tilevae/metrics.hpp"

namespace tilevae {

/// target: |target - v|, minimize: v, maximize: -v, avoid: -|target - v|.
enum class TermMode { target, minimize, maximize, avoid };

std::string_view to_string(TermMode m);
TermMode parse_term_mode(std::string_view s);

struct ObjectiveTerm {
  MetricSpec metric;
  TermMode mode = TermMode::minimize;
  double target = 0.0;  // used by target and avoid
  double weight = 1.0;
};

struct ProportionTarget {
  std::vector<AttributeVector> attributes;
  std::vector<double> target;  // simplex, aligned with `attributes`
  double weight = 1.0;
  double temperature = 1.0;
};

struct ObjectiveSpec {
  std::vector<ObjectiveTerm> terms;
  double playability_weight = 0.0;
  PlayabilityConfig playability;
  std::optional<ProportionTarget> proportion;

  void validate() const;
};

struct ESConfig {
  int population = 32;  // lambda
  int parents = 8;      // mu
  double mutation_sigma = 0.3;
  int generations = 40;
  std::uint64_t seed = 0;
  /// Initial population: prior samples, or `init_center + init_sigma * N(0, I)`.
  std::optional<std::vector<double>> init_center;
  double init_sigma = 0.5;

  void validate() const;
};

struct SearchResult {
  LatentVector best_z;
  double best_fitness = 0.0;
  std::vector<double> history;  // best-so-far after generation 0..G
  long evaluations = 0;
};

/// Lower is better.
double fitness(const ObjectiveSpec& objective, const ModelParams& model, const TileAlphabet& alphabet,
               std::span<const double> z);

/// Evaluates every row of `zs`; rows are independent.
using BatchFitness = std::function<std::vector<double>(kernels::ConstMatrix zs)>;

/// Called once per generation, in candidate order, with every evaluated
/// candidate and its fitness.
using CandidateObserver = std::function<void(std::span<const double> z, double fitness)>;

/// Equal fitness ranks the later generation first, then the lower index
/// within a generation.
SearchResult evolve(std::size_t latent_dim, const BatchFitness& evaluate, const ESConfig& config,
                    const CandidateObserver& observer = {});

/// Model-backed batch evaluator: batched decode, then per-candidate scoring
/// (parallel across candidates for Exec::parallel).
BatchFitness objective_evaluator(const ObjectiveSpec& objective, const ModelParams& model,
                                 const TileAlphabet& alphabet, kernels::Exec exec = kernels::default_exec());

SearchResult evolve(const ModelParams& model, const TileAlphabet& alphabet, const ObjectiveSpec& objective,
                    const ESConfig& config, kernels::Exec exec = kernels::default_exec());

enum class Condition { similar, dissimilar };

Condition parse_condition(std::string_view s);

/// Objective used by search_level; exposed for inspection and tests.
ObjectiveSpec level_search_objective(const ModelParams& model, const TileAlphabet& alphabet, const Segment& input,
                                     const MetricSpec& metric, Condition condition);

/// Evolves a segment similar/dissimilar to `input` under `metric` that differs
/// from it in at least one cell. Restarts up to 5 times with derived seeds;
/// throws DegenerateSearch if no distinct candidate was ever decoded.
Segment search_level(const ModelParams& model, const TileAlphabet& alphabet, const Segment& input,
                     const MetricSpec& metric, Condition condition, const ESConfig& config);

}  // namespace tilevae
