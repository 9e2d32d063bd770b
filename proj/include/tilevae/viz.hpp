#pragma once

// Exact t-SNE projection of latent codes to 2D, plus cluster diagnostics.

#include <map>
#include <string>
#include <vector>

#include "tilevae/corpus.hpp"
#include "tilevae/kernels.hpp"
#include "tilevae/model.hpp"

namespace tilevae {

struct ProjectionConfig {
  double perplexity = 30.0;  // clamped to (n - 1) / 3 for small inputs
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProjectionPoint {
  std::string segment_id;
  double x = 0.0;
  double y = 0.0;
  std::string game;
};

struct Affinities {
  std::size_t n = 0;
  double perplexity = 0.0;            // effective, after clamping
  std::vector<double> conditional;    // P(j|i), row-major n x n
  std::vector<double> joint;          // symmetrized, sums to 1
  std::vector<double> entropy_error;  // |H_i - log perplexity| per row
};

/// Throws TooFewPoints for n < 4. A row whose neighbours are all equidistant
/// is uniform for every bandwidth and is kept as is. Other rows whose
/// bandwidth cannot be matched (duplicate points) are retried once on inputs
/// jittered by 1e-10; DegenerateInput if that still fails.
Affinities pairwise_affinities(kernels::ConstMatrix latents, double perplexity,
                               kernels::Exec exec = kernels::default_exec());

struct TsneResult {
  std::vector<double> coords;  // n x 2, centered
  std::vector<double> kl;      // KL(P || Q) at the start of each iteration
  double perplexity = 0.0;
};

TsneResult tsne(kernels::ConstMatrix latents, const ProjectionConfig& config,
                kernels::Exec exec = kernels::default_exec());

/// Embeds every corpus segment (encoder mean) and projects, in corpus order.
std::vector<ProjectionPoint> tsne_project(const ModelParams& model, const Corpus& corpus,
                                          const ProjectionConfig& config,
                                          kernels::Exec exec = kernels::default_exec());

/// Mean silhouette per label over 2D Euclidean distances.
std::map<std::string, double> silhouette_by_label(const std::vector<ProjectionPoint>& points);

/// One colored circle per point, color keyed by game.
std::string projection_svg(const std::vector<ProjectionPoint>& points);

}  // namespace tilevae
