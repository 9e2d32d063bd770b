#include "tilevae/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tilevae/error.hpp"

namespace tilevae {

std::string_view to_string(TermMode m) {
  switch (m) {
    case TermMode::target: return "target";
    case TermMode::minimize: return "minimize";
    case TermMode::maximize: return "maximize";
    case TermMode::avoid: return "avoid";
  }
  return "?";
}

TermMode parse_term_mode(std::string_view s) {
  if (s == "target") return TermMode::target;
  if (s == "minimize") return TermMode::minimize;
  if (s == "maximize") return TermMode::maximize;
  if (s == "avoid") return TermMode::avoid;
  fail(ErrorCode::BadObjective, "unknown term mode '" + std::string(s) + "'");
}

Condition parse_condition(std::string_view s) {
  if (s == "similar") return Condition::similar;
  if (s == "dissimilar") return Condition::dissimilar;
  fail(ErrorCode::BadConfig, "condition must be similar or dissimilar");
}

void ObjectiveSpec::validate() const {
  if (terms.empty() && !proportion && !(playability_weight > 0.0))
    fail(ErrorCode::BadObjective, "objective needs a term, a proportion target or a playability weight");
  if (!(playability_weight >= 0.0)) fail(ErrorCode::BadObjective, "playability weight must be >= 0");
  for (const auto& t : terms) {
    t.metric.validate();
    if (!(t.weight > 0.0)) fail(ErrorCode::BadObjective, "term weights must be > 0");
  }
  if (proportion) {
    if (proportion->attributes.size() < 2 || proportion->attributes.size() != proportion->target.size())
      fail(ErrorCode::BadObjective, "proportion target needs one entry per attribute vector (>= 2)");
    double sum = 0.0;
    for (double v : proportion->target) {
      if (!(v >= 0.0)) fail(ErrorCode::BadObjective, "proportion target entries must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::BadObjective, "proportion target must sum to 1");
  }
  playability.validate();
}

void ESConfig::validate() const {
  if (population < 1 || parents < 1 || parents > population)
    fail(ErrorCode::BadConfig, "need 1 <= parents <= population");
  if (!(mutation_sigma > 0.0) || !(init_sigma > 0.0)) fail(ErrorCode::BadConfig, "sigmas must be > 0");
  if (generations < 0) fail(ErrorCode::BadConfig, "generations must be >= 0");
}

namespace {

double score_segment(const ObjectiveSpec& obj, const ModelParams& model, const TileAlphabet& alphabet,
                     const Segment& seg, std::span<const double> z) {
  double f = 0.0;
  for (const auto& term : obj.terms) {
    const double v = evaluate(term.metric, seg, alphabet, &model);
    switch (term.mode) {
      case TermMode::target: f += term.weight * std::abs(term.target - v); break;
      case TermMode::minimize: f += term.weight * v; break;
      case TermMode::maximize: f -= term.weight * v; break;
      case TermMode::avoid: f -= term.weight * std::abs(term.target - v); break;
    }
  }
  if (obj.playability_weight > 0.0 && !playable(seg, alphabet, obj.playability).playable)
    f += obj.playability_weight;
  if (obj.proportion) {
    const auto& pt = *obj.proportion;
    const auto props = game_proportions(z, pt.attributes, pt.temperature);
    double l1 = 0.0;
    for (std::size_t g = 0; g < props.size(); ++g) l1 += std::abs(props[g] - pt.target[g]);
    f += pt.weight * l1;
  }
  if (!std::isfinite(f)) fail(ErrorCode::NonFinite, "fitness is not finite");
  return f;
}

}  // namespace

double fitness(const ObjectiveSpec& objective, const ModelParams& model, const TileAlphabet& alphabet,
               std::span<const double> z) {
  objective.validate();
  const Segment seg = decode_segment(model, z);
  return score_segment(objective, model, alphabet, seg, z);
}

BatchFitness objective_evaluator(const ObjectiveSpec& objective, const ModelParams& model,
                                 const TileAlphabet& alphabet, kernels::Exec exec) {
  objective.validate();
  return [&objective, &model, &alphabet, exec](kernels::ConstMatrix zs) {
    const auto probs = decode_batch(model, zs, {}, exec);
    const std::size_t width = model.dims.input;
    std::vector<double> out(zs.rows);
    const long n = static_cast<long>(zs.rows);
    auto score = [&](long i) {
      const auto seg = decode_argmax(std::span(probs).subspan(static_cast<std::size_t>(i) * width, width),
                                     model.dims.channels);
      out[static_cast<std::size_t>(i)] = score_segment(objective, model, alphabet, seg, zs.row(i));
    };
    if (exec == kernels::Exec::serial) {
      for (long i = 0; i < n; ++i) score(i);
    } else {
      // exceptions cannot cross the parallel region; rethrow the first afterwards
      std::exception_ptr first;
#pragma omp parallel for schedule(dynamic)
      for (long i = 0; i < n; ++i) {
        try {
          score(i);
        } catch (...) {
#pragma omp critical
          if (!first) first = std::current_exception();
        }
      }
      if (first) std::rethrow_exception(first);
    }
    return out;
  };
}

SearchResult evolve(std::size_t latent_dim, const BatchFitness& evaluate_batch, const ESConfig& config,
                    const CandidateObserver& observer) {
  config.validate();
  if (config.init_center && config.init_center->size() != latent_dim)
    fail(ErrorCode::BadShape, "init center has wrong length");
  Rng rng(config.seed);
  const std::size_t lambda = static_cast<std::size_t>(config.population);
  const std::size_t mu = static_cast<std::size_t>(config.parents);

  struct Candidate {
    std::vector<double> z;
    double fitness;
    int generation;
    long index;  // insertion order
  };
  long next_index = 0;
  SearchResult result;

  int generation = 0;
  auto run_batch = [&](std::vector<double>& zs) {
    auto f = evaluate_batch({zs, lambda, latent_dim});
    if (f.size() != lambda) fail(ErrorCode::BadShape, "fitness batch returned wrong count");
    std::vector<Candidate> out;
    out.reserve(lambda);
    for (std::size_t i = 0; i < lambda; ++i) {
      if (!std::isfinite(f[i])) fail(ErrorCode::NonFinite, "fitness is not finite");
      std::vector<double> z(zs.begin() + static_cast<long>(i * latent_dim),
                            zs.begin() + static_cast<long>((i + 1) * latent_dim));
      if (observer) observer(z, f[i]);
      out.push_back({std::move(z), f[i], generation, next_index++});
    }
    result.evaluations += static_cast<long>(lambda);
    return out;
  };
  // Equal fitness: offspring displace their elders, so the population can
  // drift across plateaus; within a generation the lower index wins.
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    if (a.generation != b.generation) return a.generation > b.generation;
    return a.index < b.index;
  };

  std::vector<double> zs(lambda * latent_dim);
  for (std::size_t i = 0; i < lambda; ++i)
    for (std::size_t k = 0; k < latent_dim; ++k)
      zs[i * latent_dim + k] =
          config.init_center ? (*config.init_center)[k] + config.init_sigma * rng.normal() : rng.normal();
  std::vector<Candidate> pool = run_batch(zs);
  std::sort(pool.begin(), pool.end(), better);
  pool.resize(std::min(mu, pool.size()));
  result.history.push_back(pool.front().fitness);

  for (int gen = 0; gen < config.generations; ++gen) {
    generation = gen + 1;
    for (std::size_t i = 0; i < lambda; ++i) {
      const auto& parent = pool[rng.index(pool.size())];
      for (std::size_t k = 0; k < latent_dim; ++k)
        zs[i * latent_dim + k] = parent.z[k] + config.mutation_sigma * rng.normal();
    }
    auto offspring = run_batch(zs);
    pool.insert(pool.end(), std::make_move_iterator(offspring.begin()), std::make_move_iterator(offspring.end()));
    std::sort(pool.begin(), pool.end(), better);
    pool.resize(mu);
    result.history.push_back(pool.front().fitness);
  }
  result.best_z = {pool.front().z, LatentOrigin::evolved};
  result.best_fitness = pool.front().fitness;
  return result;
}

SearchResult evolve(const ModelParams& model, const TileAlphabet& alphabet, const ObjectiveSpec& objective,
                    const ESConfig& config, kernels::Exec exec) {
  check_alphabet(model, alphabet);
  return evolve(model.dims.latent, objective_evaluator(objective, model, alphabet, exec), config);
}

ObjectiveSpec level_search_objective(const ModelParams& model, const TileAlphabet& alphabet, const Segment& input,
                                     const MetricSpec& metric, Condition condition) {
  ObjectiveTerm term;
  if (metric.is_distance()) {
    // distance kinds are always measured against the input itself
    term.metric = metric.kind == MetricKind::histogram_distance ? MetricSpec::histogram_to(input)
                                                                : MetricSpec::latent_to(embed(model, input).values);
    term.mode = condition == Condition::similar ? TermMode::minimize : TermMode::maximize;
  } else {
    term.metric = metric;
    term.mode = condition == Condition::similar ? TermMode::target : TermMode::avoid;
    term.target = evaluate(metric, input, alphabet, &model);
  }
  ObjectiveSpec obj;
  obj.playability_weight = 1.0;
  obj.terms.push_back(std::move(term));
  return obj;
}

Segment search_level(const ModelParams& model, const TileAlphabet& alphabet, const Segment& input,
                     const MetricSpec& metric, Condition condition, const ESConfig& config) {
  check_alphabet(model, alphabet);
  if (!metric.is_distance()) metric.validate();  // distance references are always the input
  const ObjectiveSpec obj = level_search_objective(model, alphabet, input, metric, condition);
  const BatchFitness eval = objective_evaluator(obj, model, alphabet);

  struct Seen {
    std::vector<double> z;
    double fitness;
    long order;
  };
  std::vector<Seen> seen;
  auto observer = [&](std::span<const double> z, double f) {
    seen.push_back({std::vector<double>(z.begin(), z.end()), f, static_cast<long>(seen.size())});
  };

  constexpr int kRestarts = 5;
  for (int attempt = 0; attempt <= kRestarts; ++attempt) {
    ESConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL;
    const auto res = evolve(model.dims.latent, eval, cfg, observer);
    Segment out = decode_segment(model, res.best_z.values);
    if (!out.same_cells(input)) return out;
  }
  std::sort(seen.begin(), seen.end(), [](const Seen& a, const Seen& b) {
    return a.fitness != b.fitness ? a.fitness < b.fitness : a.order < b.order;
  });
  for (const auto& s : seen) {
    Segment out = decode_segment(model, s.z);
    if (!out.same_cells(input)) return out;
  }
  fail(ErrorCode::DegenerateSearch, "every candidate decoded to the input segment");
}

}  // namespace tilevae
