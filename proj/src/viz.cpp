#include "tilevae/viz.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "tilevae/error.hpp"
#include "tilevae/latent.hpp"
#include "tilevae/rng.hpp"

namespace tilevae {

void ProjectionConfig::validate() const {
  if (!(perplexity >= 2.0)) fail(ErrorCode::BadConfig, "perplexity must be >= 2");
  if (iterations < 1) fail(ErrorCode::BadConfig, "iterations must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::BadConfig, "learning rate must be > 0");
  if (!(early_exaggeration >= 1.0) || exaggeration_iterations < 0 || momentum_switch < 0)
    fail(ErrorCode::BadConfig, "bad exaggeration or momentum schedule");
}

namespace {

constexpr double kEntropyTolerance = 1e-5;
// the search aims well inside the tolerance so independent recomputation agrees
constexpr double kEntropyTarget = 1e-10;
constexpr int kBisectionSteps = 50;

struct RowFit {
  double error = 0.0;  // |H - target|
  bool flat = false;   // all neighbours equidistant: every bandwidth gives the uniform row
};

// Fills row i of `cond`.
RowFit match_row(const double* dist, std::size_t n, std::size_t i, double target, double* cond) {
  double dmin = INFINITY, dmax = -INFINITY;
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) {
      dmin = std::min(dmin, dist[j]);
      dmax = std::max(dmax, dist[j]);
    }
  double lo = -50.0, hi = 50.0;
  double err = INFINITY;
  for (int step = 0; step < kBisectionSteps; ++step) {
    const double log_beta = 0.5 * (lo + hi);
    const double beta = std::exp(log_beta);
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        cond[j] = 0.0;
        continue;
      }
      const double d = dist[j] - dmin;
      const double w = std::exp(-beta * d);
      cond[j] = w;
      sum += w;
      weighted += w * d;
    }
    const double entropy = std::log(sum) + beta * weighted / sum;
    for (std::size_t j = 0; j < n; ++j) cond[j] /= sum;
    err = std::abs(entropy - target);
    if (err < kEntropyTarget) break;
    if (entropy > target) lo = log_beta;
    else hi = log_beta;
  }
  return {err, dmax == dmin};
}

bool fill_conditional(kernels::ConstMatrix x, double perplexity, kernels::Exec exec, Affinities& out) {
  const std::size_t n = x.rows;
  std::vector<double> dist(n * n);
  kernels::pairwise_sq_dists(exec, x, {dist, n, n});
  const double target = std::log(perplexity);
  out.conditional.assign(n * n, 0.0);
  out.entropy_error.assign(n, 0.0);
  std::vector<char> ok(n, 0);
  const long rows = static_cast<long>(n);
  auto fit = [&](long i) {
    const RowFit f = match_row(&dist[i * n], n, i, target, &out.conditional[i * n]);
    out.entropy_error[i] = f.error;
    ok[i] = f.flat || f.error < kEntropyTolerance;
  };
  if (exec == kernels::Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) fit(i);
  } else {
    for (long i = 0; i < rows; ++i) fit(i);
  }
  return std::all_of(ok.begin(), ok.end(), [](char v) { return v != 0; });
}

}  // namespace

Affinities pairwise_affinities(kernels::ConstMatrix latents, double perplexity, kernels::Exec exec) {
  const std::size_t n = latents.rows;
  if (n < 4) fail(ErrorCode::TooFewPoints, "projection needs at least 4 points");
  for (double v : latents.data)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "latent input is not finite");
  Affinities out;
  out.n = n;
  out.perplexity = std::min(perplexity, (n - 1) / 3.0);
  if (!fill_conditional(latents, out.perplexity, exec, out)) {
    std::vector<double> jittered(latents.data.begin(), latents.data.end());
    Rng rng(0x6a09e667f3bcc909ULL);
    for (double& v : jittered) v += 1e-10 * rng.normal();
    if (!fill_conditional({jittered, n, latents.cols}, out.perplexity, exec, out))
      fail(ErrorCode::DegenerateInput, "perplexity cannot be matched for duplicate points");
  }
  out.joint.assign(n * n, 0.0);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out.joint[i * n + j] = (out.conditional[i * n + j] + out.conditional[j * n + i]) * scale;
  return out;
}

TsneResult tsne(kernels::ConstMatrix latents, const ProjectionConfig& config, kernels::Exec exec) {
  config.validate();
  const Affinities aff = pairwise_affinities(latents, config.perplexity, exec);
  const std::size_t n = aff.n;
  const kernels::ConstMatrix p{aff.joint, n, n};

  TsneResult res;
  res.perplexity = aff.perplexity;
  res.coords.resize(n * 2);
  Rng rng(config.seed);
  for (double& v : res.coords) v = 1e-4 * rng.normal();

  std::vector<double> num(n * n), grad(n * 2), update(n * 2, 0.0), gains(n * 2, 1.0);
  res.kl.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    const kernels::ConstMatrix y{res.coords, n, 2};
    const double z = kernels::student_t_kernel(exec, y, {num, n, n});

    double kl = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) {
      const double pk = aff.joint[k];
      if (pk > 0.0) kl += pk * std::log(pk / std::max(num[k] / z, 1e-300));
    }
    res.kl.push_back(kl);

    const double exag = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    kernels::tsne_gradient(exec, p, {num, n, n}, z, exag, y, {grad, n, 2});

    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    for (std::size_t k = 0; k < n * 2; ++k) {
      const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
      gains[k] = same_sign ? std::max(gains[k] * 0.8, 0.01) : gains[k] + 0.2;
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      res.coords[k] += update[k];
    }
    for (int axis = 0; axis < 2; ++axis) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += res.coords[i * 2 + axis];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) res.coords[i * 2 + axis] -= mean;
    }
  }
  for (double v : res.coords)
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "projection diverged");
  return res;
}

std::vector<ProjectionPoint> tsne_project(const ModelParams& model, const Corpus& corpus,
                                          const ProjectionConfig& config, kernels::Exec exec) {
  if (corpus.segments.empty()) fail(ErrorCode::EmptyCorpus, "corpus has no segments");
  check_alphabet(model, corpus.alphabet);
  const std::size_t n = corpus.segments.size();
  const std::size_t d = model.dims.latent;
  std::vector<double> latents(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const Segment& seg = corpus.segments[i];
    std::vector<double> label;
    if (model.variant == Variant::label_conditional) {
      auto it = corpus.labels.find(seg.id);
      if (it != corpus.labels.end()) label = it->second.flat();
    }
    const auto z = embed(model, seg, label);
    std::copy(z.values.begin(), z.values.end(), latents.begin() + static_cast<long>(i * d));
  }
  const auto res = tsne({latents, n, d}, config, exec);
  std::vector<ProjectionPoint> points(n);
  for (std::size_t i = 0; i < n; ++i)
    points[i] = {corpus.segments[i].id, res.coords[i * 2], res.coords[i * 2 + 1], corpus.segments[i].game};
  return points;
}

std::map<std::string, double> silhouette_by_label(const std::vector<ProjectionPoint>& points) {
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < points.size(); ++i) members[points[i].game].push_back(i);
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(points[a].x - points[b].x, points[a].y - points[b].y);
  };
  std::map<std::string, double> out;
  if (members.size() < 2) {
    for (const auto& [label, idx] : members) out[label] = 0.0;
    return out;
  }
  for (const auto& [label, idx] : members) {
    double total = 0.0;
    for (std::size_t i : idx) {
      if (idx.size() < 2) continue;
      double a = 0.0;
      for (std::size_t j : idx)
        if (j != i) a += dist(i, j);
      a /= static_cast<double>(idx.size() - 1);
      double b = INFINITY;
      for (const auto& [other, oidx] : members) {
        if (other == label) continue;
        double m = 0.0;
        for (std::size_t j : oidx) m += dist(i, j);
        b = std::min(b, m / static_cast<double>(oidx.size()));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    out[label] = total / static_cast<double>(idx.size());
  }
  return out;
}

std::string projection_svg(const std::vector<ProjectionPoint>& points) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  constexpr double size = 512.0, margin = 16.0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  std::map<std::string, const char*> colors;
  for (const auto& p : points)
    if (!colors.count(p.game)) colors[p.game] = kPalette[colors.size() % std::size(kPalette)];

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& p : points) {
    const double cx = margin + (p.x - xmin) / span * (size - 2 * margin);
    const double cy = size - margin - (p.y - ymin) / span * (size - 2 * margin);
    svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3\" fill=\"" << colors[p.game]
        << "\"><title>" << p.segment_id << ' ' << p.game << "</title></circle>\n";
  }
  double ly = 20.0;
  for (const auto& [game, color] : colors) {
    svg << "<text x=\"10\" y=\"" << ly << "\" fill=\"" << color << "\" font-family=\"monospace\">" << game
        << "</text>\n";
    ly += 16.0;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tilevae
