#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "tilevae/viz.hpp"

using namespace tilevae;
using namespace tilevae::testing;

namespace {

std::vector<double> gaussian(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

void check_affinities(const Affinities& a) {
  const std::size_t n = a.n;
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(a.joint[i * n + i] == 0.0);
    CHECK(a.conditional[i * n + i] == 0.0);
    double row = 0.0, entropy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = a.conditional[i * n + j];
      CHECK(p >= 0.0);
      row += p;
      if (p > 0.0) entropy -= p * std::log(p);
      CHECK(a.joint[i * n + j] == a.joint[j * n + i]);
      CHECK(a.joint[i * n + j] >= 0.0);
      mass += a.joint[i * n + j];
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    // per-row perplexity, recomputed from the row itself
    CHECK(std::abs(entropy - std::log(a.perplexity)) < 1e-5);
    CHECK(a.entropy_error[i] < 1e-5);
  }
  CHECK(std::abs(mass - 1.0) < 1e-9);
}

ProjectionConfig quick(std::uint64_t seed = 1) {
  ProjectionConfig c;
  c.iterations = 400;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("projection config validation") {
  ProjectionConfig{}.validate();
  for (auto mutate : std::vector<std::function<void(ProjectionConfig&)>>{
           [](ProjectionConfig& c) { c.perplexity = 1.5; }, [](ProjectionConfig& c) { c.iterations = 0; },
           [](ProjectionConfig& c) { c.learning_rate = 0; }}) {
    ProjectionConfig c;
    mutate(c);
    CHECK(code_of([&] { c.validate(); }) == ErrorCode::BadConfig);
  }
}

TEST_CASE("affinities need four points") {
  const std::vector<double> two{0, 0, 1, 1};
  CHECK(code_of([&] { pairwise_affinities({two, 2, 2}, 30); }) == ErrorCode::TooFewPoints);
  const std::vector<double> nan{0, 0, 1, 1, 2, 2, NAN, 3};
  CHECK(code_of([&] { pairwise_affinities({nan, 4, 2}, 30); }) == ErrorCode::NonFinite);
}

TEST_CASE("regular simplex gives uniform joint affinities of 1/12") {
  const std::vector<double> simplex{1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1};
  const auto a = pairwise_affinities({simplex, 4, 3}, 30);
  CHECK(a.perplexity == 1.0);  // clamped to (n - 1) / 3
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(a.joint[i * 4 + j] == doctest::Approx(i == j ? 0.0 : 1.0 / 12));
}

TEST_CASE("affinities: symmetry, mass and perplexity on 50 random inputs") {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + rng.index(60), d = 2 + rng.index(6);
    const auto x = gaussian(rng, n * d, 0.5 + 3 * rng.uniform());
    const double perp = 2.0 + 30 * rng.uniform();
    const auto a = pairwise_affinities({x, n, d}, perp);
    CHECK(a.perplexity == std::min(perp, (n - 1) / 3.0));
    check_affinities(a);
  }
}

TEST_CASE("affinities are identical under serial and parallel execution") {
  Rng rng(4);
  const auto x = gaussian(rng, 80 * 5);
  const auto s = pairwise_affinities({x, 80, 5}, 20, kernels::Exec::serial);
  const auto p = pairwise_affinities({x, 80, 5}, 20, kernels::Exec::parallel);
  CHECK(s.joint == p.joint);
  CHECK(s.conditional == p.conditional);
}

TEST_CASE("affinities depend only on pairwise distances") {
  // dyadic coordinates and an integer shift keep every difference exact
  Rng rng(6);
  std::vector<double> x(40 * 4);
  for (double& v : x) v = static_cast<double>(static_cast<int>(rng.index(4096)) - 2048) / 1024.0;
  std::vector<double> shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += static_cast<double>(3 + i % 4);
  const auto a = pairwise_affinities({x, 40, 4}, 10);
  const auto b = pairwise_affinities({shifted, 40, 4}, 10);
  CHECK(a.joint == b.joint);
}

TEST_CASE("duplicate points are resolved by jitter") {
  Rng rng(2);
  auto x = gaussian(rng, 30 * 3);
  for (std::size_t k = 0; k < 3; ++k) x[3 + k] = x[k];  // point 1 duplicates point 0
  const auto a = pairwise_affinities({x, 30, 3}, 5);
  check_affinities(a);
  const std::vector<double> same(20 * 2, 1.5);  // all points identical: uniform rows
  const auto u = pairwise_affinities({same, 20, 2}, 5);
  CHECK(u.joint[1] == doctest::Approx(1.0 / (20 * 19)));
}

TEST_CASE("t-SNE: centred, finite, deterministic, KL decreasing after exaggeration") {
  Rng rng(8);
  const std::size_t n = 60, d = 6;
  auto x = gaussian(rng, n * d);
  for (std::size_t i = 0; i < n / 2; ++i) x[i * d] += 8.0;
  ProjectionConfig cfg;
  cfg.seed = 3;
  const auto r = tsne({x, n, d}, cfg);
  CHECK(r.coords.size() == n * 2);
  CHECK(r.kl.size() == 1000);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::isfinite(r.coords[2 * i]));
    mx += r.coords[2 * i] / n;
    my += r.coords[2 * i + 1] / n;
  }
  CHECK(std::abs(mx) < 1e-6);
  CHECK(std::abs(my) < 1e-6);
  const double tail = std::accumulate(r.kl.end() - 100, r.kl.end(), 0.0) / 100;
  CHECK(tail < r.kl[250]);
  const auto again = tsne({x, n, d}, cfg);
  CHECK(again.coords == r.coords);
  const auto par = tsne({x, n, d}, cfg, kernels::Exec::serial);
  CHECK(par.coords == r.coords);
  cfg.seed = 4;
  CHECK(tsne({x, n, d}, cfg).coords != r.coords);
}

TEST_CASE("two well separated clusters have silhouette above 0.5") {
  Rng rng(12);
  const std::size_t per = 40, d = 8;
  std::vector<double> x;
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t k = 0; k < d; ++k) x.push_back(rng.normal() + (k == 0 && c == 1 ? 20.0 : 0.0));
  const auto r = tsne({x, 2 * per, d}, quick(5));
  std::vector<ProjectionPoint> pts;
  for (std::size_t i = 0; i < 2 * per; ++i)
    pts.push_back({"p" + std::to_string(i), r.coords[2 * i], r.coords[2 * i + 1], i < per ? "a" : "b"});
  const auto sil = silhouette_by_label(pts);
  REQUIRE(sil.size() == 2);
  CHECK(sil.at("a") > 0.5);
  CHECK(sil.at("b") > 0.5);
}

TEST_CASE("silhouette of a hand-made configuration") {
  // a at x = 0, 1; b at x = 10, 11
  const std::vector<ProjectionPoint> pts{{"1", 0, 0, "a"}, {"2", 1, 0, "a"}, {"3", 10, 0, "b"}, {"4", 11, 0, "b"}};
  const auto s = silhouette_by_label(pts);
  // point 1: a = 1, b = 10.5 -> 1 - 1/10.5; point 2: a = 1, b = 9.5 -> 1 - 1/9.5
  CHECK(s.at("a") == doctest::Approx(0.5 * ((1 - 1 / 10.5) + (1 - 1 / 9.5))));
  CHECK(s.at("b") == doctest::Approx(s.at("a")));
}

TEST_CASE("tsne_project over a corpus") {
  const auto& m = small_model();
  const Corpus& c = toy_corpus();
  const auto pts = tsne_project(m, c, quick());
  REQUIRE(pts.size() == c.segments.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].segment_id == c.segments[i].id);
    CHECK(pts[i].game == c.segments[i].game);
    CHECK(std::isfinite(pts[i].x));
  }
  const auto again = tsne_project(m, c, quick());
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(pts[i].x == again[i].x);
  const std::string svg = projection_svg(pts);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(svg.begin(), svg.end(), '\n')) >= pts.size());
  const auto cond = tsne_project(small_model(Variant::label_conditional), c, quick());
  CHECK(cond.size() == c.segments.size());
  Corpus none;
  CHECK(code_of([&] { tsne_project(m, none, quick()); }) == ErrorCode::EmptyCorpus);
}
