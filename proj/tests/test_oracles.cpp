// Library against the reference implementations in oracles.cpp.

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"
#include "tilevae/latent.hpp"

using namespace tilevae;
using namespace tilevae::testing;

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto check = oracle::gradient_trial(seed);
    CAPTURE(seed);
    CHECK(check.compared > 1000);
    CHECK(check.max_rel_error < 1e-4);
  }
}

TEST_CASE("gradients with beta 0 reduce to the reconstruction pathway") {
  for (std::uint64_t seed = 101; seed <= 105; ++seed) {
    const auto check = oracle::gradient_trial(seed, Variant::reconstruct, 0.0);
    CHECK(check.max_rel_error < 1e-4);
  }
}

TEST_CASE("label-conditional gradients match central differences") {
  for (std::uint64_t seed = 201; seed <= 205; ++seed) {
    const auto check = oracle::gradient_trial(seed, Variant::label_conditional, 0.5);
    CHECK(check.max_rel_error < 1e-4);
  }
}

TEST_CASE("oracle loss agrees with the library forward pass") {
  const auto& model = small_model();
  const auto data = make_training_set(toy_corpus(), Variant::reconstruct);
  std::vector<Example> batch{data.example(0), data.example(7), data.example(42)};
  std::vector<double> eps(batch.size() * model.dims.latent, 0.25);
  const auto lib = gradients_with_noise(model, batch, 1.0, {eps, batch.size(), model.dims.latent});
  CHECK(oracle::vae_loss(model, batch, 1.0, eps) == doctest::Approx(lib.loss.total).epsilon(1e-10));
}

TEST_CASE("BFS playability equals the exhaustive move closure on random 8x8 grids") {
  const auto cmp = oracle::compare_playability(2024, 200);
  CHECK(cmp.grids == 200);
  CHECK(cmp.disagreements == 0);
  CHECK(cmp.bad_paths == 0);
  // both outcomes occur, so the comparison is not vacuous
  CHECK(cmp.playable > 20);
  CHECK(cmp.playable < 180);
}

TEST_CASE("BFS playability equals the move closure on rectangular grids") {
  const auto cmp = oracle::compare_playability(77, 100, 6, 12);
  CHECK(cmp.disagreements == 0);
  CHECK(cmp.bad_paths == 0);
}

TEST_CASE("nonlinearity equals the brute-force least-squares residual") {
  const TileAlphabet a = TileAlphabet::unified();
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Segment s = random_segment(rng);
    const double want = oracle::least_squares_rms(oracle::surface_heights(s, a));
    REQUIRE(want >= 0.0);
    CHECK(nonlinearity(s, a) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("alternating surface nonlinearity matches the oracle value") {
  const TileAlphabet a = TileAlphabet::unified();
  Segment s = filled_segment(a.id_of("empty"));
  for (int c = 0; c < kSegmentSize; ++c) {
    const int h = c % 2 == 0 ? 2 : 10;
    for (int r = kSegmentSize - h; r < kSegmentSize; ++r) s.at(r, c) = a.id_of("solid");
  }
  const double want = oracle::least_squares_rms(oracle::surface_heights(s, a));
  // the constant-mean fit would give exactly 4; the fitted slope absorbs a little
  CHECK(want == doctest::Approx(3.97640097398).epsilon(1e-10));
  CHECK(nonlinearity(s, a) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("attribute vectors equal brute-force means of encoder outputs") {
  const auto& model = small_model();
  const auto& corpus = toy_corpus();
  const TileAlphabet& a = corpus.alphabet;
  for (const auto& game : corpus.game_names()) {
    std::vector<long double> sum(model.dims.latent, 0.0L);
    std::size_t count = 0;
    for (const auto& seg : corpus.segments) {
      if (seg.game != game) continue;
      const auto mu = oracle::encoder_mean(model, encode_one_hot(seg, a));
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += mu[k];
      ++count;
    }
    const auto attr = attribute_vector(model, corpus, game);
    CHECK(attr.support_count == count);
    for (std::size_t k = 0; k < sum.size(); ++k)
      CHECK(attr.values[k] == doctest::Approx(static_cast<double>(sum[k] / count)).epsilon(1e-9));
  }
}
