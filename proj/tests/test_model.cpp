#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "tilevae/error.hpp"

using namespace tilevae;
using namespace tilevae::testing;

namespace {

const TileAlphabet kUnified = TileAlphabet::unified();

ModelParams zero_weights(ModelParams p) {
  for (auto i : {kEncW1, kEncWMu, kEncWLogvar, kDecW1, kDecW2}) std::fill(p[i].values.begin(), p[i].values.end(), 0.0);
  return p;
}

void check_normalized(const std::vector<double>& probs, std::size_t channels) {
  for (std::size_t cell = 0; cell < probs.size() / channels; ++cell) {
    double s = 0.0;
    for (std::size_t k = 0; k < channels; ++k) s += probs[cell * channels + k];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("init_params shapes and determinism") {
  const auto dims = dims_for(kUnified, 512, 32, 0);
  CHECK(dims.input == 2560);
  const auto p = init_params(Variant::reconstruct, dims, 5);
  CHECK(p[kEncW1].rows == 2560);
  CHECK(p[kEncW1].cols == 512);
  CHECK(p[kEncWMu].rows == 512);
  CHECK(p[kEncWMu].cols == 32);
  CHECK(p[kDecW1].rows == 32);
  CHECK(p[kDecW2].cols == 2560);
  CHECK(p[kDecB2].values.size() == 2560);
  CHECK(p == init_params(Variant::reconstruct, dims, 5));
  CHECK_FALSE(p == init_params(Variant::reconstruct, dims, 6));

  const auto cond = init_params(Variant::label_conditional, dims_for(kUnified, 16, 4, 7), 1);
  CHECK(cond[kEncW1].rows == 2560 + 7);
  CHECK(cond[kDecW1].rows == 4 + 7);
  CHECK(code_of([] { init_params(Variant::label_conditional, dims_for(kUnified, 16, 4, 0), 1); }) == ErrorCode::BadDims);
  CHECK(code_of([] { init_params(Variant::reconstruct, dims_for(kUnified, 16, 1, 0), 1); }) == ErrorCode::BadDims);
}

TEST_CASE("zero weights: encoder returns biases, decoder is uniform") {
  auto p = zero_weights(init_params(Variant::reconstruct, dims_for(kUnified, 16, 4, 0), 3));
  Rng rng(1);
  for (auto i : {kEncBMu, kEncBLogvar})
    for (double& b : p[i].values) b = rng.uniform(-1, 1);
  const auto x = encode_one_hot(random_segment(rng), kUnified);
  const auto code = encode(p, x);
  CHECK(code.mu == p[kEncBMu].values);
  CHECK(code.logvar == p[kEncBLogvar].values);
  const auto probs = decode(p, std::vector<double>{1.0, -2.0, 3.0, 0.5});
  CHECK(probs.size() == 2560);
  for (double v : probs) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("decoder output is normalized for arbitrary z") {
  const auto& m = small_model();
  Rng rng(4);
  for (double scale : {0.0, 1.0, 10.0, 100.0}) {
    std::vector<double> z(m.dims.latent);
    for (double& v : z) v = scale * rng.normal();
    const auto probs = decode(m, z);
    for (double v : probs) CHECK(std::isfinite(v));
    check_normalized(probs, m.dims.channels);
  }
  std::vector<double> big(m.dims.latent, 0.0);
  big[0] = 100.0;  // |z| = 100
  check_normalized(decode(m, big), m.dims.channels);
}

TEST_CASE("reparameterize") {
  const std::vector<double> mu{1.0, -2.0}, lv{-1e9, -1e9};
  Rng rng(3);
  const auto z = reparameterize(mu, lv, rng);
  CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(z[1] == doctest::Approx(-2.0).epsilon(1e-4));
  Rng a(9), b(9);
  const std::vector<double> zero{0.0, 0.0};
  CHECK(reparameterize(mu, zero, a) == reparameterize(mu, zero, b));
}

TEST_CASE("loss examples") {
  std::vector<TileId> target(4, 1);
  std::vector<double> onehot(8, 0.0);
  for (int c = 0; c < 4; ++c) onehot[c * 2 + 1] = 1.0;
  const std::vector<double> z2{0.0, 0.0};
  auto l = loss(target, onehot, z2, z2, 1.0, 2);
  CHECK(l.kl == 0.0);
  CHECK(l.recon == 0.0);
  l = loss(target, onehot, std::vector<double>{1.0, 0.0}, z2, 1.0, 2);
  CHECK(l.kl == doctest::Approx(0.5));
  CHECK(l.total == doctest::Approx(0.5));
  l = loss(target, onehot, std::vector<double>{1.0, 0.0}, z2, 0.0, 2);
  CHECK(l.total == 0.0);
  std::vector<double> wrong(8, 0.0);
  for (int c = 0; c < 4; ++c) wrong[c * 2] = 1.0;
  l = loss(target, wrong, z2, z2, 1.0, 2);
  CHECK(l.recon == doctest::Approx(-4.0 * std::log(1e-12)));
  CHECK(code_of([&] { loss(target, std::vector<double>(7), z2, z2, 1.0, 2); }) == ErrorCode::BadShape);
}

TEST_CASE("KL term is non-negative for arbitrary codes") {
  Rng rng(6);
  std::vector<TileId> target(1, 0);
  const std::vector<double> probs{1.0, 0.0};
  for (int i = 0; i < 500; ++i) {
    std::vector<double> mu(3), lv(3);
    for (double& v : mu) v = rng.uniform(-5, 5);
    for (double& v : lv) v = rng.uniform(-40, 40);
    CHECK(loss(target, probs, mu, lv, 1.0, 2).kl >= 0.0);
  }
}

TEST_CASE("duplicate batch entries give the single-entry gradient") {
  const auto& m = small_model();
  const auto data = make_training_set(toy_corpus(), Variant::reconstruct);
  const std::vector<double> eps1{0.3, -0.2, 0.7, 0.1};
  std::vector<double> eps2 = eps1;
  eps2.insert(eps2.end(), eps1.begin(), eps1.end());
  const std::vector<Example> one{data.example(5)}, two{data.example(5), data.example(5)};
  const auto g1 = gradients_with_noise(m, one, 1.0, {eps1, 1, 4});
  const auto g2 = gradients_with_noise(m, two, 1.0, {eps2, 2, 4});
  CHECK(g2.loss.total == doctest::Approx(g1.loss.total).epsilon(1e-12));
  for (std::size_t t = 0; t < kTensorCount; ++t)
    for (std::size_t i = 0; i < g1.grads[t].values.size(); ++i)
      CHECK(g2.grads[t].values[i] == doctest::Approx(g1.grads[t].values[i]).epsilon(1e-9).scale(1e-12));
}

TEST_CASE("gradients are identical under serial and parallel execution") {
  const auto& m = small_model();
  const auto data = make_training_set(toy_corpus(), Variant::reconstruct);
  std::vector<Example> batch;
  for (std::size_t i = 0; i < 16; ++i) batch.push_back(data.example(i * 3));
  Rng a(2), b(2);
  const auto s = gradients(m, batch, 1.0, a, kernels::Exec::serial);
  const auto p = gradients(m, batch, 1.0, b, kernels::Exec::parallel);
  CHECK(s.grads == p.grads);
  CHECK(s.loss.total == p.loss.total);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.validate();
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& t) { t.epochs = 0; }, [](TrainConfig& t) { t.batch_size = 0; },
           [](TrainConfig& t) { t.learning_rate = 0.0; }, [](TrainConfig& t) { t.beta = -1.0; }}) {
    TrainConfig bad;
    mutate(bad);
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::BadConfig);
  }
  TrainConfig narrow;
  narrow.latent = 1;
  CHECK(code_of([&] { narrow.validate(); }) == ErrorCode::BadDims);
}

TEST_CASE("training reduces loss and is deterministic") {
  TrainConfig c = small_config();
  c.epochs = 6;
  std::vector<int> seen;
  const auto r1 = train(toy_corpus(), Variant::reconstruct, c, [&](int e, const EpochStats&) { seen.push_back(e); });
  const auto r2 = train(toy_corpus(), Variant::reconstruct, c);
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
  REQUIRE(r1.report.epochs.size() == 6);
  CHECK(r1.report.examples == 200);
  for (const auto& e : r1.report.epochs) {
    CHECK(std::isfinite(e.loss.total));
    CHECK(e.loss.kl >= 0.0);
  }
  CHECK(r1.report.epochs.back().loss.total < r1.report.epochs.front().loss.total);
  CHECK(r1.report.epochs.back().tile_accuracy >= r1.report.epochs.front().tile_accuracy);
  CHECK(r1.params == r2.params);
  CHECK(checkpoint_text(r1.params) == checkpoint_text(r2.params));
  const auto data = make_training_set(toy_corpus(), Variant::reconstruct);
  CHECK(tile_accuracy(r1.params, data) == r1.report.epochs.back().tile_accuracy);
}

TEST_CASE("training sets per variant") {
  const Corpus& c = toy_corpus();
  const auto rec = make_training_set(c, Variant::reconstruct);
  CHECK(rec.size() == c.segments.size());
  CHECK(rec.labels.empty());
  const auto next = make_training_set(c, Variant::next_segment);
  // stride 8: every window except the last two of each level has an offset+16 successor
  CHECK(next.size() == c.segments.size() - 2 * 4);
  const auto cond = make_training_set(c, Variant::label_conditional);
  CHECK(cond.labels[0].size() == LabelVector::width(2));


  // stride equal to the level extent leaves one window per level
  int extent = 0;
  for (const auto& g : bundled_levels().levels)
    extent = std::max(extent, g.progression == Progression::horizontal ? g.cols : g.rows);
  const Corpus lone = build_corpus(bundled_levels().levels, bundled_levels().games, c.alphabet, extent);
  CHECK(lone.segments.size() == bundled_levels().levels.size());
  CHECK(code_of([&] { make_training_set(lone, Variant::next_segment); }) == ErrorCode::NoSequentialPairs);
}

TEST_CASE("next-segment training set stride equal to extent") {
  // 16-wide windows at stride 24 never abut, so no successor exists
  const Corpus c = build_corpus(bundled_levels().levels, bundled_levels().games, TileAlphabet::unified(), 24);
  CHECK(code_of([&] { make_training_set(c, Variant::next_segment); }) == ErrorCode::NoSequentialPairs);
}

TEST_CASE("non-finite training fails with NonFinite") {
  TrainConfig c = small_config();
  c.learning_rate = 1e300;
  c.epochs = 3;
  CHECK(code_of([&] { train(toy_corpus(), Variant::reconstruct, c); }) == ErrorCode::NonFinite);
}

TEST_CASE("checkpoint round trip and failure modes") {
  ScratchDir dir("ckpt");
  const auto& m = small_model();
  save_checkpoint(m, dir / "m.ckpt");
  const auto back = load_checkpoint(dir / "m.ckpt", kUnified.fingerprint());
  CHECK(back == m);
  CHECK(checkpoint_text(back) == checkpoint_text(m));
  CHECK(code_of([&] { load_checkpoint(dir / "m.ckpt", kUnified.fingerprint() + 1); }) == ErrorCode::AlphabetMismatch);
  const std::string text = checkpoint_text(m);
  CHECK(code_of([&] { parse_checkpoint(text.substr(0, text.size() / 2)); }) == ErrorCode::CorruptFile);
  CHECK(code_of([&] { parse_checkpoint(""); }) == ErrorCode::CorruptFile);
  CHECK(code_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::Io);
  for (auto v : {Variant::next_segment, Variant::label_conditional}) {
    const auto& other = small_model(v);
    CHECK(parse_checkpoint(checkpoint_text(other)) == other);
  }
}

TEST_CASE("checkpoint version is checked") {
  const auto& m = small_model();
  ModelParams future = m;
  future.format_version = kCheckpointVersion + 1;
  CHECK(code_of([&] { parse_checkpoint(checkpoint_text(future)); }) == ErrorCode::VersionMismatch);
}
