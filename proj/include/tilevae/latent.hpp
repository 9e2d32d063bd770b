#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tilevae/corpus.hpp"
#include "tilevae/model.hpp"
#include "tilevae/rng.hpp"

namespace tilevae {

enum class LatentOrigin { encoded, prior_sample, combined, evolved };

std::string_view to_string(LatentOrigin o);

struct LatentVector {
  std::vector<double> values;
  LatentOrigin origin = LatentOrigin::encoded;

  std::size_t size() const { return values.size(); }
};

/// Mean encoder code of every corpus segment of one game.
struct AttributeVector {
  std::string game;
  std::vector<double> values;
  std::size_t support_count = 0;
};

/// Real-valued blend weights per game; finite with at least one nonzero.
class BlendWeights {
 public:
  explicit BlendWeights(std::map<std::string, double> weights);

  const std::map<std::string, double>& weights() const { return weights_; }

 private:
  std::map<std::string, double> weights_;
};

/// Throws AlphabetMismatch when the fingerprint differs.
void check_alphabet(const ModelParams& model, const TileAlphabet& alphabet);

/// Canonical code: the encoder mean, never a sample.
LatentVector embed(const ModelParams& model, const Segment& seg, std::span<const double> label = {});

Segment decode_segment(const ModelParams& model, std::span<const double> z,
                       std::span<const double> label = {});

/// (1 - t) z1 + t z2, t in [0, 1].
LatentVector interpolate(std::span<const double> z1, std::span<const double> z2, double t);

/// steps + 1 decoded segments from embed(a) to embed(b).
std::vector<Segment> interpolation_chain(const ModelParams& model, const Segment& a, const Segment& b,
                                         int steps);

AttributeVector attribute_vector(const ModelParams& model, const Corpus& corpus, std::string_view game);

/// Attribute vectors for every game of the corpus, in corpus game order.
std::vector<AttributeVector> attribute_vectors(const ModelParams& model, const Corpus& corpus);

/// sum_g w_g * attr_g
LatentVector combine(const BlendWeights& weights, const std::vector<AttributeVector>& vectors);

LatentVector sample_prior(std::size_t latent_dim, Rng& rng);

/// softmax(-|z - attr_g| / temperature) over the given games, in their order.
std::vector<double> game_proportions(std::span<const double> z, const std::vector<AttributeVector>& vectors,
                                     double temperature = 1.0);

}  // namespace tilevae
