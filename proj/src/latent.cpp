#include "tilevae/latent.hpp"

#include <algorithm>
#include <cmath>

#include "tilevae/error.hpp"

namespace tilevae {

std::string_view to_string(LatentOrigin o) {
  switch (o) {
    case LatentOrigin::encoded: return "encoded";
    case LatentOrigin::prior_sample: return "prior_sample";
    case LatentOrigin::combined: return "combined";
    case LatentOrigin::evolved: return "evolved";
  }
  return "?";
}

BlendWeights::BlendWeights(std::map<std::string, double> weights) : weights_(std::move(weights)) {
  bool any = false;
  for (const auto& [game, w] : weights_) {
    if (!std::isfinite(w)) fail(ErrorCode::BadWeights, "weight for '" + game + "' is not finite");
    any = any || w != 0.0;
  }
  if (!any) fail(ErrorCode::BadWeights, "blend weights need at least one nonzero entry");
}

void check_alphabet(const ModelParams& model, const TileAlphabet& alphabet) {
  if (model.alphabet_fingerprint != alphabet.fingerprint() || model.dims.channels != alphabet.size())
    fail(ErrorCode::AlphabetMismatch, "model was trained on a different tile alphabet");
}

LatentVector embed(const ModelParams& model, const Segment& seg, std::span<const double> label) {
  const std::size_t ch = model.dims.channels;
  if (model.dims.cells() != kSegmentCells) fail(ErrorCode::BadShape, "model is not a 16x16 segment model");
  std::vector<double> x(model.dims.input, 0.0);
  for (std::size_t cell = 0; cell < kSegmentCells; ++cell) {
    if (seg.cells[cell] >= ch) fail(ErrorCode::AlphabetMismatch, "segment tile id outside model alphabet");
    x[cell * ch + seg.cells[cell]] = 1.0;
  }
  return {encode(model, x, label).mu, LatentOrigin::encoded};
}

Segment decode_segment(const ModelParams& model, std::span<const double> z, std::span<const double> label) {
  return decode_argmax(decode(model, z, label), model.dims.channels);
}

LatentVector interpolate(std::span<const double> z1, std::span<const double> z2, double t) {
  if (z1.size() != z2.size()) fail(ErrorCode::BadShape, "interpolation endpoints differ in length");
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::OutOfRange, "interpolation t must lie in [0, 1]");
  LatentVector out{std::vector<double>(z1.size()), LatentOrigin::combined};
  if (t == 0.0) {
    out.values.assign(z1.begin(), z1.end());
  } else if (t == 1.0) {
    out.values.assign(z2.begin(), z2.end());
  } else {
    for (std::size_t k = 0; k < z1.size(); ++k) out.values[k] = (1.0 - t) * z1[k] + t * z2[k];
  }
  return out;
}

std::vector<Segment> interpolation_chain(const ModelParams& model, const Segment& a, const Segment& b, int steps) {
  if (steps < 1) fail(ErrorCode::OutOfRange, "steps must be >= 1");
  const auto za = embed(model, a);
  const auto zb = embed(model, b);
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    out.push_back(decode_segment(model, interpolate(za.values, zb.values, t).values));
  }
  return out;
}

AttributeVector attribute_vector(const ModelParams& model, const Corpus& corpus, std::string_view game) {
  const auto segs = corpus.segments_of(game);
  if (segs.empty()) fail(ErrorCode::UnknownGame, "corpus has no segments of game '" + std::string(game) + "'");
  // Sum in id order so the mean does not depend on corpus ordering.
  std::vector<const Segment*> sorted(segs);
  std::sort(sorted.begin(), sorted.end(), [](const Segment* x, const Segment* y) { return x->id < y->id; });
  AttributeVector attr;
  attr.game = std::string(game);
  attr.values.assign(model.dims.latent, 0.0);
  for (const Segment* s : sorted) {
    std::vector<double> label;
    if (model.variant == Variant::label_conditional) label = corpus.labels.at(s->id).flat();
    const auto z = embed(model, *s, label);
    for (std::size_t k = 0; k < z.size(); ++k) attr.values[k] += z.values[k];
  }
  for (double& v : attr.values) v /= static_cast<double>(sorted.size());
  attr.support_count = sorted.size();
  return attr;
}

std::vector<AttributeVector> attribute_vectors(const ModelParams& model, const Corpus& corpus) {
  std::vector<AttributeVector> out;
  for (const auto& g : corpus.games) out.push_back(attribute_vector(model, corpus, g.name));
  return out;
}

namespace {
const AttributeVector& find_attr(const std::vector<AttributeVector>& vectors, const std::string& game) {
  for (const auto& v : vectors)
    if (v.game == game) return v;
  fail(ErrorCode::MissingAttribute, "no attribute vector for game '" + game + "'");
}
}  // namespace

LatentVector combine(const BlendWeights& weights, const std::vector<AttributeVector>& vectors) {
  LatentVector out;
  out.origin = LatentOrigin::combined;
  for (const auto& [game, w] : weights.weights()) {
    const auto& attr = find_attr(vectors, game);
    if (out.values.empty()) out.values.assign(attr.values.size(), 0.0);
    if (attr.values.size() != out.values.size()) fail(ErrorCode::BadShape, "attribute vectors differ in length");
    for (std::size_t k = 0; k < attr.values.size(); ++k) out.values[k] += w * attr.values[k];
  }
  return out;
}

LatentVector sample_prior(std::size_t latent_dim, Rng& rng) {
  LatentVector out{std::vector<double>(latent_dim), LatentOrigin::prior_sample};
  for (double& v : out.values) v = rng.normal();
  return out;
}

std::vector<double> game_proportions(std::span<const double> z, const std::vector<AttributeVector>& vectors,
                                     double temperature) {
  if (vectors.size() < 2) fail(ErrorCode::MissingAttribute, "game proportions need at least two games");
  if (!(temperature > 0.0)) fail(ErrorCode::OutOfRange, "temperature must be > 0");
  std::vector<double> logits(vectors.size());
  for (std::size_t g = 0; g < vectors.size(); ++g) {
    if (vectors[g].values.size() != z.size()) fail(ErrorCode::BadShape, "attribute vector length mismatch");
    double d2 = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double d = z[k] - vectors[g].values[k];
      d2 += d * d;
    }
    logits[g] = -std::sqrt(d2) / temperature;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

}  // namespace tilevae
