#include "tilevae/model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>

#include "tilevae/error.hpp"

namespace tilevae {

const std::array<const char*, kTensorCount> kTensorNames = {
    "enc_w1", "enc_b1", "enc_w_mu", "enc_b_mu", "enc_w_logvar",
    "enc_b_logvar", "dec_w1", "dec_b1", "dec_w2", "dec_b2"};

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::reconstruct: return "reconstruct";
    case Variant::next_segment: return "next_segment";
    case Variant::label_conditional: return "label_conditional";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "reconstruct") return Variant::reconstruct;
  if (s == "next_segment") return Variant::next_segment;
  if (s == "label_conditional") return Variant::label_conditional;
  fail(ErrorCode::BadConfig, "unknown variant '" + std::string(s) + "'");
}

TensorSet zeros_like(const TensorSet& t) {
  TensorSet z;
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    z[i].rows = t[i].rows;
    z[i].cols = t[i].cols;
    z[i].values.assign(t[i].values.size(), 0.0);
  }
  return z;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::BadConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::BadConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::BadConfig, "learning_rate must be > 0");
  if (!(beta >= 0.0)) fail(ErrorCode::BadConfig, "beta must be >= 0");
  if (latent < 2 || hidden < 1) fail(ErrorCode::BadDims, "need hidden >= 1 and latent >= 2");
}

ModelDims dims_for(const TileAlphabet& alphabet, std::size_t hidden, std::size_t latent,
                   std::size_t label) {
  return {kSegmentCells * alphabet.size(), hidden, latent, label, alphabet.size()};
}

namespace {

double clamp_logvar(double lv) { return std::clamp(lv, kLogvarMin, kLogvarMax); }

void check_dims(Variant variant, const ModelDims& d) {
  if (d.input == 0 || d.hidden == 0 || d.channels == 0 || d.input % d.channels != 0)
    fail(ErrorCode::BadDims, "input must be a positive multiple of channels and hidden >= 1");
  if (d.latent < 2) fail(ErrorCode::BadDims, "latent dim must be >= 2");
  if (variant == Variant::label_conditional && d.label == 0)
    fail(ErrorCode::BadDims, "label_conditional needs label dim > 0");
  if (variant != Variant::label_conditional && d.label != 0)
    fail(ErrorCode::BadDims, "label dim must be 0 unless label_conditional");
}

std::array<std::pair<std::size_t, std::size_t>, kTensorCount> shapes(const ModelDims& d) {
  return {{{d.input + d.label, d.hidden},
           {1, d.hidden},
           {d.hidden, d.latent},
           {1, d.latent},
           {d.hidden, d.latent},
           {1, d.latent},
           {d.latent + d.label, d.hidden},
           {1, d.hidden},
           {d.hidden, d.input},
           {1, d.input}}};
}

void check_label(const ModelParams& p, std::span<const double> label) {
  if (label.size() != p.dims.label)
    fail(ErrorCode::BadShape, "label length " + std::to_string(label.size()) + ", model expects " +
                                  std::to_string(p.dims.label));
}

// Per-cell softmax in place, stable via max shift.
void softmax_blocks(std::span<double> v, std::size_t channels) {
  for (std::size_t off = 0; off < v.size(); off += channels) {
    double mx = v[off];
    for (std::size_t k = 1; k < channels; ++k) mx = std::max(mx, v[off + k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < channels; ++k) {
      v[off + k] = std::exp(v[off + k] - mx);
      sum += v[off + k];
    }
    for (std::size_t k = 0; k < channels; ++k) v[off + k] /= sum;
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Builds a batch matrix whose rows are [head_i, label_i].
std::vector<double> concat_rows(std::size_t rows, std::size_t head, std::size_t label,
                                const std::function<std::span<const double>(std::size_t)>& head_of,
                                const std::function<std::span<const double>(std::size_t)>& label_of) {
  const std::size_t width = head + label;
  std::vector<double> m(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    auto h = head_of(r);
    std::copy(h.begin(), h.end(), m.begin() + static_cast<long>(r * width));
    if (label) {
      auto l = label_of(r);
      std::copy(l.begin(), l.end(), m.begin() + static_cast<long>(r * width + head));
    }
  }
  return m;
}

}  // namespace

ModelParams init_params(Variant variant, const ModelDims& dims, std::uint64_t seed) {
  check_dims(variant, dims);
  ModelParams p;
  p.variant = variant;
  p.dims = dims;
  p.seed = seed;
  Rng rng(seed);
  const auto sh = shapes(dims);
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    auto& t = p.tensors[i];
    t.rows = sh[i].first;
    t.cols = sh[i].second;
    t.values.assign(t.rows * t.cols, 0.0);
    const bool is_bias = t.rows == 1;
    if (is_bias) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.rows));
    for (double& v : t.values) v = rng.uniform(-scale, scale);
  }
  return p;
}

LatentCode encode(const ModelParams& p, std::span<const double> x, std::span<const double> label) {
  if (x.size() != p.dims.input)
    fail(ErrorCode::BadShape, "encoder input length " + std::to_string(x.size()) + ", expected " +
                                  std::to_string(p.dims.input));
  check_label(p, label);
  const auto& d = p.dims;
  std::vector<double> in(x.begin(), x.end());
  in.insert(in.end(), label.begin(), label.end());
  std::vector<double> h(d.hidden);
  kernels::affine_forward(kernels::Exec::serial, {in, 1, in.size()}, p[kEncW1].view(),
                          p[kEncB1].values, {h, 1, d.hidden});
  for (double& v : h) v = std::max(0.0, v);
  LatentCode code;
  code.mu.resize(d.latent);
  code.logvar.resize(d.latent);
  kernels::affine_forward(kernels::Exec::serial, {h, 1, d.hidden}, p[kEncWMu].view(),
                          p[kEncBMu].values, {code.mu, 1, d.latent});
  kernels::affine_forward(kernels::Exec::serial, {h, 1, d.hidden}, p[kEncWLogvar].view(),
                          p[kEncBLogvar].values, {code.logvar, 1, d.latent});
  if (!all_finite(code.mu) || !all_finite(code.logvar)) fail(ErrorCode::NonFinite, "encoder output not finite");
  code.z = code.mu;
  return code;
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng) {
  if (mu.size() != logvar.size()) fail(ErrorCode::BadShape, "mu/logvar length mismatch");
  std::vector<double> z(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k)
    z[k] = mu[k] + std::exp(0.5 * clamp_logvar(logvar[k])) * rng.normal();
  return z;
}

std::vector<double> decode_batch(const ModelParams& p, kernels::ConstMatrix zs,
                                 std::span<const double> label, kernels::Exec exec) {
  const auto& d = p.dims;
  if (zs.cols != d.latent) fail(ErrorCode::BadShape, "latent length mismatch");
  check_label(p, label);
  std::vector<double> in = concat_rows(
      zs.rows, d.latent, d.label, [&](std::size_t r) { return zs.row(r); },
      [&](std::size_t) { return label; });
  std::vector<double> h(zs.rows * d.hidden);
  kernels::affine_forward(exec, {in, zs.rows, d.latent + d.label}, p[kDecW1].view(), p[kDecB1].values,
                          {h, zs.rows, d.hidden});
  for (double& v : h) v = std::max(0.0, v);
  std::vector<double> out(zs.rows * d.input);
  kernels::affine_forward(exec, {h, zs.rows, d.hidden}, p[kDecW2].view(), p[kDecB2].values,
                          {out, zs.rows, d.input});
  softmax_blocks(out, d.channels);
  return out;
}

std::vector<double> decode_logits(const ModelParams& p, std::span<const double> z,
                                  std::span<const double> label) {
  const auto& d = p.dims;
  if (z.size() != d.latent) fail(ErrorCode::BadShape, "latent length mismatch");
  check_label(p, label);
  std::vector<double> in(z.begin(), z.end());
  in.insert(in.end(), label.begin(), label.end());
  std::vector<double> h(d.hidden);
  kernels::affine_forward(kernels::Exec::serial, {in, 1, in.size()}, p[kDecW1].view(), p[kDecB1].values,
                          {h, 1, d.hidden});
  for (double& v : h) v = std::max(0.0, v);
  std::vector<double> out(d.input);
  kernels::affine_forward(kernels::Exec::serial, {h, 1, d.hidden}, p[kDecW2].view(), p[kDecB2].values,
                          {out, 1, d.input});
  return out;
}

std::vector<double> decode(const ModelParams& p, std::span<const double> z, std::span<const double> label) {
  auto out = decode_logits(p, z, label);
  softmax_blocks(out, p.dims.channels);
  return out;
}

LossTerms loss(std::span<const TileId> target, std::span<const double> probs, std::span<const double> mu,
               std::span<const double> logvar, double beta, std::size_t channels) {
  if (channels == 0 || probs.size() != target.size() * channels)
    fail(ErrorCode::BadShape, "probs must hold one block per target cell");
  if (mu.size() != logvar.size()) fail(ErrorCode::BadShape, "mu/logvar length mismatch");
  LossTerms l;
  for (std::size_t cell = 0; cell < target.size(); ++cell) {
    if (target[cell] >= channels) fail(ErrorCode::BadShape, "target id outside alphabet");
    l.recon -= std::log(std::max(probs[cell * channels + target[cell]], 1e-12));
  }
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double lv = clamp_logvar(logvar[k]);
    l.kl += -0.5 * (1.0 + lv - mu[k] * mu[k] - std::exp(lv));
  }
  l.kl = std::max(l.kl, 0.0);  // rounding can leave -tiny at the optimum
  l.total = l.recon + beta * l.kl;
  return l;
}

GradientResult gradients_with_noise(const ModelParams& p, std::span<const Example> batch, double beta,
                                    kernels::ConstMatrix eps, kernels::Exec exec) {
  using kernels::ConstMatrix;
  using kernels::MutMatrix;
  const auto& d = p.dims;
  const std::size_t n = batch.size();
  if (n == 0) fail(ErrorCode::BadShape, "empty batch");
  if (eps.rows != n || eps.cols != d.latent) fail(ErrorCode::BadShape, "noise must be batch x latent");
  for (const auto& ex : batch) {
    if (ex.input.size() != d.input || ex.target.size() != d.cells())
      fail(ErrorCode::BadShape, "example shape does not match model");
    check_label(p, ex.label);
  }
  const std::size_t enc_in = d.input + d.label;
  const std::size_t dec_in = d.latent + d.label;

  // forward
  std::vector<double> x = concat_rows(
      n, d.input, d.label, [&](std::size_t r) { return batch[r].input; },
      [&](std::size_t r) { return batch[r].label; });
  std::vector<double> a1(n * d.hidden);
  kernels::affine_forward(exec, {x, n, enc_in}, p[kEncW1].view(), p[kEncB1].values, {a1, n, d.hidden});
  std::vector<double> h(a1.size());
  for (std::size_t i = 0; i < a1.size(); ++i) h[i] = std::max(0.0, a1[i]);
  std::vector<double> mu(n * d.latent), lv(n * d.latent);
  kernels::affine_forward(exec, {h, n, d.hidden}, p[kEncWMu].view(), p[kEncBMu].values, {mu, n, d.latent});
  kernels::affine_forward(exec, {h, n, d.hidden}, p[kEncWLogvar].view(), p[kEncBLogvar].values,
                          {lv, n, d.latent});

  std::vector<double> sd(n * d.latent), zin(n * dec_in);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d.latent; ++k) {
      const std::size_t i = r * d.latent + k;
      sd[i] = std::exp(0.5 * clamp_logvar(lv[i]));
      zin[r * dec_in + k] = mu[i] + sd[i] * eps(r, k);
    }
    for (std::size_t k = 0; k < d.label; ++k) zin[r * dec_in + d.latent + k] = batch[r].label[k];
  }
  std::vector<double> a2(n * d.hidden);
  kernels::affine_forward(exec, {zin, n, dec_in}, p[kDecW1].view(), p[kDecB1].values, {a2, n, d.hidden});
  std::vector<double> g(a2.size());
  for (std::size_t i = 0; i < a2.size(); ++i) g[i] = std::max(0.0, a2[i]);
  std::vector<double> logits(n * d.input);
  kernels::affine_forward(exec, {g, n, d.hidden}, p[kDecW2].view(), p[kDecB2].values, {logits, n, d.input});

  // loss and dlogits = (softmax - onehot) / n, per cell
  GradientResult res;
  res.grads = zeros_like(p.tensors);
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t ch = d.channels;
  std::vector<double>& dlogits = logits;  // overwritten in place
  for (std::size_t r = 0; r < n; ++r) {
    const auto tgt = batch[r].target;
    double recon = 0.0;
    for (std::size_t cell = 0; cell < d.cells(); ++cell) {
      double* blk = &dlogits[r * d.input + cell * ch];
      double mx = blk[0];
      for (std::size_t k = 1; k < ch; ++k) mx = std::max(mx, blk[k]);
      double sum = 0.0;
      for (std::size_t k = 0; k < ch; ++k) sum += std::exp(blk[k] - mx);
      const double lse = mx + std::log(sum);
      recon -= blk[tgt[cell]] - lse;
      for (std::size_t k = 0; k < ch; ++k) blk[k] = std::exp(blk[k] - lse) * inv_n;
      blk[tgt[cell]] -= inv_n;
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < d.latent; ++k) {
      const double c = clamp_logvar(lv[r * d.latent + k]);
      const double m = mu[r * d.latent + k];
      kl += -0.5 * (1.0 + c - m * m - std::exp(c));
    }
    res.loss.recon += recon * inv_n;
    res.loss.kl += kl * inv_n;
  }
  res.loss.total = res.loss.recon + beta * res.loss.kl;

  // backward through the decoder
  auto& G = res.grads;
  kernels::affine_accumulate_grad(exec, {g, n, d.hidden}, {dlogits, n, d.input}, 1.0, G[kDecW2].mut(),
                                  G[kDecB2].values);
  std::vector<double> dg(n * d.hidden);
  kernels::affine_backward_input(exec, {dlogits, n, d.input}, p[kDecW2].view(), {dg, n, d.hidden});
  for (std::size_t i = 0; i < dg.size(); ++i)
    if (a2[i] <= 0.0) dg[i] = 0.0;
  kernels::affine_accumulate_grad(exec, {zin, n, dec_in}, {dg, n, d.hidden}, 1.0, G[kDecW1].mut(),
                                  G[kDecB1].values);
  std::vector<double> dzin(n * dec_in);
  kernels::affine_backward_input(exec, {dg, n, d.hidden}, p[kDecW1].view(), {dzin, n, dec_in});

  // reparameterization and KL
  std::vector<double> dmu(n * d.latent), dlv(n * d.latent);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d.latent; ++k) {
      const std::size_t i = r * d.latent + k;
      const double dz = dzin[r * dec_in + k];
      dmu[i] = dz + beta * mu[i] * inv_n;
      const bool inside = lv[i] > kLogvarMin && lv[i] < kLogvarMax;
      const double c = clamp_logvar(lv[i]);
      dlv[i] = inside ? dz * eps(r, k) * 0.5 * sd[i] + beta * 0.5 * (std::exp(c) - 1.0) * inv_n : 0.0;
    }
  }

  // backward through the encoder
  kernels::affine_accumulate_grad(exec, {h, n, d.hidden}, {dmu, n, d.latent}, 1.0, G[kEncWMu].mut(),
                                  G[kEncBMu].values);
  kernels::affine_accumulate_grad(exec, {h, n, d.hidden}, {dlv, n, d.latent}, 1.0, G[kEncWLogvar].mut(),
                                  G[kEncBLogvar].values);
  std::vector<double> dh(n * d.hidden), dh2(n * d.hidden);
  kernels::affine_backward_input(exec, {dmu, n, d.latent}, p[kEncWMu].view(), {dh, n, d.hidden});
  kernels::affine_backward_input(exec, {dlv, n, d.latent}, p[kEncWLogvar].view(), {dh2, n, d.hidden});
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] = a1[i] > 0.0 ? dh[i] + dh2[i] : 0.0;
  kernels::affine_accumulate_grad(exec, {x, n, enc_in}, {dh, n, d.hidden}, 1.0, G[kEncW1].mut(),
                                  G[kEncB1].values);
  return res;
}

GradientResult gradients(const ModelParams& p, std::span<const Example> batch, double beta, Rng& rng,
                         kernels::Exec exec) {
  std::vector<double> eps(batch.size() * p.dims.latent);
  for (double& e : eps) e = rng.normal();
  auto res = gradients_with_noise(p, batch, beta, {eps, batch.size(), p.dims.latent}, exec);
  if (!std::isfinite(res.loss.total)) fail(ErrorCode::NonFinite, "loss is not finite");
  for (const auto& t : res.grads)
    if (!all_finite(t.values)) fail(ErrorCode::NonFinite, "gradient is not finite");
  return res;
}

// ---------------------------------------------------------------------------
// Training

Example TrainingSet::example(std::size_t i) const {
  return {inputs[i], targets[i], labels.empty() ? std::span<const double>{} : std::span<const double>(labels[i])};
}

TrainingSet make_training_set(const Corpus& corpus, Variant variant) {
  if (corpus.segments.empty()) fail(ErrorCode::EmptyCorpus, "corpus has no segments");
  TrainingSet set;
  if (variant == Variant::next_segment) {
    std::map<std::pair<std::string, int>, const Segment*> by_pos;
    for (const auto& s : corpus.segments)
      if (s.source_offset) by_pos.emplace(std::pair{s.level, *s.source_offset}, &s);
    for (const auto& s : corpus.segments) {
      if (!s.source_offset) continue;
      auto it = by_pos.find({s.level, *s.source_offset + kSegmentSize});
      if (it == by_pos.end()) continue;
      set.inputs.push_back(encode_one_hot(s, corpus.alphabet));
      set.targets.push_back(it->second->cells);
    }
    if (set.inputs.empty())
      fail(ErrorCode::NoSequentialPairs, "no segment has a successor one segment length later in its level");
    return set;
  }
  for (const auto& s : corpus.segments) {
    set.inputs.push_back(encode_one_hot(s, corpus.alphabet));
    set.targets.push_back(s.cells);
    if (variant == Variant::label_conditional) set.labels.push_back(corpus.labels.at(s.id).flat());
  }
  return set;
}

double tile_accuracy(const ModelParams& params, const TrainingSet& data) {
  if (data.size() == 0) return 0.0;
  const auto& d = params.dims;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ex = data.example(i);
    const auto code = encode(params, ex.input, ex.label);
    const auto probs = decode(params, code.mu, ex.label);
    for (std::size_t cell = 0; cell < d.cells(); ++cell) {
      const double* blk = &probs[cell * d.channels];
      const auto best = static_cast<std::size_t>(std::max_element(blk, blk + d.channels) - blk);
      correct += best == ex.target[cell];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size() * d.cells());
}

TrainResult train(const Corpus& corpus, Variant variant, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const TrainingSet data = make_training_set(corpus, variant);
  const std::size_t label_dim =
      variant == Variant::label_conditional ? LabelVector::width(corpus.games.size()) : 0;
  TrainResult out;
  out.params = init_params(variant, dims_for(corpus.alphabet, config.hidden, config.latent, label_dim),
                           config.seed);
  out.params.alphabet_fingerprint = corpus.alphabet.fingerprint();
  auto& params = out.params;

  TensorSet m = zeros_like(params.tensors);
  TensorSet v = zeros_like(params.tensors);
  // separate streams so batch order does not depend on the noise draws
  Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng noise_rng(config.seed + 1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  std::vector<Example> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochStats stats;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = b0; i < b1; ++i) batch.push_back(data.example(order[i]));
      const auto g = gradients(params, batch, config.beta, noise_rng);
      const double w = static_cast<double>(b1 - b0);
      stats.loss.total += g.loss.total * w;
      stats.loss.recon += g.loss.recon * w;
      stats.loss.kl += g.loss.kl * w;
      seen += b1 - b0;

      ++step;
      const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < kTensorCount; ++t) {
        auto& pv = params.tensors[t].values;
        auto& mv = m[t].values;
        auto& vv = v[t].values;
        const auto& gv = g.grads[t].values;
        for (std::size_t i = 0; i < pv.size(); ++i) {
          mv[i] = config.adam_beta1 * mv[i] + (1.0 - config.adam_beta1) * gv[i];
          vv[i] = config.adam_beta2 * vv[i] + (1.0 - config.adam_beta2) * gv[i] * gv[i];
          pv[i] -= config.learning_rate * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + config.adam_epsilon);
        }
      }
    }
    stats.loss.total /= static_cast<double>(seen);
    stats.loss.recon /= static_cast<double>(seen);
    stats.loss.kl /= static_cast<double>(seen);
    stats.tile_accuracy = tile_accuracy(params, data);
    out.report.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  out.report.examples = data.size();
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   tilevae-checkpoint
//   format_version 1
//   variant reconstruct
//   dims <input> <hidden> <latent> <label> <channels>
//   alphabet_fingerprint <hex>
//   seed <n>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values, 17 significant digits>
//   ...
//   end

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, ptr);
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    if (pos_ >= text_.size()) fail(ErrorCode::CorruptFile, "checkpoint truncated");
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) fail(ErrorCode::CorruptFile, "checkpoint truncated (no newline)");
    std::string_view line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return line;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, int base = 10) {
  T v{};
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>)
    r = std::from_chars(s.data(), s.data() + s.size(), v);
  else
    r = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCode::CorruptFile, "bad number '" + std::string(s) + "' in checkpoint");
  return v;
}

std::vector<std::string_view> expect(LineReader& in, std::string_view key, std::size_t n_values) {
  auto w = words(in.next());
  if (w.size() != n_values + 1 || w[0] != key)
    fail(ErrorCode::CorruptFile, "expected '" + std::string(key) + "' line in checkpoint");
  return w;
}

}  // namespace

std::string checkpoint_text(const ModelParams& p) {
  std::string out;
  out += "tilevae-checkpoint\n";
  out += "format_version " + std::to_string(p.format_version) + "\n";
  out += "variant " + std::string(to_string(p.variant)) + "\n";
  out += "dims " + std::to_string(p.dims.input) + " " + std::to_string(p.dims.hidden) + " " +
         std::to_string(p.dims.latent) + " " + std::to_string(p.dims.label) + " " +
         std::to_string(p.dims.channels) + "\n";
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(p.alphabet_fingerprint));
  out += "alphabet_fingerprint " + std::string(hex) + "\n";
  out += "seed " + std::to_string(p.seed) + "\n";
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    const auto& ten = p.tensors[t];
    out += "tensor " + std::string(kTensorNames[t]) + " " + std::to_string(ten.rows) + " " +
           std::to_string(ten.cols) + "\n";
    for (std::size_t r = 0; r < ten.rows; ++r) {
      for (std::size_t c = 0; c < ten.cols; ++c) {
        if (c) out.push_back(' ');
        append_double(out, ten.values[r * ten.cols + c]);
      }
      out.push_back('\n');
    }
  }
  out += "end\n";
  return out;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_text(params));
}

ModelParams parse_checkpoint(std::string_view text, std::optional<std::uint64_t> expected_fingerprint) {
  LineReader in(text);
  if (in.next() != "tilevae-checkpoint") fail(ErrorCode::CorruptFile, "not a checkpoint file");
  ModelParams p;
  p.format_version = parse_number<int>(expect(in, "format_version", 1)[1]);
  if (p.format_version != kCheckpointVersion)
    fail(ErrorCode::VersionMismatch, "checkpoint format_version " + std::to_string(p.format_version) +
                                         ", this build reads " + std::to_string(kCheckpointVersion));
  try {
    p.variant = parse_variant(expect(in, "variant", 1)[1]);
  } catch (const Error&) {
    fail(ErrorCode::CorruptFile, "checkpoint has an unknown variant");
  }
  const auto dw = expect(in, "dims", 5);
  p.dims = {parse_number<std::size_t>(dw[1]), parse_number<std::size_t>(dw[2]), parse_number<std::size_t>(dw[3]),
            parse_number<std::size_t>(dw[4]), parse_number<std::size_t>(dw[5])};
  p.alphabet_fingerprint = parse_number<std::uint64_t>(expect(in, "alphabet_fingerprint", 1)[1], 16);
  p.seed = parse_number<std::uint64_t>(expect(in, "seed", 1)[1]);
  if (expected_fingerprint && *expected_fingerprint != p.alphabet_fingerprint)
    fail(ErrorCode::AlphabetMismatch, "checkpoint was trained on a different tile alphabet");
  try {
    check_dims(p.variant, p.dims);
  } catch (const Error& e) {
    fail(ErrorCode::CorruptFile, std::string("checkpoint dims invalid: ") + e.what());
  }
  const auto sh = shapes(p.dims);
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    const auto tw = expect(in, "tensor", 3);
    if (tw[1] != kTensorNames[t]) fail(ErrorCode::CorruptFile, "unexpected tensor " + std::string(tw[1]));
    auto& ten = p.tensors[t];
    ten.rows = parse_number<std::size_t>(tw[2]);
    ten.cols = parse_number<std::size_t>(tw[3]);
    if (ten.rows != sh[t].first || ten.cols != sh[t].second)
      fail(ErrorCode::CorruptFile, "tensor " + std::string(tw[1]) + " shape disagrees with dims");
    ten.values.reserve(ten.rows * ten.cols);
    for (std::size_t r = 0; r < ten.rows; ++r) {
      const auto vals = words(in.next());
      if (vals.size() != ten.cols) fail(ErrorCode::CorruptFile, "tensor " + std::string(tw[1]) + " row is short");
      for (auto v : vals) ten.values.push_back(parse_number<double>(v));
    }
  }
  if (in.next() != "end") fail(ErrorCode::CorruptFile, "checkpoint missing end marker");
  return p;
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint) {
  return parse_checkpoint(read_text_file(path), expected_fingerprint);
}

}  // namespace tilevae
