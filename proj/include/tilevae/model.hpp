#pragma once

// Fully connected VAE over one-hot tile segments, in three variants:
//   reconstruct        x -> z -> x
//   next_segment       s_i -> z -> s_{i+1}
//   label_conditional  [x, y] -> z, [z, y] -> x
//
// Weights are stored fan_in x fan_out, row-major, so one-hot inputs reduce
// the first encoder layer to a sum of 256 weight rows.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilevae/corpus.hpp"
#include "tilevae/kernels.hpp"
#include "tilevae/rng.hpp"

namespace tilevae {

enum class Variant { reconstruct, next_segment, label_conditional };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

inline constexpr int kCheckpointVersion = 1;
inline constexpr double kLogvarMin = -20.0;
inline constexpr double kLogvarMax = 20.0;

struct ModelDims {
  std::size_t input = 0;   // cells * channels
  std::size_t hidden = 0;
  std::size_t latent = 0;
  std::size_t label = 0;
  std::size_t channels = 0;  // alphabet size; softmax block width

  std::size_t cells() const { return channels ? input / channels : 0; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  kernels::ConstMatrix view() const { return {values, rows, cols}; }
  kernels::MutMatrix mut() { return {values, rows, cols}; }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum TensorIndex : std::size_t {
  kEncW1,
  kEncB1,
  kEncWMu,
  kEncBMu,
  kEncWLogvar,
  kEncBLogvar,
  kDecW1,
  kDecB1,
  kDecW2,
  kDecB2,
  kTensorCount
};

extern const std::array<const char*, kTensorCount> kTensorNames;

/// Parameter-shaped container; also used for gradients and Adam moments.
using TensorSet = std::array<Tensor, kTensorCount>;

TensorSet zeros_like(const TensorSet& t);

struct ModelParams {
  Variant variant = Variant::reconstruct;
  ModelDims dims;
  std::uint64_t alphabet_fingerprint = 0;
  std::uint64_t seed = 0;
  int format_version = kCheckpointVersion;
  TensorSet tensors;

  const Tensor& operator[](TensorIndex i) const { return tensors[i]; }
  Tensor& operator[](TensorIndex i) { return tensors[i]; }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta = 1.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t hidden = 512;
  std::size_t latent = 32;

  void validate() const;
};

struct LatentCode {
  std::vector<double> mu;
  std::vector<double> logvar;
  std::vector<double> z;
};

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct EpochStats {
  LossTerms loss;       // mean per example over the epoch's batches
  double tile_accuracy = 0.0;  // argmax(decode(mu)) vs target, whole training set
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
  std::size_t examples = 0;
};

/// One training example. `label` is empty unless the model is label-conditional.
struct Example {
  std::span<const double> input;
  std::span<const TileId> target;
  std::span<const double> label;
};

ModelDims dims_for(const TileAlphabet& alphabet, std::size_t hidden, std::size_t latent,
                   std::size_t label);

ModelParams init_params(Variant variant, const ModelDims& dims, std::uint64_t seed);

LatentCode encode(const ModelParams& params, std::span<const double> x,
                  std::span<const double> label = {});

/// z = mu + exp(0.5 * clamp(logvar)) * eps
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   Rng& rng);

std::vector<double> decode_logits(const ModelParams& params, std::span<const double> z,
                                  std::span<const double> label = {});

/// Per-cell softmax over the alphabet.
std::vector<double> decode(const ModelParams& params, std::span<const double> z,
                           std::span<const double> label = {});

/// Batched decode of `zs` (rows x latent), probabilities rows x input.
std::vector<double> decode_batch(const ModelParams& params, kernels::ConstMatrix zs,
                                 std::span<const double> label = {},
                                 kernels::Exec exec = kernels::default_exec());

/// recon: categorical cross-entropy summed over cells (log clamped at 1e-12);
/// kl: -0.5 * sum(1 + logvar - mu^2 - exp(logvar)).
LossTerms loss(std::span<const TileId> target, std::span<const double> probs,
               std::span<const double> mu, std::span<const double> logvar, double beta,
               std::size_t channels);

struct GradientResult {
  TensorSet grads;
  LossTerms loss;  // batch mean
};

/// Mean loss and exact gradient over the batch for fixed reparameterization
/// noise `eps` (batch x latent).
GradientResult gradients_with_noise(const ModelParams& params, std::span<const Example> batch,
                                    double beta, kernels::ConstMatrix eps,
                                    kernels::Exec exec = kernels::default_exec());

/// Draws eps from `rng`, then as above. Throws NonFinite.
GradientResult gradients(const ModelParams& params, std::span<const Example> batch, double beta,
                         Rng& rng, kernels::Exec exec = kernels::default_exec());

/// Encoder/decoder inputs for every corpus example of the variant.
struct TrainingSet {
  std::vector<std::vector<double>> inputs;
  std::vector<std::array<TileId, kSegmentCells>> targets;
  std::vector<std::vector<double>> labels;

  std::size_t size() const { return inputs.size(); }
  Example example(std::size_t i) const;
};

/// Throws EmptyCorpus, or NoSequentialPairs for next_segment when no segment
/// has a same-level successor exactly one segment length further along.
TrainingSet make_training_set(const Corpus& corpus, Variant variant);

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

TrainResult train(const Corpus& corpus, Variant variant, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Mean tile accuracy of argmax(decode(mu(x))) against the targets.
double tile_accuracy(const ModelParams& params, const TrainingSet& data);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
std::string checkpoint_text(const ModelParams& params);

/// Verifies format version and, when given, the alphabet fingerprint.
ModelParams load_checkpoint(const std::filesystem::path& path,
                            std::optional<std::uint64_t> expected_fingerprint = std::nullopt);
ModelParams parse_checkpoint(std::string_view text,
                             std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

}  // namespace tilevae
