#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "claimcraft/rng.hpp"

namespace claimcraft {

// Decoder-only transformer over claims token sequences. Rotary positions,
// grouped-query attention, SwiGLU feed-forward, RMS pre-norm, tied input and
// output embedding. Everything is deterministic given the config seed.

struct ModelConfig {
  int d_model = 256;
  int n_layers = 4;
  int n_heads = 8;
  int n_kv_heads = 4;
  int ffn_size = 512;
  int max_positions = 1024;
  int vocab_size = 0;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
  int head_dim() const { return d_model / n_heads; }
  long long parameter_count() const;

  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kZLossLambda = 1e-4;

struct LossParts {
  double ce = 0.0;
  double z = 0.0;
  double total = 0.0;
};

struct TrainExample {
  std::vector<std::int32_t> ids;      // input tokens
  std::vector<std::int32_t> targets;  // next-token targets, same length
  std::vector<std::uint8_t> mask;     // 1 where the target contributes to the loss
};

// Cross entropy plus lambda * mean squared log-partition over masked positions.
template <typename Scalar>
LossParts sequence_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& logits,
                        const std::vector<std::int32_t>& targets,
                        const std::vector<std::uint8_t>& mask, double lambda = kZLossLambda);

struct SampleSettings {
  double temperature = 1.0;
  double top_p = 1.0;
  bool greedy = false;
  int max_new = 64;
  std::int32_t eos_id = -1;  // negative disables the stop token
};

// One draw from a logits row: greedy argmax, or temperature softmax restricted
// to the smallest nucleus reaching top_p (ties at the boundary all stay in).
std::int32_t sample_token(const std::vector<double>& logits, const SampleSettings& settings,
                          Rng& rng);

template <typename Scalar>
class TransformerT {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit TransformerT(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Mat>& tensors() { return params_; }
  const std::vector<Mat>& tensors() const { return params_; }
  const std::vector<std::string>& tensor_names() const { return names_; }

  // Causal logits, one row per input position.
  Mat forward(const std::vector<std::int32_t>& ids) const;

  // Adds d loss / d tensor into grads (same order as tensors()) and returns the
  // loss. Throws NumericError naming the first tensor with a non-finite
  // gradient.
  LossParts accumulate_gradients(const TrainExample& ex, std::vector<Mat>& grads,
                                 double lambda = kZLossLambda) const;

  std::vector<Mat> zero_like() const;

  // Ancestral sampling continuing the prompt. Returns only the generated ids,
  // including the terminating stop token when one is hit.
  std::vector<std::int32_t> sample_trajectory(const std::vector<std::int32_t>& prompt,
                                              const SampleSettings& settings, Rng& rng) const;

  void save_checkpoint(const std::string& path) const;
  static TransformerT load_checkpoint(const std::string& path);

 private:
  struct Indices;
  struct Workspace;

  Mat forward_cached(const std::vector<std::int32_t>& ids, Workspace* ws) const;

  ModelConfig cfg_;
  std::vector<Mat> params_;
  std::vector<std::string> names_;
};

using Transformer = TransformerT<float>;

extern template class TransformerT<float>;
extern template class TransformerT<double>;
extern template LossParts sequence_loss<float>(
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&,
    const std::vector<std::int32_t>&, const std::vector<std::uint8_t>&, double);
extern template LossParts sequence_loss<double>(
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&,
    const std::vector<std::int32_t>&, const std::vector<std::uint8_t>&, double);

}  // namespace claimcraft
