#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "claimcraft/model.hpp"
#include "claimcraft/rng.hpp"
#include "claimcraft/vocab.hpp"

namespace claimcraft {

// Two training stages over one optimizer: next-token pre-training on sliding
// windows, and instruction post-training on prompt/response pairs where the
// loss is confined to the response.

enum class DecayShape { cosine, constant };

struct TrainSpec {
  int batch_size = 8;
  int window_len = 256;  // input tokens per pre-training example
  double peak_lr = 3e-4;
  int warmup_steps = 100;
  DecayShape decay = DecayShape::cosine;
  double min_lr_ratio = 0.1;  // cosine floor as a fraction of the peak
  int total_steps = 1000;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

// Learning rate at a 0-based step: linear warmup, then the configured decay.
double schedule_lr(const TrainSpec& spec, int step);

// Adaptive moments with decoupled weight decay. Norm gains are excluded from
// decay; everything else decays. The gradient is clipped by global norm
// before the moment update.
class AdamW {
 public:
  AdamW(const Transformer& model, const TrainSpec& spec);

  // Applies one update in place and returns the pre-clip gradient norm.
  // grads must match the model's tensors and are consumed (scaled in place).
  double step(Transformer& model, std::vector<Transformer::Mat>& grads, double lr);

 private:
  std::vector<Transformer::Mat> m_, v_;
  std::vector<std::uint8_t> decay_;
  TrainSpec spec_;
  long t_ = 0;
};

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double ce = 0.0;
  double z = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
};

struct ValProbe {
  int step = 0;
  double ce = 0.0;
};

struct TrainResult {
  std::vector<StepLog> steps;
  std::vector<ValProbe> val;
  std::string stop_reason;  // "completed" | "early_stop" | "diverged"
  bool diverged = false;
};

// Shifted-target windows: each covers window_len inputs (less at a sequence
// tail), strided so every next-token target appears exactly once.
std::vector<TrainExample> make_windows(const std::vector<std::vector<std::int32_t>>& sequences,
                                       int window_len);

// Deterministic shuffle and split. val receives round(fraction * n), at least
// one window when the fraction is positive and two or more exist.
void split_windows(std::vector<TrainExample> all, double val_fraction, std::uint64_t seed,
                   std::vector<TrainExample>& train, std::vector<TrainExample>& val);

// Entropy in nats of the empirical distribution of masked target tokens: the
// ceiling any context-free predictor is stuck at.
double unigram_entropy(const std::vector<TrainExample>& windows);

// Mean per-window cross entropy, forward only.
double validation_ce(const Transformer& model, const std::vector<TrainExample>& val);

struct PretrainOptions {
  int val_every = 50;
  double early_stop_val_ce = -1.0;  // stop once validation CE drops below; negative disables
};

// Optimizes the model in place. On divergence (non-finite loss or gradients)
// the model is rolled back to the last good snapshot and the result says so.
TrainResult pretrain(Transformer& model, const std::vector<TrainExample>& train,
                     const std::vector<TrainExample>& val, const TrainSpec& spec,
                     const PretrainOptions& opt = {});

// ---------------------------------------------------------------------------
// Instruction pairs.

struct PostTrainPair {
  std::vector<std::string> prompt;    // history tokens, ending with <INSTRUCT-DX>
  std::vector<std::string> response;  // <DX-MAJOR_*> tokens, then <eos>

  bool operator==(const PostTrainPair&) const = default;
};

// Picks an insertion point uniformly among monthly-group boundaries with at
// least two months of history span before them, and collects the incident
// post-insertion major diagnoses in chronological order. Sequences with no
// eligible boundary are rejected (nullopt).
std::optional<PostTrainPair> build_posttrain_pair(const std::vector<std::string>& texts,
                                                  const std::vector<std::size_t>& group_starts,
                                                  Rng& rng);

// One pair per line: prompt tokens, a tab, response tokens.
void write_pairs(const std::string& path, const std::vector<PostTrainPair>& pairs);
std::vector<PostTrainPair> read_pairs(const std::string& path);

// Encodes a pair into a training example whose mask covers exactly the
// response predictions.
TrainExample pair_example(const PostTrainPair& pair, const Vocabulary& vocab);

// Fine-tunes on validated pairs; a malformed pair raises DataError naming its
// index.
TrainResult posttrain(Transformer& model, const std::vector<PostTrainPair>& pairs,
                      const Vocabulary& vocab, const TrainSpec& spec);

// step,ce,z,total rows for every optimizer step.
void write_metrics_csv(const std::string& path, const TrainResult& result);

}  // namespace claimcraft
