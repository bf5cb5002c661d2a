#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"
#include "sgcap/model.hpp"
#include "sgcap/noise.hpp"
#include "sgcap/supervision.hpp"
#include "sgcap/text.hpp"

namespace sgcap {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam with bias correction. `step_count` is the
// 1-based index of this update. Throws ConfigError on a size mismatch.
void adamw_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                std::span<double> v, std::uint64_t step_count, const AdamWConfig& cfg);

struct TrainConfig {
  double sigma = 0.5;
  double lambda = 1.0;
  std::size_t k = 5;
  NoiseMode noise = NoiseMode::kElementWise;
  LossMode loss = LossMode::kMixture;
  AdamWConfig optimizer;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 20;
  std::size_t early_stop_patience = 3;
  double heldout_fraction = 0.05;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
  bool exclude_self = true;
  bool redraw_noise = true;  // fresh noise per epoch; otherwise fixed per caption
  std::uint64_t seed = 42;

  // Decoder shape. dim and vocab_size are taken from the bank and vocabulary.
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_dim = 128;
  std::size_t fusion_ffn_dim = 128;
  bool fusion_positions = false;
  std::size_t max_len = 30;
  std::size_t min_word_count = 1;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct TrainLogRecord {
  std::size_t epoch = 0;
  std::optional<std::size_t> batch;  // empty for end-of-epoch summaries
  double loss = 0.0;
  std::optional<double> heldout_loss;
};

// "epoch=3 batch=7 loss=1.234567" or "epoch=3 batch=- loss=... heldout=..."
std::string format_log_record(const TrainLogRecord& r);

struct TrainResult {
  ModelParams params;
  Vocabulary vocab;
  std::vector<TrainLogRecord> log;
  std::size_t epochs_run = 0;
  double initial_loss = 0.0;  // mean loss over the first epoch's first batch
  double final_loss = 0.0;    // mean training loss of the last epoch
};

using TrainObserver = std::function<void(const TrainLogRecord&)>;

// Epoch loop: per caption retrieve its semantic group (self-excluded), perturb
// the group, fuse, teacher-force every supervision candidate, apply the
// probability-weighted loss and take one AdamW step per batch. Early stopping
// tracks the held-out split loss and restores the best parameters.
TrainResult train(const SentenceBank& bank, const TrainConfig& config,
                  const TrainObserver& observer = {});

// Sentence i's decoder target: encoded words (truncated to max_len - 1) + EOS.
std::vector<TokenId> caption_target(const Vocabulary& vocab, std::string_view text,
                                    std::size_t max_len);

}  // namespace sgcap
