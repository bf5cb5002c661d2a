#include "sgcap/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sgcap/error.hpp"
#include "sgcap/rng.hpp"
#include "sgcap/similarity.hpp"

namespace sgcap {

void adamw_step(std::span<double> params, std::span<const double> grads, std::span<double> m,
                std::span<double> v, std::uint64_t step_count, const AdamWConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw ConfigError("adamw_step: parameter, gradient and moment sizes differ");
  if (step_count == 0) throw ConfigError("adamw_step: step_count is 1-based");
  const double t = static_cast<double>(step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] = params[i] * decay - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!(sigma >= 0.0 && sigma <= 1.0)) fail("--sigma must lie in [0, 1]");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("--lambda must be > 0");
  if (!(optimizer.lr > 0.0)) fail("--lr must be > 0");
  if (optimizer.weight_decay < 0.0) fail("--weight-decay must be >= 0");
  if (batch_size == 0) fail("--batch-size must be >= 1");
  if (max_epochs == 0) fail("--epochs must be >= 1");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) fail("--heldout-fraction must lie in [0, 1)");
  if (grad_clip < 0.0) fail("--grad-clip must be >= 0");
  if (max_len < 1) fail("--max-len must be >= 1");
  if (heads == 0) fail("--heads must be >= 1");
  if (layers == 0) fail("--layers must be >= 1");
  if (ffn_dim == 0 || fusion_ffn_dim == 0) fail("--ffn-dim must be >= 1");
}

std::string format_log_record(const TrainLogRecord& r) {
  char buf[160];
  if (r.batch) {
    std::snprintf(buf, sizeof buf, "epoch=%zu batch=%zu loss=%.6f", r.epoch, *r.batch, r.loss);
  } else if (r.heldout_loss) {
    std::snprintf(buf, sizeof buf, "epoch=%zu batch=- loss=%.6f heldout=%.6f", r.epoch, r.loss,
                  *r.heldout_loss);
  } else {
    std::snprintf(buf, sizeof buf, "epoch=%zu batch=- loss=%.6f heldout=-", r.epoch, r.loss);
  }
  return buf;
}

std::vector<TokenId> caption_target(const Vocabulary& vocab, std::string_view text,
                                    std::size_t max_len) {
  auto ids = vocab.encode(text);
  if (ids.size() + 1 > max_len) ids.resize(max_len - 1);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

namespace {

struct Trainer {
  const SentenceBank& bank;
  const TrainConfig& cfg;
  BankStats stats;
  Vocabulary vocab;
  std::vector<std::vector<TokenId>> targets;
  std::vector<SemanticGroup> groups;

  Trainer(const SentenceBank& b, const TrainConfig& c) : bank(b), cfg(c) {
    stats = compute_stats(bank);
    std::vector<std::string> texts;
    texts.reserve(bank.size());
    for (const auto& r : bank.records()) texts.push_back(r.text);
    vocab = Vocabulary::build(texts, cfg.min_word_count);
    for (const auto& t : texts) targets.push_back(caption_target(vocab, t, cfg.max_len));
    // Retrieval is deterministic, so each caption's group is computed once.
    groups.reserve(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i)
      groups.push_back(select_group(query_for(bank, i), bank, cfg.sigma, cfg.k, cfg.exclude_self));
  }

  ModelConfig model_config() const {
    ModelConfig m;
    m.dim = bank.dim();
    m.heads = cfg.heads;
    m.layers = cfg.layers;
    m.ffn_dim = cfg.ffn_dim;
    m.fusion_ffn_dim = cfg.fusion_ffn_dim;
    m.vocab_size = vocab.size();
    m.max_slots = cfg.k + 1;
    m.max_tokens = cfg.max_len;
    m.fusion_positions = cfg.fusion_positions;
    return m;
  }

  // Loss for caption i; accumulates scale * gradient when grads is non-null.
  double sample(const ModelParams& params, std::size_t i, std::size_t epoch, NoiseMode noise,
                LossMode loss_mode, double scale, std::vector<double>* grads) const {
    const std::uint64_t noise_seed = cfg.redraw_noise ? derive_seed(cfg.seed, {3, epoch, i})
                                                      : derive_seed(cfg.seed, {3, i});
    const SemanticGroup group = perturb_group(groups[i], noise, &stats, noise_seed);

    Matrix slots(static_cast<Eigen::Index>(group.size() + 1), static_cast<Eigen::Index>(bank.dim()));
    const auto cap = bank.embedding(i);
    for (std::size_t j = 0; j < bank.dim(); ++j) slots(0, static_cast<Eigen::Index>(j)) = cap[j];
    std::vector<std::vector<TokenId>> group_tokens;
    std::vector<double> scores;
    for (std::size_t m = 0; m < group.size(); ++m) {
      const auto& mem = group.members[m];
      for (std::size_t j = 0; j < bank.dim(); ++j)
        slots(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(j)) = mem.embedding[j];
      group_tokens.push_back(targets[mem.index]);
      scores.push_back(mem.hybrid);
    }
    SupervisionTarget target = build_target(targets[i], std::move(group_tokens), scores, cfg.lambda);

    std::vector<std::vector<TokenId>> candidates;
    std::vector<double> weights;
    if (loss_mode == LossMode::kSampled) {
      candidates.push_back(target.candidates[sample_target(target, derive_seed(cfg.seed, {4, epoch, i}))]);
      weights.push_back(1.0);
    } else {
      candidates = target.candidates;
      weights = target.probs;
    }
    SampleGraph graph(params, slots, candidates);
    double loss = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) loss += weights[c] * graph.candidate_ce()[c];
    if (grads) graph.backward(weights, scale, *grads);
    return loss;
  }
};

double global_norm(std::span<const double> g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TrainResult train(const SentenceBank& bank, const TrainConfig& config, const TrainObserver& observer) {
  config.validate();
  const std::size_t eligible = bank.size() - (config.exclude_self ? 1 : 0);
  if (config.k > eligible)
    throw ConfigError("--k " + std::to_string(config.k) + " exceeds the " + std::to_string(eligible) +
                      " bank sentences available for retrieval");

  Trainer tr(bank, config);
  ModelParams params = ModelParams::init(tr.model_config(), derive_seed(config.seed, {1}));

  std::vector<std::size_t> order(bank.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(config.seed, {2}));
  std::shuffle(order.begin(), order.end(), split_rng);
  const auto n_heldout = static_cast<std::size_t>(
      std::floor(config.heldout_fraction * static_cast<double>(bank.size()) + 0.5));
  std::vector<std::size_t> heldout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_heldout));
  std::vector<std::size_t> train_ids(order.begin() + static_cast<std::ptrdiff_t>(n_heldout), order.end());
  if (train_ids.empty()) throw ConfigError("--heldout-fraction leaves no training captions");
  std::sort(heldout.begin(), heldout.end());
  std::sort(train_ids.begin(), train_ids.end());

  TrainResult result{params, tr.vocab, {}, 0, 0.0, 0.0};
  auto emit = [&](TrainLogRecord r) {
    if (observer) observer(r);
    result.log.push_back(std::move(r));
  };

  std::vector<double> grads(params.parameter_count());
  std::optional<double> best_heldout;
  double best_train_loss = 0.0;
  std::size_t stale = 0;
  bool first_batch = true;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, {5, epoch}));
    std::shuffle(train_ids.begin(), train_ids.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < train_ids.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(start + config.batch_size, train_ids.size());
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grads.begin(), grads.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b)
        batch_loss += tr.sample(params, train_ids[b], epoch, config.noise, config.loss, scale, &grads);
      batch_loss *= scale;
      if (!std::isfinite(batch_loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(batch_index));
      if (first_batch) {
        result.initial_loss = batch_loss;
        first_batch = false;
      }
      if (config.grad_clip > 0.0) {
        const double norm = global_norm(grads);
        if (norm > config.grad_clip)
          for (double& g : grads) g *= config.grad_clip / norm;
      }
      params.step += 1;
      adamw_step(params.values(), grads, params.first_moment, params.second_moment, params.step,
                 config.optimizer);
      epoch_loss += batch_loss * static_cast<double>(end - start);
      emit({epoch, batch_index, batch_loss, std::nullopt});
    }
    epoch_loss /= static_cast<double>(train_ids.size());
    result.epochs_run = epoch;

    std::optional<double> heldout_loss;
    if (!heldout.empty()) {
      double h = 0.0;
      for (std::size_t i : heldout) h += tr.sample(params, i, 0, NoiseMode::kNone, LossMode::kMixture, 0.0, nullptr);
      heldout_loss = h / static_cast<double>(heldout.size());
      if (!std::isfinite(*heldout_loss)) throw NumericalError("held-out loss is not finite");
    }
    emit({epoch, std::nullopt, epoch_loss, heldout_loss});

    if (!heldout_loss) {
      result.params = params;
      best_train_loss = epoch_loss;
      continue;
    }
    if (!best_heldout || *heldout_loss < *best_heldout) {
      best_heldout = heldout_loss;
      result.params = params;
      best_train_loss = epoch_loss;
      stale = 0;
    } else if (config.early_stop_patience > 0 && ++stale >= config.early_stop_patience) {
      break;
    }
  }
  result.final_loss = best_train_loss;
  return result;
}

}  // namespace sgcap
