#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgcap/text.hpp"

namespace sgcap {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  std::size_t dim = 64;  // must equal the bank embedding dimension
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_dim = 256;
  std::size_t fusion_ffn_dim = 256;
  std::size_t vocab_size = 0;
  std::size_t max_slots = 16;   // fusion context slots (caption/content vector + group)
  std::size_t max_tokens = 32;  // decoder input positions (BOS + generated tokens)
  bool fusion_positions = false;

  // 512-d embeddings with 4096-wide feed-forward layers.
  static ModelConfig full_scale(std::size_t vocab_size);

  // Throws ConfigError for zero sizes or heads not dividing dim.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TensorSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
};

struct AttentionSlots {
  std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
};

struct BlockSlots {
  std::size_t ln1_g, ln1_b;
  AttentionSlots attn;
  std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
};

struct FusionSlots {
  std::optional<std::size_t> pos;
  std::size_t ffn_ln_g, ffn_ln_b, w1, b1, w2, b2;
  std::size_t attn_ln_g, attn_ln_b;
  AttentionSlots attn;
};

struct DecoderSlots {
  std::size_t tok_emb, pos_emb;
  std::vector<BlockSlots> blocks;
  std::size_t lnf_g, lnf_b, out_w, out_b;
};

// All fusion and decoder parameters in one flat buffer, laid out in
// declaration order, plus AdamW moment buffers of identical layout.
class ModelParams {
 public:
  // Zero-filled parameters (layer-norm gains included).
  static ModelParams zeros(const ModelConfig& config);
  // Gaussian(0, 0.02) weights, residual output projections scaled by
  // 1/sqrt(2 * layers), zero biases, unit layer-norm gains. Deterministic per seed.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorSlot>& tensors() const { return tensors_; }
  const FusionSlots& fusion() const { return fusion_; }
  const DecoderSlots& decoder() const { return decoder_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t parameter_count() const { return values_.size(); }

  Eigen::Map<Matrix> tensor(std::size_t slot) { return view(values_, slot); }
  Eigen::Map<const Matrix> tensor(std::size_t slot) const { return view(values_, slot); }

  Eigen::Map<Matrix> view(std::vector<double>& buffer, std::size_t slot) const;
  Eigen::Map<const Matrix> view(const std::vector<double>& buffer, std::size_t slot) const;

  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

 private:
  explicit ModelParams(const ModelConfig& config);
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  ModelConfig config_;
  std::vector<TensorSlot> tensors_;
  FusionSlots fusion_{};
  DecoderSlots decoder_{};
  std::vector<double> values_;
};

// ---- Forward traces retained for backpropagation ----

struct LayerNormTrace {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

struct AttentionTrace {
  Matrix x;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one (S x S) matrix per head
  Matrix context;
};

struct FeedForwardTrace {
  Matrix x;
  Matrix pre;  // pre-activation
  Matrix act;  // GELU output
};

struct FusionTrace {
  LayerNormTrace ffn_ln;
  FeedForwardTrace ffn;
  LayerNormTrace attn_ln;
  AttentionTrace attn;
};

struct BlockTrace {
  LayerNormTrace ln1;
  AttentionTrace attn;
  LayerNormTrace ln2;
  FeedForwardTrace ffn;
};

struct DecoderTrace {
  std::vector<TokenId> tokens;
  std::size_t prefix_len = 0;
  std::vector<BlockTrace> blocks;
  LayerNormTrace lnf;
  Matrix final_hidden;  // token rows after the final layer norm
};

// Slot inputs (rows) -> fused prefix (rows, same order). Each slot passes the
// shared pre-norm FFN with a residual, then one pre-norm multi-head
// self-attention layer over all slots with a residual.
Matrix fusion_forward(const ModelParams& params, const Matrix& slots, FusionTrace* trace = nullptr);
Matrix fusion_forward(const ModelParams& params, std::span<const double> caption_embedding,
                      std::span<const std::vector<double>> group);
void fusion_backward(const ModelParams& params, const FusionTrace& trace, const Matrix& d_out,
                     std::vector<double>& grads);

// Causal logits (T x v) for decoder input tokens (tokens[0] is normally BOS).
// Prefix rows occupy positions 0..P-1; token t sits at position P + t.
Matrix decoder_forward(const ModelParams& params, const Matrix& prefix,
                       std::span<const TokenId> tokens, DecoderTrace* trace = nullptr);
// Returns d loss / d prefix and accumulates parameter gradients into grads.
Matrix decoder_backward(const ModelParams& params, const DecoderTrace& trace,
                        const Matrix& d_logits, std::vector<double>& grads);

// Mean per-token negative log-likelihood of `candidate` (which ends with EOS)
// under teacher forcing with inputs [BOS, candidate[0..T-2]].
double teacher_forced_ce(const ModelParams& params, const Matrix& prefix,
                         std::span<const TokenId> candidate);

// Forward pass over one training sample: fused slots plus a set of
// teacher-forced candidates, retained for a weighted backward pass.
class SampleGraph {
 public:
  SampleGraph(const ModelParams& params, const Matrix& slots,
              std::span<const std::vector<TokenId>> candidates);

  const std::vector<double>& candidate_ce() const { return ce_; }
  const Matrix& prefix() const { return prefix_; }

  // grads += scale * d(sum_i weights[i] * CE_i)/d(params). Zero-weight
  // candidates are skipped.
  void backward(std::span<const double> weights, double scale, std::vector<double>& grads) const;

 private:
  const ModelParams& params_;
  FusionTrace fusion_;
  Matrix prefix_;
  std::vector<std::vector<TokenId>> candidates_;
  std::vector<DecoderTrace> traces_;
  std::vector<Matrix> probs_;  // softmax of logits per candidate
  std::vector<double> ce_;
};

// SGCM checkpoint (little-endian):
//   "SGCM" | u32 version=1 | config block | vocabulary block |
//   u32 tensor count | per tensor { u32 rows, u32 cols, rows*cols f32 }
// The config block is nine u32 values: dim, heads, layers, ffn_dim,
// fusion_ffn_dim, vocab_size, max_slots, max_tokens, flags (bit 0 =
// fusion positions). The vocabulary block is u32 count followed by
// {u16 length, bytes} for every non-reserved word in id order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const Vocabulary& vocab);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgcap
