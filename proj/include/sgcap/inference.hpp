#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sgcap/bank.hpp"
#include "sgcap/model.hpp"
#include "sgcap/text.hpp"

namespace sgcap {

// Precomputed per-frame visual embeddings of one video.
struct FrameSet {
  std::string video_id;
  std::size_t dim = 0;
  std::vector<std::vector<float>> frames;

  std::size_t size() const { return frames.size(); }
};

// SGCF format (little-endian):
//   "SGCF" | u32 version=1 | u32 id_len, id bytes | u32 N_f | u32 d | N_f*d f32
inline constexpr std::uint32_t kFrameFormatVersion = 1;

std::vector<std::uint8_t> encode_frames(const FrameSet& frames);
FrameSet decode_frames(std::span<const std::uint8_t> bytes);
void save_frames(const FrameSet& frames, const std::filesystem::path& path);
FrameSet load_frames(const std::filesystem::path& path);

// Arithmetic mean over frames. Throws ConfigError on an empty set.
std::vector<double> pool_frames(const FrameSet& frames);

// round(j * (N_f - 1) / (k - 1)) for j = 0..k-1, halves to even; the middle
// frame round((N_f - 1) / 2) when k = 1.
std::vector<std::size_t> uniform_frame_indices(std::size_t n_frames, std::size_t k);
std::vector<std::vector<double>> sample_frames(const FrameSet& frames, std::size_t k);

// softmax_i(cos(visual, T_i) / tau) over the bank.
std::vector<double> transfer_weights(std::span<const double> visual, const SentenceBank& bank,
                                     double tau);
// Weighted sum of raw bank embeddings under transfer_weights. A zero visual
// vector yields uniform weights (the bank mean) and a warning on stderr.
std::vector<double> domain_transfer(std::span<const double> visual, const SentenceBank& bank,
                                    double tau);

struct CaptionHypothesis {
  std::vector<TokenId> tokens;  // generated tokens, EOS included when finished
  double log_prob = 0.0;
  bool finished = false;

  // log_prob / token count.
  double normalized_score() const;
};

// Greedy argmax decoding from the fused prefix.
CaptionHypothesis greedy_decode(const ModelParams& params, const Matrix& prefix, std::size_t max_len);

// Beam search over cumulative log-probability; results ranked by
// length-normalized score. The greedy path is never pruned, so beam 1 is
// exactly greedy decoding and the best result never scores below greedy.
std::vector<CaptionHypothesis> beam_search(const ModelParams& params, const Matrix& prefix,
                                           std::size_t beam_size, std::size_t max_len);

struct GenerateConfig {
  std::size_t k = 5;
  double tau = 0.01;
  std::size_t beam_size = 5;
  std::size_t max_len = 30;
};

// Builds the fused inputs for one video: the transferred pooled vector
// followed by the k transferred uniformly sampled frames.
Matrix inference_slots(const FrameSet& frames, const SentenceBank& bank, std::size_t k, double tau);

std::vector<CaptionHypothesis> generate(const FrameSet& frames, const SentenceBank& bank,
                                        const ModelParams& params, const GenerateConfig& config);

}  // namespace sgcap
