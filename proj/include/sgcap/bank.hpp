#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sgcap {

// One caption: text, its content-word set, and its embedding.
struct SentenceRecord {
  std::string text;
  std::vector<std::string> tokens;  // sorted, unique
  std::vector<float> embedding;
};

// Immutable, ordered sentence collection. Indices are stable identifiers.
class SentenceBank {
 public:
  // Throws ConfigError on an empty corpus, a dimension mismatch, a zero
  // dimension, or a non-finite embedding component. Token lists are sorted
  // and deduplicated.
  static SentenceBank build(std::vector<SentenceRecord> corpus);

  std::size_t size() const { return records_.size(); }
  std::size_t dim() const { return dim_; }

  const SentenceRecord& record(std::size_t i) const { return records_.at(i); }
  const std::vector<SentenceRecord>& records() const { return records_; }
  std::span<const float> embedding(std::size_t i) const { return records_.at(i).embedding; }
  // L2 norm of embedding i, accumulated in double.
  double norm(std::size_t i) const { return norms_[i]; }

  friend bool operator==(const SentenceBank& a, const SentenceBank& b);

 private:
  std::vector<SentenceRecord> records_;
  std::vector<double> norms_;
  std::size_t dim_ = 0;
};

inline SentenceBank build_bank(std::vector<SentenceRecord> corpus) {
  return SentenceBank::build(std::move(corpus));
}

// Per-dimension statistics of the bank embeddings.
struct BankStats {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance (divisor N_s)
  std::vector<double> covariance_eigenvalues;  // nonincreasing, clamped at 0

  std::size_t dim() const { return mean.size(); }
  // Mean over dimensions of the per-dimension standard deviation.
  double mean_stddev() const;
};

BankStats compute_stats(const SentenceBank& bank);

// Smallest d' whose leading eigenvalues explain at least `gamma` of the total.
// Throws ConfigError if gamma is outside (0, 1] or all eigenvalues are zero.
std::size_t effective_dimension(const BankStats& stats, double gamma);
std::size_t effective_dimension(std::span<const double> eigenvalues, double gamma);

// SGCB binary format (little-endian):
//   "SGCB" | u32 version=1 | u64 N_s | u32 d |
//   N_s x { u32 text_len, text | u16 n_tokens, n_tokens x {u16 len, bytes} | d x f32 }
inline constexpr std::uint32_t kBankFormatVersion = 1;

std::vector<std::uint8_t> encode_bank(const SentenceBank& bank);
SentenceBank decode_bank(std::span<const std::uint8_t> bytes);
void save_bank(const SentenceBank& bank, const std::filesystem::path& path);
SentenceBank load_bank(const std::filesystem::path& path);

}  // namespace sgcap
