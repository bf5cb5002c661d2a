#include "sgcap/bank.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgcap/binary_io.hpp"
#include "sgcap/error.hpp"

namespace sgcap {

SentenceBank SentenceBank::build(std::vector<SentenceRecord> corpus) {
  if (corpus.empty()) throw ConfigError("sentence bank: empty corpus");
  const std::size_t d = corpus.front().embedding.size();
  if (d == 0) throw ConfigError("sentence bank: embedding dimension is zero");

  SentenceBank bank;
  bank.dim_ = d;
  bank.norms_.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& rec = corpus[i];
    if (rec.embedding.size() != d) {
      throw ConfigError("sentence bank: dimension mismatch at record " + std::to_string(i) +
                        " (expected " + std::to_string(d) + ", got " +
                        std::to_string(rec.embedding.size()) + ")");
    }
    double sq = 0.0;
    for (float x : rec.embedding) {
      if (!std::isfinite(x))
        throw ConfigError("sentence bank: non-finite embedding at record " + std::to_string(i));
      sq += static_cast<double>(x) * x;
    }
    bank.norms_.push_back(std::sqrt(sq));
    std::sort(rec.tokens.begin(), rec.tokens.end());
    rec.tokens.erase(std::unique(rec.tokens.begin(), rec.tokens.end()), rec.tokens.end());
  }
  bank.records_ = std::move(corpus);
  return bank;
}

bool operator==(const SentenceBank& a, const SentenceBank& b) {
  if (a.dim_ != b.dim_ || a.records_.size() != b.records_.size()) return false;
  for (std::size_t i = 0; i < a.records_.size(); ++i) {
    const auto& x = a.records_[i];
    const auto& y = b.records_[i];
    if (x.text != y.text || x.tokens != y.tokens) return false;
    // Bitwise comparison: -0.0 vs 0.0 must not compare equal after a round trip.
    if (!std::equal(x.embedding.begin(), x.embedding.end(), y.embedding.begin(),
                    [](float p, float q) {
                      return std::bit_cast<std::uint32_t>(p) == std::bit_cast<std::uint32_t>(q);
                    }))
      return false;
  }
  return true;
}

double BankStats::mean_stddev() const {
  if (variance.empty()) return 0.0;
  double s = 0.0;
  for (double v : variance) s += std::sqrt(v);
  return s / static_cast<double>(variance.size());
}

BankStats compute_stats(const SentenceBank& bank) {
  const std::size_t n = bank.size();
  const std::size_t d = bank.dim();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto e = bank.embedding(i);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = e[j];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  BankStats stats;
  stats.mean.assign(mean.data(), mean.data() + d);
  stats.variance.resize(d);
  for (std::size_t j = 0; j < d; ++j) stats.variance[j] = std::max(0.0, cov(j, j));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const auto& ev = solver.eigenvalues();
  stats.covariance_eigenvalues.assign(ev.data(), ev.data() + d);
  for (double& v : stats.covariance_eigenvalues) v = std::max(0.0, v);
  std::stable_sort(stats.covariance_eigenvalues.begin(), stats.covariance_eigenvalues.end(),
                   std::greater<>());
  return stats;
}

std::size_t effective_dimension(std::span<const double> eigenvalues, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (!(total > 0.0)) throw ConfigError("effective dimension undefined: eigenvalues sum to zero");
  double running = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    running += eigenvalues[i];
    if (eigenvalues[i] > 0.0) last_nonzero = i + 1;
    if (running / total >= gamma) return i + 1;
  }
  // Rounding in the running sum can leave the ratio a hair below 1.
  return last_nonzero;
}

std::size_t effective_dimension(const BankStats& stats, double gamma) {
  return effective_dimension(stats.covariance_eigenvalues, gamma);
}

std::vector<std::uint8_t> encode_bank(const SentenceBank& bank) {
  io::ByteWriter w;
  w.magic("SGCB");
  w.u32(kBankFormatVersion);
  w.u64(bank.size());
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  for (const auto& rec : bank.records()) {
    if (rec.text.size() > std::numeric_limits<std::uint32_t>::max())
      throw ConfigError("sentence text too long to encode");
    w.u32(static_cast<std::uint32_t>(rec.text.size()));
    w.bytes(rec.text);
    if (rec.tokens.size() > std::numeric_limits<std::uint16_t>::max())
      throw ConfigError("too many tokens to encode in one record");
    w.u16(static_cast<std::uint16_t>(rec.tokens.size()));
    for (const auto& t : rec.tokens) {
      if (t.size() > std::numeric_limits<std::uint16_t>::max())
        throw ConfigError("token too long to encode");
      w.u16(static_cast<std::uint16_t>(t.size()));
      w.bytes(t);
    }
    for (float x : rec.embedding) w.f32(x);
  }
  return w.buffer();
}

SentenceBank decode_bank(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("SGCB", "SGCB bank");
  const auto version = r.u32("version");
  if (version != kBankFormatVersion)
    throw FormatError("SGCB version mismatch: file has " + std::to_string(version) +
                      ", expected " + std::to_string(kBankFormatVersion));
  const auto n = r.u64("sentence count");
  const auto d = r.u32("dimension");
  if (n == 0) throw FormatError("SGCB: bank holds no sentences");
  if (d == 0) throw FormatError("SGCB: zero embedding dimension");
  // Each record takes at least 6 + 4d bytes; reject absurd counts before allocating.
  if (n > r.remaining() / (6 + 4 * static_cast<std::uint64_t>(d)))
    throw FormatError("truncated file: SGCB header declares " + std::to_string(n) +
                      " records but only " + std::to_string(r.remaining()) + " bytes follow");

  std::vector<SentenceRecord> records(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& rec = records[i];
    rec.text = r.bytes(r.u32("text length"), "text");
    const auto nt = r.u16("token count");
    rec.tokens.reserve(nt);
    for (std::uint16_t t = 0; t < nt; ++t) rec.tokens.push_back(r.bytes(r.u16("token length"), "token"));
    rec.embedding.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) {
      float x = r.f32("embedding");
      if (!std::isfinite(x))
        throw FormatError("SGCB: non-finite embedding value in record " + std::to_string(i));
      rec.embedding[j] = x;
    }
  }
  if (r.remaining() != 0)
    throw FormatError("SGCB: " + std::to_string(r.remaining()) + " trailing bytes after last record");
  return SentenceBank::build(std::move(records));
}

void save_bank(const SentenceBank& bank, const std::filesystem::path& path) {
  io::write_file(path, encode_bank(bank));
}

SentenceBank load_bank(const std::filesystem::path& path) { return decode_bank(io::read_file(path)); }

}  // namespace sgcap
