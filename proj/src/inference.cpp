#include "sgcap/inference.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "sgcap/binary_io.hpp"
#include "sgcap/error.hpp"
#include "sgcap/similarity.hpp"
#include "sgcap/supervision.hpp"

namespace sgcap {

std::vector<std::uint8_t> encode_frames(const FrameSet& fs) {
  if (fs.frames.empty()) throw ConfigError("frame set is empty");
  io::ByteWriter w;
  w.magic("SGCF");
  w.u32(kFrameFormatVersion);
  w.u32(static_cast<std::uint32_t>(fs.video_id.size()));
  w.bytes(fs.video_id);
  w.u32(static_cast<std::uint32_t>(fs.frames.size()));
  w.u32(static_cast<std::uint32_t>(fs.dim));
  for (const auto& f : fs.frames) {
    if (f.size() != fs.dim) throw ConfigError("frame dimension mismatch in " + fs.video_id);
    for (float x : f) w.f32(x);
  }
  return w.buffer();
}

FrameSet decode_frames(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("SGCF", "SGCF frame");
  const auto version = r.u32("version");
  if (version != kFrameFormatVersion)
    throw FormatError("SGCF version mismatch: file has " + std::to_string(version) + ", expected " +
                      std::to_string(kFrameFormatVersion));
  FrameSet fs;
  fs.video_id = r.bytes(r.u32("video id length"), "video id");
  const auto n = r.u32("frame count");
  const auto d = r.u32("dimension");
  if (n == 0) throw FormatError("SGCF: no frames in " + fs.video_id);
  if (d == 0) throw FormatError("SGCF: zero dimension in " + fs.video_id);
  if (static_cast<std::uint64_t>(n) * d * 4 != r.remaining())
    throw FormatError("truncated file: SGCF '" + fs.video_id + "' declares " + std::to_string(n) + "x" +
                      std::to_string(d) + " floats but holds " + std::to_string(r.remaining()) + " bytes");
  fs.dim = d;
  fs.frames.assign(n, std::vector<float>(d));
  for (auto& f : fs.frames)
    for (auto& x : f) {
      x = r.f32("frame value");
      if (!std::isfinite(x)) throw FormatError("SGCF: non-finite value in " + fs.video_id);
    }
  return fs;
}

void save_frames(const FrameSet& frames, const std::filesystem::path& path) {
  io::write_file(path, encode_frames(frames));
}

FrameSet load_frames(const std::filesystem::path& path) { return decode_frames(io::read_file(path)); }

std::vector<double> pool_frames(const FrameSet& fs) {
  if (fs.frames.empty()) throw ConfigError("pool_frames: empty frame set");
  std::vector<double> out(fs.dim, 0.0);
  for (const auto& f : fs.frames)
    for (std::size_t j = 0; j < fs.dim; ++j) out[j] += f[j];
  for (double& x : out) x /= static_cast<double>(fs.frames.size());
  return out;
}

std::vector<std::size_t> uniform_frame_indices(std::size_t n_frames, std::size_t k) {
  if (n_frames == 0) throw ConfigError("uniform_frame_indices: no frames");
  if (k == 0) return {};
  // Halves round to even (10 frames, k = 5 picks frame 4, not 5, for 4.5).
  const auto nearest = [](double x) { return static_cast<std::size_t>(std::nearbyint(x)); };
  const double last = static_cast<double>(n_frames - 1);
  if (k == 1) return {nearest(last / 2.0)};
  std::vector<std::size_t> idx(k);
  for (std::size_t j = 0; j < k; ++j) idx[j] = nearest(static_cast<double>(j) * last / static_cast<double>(k - 1));
  return idx;
}

std::vector<std::vector<double>> sample_frames(const FrameSet& fs, std::size_t k) {
  if (k == 0) throw ConfigError("sample_frames: k must be >= 1");
  std::vector<std::vector<double>> out;
  for (std::size_t i : uniform_frame_indices(fs.size(), k))
    out.emplace_back(fs.frames[i].begin(), fs.frames[i].end());
  return out;
}

std::vector<double> transfer_weights(std::span<const double> visual, const SentenceBank& bank, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (visual.size() != bank.dim()) throw ConfigError("visual dimension does not match bank");
  double vn = 0.0;
  for (double x : visual) {
    if (!std::isfinite(x)) throw ConfigError("visual embedding is not finite");
    vn += x * x;
  }
  vn = std::sqrt(vn);
  std::vector<double> logits(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto e = bank.embedding(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) dot += visual[j] * e[j];
    const double bn = bank.norm(i);
    logits[i] = (vn == 0.0 || bn == 0.0 ? 0.0 : dot / (vn * bn)) / tau;
  }
  return softmax(logits);
}

std::vector<double> domain_transfer(std::span<const double> visual, const SentenceBank& bank, double tau) {
  const bool zero = std::all_of(visual.begin(), visual.end(), [](double x) { return x == 0.0; });
  if (zero && !visual.empty())
    std::cerr << "warning: zero visual vector; domain transfer returns the bank mean\n";
  const auto w = transfer_weights(visual, bank, tau);
  std::vector<double> out(bank.dim(), 0.0);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (w[i] == 0.0) continue;
    const auto e = bank.embedding(i);
    for (std::size_t j = 0; j < e.size(); ++j) out[j] += w[i] * e[j];
  }
  return out;
}

double CaptionHypothesis::normalized_score() const {
  return tokens.empty() ? 0.0 : log_prob / static_cast<double>(tokens.size());
}

namespace {

std::vector<double> next_log_probs(const ModelParams& params, const Matrix& prefix,
                                   const std::vector<TokenId>& generated) {
  std::vector<TokenId> in;
  in.reserve(generated.size() + 1);
  in.push_back(Vocabulary::kBos);
  in.insert(in.end(), generated.begin(), generated.end());
  Matrix logits = decoder_forward(params, prefix, in);
  const auto last = logits.row(logits.rows() - 1);
  const double mx = last.maxCoeff();
  const double lse = mx + std::log((last.array() - mx).exp().sum());
  std::vector<double> out(static_cast<std::size_t>(last.size()));
  for (Eigen::Index t = 0; t < last.size(); ++t) out[static_cast<std::size_t>(t)] = last(t) - lse;
  return out;
}

// Lowest-index argmax.
TokenId argmax(const std::vector<double>& v) {
  return static_cast<TokenId>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_max_len(const ModelParams& params, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be >= 1");
  if (max_len > params.config().max_tokens)
    throw ConfigError("max_len " + std::to_string(max_len) + " exceeds the model's " +
                      std::to_string(params.config().max_tokens) + " token positions");
}

struct Expansion {
  std::size_t parent;
  TokenId token;
  double log_prob;
};

bool expansion_before(const Expansion& a, const Expansion& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

}  // namespace

CaptionHypothesis greedy_decode(const ModelParams& params, const Matrix& prefix, std::size_t max_len) {
  check_max_len(params, max_len);
  CaptionHypothesis h;
  while (h.tokens.size() < max_len) {
    const auto lp = next_log_probs(params, prefix, h.tokens);
    const TokenId t = argmax(lp);
    h.tokens.push_back(t);
    h.log_prob += lp[static_cast<std::size_t>(t)];
    if (t == Vocabulary::kEos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

std::vector<CaptionHypothesis> beam_search(const ModelParams& params, const Matrix& prefix,
                                           std::size_t beam_size, std::size_t max_len) {
  check_max_len(params, max_len);
  if (beam_size == 0) throw ConfigError("beam size must be >= 1");

  std::vector<CaptionHypothesis> alive(1);
  std::vector<CaptionHypothesis> done;
  // Position of the greedy path in `alive`, until it emits EOS.
  std::optional<std::size_t> anchor = 0;

  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Expansion> pool;
    std::optional<Expansion> anchor_child;
    for (std::size_t a = 0; a < alive.size(); ++a) {
      const auto lp = next_log_probs(params, prefix, alive[a].tokens);
      std::vector<TokenId> order(lp.size());
      std::iota(order.begin(), order.end(), 0);
      const std::size_t keep = std::min(beam_size, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                        [&](TokenId x, TokenId y) {
                          const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
                          return lp[ux] != lp[uy] ? lp[ux] > lp[uy] : x < y;
                        });
      for (std::size_t j = 0; j < keep; ++j)
        pool.push_back({a, order[j], alive[a].log_prob + lp[static_cast<std::size_t>(order[j])]});
      if (anchor && *anchor == a) {
        const TokenId g = argmax(lp);
        anchor_child = Expansion{a, g, alive[a].log_prob + lp[static_cast<std::size_t>(g)]};
      }
    }
    std::sort(pool.begin(), pool.end(), expansion_before);
    pool.resize(std::min(pool.size(), beam_size));
    if (anchor_child) {
      const bool kept = std::any_of(pool.begin(), pool.end(), [&](const Expansion& e) {
        return e.parent == anchor_child->parent && e.token == anchor_child->token;
      });
      if (!kept) pool.back() = *anchor_child;
    }

    std::vector<CaptionHypothesis> next;
    std::optional<std::size_t> next_anchor;
    for (const auto& e : pool) {
      CaptionHypothesis h = alive[e.parent];
      h.tokens.push_back(e.token);
      h.log_prob = e.log_prob;
      const bool is_anchor = anchor_child && e.parent == anchor_child->parent && e.token == anchor_child->token;
      if (e.token == Vocabulary::kEos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        if (is_anchor) next_anchor = next.size();
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    anchor = next_anchor;
    if (done.size() >= beam_size && !anchor) {
      alive.clear();
      break;
    }
  }
  // Whatever is still alive hit max_len without EOS.
  for (auto& h : alive) done.push_back(std::move(h));

  std::stable_sort(done.begin(), done.end(), [](const CaptionHypothesis& a, const CaptionHypothesis& b) {
    return a.normalized_score() > b.normalized_score();
  });
  return done;
}

Matrix inference_slots(const FrameSet& frames, const SentenceBank& bank, std::size_t k, double tau) {
  if (frames.dim != bank.dim()) throw ConfigError("frame dimension does not match bank dimension");
  std::vector<std::vector<double>> vecs;
  vecs.push_back(domain_transfer(pool_frames(frames), bank, tau));
  if (k > 0)
    for (const auto& f : sample_frames(frames, k)) vecs.push_back(domain_transfer(f, bank, tau));
  Matrix slots(static_cast<Eigen::Index>(vecs.size()), static_cast<Eigen::Index>(bank.dim()));
  for (std::size_t r = 0; r < vecs.size(); ++r)
    for (std::size_t j = 0; j < bank.dim(); ++j)
      slots(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = vecs[r][j];
  return slots;
}

std::vector<CaptionHypothesis> generate(const FrameSet& frames, const SentenceBank& bank,
                                        const ModelParams& params, const GenerateConfig& config) {
  if (config.k + 1 > params.config().max_slots)
    throw ConfigError("--k " + std::to_string(config.k) + " needs " + std::to_string(config.k + 1) +
                      " fusion slots; the model was trained with " +
                      std::to_string(params.config().max_slots));
  const Matrix prefix = fusion_forward(params, inference_slots(frames, bank, config.k, config.tau));
  return beam_search(params, prefix, config.beam_size, config.max_len);
}

}  // namespace sgcap
