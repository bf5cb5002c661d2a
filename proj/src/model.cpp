#include "sgcap/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "sgcap/binary_io.hpp"
#include "sgcap/error.hpp"
#include "sgcap/rng.hpp"

namespace sgcap {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

Eigen::Map<const RowVec> row_view(const std::vector<double>& buf, const TensorSlot& s) {
  return {buf.data() + s.offset, static_cast<Eigen::Index>(s.size())};
}

Eigen::Map<RowVec> row_view(std::vector<double>& buf, const TensorSlot& s) {
  return {buf.data() + s.offset, static_cast<Eigen::Index>(s.size())};
}

// ---- layer norm ----

Matrix layer_norm(const ModelParams& p, const Matrix& x, std::size_t g_slot, std::size_t b_slot,
                  LayerNormTrace* trace) {
  const auto g = row_view(p.values(), p.tensors()[g_slot]);
  const auto b = row_view(p.values(), p.tensors()[b_slot]);
  const auto n = static_cast<double>(x.cols());
  Matrix xhat(x.rows(), x.cols());
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mu).square().sum() / n;
    rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mu) * rstd(r);
  }
  Matrix y = (xhat.array().rowwise() * g.array()).matrix();
  y.rowwise() += b;
  if (trace) {
    trace->xhat = std::move(xhat);
    trace->rstd = std::move(rstd);
  }
  return y;
}

Matrix layer_norm_backward(const ModelParams& p, const LayerNormTrace& t, const Matrix& dy,
                           std::size_t g_slot, std::size_t b_slot, std::vector<double>& grads) {
  const auto g = row_view(p.values(), p.tensors()[g_slot]);
  auto dg = row_view(grads, p.tensors()[g_slot]);
  auto db = row_view(grads, p.tensors()[b_slot]);
  dg += (dy.array() * t.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();

  const auto n = static_cast<double>(dy.cols());
  Matrix dxhat = (dy.array().rowwise() * g.array()).matrix();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() / n;
    const double m2 = dxhat.row(r).dot(t.xhat.row(r)) / n;
    dx.row(r) = t.rstd(r) * (dxhat.row(r).array() - m1 - t.xhat.row(r).array() * m2);
  }
  return dx;
}

// ---- linear ----

Matrix linear(const ModelParams& p, const Matrix& x, std::size_t w_slot, std::size_t b_slot) {
  Matrix y = x * p.tensor(w_slot);
  y.rowwise() += row_view(p.values(), p.tensors()[b_slot]);
  return y;
}

Matrix linear_backward(const ModelParams& p, const Matrix& x, const Matrix& dy, std::size_t w_slot,
                       std::size_t b_slot, std::vector<double>& grads) {
  p.view(grads, w_slot).noalias() += x.transpose() * dy;
  row_view(grads, p.tensors()[b_slot]) += dy.colwise().sum();
  return dy * p.tensor(w_slot).transpose();
}

// ---- GELU feed-forward ----

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix feed_forward(const ModelParams& p, const Matrix& x, std::size_t w1, std::size_t b1,
                    std::size_t w2, std::size_t b2, FeedForwardTrace* trace) {
  Matrix pre = linear(p, x, w1, b1);
  Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
  Matrix y = linear(p, act, w2, b2);
  if (trace) {
    trace->x = x;
    trace->pre = std::move(pre);
    trace->act = std::move(act);
  }
  return y;
}

Matrix feed_forward_backward(const ModelParams& p, const FeedForwardTrace& t, const Matrix& dy,
                             std::size_t w1, std::size_t b1, std::size_t w2, std::size_t b2,
                             std::vector<double>& grads) {
  Matrix dact = linear_backward(p, t.act, dy, w2, b2, grads);
  Matrix dpre = (dact.array() * t.pre.unaryExpr([](double v) { return gelu_grad(v); }).array()).matrix();
  return linear_backward(p, t.x, dpre, w1, b1, grads);
}

// ---- multi-head self-attention ----

Matrix attention(const ModelParams& p, const Matrix& x, const AttentionSlots& s, bool causal,
                 AttentionTrace* trace) {
  const auto heads = static_cast<Eigen::Index>(p.config().heads);
  const Eigen::Index d = x.cols();
  const Eigen::Index dh = d / heads;
  const Eigen::Index n = x.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix q = linear(p, x, s.wq, s.bq);
  Matrix k = linear(p, x, s.wk, s.bk);
  Matrix v = linear(p, x, s.wv, s.bv);
  Matrix ctx(n, d);
  std::vector<Matrix> probs;
  probs.reserve(static_cast<std::size_t>(heads));
  for (Eigen::Index h = 0; h < heads; ++h) {
    Matrix scores = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index last = causal ? i + 1 : n;
      const double mx = scores.row(i).head(last).maxCoeff();
      double z = 0.0;
      for (Eigen::Index j = 0; j < last; ++j) z += a(i, j) = std::exp(scores(i, j) - mx);
      a.row(i).head(last) /= z;
    }
    ctx.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
    probs.push_back(std::move(a));
  }
  Matrix y = linear(p, ctx, s.wo, s.bo);
  if (trace) {
    trace->x = x;
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->v = std::move(v);
    trace->probs = std::move(probs);
    trace->context = std::move(ctx);
  }
  return y;
}

Matrix attention_backward(const ModelParams& p, const AttentionTrace& t, const Matrix& dy,
                          const AttentionSlots& s, std::vector<double>& grads) {
  const auto heads = static_cast<Eigen::Index>(p.config().heads);
  const Eigen::Index d = t.x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dctx = linear_backward(p, t.context, dy, s.wo, s.bo, grads);
  Matrix dq(t.q.rows(), d), dk(t.k.rows(), d), dv(t.v.rows(), d);
  for (Eigen::Index h = 0; h < heads; ++h) {
    const Matrix& a = t.probs[static_cast<std::size_t>(h)];
    Matrix dctx_h = dctx.middleCols(h * dh, dh);
    Matrix da = dctx_h * t.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = a.transpose() * dctx_h;
    // Softmax Jacobian; masked entries have a == 0 and drop out.
    Eigen::VectorXd inner = (da.array() * a.array()).rowwise().sum();
    Matrix ds = (a.array() * (da.colwise() - inner).array()).matrix() * scale;
    dq.middleCols(h * dh, dh) = ds * t.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = ds.transpose() * t.q.middleCols(h * dh, dh);
  }
  Matrix dx = linear_backward(p, t.x, dq, s.wq, s.bq, grads);
  dx += linear_backward(p, t.x, dk, s.wk, s.bk, grads);
  dx += linear_backward(p, t.x, dv, s.wv, s.bv, grads);
  return dx;
}

void check_tokens(const ModelParams& p, std::span<const TokenId> tokens) {
  for (TokenId t : tokens)
    if (t < 0 || static_cast<std::size_t>(t) >= p.config().vocab_size)
      throw ConfigError("invalid token id " + std::to_string(t));
}

}  // namespace

// ---- config / parameters ----

ModelConfig ModelConfig::full_scale(std::size_t vocab_size) {
  ModelConfig c;
  c.dim = 512;
  c.heads = 8;
  c.layers = 12;
  c.ffn_dim = 4096;
  c.fusion_ffn_dim = 4096;
  c.vocab_size = vocab_size;
  return c;
}

void ModelConfig::validate() const {
  if (dim == 0) throw ConfigError("model dim must be positive");
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("heads (" + std::to_string(heads) + ") must divide dim (" +
                      std::to_string(dim) + ")");
  if (layers == 0) throw ConfigError("layers must be positive");
  if (ffn_dim == 0 || fusion_ffn_dim == 0) throw ConfigError("ffn sizes must be positive");
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kUnk))
    throw ConfigError("vocab_size must exceed the reserved ids");
  if (max_slots == 0 || max_tokens == 0) throw ConfigError("max_slots and max_tokens must be positive");
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config.dim;
  auto attn = [&](const std::string& pre) {
    AttentionSlots s{};
    s.wq = add(pre + ".wq", d, d);
    s.bq = add(pre + ".bq", 1, d);
    s.wk = add(pre + ".wk", d, d);
    s.bk = add(pre + ".bk", 1, d);
    s.wv = add(pre + ".wv", d, d);
    s.bv = add(pre + ".bv", 1, d);
    s.wo = add(pre + ".wo", d, d);
    s.bo = add(pre + ".bo", 1, d);
    return s;
  };

  if (config.fusion_positions) fusion_.pos = add("fusion.pos", config.max_slots, d);
  fusion_.ffn_ln_g = add("fusion.ffn_ln.g", 1, d);
  fusion_.ffn_ln_b = add("fusion.ffn_ln.b", 1, d);
  fusion_.w1 = add("fusion.ffn.w1", d, config.fusion_ffn_dim);
  fusion_.b1 = add("fusion.ffn.b1", 1, config.fusion_ffn_dim);
  fusion_.w2 = add("fusion.ffn.w2", config.fusion_ffn_dim, d);
  fusion_.b2 = add("fusion.ffn.b2", 1, d);
  fusion_.attn_ln_g = add("fusion.attn_ln.g", 1, d);
  fusion_.attn_ln_b = add("fusion.attn_ln.b", 1, d);
  fusion_.attn = attn("fusion.attn");

  decoder_.tok_emb = add("decoder.tok_emb", config.vocab_size, d);
  decoder_.pos_emb = add("decoder.pos_emb", config.max_slots + config.max_tokens, d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string pre = "decoder.block" + std::to_string(l);
    BlockSlots b{};
    b.ln1_g = add(pre + ".ln1.g", 1, d);
    b.ln1_b = add(pre + ".ln1.b", 1, d);
    b.attn = attn(pre + ".attn");
    b.ln2_g = add(pre + ".ln2.g", 1, d);
    b.ln2_b = add(pre + ".ln2.b", 1, d);
    b.w1 = add(pre + ".ffn.w1", d, config.ffn_dim);
    b.b1 = add(pre + ".ffn.b1", 1, config.ffn_dim);
    b.w2 = add(pre + ".ffn.w2", config.ffn_dim, d);
    b.b2 = add(pre + ".ffn.b2", 1, d);
    decoder_.blocks.push_back(b);
  }
  decoder_.lnf_g = add("decoder.lnf.g", 1, d);
  decoder_.lnf_b = add("decoder.lnf.b", 1, d);
  decoder_.out_w = add("decoder.out.w", d, config.vocab_size);
  decoder_.out_b = add("decoder.out.b", 1, config.vocab_size);

  values_.assign(tensors_.back().offset + tensors_.back().size(), 0.0);
  first_moment.assign(values_.size(), 0.0);
  second_moment.assign(values_.size(), 0.0);
}

std::size_t ModelParams::add(std::string name, std::size_t rows, std::size_t cols) {
  const std::size_t offset = tensors_.empty() ? 0 : tensors_.back().offset + tensors_.back().size();
  tensors_.push_back({std::move(name), rows, cols, offset});
  return tensors_.size() - 1;
}

Eigen::Map<Matrix> ModelParams::view(std::vector<double>& buffer, std::size_t slot) const {
  const auto& s = tensors_[slot];
  return {buffer.data() + s.offset, static_cast<Eigen::Index>(s.rows),
          static_cast<Eigen::Index>(s.cols)};
}

Eigen::Map<const Matrix> ModelParams::view(const std::vector<double>& buffer,
                                           std::size_t slot) const {
  const auto& s = tensors_[slot];
  return {buffer.data() + s.offset, static_cast<Eigen::Index>(s.rows),
          static_cast<Eigen::Index>(s.cols)};
}

ModelParams ModelParams::zeros(const ModelConfig& config) { return ModelParams(config); }

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  Rng rng(derive_seed(seed, {0x1417}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double residual_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.layers));
  for (const auto& t : p.tensors_) {
    const std::string& n = t.name;
    auto ends_with = [&](std::string_view suf) { return n.ends_with(suf); };
    double std_dev = kInitStd;
    double fill = 0.0;
    bool random = true;
    if (ends_with(".g")) {
      random = false;
      fill = 1.0;
    } else if (ends_with(".b") || ends_with(".bq") || ends_with(".bk") || ends_with(".bv") ||
               ends_with(".bo") || ends_with(".b1") || ends_with(".b2")) {
      random = false;
    } else if (ends_with(".wo") || ends_with(".ffn.w2")) {
      std_dev = residual_std;
    } else if (ends_with("pos_emb") || ends_with("fusion.pos")) {
      std_dev = 0.01;
    }
    for (std::size_t i = 0; i < t.size(); ++i)
      p.values_[t.offset + i] = random ? std_dev * normal(rng) : fill;
  }
  return p;
}

// ---- fusion ----

Matrix fusion_forward(const ModelParams& p, const Matrix& slots, FusionTrace* trace) {
  const auto& f = p.fusion();
  if (static_cast<std::size_t>(slots.cols()) != p.config().dim)
    throw ConfigError("fusion input dimension does not match model dim");
  if (slots.rows() == 0) throw ConfigError("fusion needs at least one slot");
  if (static_cast<std::size_t>(slots.rows()) > p.config().max_slots)
    throw ConfigError("fusion slot count exceeds max_slots");

  Matrix x = slots;
  if (f.pos) x += p.tensor(*f.pos).topRows(slots.rows());
  Matrix h = x + feed_forward(p, layer_norm(p, x, f.ffn_ln_g, f.ffn_ln_b, trace ? &trace->ffn_ln : nullptr),
                              f.w1, f.b1, f.w2, f.b2, trace ? &trace->ffn : nullptr);
  Matrix out = h + attention(p, layer_norm(p, h, f.attn_ln_g, f.attn_ln_b, trace ? &trace->attn_ln : nullptr),
                             f.attn, false, trace ? &trace->attn : nullptr);
  return out;
}

Matrix fusion_forward(const ModelParams& p, std::span<const double> caption_embedding,
                      std::span<const std::vector<double>> group) {
  const auto d = static_cast<Eigen::Index>(p.config().dim);
  if (static_cast<Eigen::Index>(caption_embedding.size()) != d)
    throw ConfigError("caption embedding dimension does not match model dim");
  Matrix slots(static_cast<Eigen::Index>(group.size() + 1), d);
  slots.row(0) = Eigen::Map<const RowVec>(caption_embedding.data(), d);
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (static_cast<Eigen::Index>(group[i].size()) != d)
      throw ConfigError("group member dimension does not match model dim");
    slots.row(static_cast<Eigen::Index>(i + 1)) = Eigen::Map<const RowVec>(group[i].data(), d);
  }
  return fusion_forward(p, slots);
}

void fusion_backward(const ModelParams& p, const FusionTrace& t, const Matrix& d_out,
                     std::vector<double>& grads) {
  const auto& f = p.fusion();
  Matrix dh = d_out;
  Matrix d_ln_a = attention_backward(p, t.attn, d_out, f.attn, grads);
  dh += layer_norm_backward(p, t.attn_ln, d_ln_a, f.attn_ln_g, f.attn_ln_b, grads);
  Matrix dx = dh;
  Matrix d_ln_f = feed_forward_backward(p, t.ffn, dh, f.w1, f.b1, f.w2, f.b2, grads);
  dx += layer_norm_backward(p, t.ffn_ln, d_ln_f, f.ffn_ln_g, f.ffn_ln_b, grads);
  if (f.pos) p.view(grads, *f.pos).topRows(dx.rows()) += dx;
}

// ---- decoder ----

Matrix decoder_forward(const ModelParams& p, const Matrix& prefix, std::span<const TokenId> tokens,
                       DecoderTrace* trace) {
  const auto& dec = p.decoder();
  const auto& cfg = p.config();
  if (tokens.empty()) throw ConfigError("decoder needs at least one input token");
  if (static_cast<std::size_t>(prefix.cols()) != cfg.dim)
    throw ConfigError("prefix dimension does not match model dim");
  if (static_cast<std::size_t>(prefix.rows()) > cfg.max_slots || tokens.size() > cfg.max_tokens)
    throw ConfigError("sequence exceeds configured max_slots/max_tokens");
  check_tokens(p, tokens);

  const Eigen::Index plen = prefix.rows();
  const auto tlen = static_cast<Eigen::Index>(tokens.size());
  const auto tok_emb = p.tensor(dec.tok_emb);
  const auto pos_emb = p.tensor(dec.pos_emb);

  Matrix x(plen + tlen, prefix.cols());
  x.topRows(plen) = prefix;
  for (Eigen::Index t = 0; t < tlen; ++t) x.row(plen + t) = tok_emb.row(tokens[static_cast<std::size_t>(t)]);
  x += pos_emb.topRows(plen + tlen);

  if (trace) {
    trace->tokens.assign(tokens.begin(), tokens.end());
    trace->prefix_len = static_cast<std::size_t>(plen);
    trace->blocks.assign(dec.blocks.size(), {});
  }
  for (std::size_t l = 0; l < dec.blocks.size(); ++l) {
    const auto& b = dec.blocks[l];
    BlockTrace* bt = trace ? &trace->blocks[l] : nullptr;
    x += attention(p, layer_norm(p, x, b.ln1_g, b.ln1_b, bt ? &bt->ln1 : nullptr), b.attn, true,
                   bt ? &bt->attn : nullptr);
    x += feed_forward(p, layer_norm(p, x, b.ln2_g, b.ln2_b, bt ? &bt->ln2 : nullptr), b.w1, b.b1,
                      b.w2, b.b2, bt ? &bt->ffn : nullptr);
  }
  Matrix hidden = layer_norm(p, x.bottomRows(tlen), dec.lnf_g, dec.lnf_b, trace ? &trace->lnf : nullptr);
  Matrix logits = linear(p, hidden, dec.out_w, dec.out_b);
  if (trace) trace->final_hidden = std::move(hidden);
  return logits;
}

Matrix decoder_backward(const ModelParams& p, const DecoderTrace& t, const Matrix& d_logits,
                        std::vector<double>& grads) {
  const auto& dec = p.decoder();
  const auto plen = static_cast<Eigen::Index>(t.prefix_len);
  const auto tlen = static_cast<Eigen::Index>(t.tokens.size());

  Matrix d_hidden = linear_backward(p, t.final_hidden, d_logits, dec.out_w, dec.out_b, grads);
  Matrix dx = Matrix::Zero(plen + tlen, d_hidden.cols());
  dx.bottomRows(tlen) = layer_norm_backward(p, t.lnf, d_hidden, dec.lnf_g, dec.lnf_b, grads);

  for (std::size_t l = dec.blocks.size(); l-- > 0;) {
    const auto& b = dec.blocks[l];
    const auto& bt = t.blocks[l];
    Matrix d_ln2 = feed_forward_backward(p, bt.ffn, dx, b.w1, b.b1, b.w2, b.b2, grads);
    dx += layer_norm_backward(p, bt.ln2, d_ln2, b.ln2_g, b.ln2_b, grads);
    Matrix d_ln1 = attention_backward(p, bt.attn, dx, b.attn, grads);
    dx += layer_norm_backward(p, bt.ln1, d_ln1, b.ln1_g, b.ln1_b, grads);
  }

  p.view(grads, dec.pos_emb).topRows(plen + tlen) += dx;
  auto d_tok = p.view(grads, dec.tok_emb);
  for (Eigen::Index i = 0; i < tlen; ++i) d_tok.row(t.tokens[static_cast<std::size_t>(i)]) += dx.row(plen + i);
  return dx.topRows(plen);
}

namespace {

std::vector<TokenId> teacher_inputs(std::span<const TokenId> candidate) {
  std::vector<TokenId> in;
  in.reserve(candidate.size());
  in.push_back(Vocabulary::kBos);
  in.insert(in.end(), candidate.begin(), candidate.end() - 1);
  return in;
}

void check_candidate(std::span<const TokenId> candidate) {
  if (candidate.empty() || candidate.back() != Vocabulary::kEos)
    throw ConfigError("candidate must be nonempty and end with EOS");
}

// Row-wise softmax and mean NLL of targets.
double softmax_ce(const Matrix& logits, std::span<const TokenId> targets, Matrix& probs) {
  probs.resize(logits.rows(), logits.cols());
  double nll = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    probs.row(r) = (logits.row(r).array() - mx).exp();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    nll -= logits(r, targets[static_cast<std::size_t>(r)]) - mx - std::log(z);
  }
  return nll / static_cast<double>(logits.rows());
}

}  // namespace

double teacher_forced_ce(const ModelParams& p, const Matrix& prefix, std::span<const TokenId> candidate) {
  check_candidate(candidate);
  check_tokens(p, candidate);
  Matrix logits = decoder_forward(p, prefix, teacher_inputs(candidate));
  Matrix probs;
  return softmax_ce(logits, candidate, probs);
}

SampleGraph::SampleGraph(const ModelParams& params, const Matrix& slots,
                         std::span<const std::vector<TokenId>> candidates)
    : params_(params), candidates_(candidates.begin(), candidates.end()) {
  prefix_ = fusion_forward(params, slots, &fusion_);
  traces_.resize(candidates_.size());
  probs_.resize(candidates_.size());
  ce_.resize(candidates_.size());
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    check_candidate(candidates_[i]);
    check_tokens(params, candidates_[i]);
    Matrix logits = decoder_forward(params, prefix_, teacher_inputs(candidates_[i]), &traces_[i]);
    ce_[i] = softmax_ce(logits, candidates_[i], probs_[i]);
  }
}

void SampleGraph::backward(std::span<const double> weights, double scale,
                           std::vector<double>& grads) const {
  if (weights.size() != candidates_.size()) throw ConfigError("SampleGraph: weight count mismatch");
  Matrix d_prefix = Matrix::Zero(prefix_.rows(), prefix_.cols());
  bool any = false;
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (weights[i] == 0.0) continue;
    any = true;
    const auto& cand = candidates_[i];
    Matrix d_logits = probs_[i];
    for (std::size_t r = 0; r < cand.size(); ++r) d_logits(static_cast<Eigen::Index>(r), cand[r]) -= 1.0;
    d_logits *= scale * weights[i] / static_cast<double>(cand.size());
    d_prefix += decoder_backward(params_, traces_[i], d_logits, grads);
  }
  if (any) fusion_backward(params_, fusion_, d_prefix, grads);
}

// ---- checkpoint ----

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params, const Vocabulary& vocab) {
  const auto& c = params.config();
  if (vocab.size() != c.vocab_size) throw ConfigError("vocabulary size does not match model config");
  io::ByteWriter w;
  w.magic("SGCM");
  w.u32(kCheckpointVersion);
  for (std::size_t v : {c.dim, c.heads, c.layers, c.ffn_dim, c.fusion_ffn_dim, c.vocab_size,
                        c.max_slots, c.max_tokens})
    w.u32(static_cast<std::uint32_t>(v));
  w.u32(c.fusion_positions ? 1u : 0u);
  const auto& words = vocab.words();
  w.u32(static_cast<std::uint32_t>(words.size() - Vocabulary::kUnk - 1));
  for (std::size_t i = Vocabulary::kUnk + 1; i < words.size(); ++i) {
    w.u16(static_cast<std::uint16_t>(words[i].size()));
    w.bytes(words[i]);
  }
  w.u32(static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& t : params.tensors()) {
    w.u32(static_cast<std::uint32_t>(t.rows));
    w.u32(static_cast<std::uint32_t>(t.cols));
    for (std::size_t i = 0; i < t.size(); ++i) w.f32(static_cast<float>(params.values()[t.offset + i]));
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("SGCM", "SGCM checkpoint");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion)
    throw FormatError("SGCM version mismatch: file has " + std::to_string(version));
  ModelConfig c;
  c.dim = r.u32("dim");
  c.heads = r.u32("heads");
  c.layers = r.u32("layers");
  c.ffn_dim = r.u32("ffn_dim");
  c.fusion_ffn_dim = r.u32("fusion_ffn_dim");
  c.vocab_size = r.u32("vocab_size");
  c.max_slots = r.u32("max_slots");
  c.max_tokens = r.u32("max_tokens");
  c.fusion_positions = (r.u32("flags") & 1u) != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("SGCM: invalid config block: ") + e.what());
  }
  // Guard against absurd sizes before allocating parameters.
  if (c.dim > 65536 || c.layers > 1024 || c.vocab_size > (1u << 24) || c.ffn_dim > (1u << 20) ||
      c.fusion_ffn_dim > (1u << 20) || c.max_slots > 65536 || c.max_tokens > 65536)
    throw FormatError("SGCM: config block sizes out of range");

  const auto n_words = r.u32("vocabulary count");
  std::vector<std::string> words;
  for (std::uint32_t i = 0; i < n_words; ++i) words.push_back(r.bytes(r.u16("word length"), "word"));
  Vocabulary vocab = Vocabulary::from_words(std::move(words));
  if (vocab.size() != c.vocab_size) throw FormatError("SGCM: vocabulary size disagrees with config");

  ModelParams params = ModelParams::zeros(c);
  const auto n_tensors = r.u32("tensor count");
  if (n_tensors != params.tensors().size())
    throw FormatError("SGCM: expected " + std::to_string(params.tensors().size()) + " tensors, found " +
                      std::to_string(n_tensors));
  for (const auto& t : params.tensors()) {
    const auto rows = r.u32("tensor rows");
    const auto cols = r.u32("tensor cols");
    if (rows != t.rows || cols != t.cols) throw FormatError("SGCM: shape mismatch for " + t.name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const float v = r.f32("tensor value");
      if (!std::isfinite(v)) throw FormatError("SGCM: non-finite value in " + t.name);
      params.values()[t.offset + i] = v;
    }
  }
  if (r.remaining() != 0) throw FormatError("SGCM: trailing bytes after last tensor");
  return {std::move(params), std::move(vocab)};
}

void save_checkpoint(const ModelParams& params, const Vocabulary& vocab,
                     const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(params, vocab));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace sgcap
