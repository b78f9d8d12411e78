#include "model.h"

#include <cmath>
#include <limits>
#include <type_traits>

#include "error.h"
#include "tree_encoding.h"

namespace treeseq {

using nlohmann::json;

std::string_view positional_name(PositionalMode mode) {
  return mode == PositionalMode::kTree ? "tree" : "seq";
}

PositionalMode parse_positional(std::string_view name) {
  if (name == "tree") return PositionalMode::kTree;
  if (name == "seq" || name == "sequential") return PositionalMode::kSequential;
  fail("unknown positional mode '" + std::string(name) + "' (seq|tree)");
}

void ModelConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    fail("d_model must be a positive multiple of heads");
  }
  if (encoder_layers == 0 || decoder_layers == 0 || ff_width == 0) {
    fail("layer counts and feed-forward width must be positive");
  }
  if (positional == PositionalMode::kTree) {
    EncodingConfig{d_idx, path_len}.validate();
    if (d_idx * path_len != d_model) {
      fail("tree mode requires d_model = d_idx * path_len (" +
           std::to_string(d_model) + " != " + std::to_string(d_idx) + " * " +
           std::to_string(path_len) + ")");
    }
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (batch_size == 0) fail("batch size must be positive");
}

json ModelConfig::to_json() const {
  return json{{"d_model", d_model},
              {"heads", heads},
              {"encoder_layers", encoder_layers},
              {"decoder_layers", decoder_layers},
              {"ff_width", ff_width},
              {"d_idx", d_idx},
              {"path_len", path_len},
              {"dropout", dropout},
              {"positional", positional_name(positional)},
              {"learning_rate", learning_rate},
              {"batch_size", batch_size},
              {"src_vocab", src_vocab},
              {"tgt_vocab", tgt_vocab}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (auto it = j.find(key); it != j.end()) {
        field = it->get<std::decay_t<decltype(field)>>();
      }
    };
    get("d_model", c.d_model);
    get("heads", c.heads);
    get("encoder_layers", c.encoder_layers);
    get("decoder_layers", c.decoder_layers);
    get("ff_width", c.ff_width);
    get("d_idx", c.d_idx);
    get("path_len", c.path_len);
    get("dropout", c.dropout);
    get("learning_rate", c.learning_rate);
    get("batch_size", c.batch_size);
    get("src_vocab", c.src_vocab);
    get("tgt_vocab", c.tgt_vocab);
    if (auto it = j.find("positional"); it != j.end()) {
      c.positional = parse_positional(it->get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed model config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Layout

namespace {

struct LayoutBuilder {
  std::size_t next = 0;
  Slice take(std::size_t rows, std::size_t cols) {
    Slice s{next, rows, cols};
    next += rows * cols;
    return s;
  }
  NormParams norm(std::size_t d) { return {take(1, d), take(1, d)}; }
  AttentionParams attention(std::size_t d) {
    AttentionParams a;
    a.wq = take(d, d);
    a.bq = take(1, d);
    a.wk = take(d, d);
    a.bk = take(1, d);
    a.wv = take(d, d);
    a.bv = take(1, d);
    a.wo = take(d, d);
    a.bo = take(1, d);
    return a;
  }
  FeedForwardParams feed_forward(std::size_t d, std::size_t ff) {
    return {take(d, ff), take(1, ff), take(ff, d), take(1, d)};
  }
};

}  // namespace

ParamLayout ParamLayout::build(const ModelConfig& cfg) {
  if (cfg.src_vocab == 0 || cfg.tgt_vocab == 0) {
    fail("model vocabulary sizes must be set");
  }
  const std::size_t d = cfg.d_model;
  LayoutBuilder b;
  ParamLayout l;
  l.src_embed = b.take(cfg.src_vocab, d);
  l.tgt_embed = b.take(cfg.tgt_vocab, d);
  for (std::size_t i = 0; i < cfg.encoder_layers; ++i) {
    EncoderLayerParams e;
    e.norm1 = b.norm(d);
    e.self = b.attention(d);
    e.norm2 = b.norm(d);
    e.ff = b.feed_forward(d, cfg.ff_width);
    l.encoder.push_back(e);
  }
  for (std::size_t i = 0; i < cfg.decoder_layers; ++i) {
    DecoderLayerParams dl;
    dl.norm1 = b.norm(d);
    dl.self = b.attention(d);
    dl.norm2 = b.norm(d);
    dl.cross = b.attention(d);
    dl.norm3 = b.norm(d);
    dl.ff = b.feed_forward(d, cfg.ff_width);
    l.decoder.push_back(dl);
  }
  l.encoder_norm = b.norm(d);
  l.decoder_norm = b.norm(d);
  l.out_w = b.take(d, cfg.tgt_vocab);
  l.out_b = b.take(1, cfg.tgt_vocab);
  l.total = b.next;
  return l;
}

template <typename T>
Mat<T> sequential_positions(std::size_t n, std::size_t d_model) {
  Mat<T> m(n, d_model);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row = sequential_encoding(i, d_model);
    for (std::size_t j = 0; j < d_model; ++j) m.at(i, j) = static_cast<T>(row[j]);
  }
  return m;
}

template <typename T>
Mat<T> tree_positions(const std::vector<EdgePath>& paths, std::size_t d_idx,
                      std::size_t path_len) {
  EncodingConfig cfg{d_idx, path_len};
  Mat<T> m(paths.size(), cfg.d_model());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    std::vector<double> row = encode_path(paths[i], cfg);
    for (std::size_t j = 0; j < row.size(); ++j) m.at(i, j) = static_cast<T>(row[j]);
  }
  return m;
}

template <typename T>
std::vector<T> log_softmax_row(std::span<const T> logits) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T x : logits) mx = std::max(mx, x);
  T sum = 0;
  for (T x : logits) sum += std::exp(x - mx);
  const T log_z = mx + std::log(sum);
  std::vector<T> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

constexpr double kNormEps = 1e-5;

template <typename T>
struct NormCache {
  Mat<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
void norm_forward(const Mat<T>& x, const T* gain, const T* bias, Mat<T>& y,
                  std::type_identity_t<NormCache<T>>* cache) {
  const std::size_t d = x.cols;
  y = Mat<T>(x.rows, d);
  if (cache) {
    cache->xhat = Mat<T>(x.rows, d);
    cache->inv_std.assign(x.rows, T(0));
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    const T* xr = x.row(i);
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    T* yr = y.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mean) * inv;
      if (cache) cache->xhat.at(i, j) = h;
      yr[j] = h * gain[j] + bias[j];
    }
    if (cache) cache->inv_std[i] = inv;
  }
}

template <typename T>
void norm_backward(const NormCache<T>& cache, const T* gain, const Mat<T>& dy,
                   T* dgain, T* dbias, Mat<T>& dx) {
  const std::size_t d = dy.cols;
  std::vector<T> dh(d);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    const T* dyr = dy.row(i);
    const T* h = cache.xhat.row(i);
    T mean_dh = 0, mean_dh_h = 0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += dyr[j] * h[j];
      dbias[j] += dyr[j];
      dh[j] = dyr[j] * gain[j];
      mean_dh += dh[j];
      mean_dh_h += dh[j] * h[j];
    }
    mean_dh /= static_cast<T>(d);
    mean_dh_h /= static_cast<T>(d);
    T* dxr = dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      dxr[j] += cache.inv_std[i] * (dh[j] - mean_dh - h[j] * mean_dh_h);
    }
  }
}

// Scaled dot-product attention of one query row against `nk` key/value rows
// for one head. Writes probabilities (nk) and the head output (dh).
template <typename T>
void attend_row(const T* q, const Mat<T>& keys, const Mat<T>& values,
                std::size_t nk, std::size_t head, std::size_t dh, T* probs,
                T* out) {
  const std::size_t off = head * dh;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < nk; ++j) {
    const T* k = keys.row(j) + off;
    T s = 0;
    for (std::size_t c = 0; c < dh; ++c) s += q[off + c] * k[c];
    probs[j] = s * scale;
    mx = std::max(mx, probs[j]);
  }
  T sum = 0;
  for (std::size_t j = 0; j < nk; ++j) {
    probs[j] = std::exp(probs[j] - mx);
    sum += probs[j];
  }
  for (std::size_t j = 0; j < nk; ++j) probs[j] /= sum;
  for (std::size_t c = 0; c < dh; ++c) out[off + c] = 0;
  for (std::size_t j = 0; j < nk; ++j) {
    const T* v = values.row(j) + off;
    const T pj = probs[j];
    for (std::size_t c = 0; c < dh; ++c) out[off + c] += pj * v[c];
  }
}

template <typename T>
struct AttentionCache {
  Mat<T> q, k, v, o;
  std::vector<Mat<T>> probs;  // per head, n_q x n_k
};

template <typename T>
struct FeedForwardCache {
  Mat<T> hidden;  // post-ReLU
};

template <typename T>
void dropout_forward(Mat<T>& x, double rate, std::mt19937_64* rng,
                     Mat<T>& mask) {
  if (!rng || rate <= 0.0) {
    mask = Mat<T>();
    return;
  }
  mask = Mat<T>(x.rows, x.cols);
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    mask.v[i] = u(*rng) < rate ? T(0) : keep;
    x.v[i] *= mask.v[i];
  }
}

template <typename T>
Mat<T> dropout_backward(const Mat<T>& dy, const Mat<T>& mask) {
  if (mask.v.empty()) return dy;
  Mat<T> out = dy;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask.v[i];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward

template <typename T>
struct Transformer<T>::Pass {
  struct EncoderLayer {
    Mat<T> x_in, a;
    NormCache<T> norm1, norm2;
    AttentionCache<T> self;
    Mat<T> drop1, drop2;
    Mat<T> x_mid, b;
    FeedForwardCache<T> ff;
  };
  struct DecoderLayer {
    Mat<T> a, b, c;
    NormCache<T> norm1, norm2, norm3;
    AttentionCache<T> self, cross;
    Mat<T> drop1, drop2, drop3;
    FeedForwardCache<T> ff;
  };
  std::vector<int> src, tgt;
  Mat<T> src_drop, tgt_drop;
  std::vector<EncoderLayer> enc;
  NormCache<T> enc_norm;
  Mat<T> memory;
  std::vector<DecoderLayer> dec;
  NormCache<T> dec_norm;
  Mat<T> z;
  Mat<T> logp;
};

namespace {

template <typename T>
struct Blocks {
  const T* base;
  std::size_t heads;
  const T* p(const Slice& s) const { return base + s.offset; }

  Mat<T> attention(const AttentionParams& ap, const Mat<T>& xq,
                   const Mat<T>& xkv, bool causal,
                   AttentionCache<T>& cache) const {
    linear_forward(xq, p(ap.wq), p(ap.bq), ap.wq.cols, cache.q);
    linear_forward(xkv, p(ap.wk), p(ap.bk), ap.wk.cols, cache.k);
    linear_forward(xkv, p(ap.wv), p(ap.bv), ap.wv.cols, cache.v);
    const std::size_t nq = xq.rows, nk = xkv.rows, d = xq.cols;
    const std::size_t dh = d / heads;
    cache.o = Mat<T>(nq, d);
    cache.probs.assign(heads, Mat<T>(nq, nk));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < nq; ++i) {
        const std::size_t visible = causal ? i + 1 : nk;
        attend_row(cache.q.row(i), cache.k, cache.v, visible, h, dh,
                   cache.probs[h].row(i), cache.o.row(i));
      }
    }
    Mat<T> y;
    linear_forward(cache.o, p(ap.wo), p(ap.bo), ap.wo.cols, y);
    return y;
  }

  Mat<T> feed_forward(const FeedForwardParams& fp, const Mat<T>& x,
                      FeedForwardCache<T>& cache) const {
    linear_forward(x, p(fp.w1), p(fp.b1), fp.w1.cols, cache.hidden);
    for (T& v : cache.hidden.v) v = v > T(0) ? v : T(0);
    Mat<T> y;
    linear_forward(cache.hidden, p(fp.w2), p(fp.b2), fp.w2.cols, y);
    return y;
  }
};

template <typename T>
struct GradBlocks {
  const T* base;
  T* grad;
  std::size_t heads;
  const T* p(const Slice& s) const { return base + s.offset; }
  T* g(const Slice& s) const { return grad + s.offset; }

  // Accumulates input gradients into dxq and dxkv.
  void attention(const AttentionParams& ap, const Mat<T>& xq,
                 const Mat<T>& xkv, bool causal,
                 const AttentionCache<T>& cache, const Mat<T>& dy, Mat<T>& dxq,
                 Mat<T>& dxkv) const {
    const std::size_t nq = xq.rows, nk = xkv.rows, d = xq.cols;
    const std::size_t dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat<T> d_o(nq, d);
    linear_backward(cache.o, p(ap.wo), dy, g(ap.wo), g(ap.bo), &d_o);
    Mat<T> dq(nq, d), dk(nk, d), dv(nk, d);
    std::vector<T> dp(nk);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < nq; ++i) {
        const std::size_t visible = causal ? i + 1 : nk;
        const T* pr = cache.probs[h].row(i);
        const T* dor = d_o.row(i) + off;
        T dot = 0;
        for (std::size_t j = 0; j < visible; ++j) {
          const T* v = cache.v.row(j) + off;
          T s = 0;
          for (std::size_t c = 0; c < dh; ++c) s += dor[c] * v[c];
          dp[j] = s;
          dot += pr[j] * s;
          T* dvr = dv.row(j) + off;
          for (std::size_t c = 0; c < dh; ++c) dvr[c] += pr[j] * dor[c];
        }
        const T* qr = cache.q.row(i) + off;
        T* dqr = dq.row(i) + off;
        for (std::size_t j = 0; j < visible; ++j) {
          const T ds = pr[j] * (dp[j] - dot) * scale;
          const T* kr = cache.k.row(j) + off;
          T* dkr = dk.row(j) + off;
          for (std::size_t c = 0; c < dh; ++c) {
            dqr[c] += ds * kr[c];
            dkr[c] += ds * qr[c];
          }
        }
      }
    }
    linear_backward(xq, p(ap.wq), dq, g(ap.wq), g(ap.bq), &dxq);
    linear_backward(xkv, p(ap.wk), dk, g(ap.wk), g(ap.bk), &dxkv);
    linear_backward(xkv, p(ap.wv), dv, g(ap.wv), g(ap.bv), &dxkv);
  }

  void feed_forward(const FeedForwardParams& fp, const Mat<T>& x,
                    const FeedForwardCache<T>& cache, const Mat<T>& dy,
                    Mat<T>& dx) const {
    Mat<T> dh(cache.hidden.rows, cache.hidden.cols);
    linear_backward(cache.hidden, p(fp.w2), dy, g(fp.w2), g(fp.b2), &dh);
    for (std::size_t i = 0; i < dh.v.size(); ++i) {
      if (cache.hidden.v[i] <= T(0)) dh.v[i] = T(0);
    }
    linear_backward(x, p(fp.w1), dh, g(fp.w1), g(fp.b1), &dx);
  }
};

}  // namespace

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), layout_(ParamLayout::build(cfg)) {
  cfg_.validate();
  params_.assign(layout_.total, T(0));
  std::mt19937_64 rng(seed);
  auto fill = [&](const Slice& s, double stddev) {
    std::normal_distribution<double> n(0.0, stddev);
    for (std::size_t i = 0; i < s.size(); ++i) {
      params_[s.offset + i] = static_cast<T>(n(rng));
    }
  };
  auto ones = [&](const Slice& s) {
    std::fill_n(params_.begin() + s.offset, s.size(), T(1));
  };
  const double d = static_cast<double>(cfg.d_model);
  fill(layout_.src_embed, 1.0 / std::sqrt(d));
  fill(layout_.tgt_embed, 1.0 / std::sqrt(d));
  auto attention = [&](const AttentionParams& a) {
    for (const Slice* s : {&a.wq, &a.wk, &a.wv, &a.wo}) {
      fill(*s, 1.0 / std::sqrt(static_cast<double>(s->rows)));
    }
  };
  auto ff = [&](const FeedForwardParams& f) {
    fill(f.w1, 1.0 / std::sqrt(static_cast<double>(f.w1.rows)));
    fill(f.w2, 1.0 / std::sqrt(static_cast<double>(f.w2.rows)));
  };
  for (const EncoderLayerParams& e : layout_.encoder) {
    ones(e.norm1.gain);
    ones(e.norm2.gain);
    attention(e.self);
    ff(e.ff);
  }
  for (const DecoderLayerParams& dl : layout_.decoder) {
    ones(dl.norm1.gain);
    ones(dl.norm2.gain);
    ones(dl.norm3.gain);
    attention(dl.self);
    attention(dl.cross);
    ff(dl.ff);
  }
  ones(layout_.encoder_norm.gain);
  ones(layout_.decoder_norm.gain);
  fill(layout_.out_w, 1.0 / std::sqrt(d));
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, std::vector<T> params)
    : cfg_(cfg), layout_(ParamLayout::build(cfg)), params_(std::move(params)) {
  cfg_.validate();
  if (params_.size() != layout_.total) {
    fail("parameter count " + std::to_string(params_.size()) +
         " does not match the configuration (" +
         std::to_string(layout_.total) + ")");
  }
}

template <typename T>
Mat<T> Transformer<T>::decoder_positions(
    std::size_t n, const std::vector<EdgePath>* paths) const {
  if (cfg_.positional == PositionalMode::kSequential) {
    return sequential_positions<T>(n, cfg_.d_model);
  }
  if (!paths) fail("tree positional mode requires edge paths");
  if (paths->size() < n) fail("fewer edge paths than decoder positions");
  std::vector<EdgePath> head(paths->begin(), paths->begin() + n);
  return tree_positions<T>(head, cfg_.d_idx, cfg_.path_len);
}

template <typename T>
void Transformer<T>::run_forward(std::span<const int> src,
                                 std::span<const int> tgt_in,
                                 const Mat<T>& positions, std::mt19937_64* rng,
                                 Pass& pass) const {
  const std::size_t d = cfg_.d_model;
  if (src.empty()) fail("encoder input is empty");
  if (tgt_in.empty()) fail("decoder input is empty");
  if (positions.rows != tgt_in.size() || positions.cols != d) {
    fail("decoder positional rows do not match the decoder input");
  }
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  const Blocks<T> blk{params_.data(), cfg_.heads};
  pass.src.assign(src.begin(), src.end());
  pass.tgt.assign(tgt_in.begin(), tgt_in.end());

  // Encoder.
  Mat<T> x = sequential_positions<T>(src.size(), d);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0 || static_cast<std::size_t>(src[i]) >= cfg_.src_vocab) {
      fail("source id out of range");
    }
    const T* e = p(layout_.src_embed) + static_cast<std::size_t>(src[i]) * d;
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) += emb_scale * e[j];
  }
  dropout_forward(x, cfg_.dropout, rng, pass.src_drop);
  pass.enc.assign(layout_.encoder.size(), {});
  for (std::size_t l = 0; l < layout_.encoder.size(); ++l) {
    const EncoderLayerParams& lp = layout_.encoder[l];
    auto& c = pass.enc[l];
    norm_forward(x, p(lp.norm1.gain), p(lp.norm1.bias), c.a, &c.norm1);
    Mat<T> s = blk.attention(lp.self, c.a, c.a, false, c.self);
    dropout_forward(s, cfg_.dropout, rng, c.drop1);
    add_into(x, s);
    norm_forward(x, p(lp.norm2.gain), p(lp.norm2.bias), c.b, &c.norm2);
    Mat<T> f = blk.feed_forward(lp.ff, c.b, c.ff);
    dropout_forward(f, cfg_.dropout, rng, c.drop2);
    add_into(x, f);
  }
  norm_forward(x, p(layout_.encoder_norm.gain), p(layout_.encoder_norm.bias),
               pass.memory, &pass.enc_norm);

  // Decoder.
  Mat<T> y = positions;
  for (std::size_t i = 0; i < tgt_in.size(); ++i) {
    if (tgt_in[i] < 0 || static_cast<std::size_t>(tgt_in[i]) >= cfg_.tgt_vocab) {
      fail("target id out of range");
    }
    const T* e = p(layout_.tgt_embed) + static_cast<std::size_t>(tgt_in[i]) * d;
    for (std::size_t j = 0; j < d; ++j) y.at(i, j) += emb_scale * e[j];
  }
  dropout_forward(y, cfg_.dropout, rng, pass.tgt_drop);
  pass.dec.assign(layout_.decoder.size(), {});
  for (std::size_t l = 0; l < layout_.decoder.size(); ++l) {
    const DecoderLayerParams& lp = layout_.decoder[l];
    auto& c = pass.dec[l];
    norm_forward(y, p(lp.norm1.gain), p(lp.norm1.bias), c.a, &c.norm1);
    Mat<T> s = blk.attention(lp.self, c.a, c.a, true, c.self);
    dropout_forward(s, cfg_.dropout, rng, c.drop1);
    add_into(y, s);
    norm_forward(y, p(lp.norm2.gain), p(lp.norm2.bias), c.b, &c.norm2);
    Mat<T> x2 = blk.attention(lp.cross, c.b, pass.memory, false, c.cross);
    dropout_forward(x2, cfg_.dropout, rng, c.drop2);
    add_into(y, x2);
    norm_forward(y, p(lp.norm3.gain), p(lp.norm3.bias), c.c, &c.norm3);
    Mat<T> f = blk.feed_forward(lp.ff, c.c, c.ff);
    dropout_forward(f, cfg_.dropout, rng, c.drop3);
    add_into(y, f);
  }
  norm_forward(y, p(layout_.decoder_norm.gain), p(layout_.decoder_norm.bias),
               pass.z, &pass.dec_norm);
  Mat<T> logits;
  linear_forward(pass.z, p(layout_.out_w), p(layout_.out_b), cfg_.tgt_vocab,
                 logits);
  pass.logp = Mat<T>(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::vector<T> row = log_softmax_row<T>(
        std::span<const T>(logits.row(i), logits.cols));
    std::copy(row.begin(), row.end(), pass.logp.row(i));
  }
}

template <typename T>
void Transformer<T>::run_backward(const Pass& pass, const Mat<T>& dlogits,
                                  std::span<T> grad) const {
  const std::size_t d = cfg_.d_model;
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  const GradBlocks<T> gb{params_.data(), grad.data(), cfg_.heads};
  T* g = grad.data();

  Mat<T> dz(pass.z.rows, d);
  linear_backward(pass.z, p(layout_.out_w), dlogits, g + layout_.out_w.offset,
                  g + layout_.out_b.offset, &dz);
  Mat<T> dy(dz.rows, d);
  norm_backward(pass.dec_norm, p(layout_.decoder_norm.gain), dz,
                g + layout_.decoder_norm.gain.offset,
                g + layout_.decoder_norm.bias.offset, dy);

  Mat<T> dmemory(pass.memory.rows, d);
  for (std::size_t l = layout_.decoder.size(); l-- > 0;) {
    const DecoderLayerParams& lp = layout_.decoder[l];
    const auto& c = pass.dec[l];
    {
      Mat<T> df = dropout_backward(dy, c.drop3);
      Mat<T> dc(dy.rows, d);
      gb.feed_forward(lp.ff, c.c, c.ff, df, dc);
      norm_backward(c.norm3, p(lp.norm3.gain), dc, g + lp.norm3.gain.offset,
                    g + lp.norm3.bias.offset, dy);
    }
    {
      Mat<T> dx2 = dropout_backward(dy, c.drop2);
      Mat<T> db(dy.rows, d);
      gb.attention(lp.cross, c.b, pass.memory, false, c.cross, dx2, db,
                   dmemory);
      norm_backward(c.norm2, p(lp.norm2.gain), db, g + lp.norm2.gain.offset,
                    g + lp.norm2.bias.offset, dy);
    }
    {
      Mat<T> ds = dropout_backward(dy, c.drop1);
      Mat<T> da(dy.rows, d);
      gb.attention(lp.self, c.a, c.a, true, c.self, ds, da, da);
      norm_backward(c.norm1, p(lp.norm1.gain), da, g + lp.norm1.gain.offset,
                    g + lp.norm1.bias.offset, dy);
    }
  }
  Mat<T> dy0 = dropout_backward(dy, pass.tgt_drop);
  for (std::size_t i = 0; i < pass.tgt.size(); ++i) {
    T* ge = g + layout_.tgt_embed.offset + static_cast<std::size_t>(pass.tgt[i]) * d;
    for (std::size_t j = 0; j < d; ++j) ge[j] += emb_scale * dy0.at(i, j);
  }

  Mat<T> dx(dmemory.rows, d);
  norm_backward(pass.enc_norm, p(layout_.encoder_norm.gain), dmemory,
                g + layout_.encoder_norm.gain.offset,
                g + layout_.encoder_norm.bias.offset, dx);
  for (std::size_t l = layout_.encoder.size(); l-- > 0;) {
    const EncoderLayerParams& lp = layout_.encoder[l];
    const auto& c = pass.enc[l];
    {
      Mat<T> df = dropout_backward(dx, c.drop2);
      Mat<T> db(dx.rows, d);
      gb.feed_forward(lp.ff, c.b, c.ff, df, db);
      norm_backward(c.norm2, p(lp.norm2.gain), db, g + lp.norm2.gain.offset,
                    g + lp.norm2.bias.offset, dx);
    }
    {
      Mat<T> ds = dropout_backward(dx, c.drop1);
      Mat<T> da(dx.rows, d);
      gb.attention(lp.self, c.a, c.a, false, c.self, ds, da, da);
      norm_backward(c.norm1, p(lp.norm1.gain), da, g + lp.norm1.gain.offset,
                    g + lp.norm1.bias.offset, dx);
    }
  }
  Mat<T> dx0 = dropout_backward(dx, pass.src_drop);
  for (std::size_t i = 0; i < pass.src.size(); ++i) {
    T* ge = g + layout_.src_embed.offset + static_cast<std::size_t>(pass.src[i]) * d;
    for (std::size_t j = 0; j < d; ++j) ge[j] += emb_scale * dx0.at(i, j);
  }
}

template <typename T>
Mat<T> Transformer<T>::forward_with_positions(std::span<const int> src,
                                              std::span<const int> tgt_in,
                                              const Mat<T>& positions) const {
  Pass pass;
  run_forward(src, tgt_in, positions, nullptr, pass);
  return std::move(pass.logp);
}

template <typename T>
Mat<T> Transformer<T>::forward(std::span<const int> src,
                               std::span<const int> tgt_in,
                               const std::vector<EdgePath>* paths) const {
  return forward_with_positions(src, tgt_in,
                                decoder_positions(tgt_in.size(), paths));
}

template <typename T>
double Transformer<T>::loss_and_gradient(const Example& ex, std::span<T> grad,
                                         T scale,
                                         std::mt19937_64* rng) const {
  if (ex.tgt.size() < 2) fail("target sequence needs at least two ids");
  if (grad.size() != params_.size()) fail("gradient buffer has wrong size");
  const std::size_t n = ex.tgt.size() - 1;
  std::span<const int> tgt_in(ex.tgt.data(), n);
  Pass pass;
  run_forward(ex.src, tgt_in,
              decoder_positions(n, ex.paths.empty() ? nullptr : &ex.paths),
              rng, pass);
  double nll = 0.0;
  Mat<T> dlogits(n, cfg_.tgt_vocab);
  for (std::size_t i = 0; i < n; ++i) {
    const int target = ex.tgt[i + 1];
    nll -= static_cast<double>(pass.logp.at(i, static_cast<std::size_t>(target)));
    T* dr = dlogits.row(i);
    const T* lr = pass.logp.row(i);
    for (std::size_t j = 0; j < cfg_.tgt_vocab; ++j) dr[j] = scale * std::exp(lr[j]);
    dr[target] -= scale;
  }
  run_backward(pass, dlogits, grad);
  return nll;
}

template <typename T>
double Transformer<T>::loss(const Example& ex) const {
  if (ex.tgt.size() < 2) fail("target sequence needs at least two ids");
  const std::size_t n = ex.tgt.size() - 1;
  Mat<T> logp = forward(ex.src, std::span<const int>(ex.tgt.data(), n),
                        ex.paths.empty() ? nullptr : &ex.paths);
  double nll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nll -= static_cast<double>(logp.at(i, static_cast<std::size_t>(ex.tgt[i + 1])));
  }
  return nll;
}

// ---------------------------------------------------------------------------
// Incremental decoding

template <typename T>
EncoderMemory<T> Transformer<T>::encode(std::span<const int> src) const {
  // A one-token decoder pass is the cheapest way to reuse the encoder code.
  Pass pass;
  const int sos = 0;
  run_forward(src, std::span<const int>(&sos, 1),
              Mat<T>(1, cfg_.d_model), nullptr, pass);
  EncoderMemory<T> mem;
  mem.output = std::move(pass.memory);
  for (const DecoderLayerParams& lp : layout_.decoder) {
    Mat<T> k, v;
    linear_forward(mem.output, p(lp.cross.wk), p(lp.cross.bk), cfg_.d_model, k);
    linear_forward(mem.output, p(lp.cross.wv), p(lp.cross.bv), cfg_.d_model, v);
    mem.keys.push_back(std::move(k));
    mem.values.push_back(std::move(v));
  }
  return mem;
}

template <typename T>
DecoderCache<T> Transformer<T>::empty_cache() const {
  DecoderCache<T> cache;
  cache.keys.assign(layout_.decoder.size(), Mat<T>(0, cfg_.d_model));
  cache.values.assign(layout_.decoder.size(), Mat<T>(0, cfg_.d_model));
  return cache;
}

template <typename T>
std::vector<T> Transformer<T>::decode_step(const EncoderMemory<T>& memory,
                                           DecoderCache<T>& cache, int token,
                                           std::span<const T> position) const {
  const std::size_t d = cfg_.d_model;
  if (token < 0 || static_cast<std::size_t>(token) >= cfg_.tgt_vocab) {
    fail("target id out of range");
  }
  if (position.size() != d) fail("positional row has wrong width");
  const T emb_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  const std::size_t dh = d / cfg_.heads;
  const Blocks<T> blk{params_.data(), cfg_.heads};

  Mat<T> y(1, d);
  const T* e = p(layout_.tgt_embed) + static_cast<std::size_t>(token) * d;
  for (std::size_t j = 0; j < d; ++j) y.v[j] = position[j] + emb_scale * e[j];

  const std::size_t n = cache.length + 1;
  std::vector<T> probs(std::max(n, memory.output.rows));
  for (std::size_t l = 0; l < layout_.decoder.size(); ++l) {
    const DecoderLayerParams& lp = layout_.decoder[l];
    Mat<T> a, q, k, v, o(1, d), s;
    norm_forward(y, p(lp.norm1.gain), p(lp.norm1.bias), a, nullptr);
    linear_forward(a, p(lp.self.wq), p(lp.self.bq), d, q);
    linear_forward(a, p(lp.self.wk), p(lp.self.bk), d, k);
    linear_forward(a, p(lp.self.wv), p(lp.self.bv), d, v);
    Mat<T>& keys = cache.keys[l];
    Mat<T>& values = cache.values[l];
    keys.v.insert(keys.v.end(), k.v.begin(), k.v.end());
    values.v.insert(values.v.end(), v.v.begin(), v.v.end());
    keys.rows = values.rows = n;
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      attend_row(q.row(0), keys, values, n, h, dh, probs.data(), o.row(0));
    }
    linear_forward(o, p(lp.self.wo), p(lp.self.bo), d, s);
    add_into(y, s);

    Mat<T> b, qc, oc(1, d), sc;
    norm_forward(y, p(lp.norm2.gain), p(lp.norm2.bias), b, nullptr);
    linear_forward(b, p(lp.cross.wq), p(lp.cross.bq), d, qc);
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      attend_row(qc.row(0), memory.keys[l], memory.values[l],
                 memory.output.rows, h, dh, probs.data(), oc.row(0));
    }
    linear_forward(oc, p(lp.cross.wo), p(lp.cross.bo), d, sc);
    add_into(y, sc);

    Mat<T> c;
    norm_forward(y, p(lp.norm3.gain), p(lp.norm3.bias), c, nullptr);
    FeedForwardCache<T> ffc;
    Mat<T> f = blk.feed_forward(lp.ff, c, ffc);
    add_into(y, f);
  }
  cache.length = n;
  Mat<T> z, logits;
  norm_forward(y, p(layout_.decoder_norm.gain), p(layout_.decoder_norm.bias), z,
               nullptr);
  linear_forward(z, p(layout_.out_w), p(layout_.out_b), cfg_.tgt_vocab, logits);
  return log_softmax_row<T>(std::span<const T>(logits.v));
}

template class Transformer<float>;
template class Transformer<double>;
template Mat<float> sequential_positions<float>(std::size_t, std::size_t);
template Mat<double> sequential_positions<double>(std::size_t, std::size_t);
template Mat<float> tree_positions<float>(const std::vector<EdgePath>&,
                                          std::size_t, std::size_t);
template Mat<double> tree_positions<double>(const std::vector<EdgePath>&,
                                            std::size_t, std::size_t);
template std::vector<float> log_softmax_row<float>(std::span<const float>);
template std::vector<double> log_softmax_row<double>(std::span<const double>);

}  // namespace treeseq
