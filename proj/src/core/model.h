#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "edge_paths.h"
#include "json.hpp"
#include "tensor.h"

namespace treeseq {

enum class PositionalMode { kSequential, kTree };

std::string_view positional_name(PositionalMode mode);
PositionalMode parse_positional(std::string_view name);

// Desk-scale defaults. Reference-scale values: d_model 512, 16 heads,
// 6 encoder / 6-8 decoder layers, feed-forward 2048, tree height 32.
struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t ff_width = 128;
  std::size_t d_idx = 4;
  std::size_t path_len = 16;
  double dropout = 0.0;
  PositionalMode positional = PositionalMode::kTree;
  double learning_rate = 1e-4;
  std::size_t batch_size = 15;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Slice {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

struct NormParams {
  Slice gain, bias;
};
struct AttentionParams {
  Slice wq, bq, wk, bk, wv, bv, wo, bo;
};
struct FeedForwardParams {
  Slice w1, b1, w2, b2;
};
struct EncoderLayerParams {
  NormParams norm1, norm2;
  AttentionParams self;
  FeedForwardParams ff;
};
struct DecoderLayerParams {
  NormParams norm1, norm2, norm3;
  AttentionParams self, cross;
  FeedForwardParams ff;
};

// Offsets of every tensor inside one flat parameter vector.
struct ParamLayout {
  Slice src_embed, tgt_embed;
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  NormParams encoder_norm, decoder_norm;
  Slice out_w, out_b;
  std::size_t total = 0;

  static ParamLayout build(const ModelConfig& cfg);
};

// Positional rows added to the embeddings at the first layer.
template <typename T>
Mat<T> sequential_positions(std::size_t n, std::size_t d_model);
template <typename T>
Mat<T> tree_positions(const std::vector<EdgePath>& paths, std::size_t d_idx,
                      std::size_t path_len);

// One training/evaluation pair in id space. `tgt` starts with sos and ends
// with eos; `paths` has one entry per `tgt` id (tree mode only).
struct Example {
  std::vector<int> src;
  std::vector<int> tgt;
  std::vector<EdgePath> paths;
};

// Per-hypothesis incremental decoding state: cached self-attention keys
// and values for each decoder layer.
template <typename T>
struct DecoderCache {
  std::vector<Mat<T>> keys, values;
  std::size_t length = 0;
};

// Encoder output plus the cross-attention keys/values derived from it.
template <typename T>
struct EncoderMemory {
  Mat<T> output;
  std::vector<Mat<T>> keys, values;
};

template <typename T>
class Transformer {
 public:
  Transformer(const ModelConfig& cfg, std::uint64_t seed);
  Transformer(const ModelConfig& cfg, std::vector<T> params);

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<const T> params() const { return params_; }
  std::span<T> params() { return params_; }

  // Decoder positional rows for `tgt_in` according to the config mode.
  Mat<T> decoder_positions(std::size_t n,
                           const std::vector<EdgePath>* paths) const;

  // Log-probabilities (rows = decoder positions, cols = target vocab) for
  // predicting tgt_in[i+1] from tgt_in[0..i].
  Mat<T> forward(std::span<const int> src, std::span<const int> tgt_in,
                 const std::vector<EdgePath>* paths) const;
  Mat<T> forward_with_positions(std::span<const int> src,
                                std::span<const int> tgt_in,
                                const Mat<T>& positions) const;

  // Summed negative log-likelihood of ex.tgt[1..]; adds `scale` times its
  // gradient into `grad` (sized like params). Dropout applies when `rng`
  // is non-null and the config rate is positive.
  double loss_and_gradient(const Example& ex, std::span<T> grad, T scale,
                           std::mt19937_64* rng) const;
  double loss(const Example& ex) const;

  EncoderMemory<T> encode(std::span<const int> src) const;
  DecoderCache<T> empty_cache() const;
  // Feeds one token at the next position; returns next-token log-probs.
  std::vector<T> decode_step(const EncoderMemory<T>& memory,
                             DecoderCache<T>& cache, int token,
                             std::span<const T> position) const;

 private:
  struct Pass;
  void run_forward(std::span<const int> src, std::span<const int> tgt_in,
                   const Mat<T>& positions, std::mt19937_64* rng,
                   Pass& pass) const;
  void run_backward(const Pass& pass, const Mat<T>& dlogits,
                    std::span<T> grad) const;

  const T* p(const Slice& s) const { return params_.data() + s.offset; }

  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<T> params_;
};

template <typename T>
std::vector<T> log_softmax_row(std::span<const T> logits);

}  // namespace treeseq
