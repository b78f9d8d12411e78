#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "model.h"
#include "typed_tree.h"
#include "vocab.h"

namespace treeseq {

// Turns corpus samples into id-space examples for one model config.
// Tree mode attaches one edge path per target id; a tree deeper than the
// configured path length is an error.
Example make_example(const Sample& sample, const SubwordVocab& subword,
                     const TargetCodec& codec, const ModelConfig& cfg);
std::vector<Example> make_examples(std::span<const Sample> corpus,
                                   const SubwordVocab& subword,
                                   const TargetCodec& codec,
                                   const ModelConfig& cfg);
std::vector<int> encode_source(std::string_view nl, const SubwordVocab& subword);

struct TrainOptions {
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  // Worker threads for per-sample gradients. Gradients are summed in
  // sample order, so results do not depend on this value.
  std::size_t threads = 1;
  // Called after every epoch with the mean per-token loss of that epoch.
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  std::size_t steps = 0;
};

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.98,
       double eps = 1e-9)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  template <typename T>
  void step(std::span<T> params, std::span<const T> grad);

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Scales `grad` in place so its L2 norm is at most `max_norm`; returns the
// norm before clipping.
template <typename T>
double clip_gradient(std::span<T> grad, double max_norm);

// Summed NLL over `batch` plus its gradient divided by the batch token count.
template <typename T>
double batch_gradient(const Transformer<T>& model,
                      std::span<const Example* const> batch,
                      std::span<T> grad, std::mt19937_64* dropout_rng,
                      std::size_t threads);

// Mean per-token NLL over a set of examples.
template <typename T>
double mean_loss(const Transformer<T>& model, std::span<const Example> data);

TrainResult train(Transformer<float>& model, std::span<const Example> data,
                  const TrainOptions& options);

struct GradCheckResult {
  double max_relative_error = 0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

// Compares analytic gradients of the mean batch loss with central
// differences (step `h`) on `samples` parameter indices drawn with `seed`.
// Relative error is |a - n| / max(|a|, |n|, floor). Central differences
// carry round-off of about eps * loss / h (~2e-11 at h = 1e-5), so the
// floor keeps gradients near zero from reporting that noise as error.
GradCheckResult grad_check(const Transformer<double>& model,
                           std::span<const Example> batch,
                           std::size_t samples, std::uint64_t seed,
                           double h = 1e-5, double floor = 1e-4);

// Model weights, config and both vocabularies in one JSON document.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;
  ModelConfig config;
  AstVocab ast;
  SubwordVocab subword;
  std::vector<float> params;

  std::string save() const;
  static Checkpoint load(std::string_view document);
};

}  // namespace treeseq
