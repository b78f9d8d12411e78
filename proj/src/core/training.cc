#include "training.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "edge_paths.h"
#include "error.h"

namespace treeseq {

using nlohmann::json;

std::vector<int> encode_source(std::string_view nl, const SubwordVocab& subword) {
  std::vector<int> ids = subword.encode(nl);
  // The encoder needs at least one position; an empty description becomes
  // a lone literal-end marker.
  if (ids.empty()) ids.push_back(SubwordVocab::kLiteralEnd);
  return ids;
}

Example make_example(const Sample& sample, const SubwordVocab& subword,
                     const TargetCodec& codec, const ModelConfig& cfg) {
  Example ex;
  ex.src = encode_source(sample.nl, subword);
  std::vector<AstToken> tokens = linearize(sample.tree);
  if (cfg.positional == PositionalMode::kTree) {
    std::vector<EdgePath> paths = edge_paths(sample.tree, cfg.path_len);
    TargetCodec::Encoded enc = codec.encode(tokens, &paths);
    ex.tgt = std::move(enc.ids);
    ex.paths = std::move(enc.paths);
  } else {
    ex.tgt = codec.encode(tokens).ids;
  }
  return ex;
}

std::vector<Example> make_examples(std::span<const Sample> corpus,
                                   const SubwordVocab& subword,
                                   const TargetCodec& codec,
                                   const ModelConfig& cfg) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      out.push_back(make_example(corpus[i], subword, codec, cfg));
    } catch (const Error& e) {
      fail("sample " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
void Adam::step(std::span<T> params, std::span<const T> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    fail("optimizer state does not match the parameter count");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
  }
}

template <typename T>
double clip_gradient(std::span<T> grad, double max_norm) {
  double sq = 0.0;
  for (T g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) fail("non-finite gradient");
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (T& g : grad) g *= s;
  }
  return norm;
}

template <typename T>
double batch_gradient(const Transformer<T>& model,
                      std::span<const Example* const> batch,
                      std::span<T> grad, std::mt19937_64* dropout_rng,
                      std::size_t threads) {
  std::size_t tokens = 0;
  for (const Example* ex : batch) tokens += ex->tgt.size() - 1;
  if (tokens == 0) fail("batch has no target tokens");
  const T scale = T(1) / static_cast<T>(tokens);

  // Each sample gets its own buffer and dropout stream; buffers are then
  // summed in sample order so the result is independent of scheduling.
  std::vector<std::uint64_t> seeds(batch.size(), 0);
  if (dropout_rng) {
    for (auto& s : seeds) s = (*dropout_rng)();
  }
  std::vector<std::vector<T>> parts(batch.size());
  std::vector<double> nll(batch.size(), 0.0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < batch.size();) {
      parts[i].assign(grad.size(), T(0));
      std::mt19937_64 rng(seeds[i]);
      nll[i] = model.loss_and_gradient(*batch[i], parts[i], scale,
                                       dropout_rng ? &rng : nullptr);
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, batch.size());
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  std::fill(grad.begin(), grad.end(), T(0));
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += parts[i][j];
    total += nll[i];
  }
  return total;
}

template <typename T>
double mean_loss(const Transformer<T>& model, std::span<const Example> data) {
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const Example& ex : data) {
    nll += model.loss(ex);
    tokens += ex.tgt.size() - 1;
  }
  if (tokens == 0) fail("no target tokens");
  return nll / static_cast<double>(tokens);
}

TrainResult train(Transformer<float>& model, std::span<const Example> data,
                  const TrainOptions& options) {
  if (data.empty()) fail("training set is empty");
  const ModelConfig& cfg = model.config();
  for (const Example& ex : data) {
    if (ex.tgt.size() < 2) fail("training example without target tokens");
  }
  std::mt19937_64 rng(options.seed);
  std::mt19937_64 dropout_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(model.params().size(), cfg.learning_rate);
  std::vector<float> grad(model.params().size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&data[order[i]]);
        tokens += data[order[i]].tgt.size() - 1;
      }
      nll += batch_gradient<float>(model, batch, grad,
                                   cfg.dropout > 0 ? &dropout_rng : nullptr,
                                   options.threads);
      clip_gradient<float>(grad, options.clip_norm);
      adam.step<float>(model.params(), grad);
      ++result.steps;
    }
    const double loss = nll / static_cast<double>(tokens);
    if (!std::isfinite(loss)) fail("training diverged (non-finite loss)");
    result.epoch_losses.push_back(loss);
    if (options.on_epoch) options.on_epoch(epoch + 1, loss);
  }
  return result;
}

GradCheckResult grad_check(const Transformer<double>& model,
                           std::span<const Example> batch,
                           std::size_t samples, std::uint64_t seed, double h,
                           double floor) {
  if (batch.empty()) fail("gradient check needs at least one example");
  std::vector<const Example*> ptrs;
  std::size_t tokens = 0;
  for (const Example& ex : batch) {
    ptrs.push_back(&ex);
    tokens += ex.tgt.size() - 1;
  }
  std::vector<double> analytic(model.params().size());
  batch_gradient<double>(model, ptrs, analytic, nullptr, 1);

  Transformer<double> probe = model;
  auto mean = [&] {
    double nll = 0.0;
    for (const Example& ex : batch) nll += probe.loss(ex);
    return nll / static_cast<double>(tokens);
  };
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, analytic.size() - 1);
  GradCheckResult result;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t idx = pick(rng);
    double& w = probe.params()[idx];
    const double orig = w;
    w = orig + h;
    const double up = mean();
    w = orig - h;
    const double down = mean();
    w = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[idx];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      fail("non-finite value in gradient check");
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double err = std::abs(a - numeric) / denom;
    if (s == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = idx;
    }
    ++result.checked;
  }
  return result;
}

std::string Checkpoint::save() const {
  json j{{"format_version", kFormatVersion},
         {"config", config.to_json()},
         {"ast_vocab", ast.to_json()},
         {"subword_vocab", subword.to_json()},
         {"params", params}};
  return j.dump() + "\n";
}

Checkpoint Checkpoint::load(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::exception& e) {
    fail(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      fail("unsupported checkpoint format version");
    }
    c.config = ModelConfig::from_json(j.at("config"));
    c.ast = AstVocab::from_json(j.at("ast_vocab"));
    c.subword = SubwordVocab::from_json(j.at("subword_vocab"));
    c.params = j.at("params").get<std::vector<float>>();
  } catch (const json::exception& e) {
    fail(std::string("malformed checkpoint: ") + e.what());
  }
  c.config.validate();
  if (c.config.src_vocab != c.subword.size() ||
      c.config.tgt_vocab != c.ast.size() + c.subword.size()) {
    fail("checkpoint vocabularies do not match its config");
  }
  return c;
}

template void Adam::step<float>(std::span<float>, std::span<const float>);
template void Adam::step<double>(std::span<double>, std::span<const double>);
template double clip_gradient<float>(std::span<float>, double);
template double clip_gradient<double>(std::span<double>, double);
template double batch_gradient<float>(const Transformer<float>&,
                                      std::span<const Example* const>,
                                      std::span<float>, std::mt19937_64*,
                                      std::size_t);
template double batch_gradient<double>(const Transformer<double>&,
                                       std::span<const Example* const>,
                                       std::span<double>, std::mt19937_64*,
                                       std::size_t);
template double mean_loss<float>(const Transformer<float>&,
                                 std::span<const Example>);
template double mean_loss<double>(const Transformer<double>&,
                                  std::span<const Example>);

}  // namespace treeseq
