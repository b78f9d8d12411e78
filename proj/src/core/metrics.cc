#include "metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "error.h"
#include "vocab.h"

namespace treeseq {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> count_ngrams(const TokenSeq& seq, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[Ngram(seq.begin() + i, seq.begin() + i + n)];
  }
  return counts;
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) {
    fail("prediction and reference counts differ (" + std::to_string(a) +
         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

double bleu(const std::vector<TokenSeq>& predictions,
            const std::vector<TokenSeq>& references) {
  check_sizes(predictions.size(), references.size());
  if (predictions.empty()) fail("BLEU of an empty corpus is undefined");

  constexpr std::size_t kMaxOrder = 4;
  std::size_t matches[kMaxOrder] = {}, totals[kMaxOrder] = {};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    hyp_len += predictions[s].size();
    ref_len += references[s].size();
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
      auto hyp = count_ngrams(predictions[s], n);
      auto ref = count_ngrams(references[s], n);
      for (const auto& [gram, count] : hyp) {
        totals[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0 || matches[0] == 0) return 0.0;

  // Orders the predictions are too short to contain are left out of the
  // mean, so bleu(x, x) = 1 also for corpora of one- to three-token lines.
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kMaxOrder; ++n) {
    if (totals[n] == 0) continue;
    double p = static_cast<double>(matches[n]) / static_cast<double>(totals[n]);
    log_sum += std::log(p > 0.0 ? p : kBleuEpsilon);
    ++orders;
  }
  double bp = 1.0;
  if (hyp_len < ref_len) {
    bp = std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(hyp_len));
  }
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

double exact_match(const std::vector<TokenSeq>& predictions,
                   const std::vector<TokenSeq>& references) {
  check_sizes(predictions.size(), references.size());
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == references[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::size_t common_prefix_length(const TokenSeq& a, const TokenSeq& b) {
  std::size_t n = 0;
  while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
  return n;
}

PrefixScores prefix_scores(const std::vector<TokenSeq>& predictions,
                           const std::vector<TokenSeq>& references) {
  check_sizes(predictions.size(), references.size());
  PrefixScores out;
  if (predictions.empty()) return out;
  std::size_t lcp_sum = 0, ref_sum = 0, pred_sum = 0;
  double recall_sum = 0.0, precision_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const TokenSeq& pred = predictions[i];
    const TokenSeq& ref = references[i];
    if (ref.empty()) {
      fail("reference " + std::to_string(i) + " is an empty sequence");
    }
    const std::size_t lcp = common_prefix_length(pred, ref);
    lcp_sum += lcp;
    ref_sum += ref.size();
    pred_sum += pred.size();
    recall_sum += static_cast<double>(lcp) / static_cast<double>(ref.size());
    if (!pred.empty()) {
      precision_sum +=
          static_cast<double>(lcp) / static_cast<double>(pred.size());
    }
  }
  const double count = static_cast<double>(predictions.size());
  out.token_recall =
      static_cast<double>(lcp_sum) / static_cast<double>(ref_sum);
  out.token_precision =
      pred_sum == 0 ? 0.0
                    : static_cast<double>(lcp_sum) /
                          static_cast<double>(pred_sum);
  out.seq_recall = recall_sum / count;
  out.seq_precision = precision_sum / count;
  return out;
}

nlohmann::json EvalReport::to_json() const {
  return nlohmann::json{{"bleu", bleu},
                        {"em_accuracy", em_accuracy},
                        {"seq_recall", seq_recall},
                        {"seq_precision", seq_precision},
                        {"token_recall", token_recall},
                        {"token_precision", token_precision},
                        {"samples", samples},
                        {"masked_literals", masked_literals}};
}

std::string EvalReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "samples          %zu\n"
                "literals masked  %s\n"
                "BLEU             %6.2f%%\n"
                "EM accuracy      %6.2f%%\n"
                "seq recall       %6.2f%%\n"
                "token recall     %6.2f%%\n"
                "seq precision    %6.2f%%\n"
                "token precision  %6.2f%%\n",
                samples, masked_literals ? "yes" : "no", 100 * bleu,
                100 * em_accuracy, 100 * seq_recall, 100 * token_recall,
                100 * seq_precision, 100 * token_precision);
  return buf;
}

EvalReport evaluate(const std::vector<std::vector<AstToken>>& predictions,
                    const std::vector<std::vector<AstToken>>& references,
                    bool mask_string_literals) {
  check_sizes(predictions.size(), references.size());
  std::vector<TokenSeq> pred, ref;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pred.push_back(token_texts(mask_string_literals
                                   ? mask_literals(predictions[i])
                                   : predictions[i]));
    ref.push_back(token_texts(mask_string_literals
                                  ? mask_literals(references[i])
                                  : references[i]));
  }
  EvalReport r;
  r.samples = predictions.size();
  r.masked_literals = mask_string_literals;
  r.bleu = bleu(pred, ref);
  r.em_accuracy = exact_match(pred, ref);
  PrefixScores p = prefix_scores(pred, ref);
  r.seq_recall = p.seq_recall;
  r.seq_precision = p.seq_precision;
  r.token_recall = p.token_recall;
  r.token_precision = p.token_precision;
  return r;
}

}  // namespace treeseq
