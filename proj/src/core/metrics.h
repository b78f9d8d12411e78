#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "typed_tree.h"

namespace treeseq {

using TokenSeq = std::vector<std::string>;

// Zero higher-order n-gram precisions are replaced by this value before the
// geometric mean.
inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU (n = 1..4, clipped counts, brevity penalty). In [0, 1].
// Orders with no prediction n-grams at all are skipped.
double bleu(const std::vector<TokenSeq>& predictions,
            const std::vector<TokenSeq>& references);

double exact_match(const std::vector<TokenSeq>& predictions,
                   const std::vector<TokenSeq>& references);

struct PrefixScores {
  double token_recall = 0;
  double token_precision = 0;
  double seq_recall = 0;
  double seq_precision = 0;
};

std::size_t common_prefix_length(const TokenSeq& a, const TokenSeq& b);

// Token level is micro-averaged, sequence level macro-averaged. An empty
// prediction scores precision 0.
PrefixScores prefix_scores(const std::vector<TokenSeq>& predictions,
                           const std::vector<TokenSeq>& references);

struct EvalReport {
  double bleu = 0;
  double em_accuracy = 0;
  double seq_recall = 0;
  double seq_precision = 0;
  double token_recall = 0;
  double token_precision = 0;
  std::size_t samples = 0;
  bool masked_literals = false;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

EvalReport evaluate(const std::vector<std::vector<AstToken>>& predictions,
                    const std::vector<std::vector<AstToken>>& references,
                    bool mask_string_literals);

}  // namespace treeseq
