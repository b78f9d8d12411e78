#include <cmath>

#include "core/error.h"
#include "core/metrics.h"
#include "doctest.h"

using namespace treeseq;

namespace {
TokenSeq seq(std::initializer_list<const char*> t) { return TokenSeq(t.begin(), t.end()); }
}  // namespace

// Reference values come from an independent n-gram counting script.
TEST_CASE("bleu oracle values") {
  CHECK(std::abs(bleu({seq({"a", "b", "c", "d"})}, {seq({"a", "b", "c", "e"})}) -
                 0.0039763536438352535) < 1e-12);
  // Brevity penalty exp(1 - 4/3); no 4-grams in the prediction, so three
  // orders enter the mean.
  CHECK(std::abs(bleu({seq({"a", "b", "c"})}, {seq({"a", "b", "c", "d"})}) -
                 0.7165313105737893) < 1e-12);
  CHECK(std::abs(bleu({seq({"a", "b", "c", "d"}), seq({"x", "y"})},
                      {seq({"a", "b", "c", "d"}), seq({"x", "z", "w"})}) -
                 0.7526405111736054) < 1e-12);
  CHECK(bleu({seq({"a", "b"})}, {seq({"a", "b"})}) == 1.0);
  CHECK(bleu({seq({})}, {seq({"a"})}) == 0.0);
  CHECK_THROWS_AS(bleu({}, {}), Error);
}

TEST_CASE("exact match counting") {
  std::vector<TokenSeq> refs, preds;
  for (int i = 0; i < 10; ++i) {
    refs.push_back(seq({"x"}));
    preds.push_back(i < 3 ? seq({"x"}) : seq({"y"}));
  }
  CHECK(exact_match(preds, refs) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(exact_match(refs, refs) == 1.0);
}

TEST_CASE("prefix scores") {
  PrefixScores one = prefix_scores({seq({"a", "b", "x"})}, {seq({"a", "b", "c", "d"})});
  CHECK(std::abs(one.seq_recall - 0.5) < 1e-12);
  CHECK(std::abs(one.seq_precision - 2.0 / 3.0) < 1e-12);
  PrefixScores two = prefix_scores({seq({"a", "b", "x"}), seq({"q"})},
                                   {seq({"a", "b", "c", "d"}), seq({"r", "s"})});
  CHECK(std::abs(two.token_recall - 2.0 / 6.0) < 1e-12);
  CHECK(std::abs(two.token_precision - 2.0 / 4.0) < 1e-12);
  CHECK(std::abs(two.seq_recall - 0.25) < 1e-12);
  CHECK(std::abs(two.seq_precision - 1.0 / 3.0) < 1e-12);
  PrefixScores empty = prefix_scores({seq({})}, {seq({"a"})});
  CHECK(empty.seq_precision == 0.0);
  CHECK(empty.token_precision == 0.0);
  CHECK_THROWS_AS(prefix_scores({seq({"a"})}, {seq({})}), Error);
}

TEST_CASE("evaluate with and without literal masking") {
  std::vector<std::vector<AstToken>> refs = {
      parse_token_texts({"sos", "Name", "'a'", "eos"})};
  std::vector<std::vector<AstToken>> preds = {
      parse_token_texts({"sos", "Name", "'b'", "eos"})};
  EvalReport masked = evaluate(preds, refs, true);
  EvalReport plain = evaluate(preds, refs, false);
  CHECK(masked.em_accuracy == 1.0);
  CHECK(plain.em_accuracy == 0.0);
  CHECK(masked.seq_recall > plain.seq_recall);
  CHECK(masked.masked_literals);
  for (const EvalReport& r : {masked, plain}) {
    for (double v : {r.bleu, r.em_accuracy, r.seq_recall, r.seq_precision,
                     r.token_recall, r.token_precision}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.em_accuracy <= r.seq_recall);
    CHECK(r.em_accuracy <= r.seq_precision);
  }
  CHECK(masked.to_json()["em_accuracy"] == 1.0);
  CHECK(masked.to_table().find("EM accuracy") != std::string::npos);
}
