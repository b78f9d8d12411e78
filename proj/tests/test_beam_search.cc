#include <algorithm>

#include "core/beam_search.h"
#include "core/delinearize.h"
#include "core/error.h"
#include "core/toy_corpus.h"
#include "core/training.h"
#include "doctest.h"

using namespace treeseq;

namespace {

struct Overfit {
  std::vector<Sample> corpus;
  GrammarGraph grammar;
  AstVocab ast;
  SubwordVocab sub;
  std::unique_ptr<TargetCodec> codec;
  std::unique_ptr<Transformer<float>> model;
};

// Trains once and shares the result across test cases.
const Overfit& overfit() {
  static const Overfit* fit = [] {
    auto* f = new Overfit;
    f->corpus = generate_toy_corpus(ToyOptions{8, 21, 5, 1});
    std::vector<TypedTree> trees;
    for (const Sample& s : f->corpus) trees.push_back(s.tree);
    f->grammar = GrammarGraph::induce(trees);
    f->ast = AstVocab::build(f->corpus);
    f->sub = SubwordVocab::train(subword_training_texts(f->corpus), 80);
    f->codec = std::make_unique<TargetCodec>(f->ast, f->sub);
    ModelConfig cfg;
    cfg.d_model = 32;
    cfg.heads = 2;
    cfg.ff_width = 64;
    cfg.d_idx = 2;
    cfg.path_len = 16;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 8;
    cfg.src_vocab = f->sub.size();
    cfg.tgt_vocab = f->codec->size();
    f->model = std::make_unique<Transformer<float>>(cfg, 5);
    std::vector<Example> data = make_examples(f->corpus, f->sub, *f->codec, cfg);
    TrainOptions opts;
    opts.epochs = 250;
    train(*f->model, data, opts);
    return f;
  }();
  return *fit;
}

}  // namespace

TEST_CASE("greedy constrained search recovers training targets") {
  const Overfit& f = overfit();
  BeamDecoder<float> dec(*f.model, *f.codec, &f.grammar);
  BeamOptions opts;
  opts.beams = 1;
  for (const Sample& s : f.corpus) {
    auto hyps = dec.search(encode_source(s.nl, f.sub), opts);
    REQUIRE(!hyps.empty());
    CHECK(hyps[0].finished);
    CHECK(hyps[0].parsable);
    CHECK(token_texts(hyps[0].tokens) == token_texts(linearize(s.tree)));
  }
}

TEST_CASE("every constrained expansion is in the legal set") {
  const Overfit& f = overfit();
  BeamDecoder<float> dec(*f.model, *f.codec, &f.grammar);
  std::size_t steps = 0;
  auto observer = [&](const DecoderState& state, bool in_literal, int id) {
    ++steps;
    if (in_literal || f.codec->is_subword(id)) {
      // Subword ids only appear where a string literal may start or go on.
      bool string_ok = in_literal;
      for (const TokenClass& c : state.legal_tokens()) {
        string_ok |= c.kind == TokenKind::kLiteral &&
                     c.category == LiteralCategory::kString;
      }
      CHECK(string_ok);
      return;
    }
    const AstToken token = parse_token_text(f.ast.text(id));
    bool listed = false;
    for (const TokenClass& c : state.legal_tokens()) listed |= c.matches(token);
    CHECK(listed);
  };
  BeamOptions opts;
  opts.beams = 4;
  // Descriptions the model never saw still decode to grammatical trees.
  for (const Sample& s : generate_toy_corpus(ToyOptions{10, 99, 6, 2})) {
    for (const BeamHypothesis& h : dec.search(encode_source(s.nl, f.sub), opts, observer)) {
      if (h.finished) CHECK(h.parsable);
    }
  }
  CHECK(steps > 0);
}

TEST_CASE("hypotheses hitting max_len are closed unfinished") {
  const Overfit& f = overfit();
  BeamDecoder<float> dec(*f.model, *f.codec, &f.grammar);
  BeamOptions opts;
  opts.beams = 3;
  opts.max_len = 2;  // the smallest tree, sos Module le eos, needs 3
  auto hyps = dec.search(encode_source(f.corpus[0].nl, f.sub), opts);
  REQUIRE(!hyps.empty());
  for (const BeamHypothesis& h : hyps) {
    CHECK_FALSE(h.finished);
    CHECK_FALSE(h.parsable);
    CHECK(h.ids.size() == 3);
  }
  opts.max_len = 0;
  CHECK_THROWS_AS(dec.search(encode_source("x", f.sub), opts), Error);
}

TEST_CASE("ranking is by length-normalized score") {
  const Overfit& f = overfit();
  BeamDecoder<float> dec(*f.model, *f.codec, &f.grammar);
  BeamOptions opts;
  opts.beams = 5;
  opts.constrained = false;
  auto hyps = dec.search(encode_source(f.corpus[1].nl, f.sub), opts);
  for (std::size_t i = 1; i < hyps.size(); ++i) {
    if (hyps[i].finished == hyps[i - 1].finished) {
      CHECK(hyps[i - 1].score >= hyps[i].score);
    }
    CHECK(hyps[i].score ==
          doctest::Approx(hyps[i].log_prob / double(hyps[i].ids.size() - 1)));
  }
}

TEST_CASE("decoder setup errors") {
  const Overfit& f = overfit();
  // Tree mode needs a grammar for paths; constrained search needs one too.
  CHECK_THROWS_AS(BeamDecoder<float>(*f.model, *f.codec, nullptr)
                      .search(std::vector<int>{3}, BeamOptions{}),
                  Error);
  // A grammar with a type the vocabulary does not know is rejected.
  std::vector<TypedTree> extra;
  extra.push_back(TypedTree::wrap(ObjectNode{"Mystery", std::nullopt, {}}));
  for (const Sample& s : f.corpus) extra.push_back(s.tree);
  GrammarGraph wider = GrammarGraph::induce(extra);
  CHECK_THROWS_AS(BeamDecoder<float>(*f.model, *f.codec, &wider), Error);
}
