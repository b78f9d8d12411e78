// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion...]   (default: all of 1..9)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "core/automaton.h"
#include "core/beam_search.h"
#include "core/delinearize.h"
#include "core/edge_paths.h"
#include "core/error.h"
#include "core/grammar.h"
#include "core/metrics.h"
#include "core/toy_corpus.h"
#include "core/training.h"
#include "core/tree_encoding.h"
#include "fixtures.h"

using namespace treeseq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<TypedTree> trees_of(const std::vector<Sample>& corpus) {
  std::vector<TypedTree> trees;
  for (const Sample& s : corpus) trees.push_back(s.tree);
  return trees;
}

// Vocabularies and codec for a training corpus.
struct Setup {
  GrammarGraph grammar;
  AstVocab ast;
  SubwordVocab sub;
  std::unique_ptr<TargetCodec> codec;

  Setup(const std::vector<Sample>& train, std::size_t subword_size) {
    grammar = GrammarGraph::induce(trees_of(train));
    ast = AstVocab::build(train);
    const std::vector<std::string> texts = subword_training_texts(train);
    sub = SubwordVocab::train(texts, subword_size);
    codec = std::make_unique<TargetCodec>(ast, sub);
  }

  ModelConfig config(PositionalMode mode) const {
    ModelConfig cfg;  // d_model 64, 4 heads, 2+2 layers, d_idx 4, L 16
    cfg.positional = mode;
    cfg.learning_rate = 1e-3;
    cfg.src_vocab = sub.size();
    cfg.tgt_vocab = codec->size();
    return cfg;
  }
};

struct Decoded {
  std::vector<std::vector<AstToken>> tokens;
  std::size_t parsable = 0;
  std::size_t accepted = 0;
};

Decoded decode_all(const Transformer<float>& model, const Setup& s,
                   const std::vector<Sample>& data, bool constrained) {
  BeamDecoder<float> dec(model, *s.codec, &s.grammar);
  BeamOptions opts;
  opts.beams = 5;
  opts.constrained = constrained;
  Decoded out;
  for (const Sample& sample : data) {
    auto hyps = dec.search(encode_source(sample.nl, s.sub), opts);
    const BeamHypothesis& best = hyps.front();
    out.tokens.push_back(best.tokens);
    if (!best.parsable) continue;
    ++out.parsable;
    if (s.grammar.accepts(delinearize(best.tokens, s.grammar))) ++out.accepted;
  }
  return out;
}

std::vector<std::vector<AstToken>> references(const std::vector<Sample>& data) {
  std::vector<std::vector<AstToken>> refs;
  for (const Sample& s : data) refs.push_back(linearize(s.tree));
  return refs;
}

// 1. The a=10 tree: tokens and L=10 edge paths, verbatim.
Outcome fig1() {
  const TypedTree tree = fixtures::fig1_tree();
  const std::vector<std::string> tokens = {"sos", "Module", "Assign", "Name", "'a'",
                                           "le",  "Num",    "10",     "le",   "eos"};
  const std::vector<EdgePath> paths = {
      {0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0, 0, 0, 0, 0},
      {1, 1, 1, 1, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 0, 0, 0, 0},
      {1, 1, 1, 1, 1, 1, 1, 1, 0, 0}, {2, 1, 1, 1, 1, 1, 0, 0, 0, 0},
      {1, 2, 1, 1, 1, 1, 0, 0, 0, 0}, {1, 1, 1, 2, 1, 1, 1, 1, 0, 0},
      {2, 1, 1, 1, 0, 0, 0, 0, 0, 0}, {1, 2, 0, 0, 0, 0, 0, 0, 0, 0},
  };
  const bool tok_ok = token_texts(linearize(tree)) == tokens;
  const std::vector<EdgePath> got = edge_paths(tree, 10);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < std::min(got.size(), paths.size()); ++i) {
    if (got[i] == paths[i]) ++rows;
  }
  const bool paths_ok = got.size() == paths.size() && rows == paths.size();
  return {tok_ok && paths_ok,
          fmt("tokens %s, edge-path rows %zu/10", tok_ok ? "exact" : "DIFFER", rows)};
}

// 2. Round-trip and automaton replay over 1000 seeded toy trees.
Outcome roundtrip() {
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{1000, 2, 8, 2});
  const std::vector<TypedTree> trees = trees_of(corpus);
  const GrammarGraph g = GrammarGraph::induce(trees);
  std::size_t ok = 0;
  std::string first_error;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    try {
      const std::vector<AstToken> tokens = linearize(trees[i]);
      const std::vector<EdgePath> paths = edge_paths(trees[i], 16);
      if (!(delinearize(tokens, g) == trees[i])) fail("tree differs after round-trip");
      DecoderState state = DecoderState::initial(g);
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (state.next_edge_path(16) != paths[t]) fail("incremental path differs");
        state.step(tokens[t]);
      }
      if (!state.finished()) fail("replay did not finish");
      ++ok;
    } catch (const Error& e) {
      if (first_error.empty()) first_error = fmt("sample %zu: %s", i, e.what());
    }
  }
  return {ok == trees.size(),
          fmt("%zu/%zu trees round-trip with clean replay%s%s", ok, trees.size(),
              first_error.empty() ? "" : "; ", first_error.c_str())};
}

// 3. Uniqueness, shifting and rotation of the tree encoding.
Outcome encoding() {
  const EncodingConfig cfg{4, 16};
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{500, 3, 8, 2});
  std::set<EdgePath> distinct;
  std::size_t duplicate_positions = 0;
  for (const Sample& s : corpus) {
    const std::vector<EdgePath> paths = edge_paths(s.tree, cfg.path_len);
    const std::set<EdgePath> own(paths.begin(), paths.end());
    duplicate_positions += paths.size() - own.size();
    distinct.insert(paths.begin(), paths.end());
  }

  std::vector<std::vector<double>> enc;
  for (const EdgePath& p : distinct) enc.push_back(encode_path(p, cfg));
  double min_gap = INFINITY;
  for (std::size_t a = 0; a < enc.size(); ++a) {
    for (std::size_t b = a + 1; b < enc.size(); ++b) {
      double gap = 0.0;
      for (std::size_t j = 0; j < enc[a].size(); ++j) {
        gap = std::max(gap, std::abs(enc[a][j] - enc[b][j]));
      }
      min_gap = std::min(min_gap, gap);
    }
  }

  double shift_err = 0.0;
  std::size_t shifted = 0;
  for (const EdgePath& p : distinct) {
    if (path_depth(p) == 0) continue;
    EdgePath parent(p.begin() + 1, p.end());
    parent.push_back(0);
    const std::vector<double> c = encode_path(p, cfg), q = encode_path(parent, cfg);
    for (std::size_t j = 0; j + cfg.d_idx < c.size(); ++j) {
      shift_err = std::max(shift_err, std::abs(c[cfg.d_idx + j] - q[j]));
    }
    ++shifted;
  }

  double rot_err = 0.0;
  for (std::size_t d_idx : {std::size_t{4}, std::size_t{16}}) {
    std::vector<std::vector<double>> base;
    for (int i = 0; i <= 512; ++i) base.push_back(encode_index(i, d_idx));
    for (int k = -512; k <= 512; ++k) {
      const DenseMatrix r = sibling_rotation(k, d_idx);
      for (int i = std::max(0, -k); i <= std::min(512, 512 - k); ++i) {
        const std::vector<double> v = treeseq::apply(r, base[i]);
        for (std::size_t j = 0; j < d_idx; ++j) {
          rot_err = std::max(rot_err, std::abs(v[j] - base[i + k][j]));
        }
      }
    }
  }

  const bool pass = duplicate_positions == 0 && min_gap > 1e-6 &&
                    shift_err <= 1e-15 && rot_err <= 1e-9;
  return {pass, fmt("%zu distinct paths, min max-norm gap %.3g, duplicate positions "
                    "%zu; shift err %.3g over %zu paths; rotation err %.3g",
                    distinct.size(), min_gap, duplicate_positions, shift_err,
                    shifted, rot_err)};
}

// 4. Exhaustive check of the automaton against delinearize and accepts.
Outcome masks() {
  const GrammarGraph g = GrammarGraph::induce(fixtures::call_corpus());
  const std::vector<AstToken> alphabet = parse_token_texts(
      {"sos", "eos", "le", "Module", "Call", "Name", "identifier:x"});
  std::set<TokenClass> alphabet_classes;
  for (const AstToken& t : alphabet) alphabet_classes.insert(TokenClass::of(t));

  std::size_t sequences = 0, finished = 0, mismatches = 0, states = 0,
              mask_mismatches = 0;
  std::vector<AstToken> seq;
  std::function<void(const DecoderState*)> visit = [&](const DecoderState* state) {
    ++sequences;
    const bool done = state && state->finished();
    bool parsed = false;
    try {
      parsed = g.accepts(delinearize(seq, g));
    } catch (const Error&) {
    }
    if (done) ++finished;
    if (done != parsed) ++mismatches;

    std::vector<std::optional<DecoderState>> next(alphabet.size());
    if (state && !done) {
      ++states;
      std::set<TokenClass> stepped;
      for (std::size_t i = 0; i < alphabet.size(); ++i) {
        try {
          next[i] = state->stepped(alphabet[i]);
          stepped.insert(TokenClass::of(alphabet[i]));
        } catch (const Error&) {
        }
      }
      const std::vector<TokenClass> legal = state->legal_tokens();
      const std::set<TokenClass> legal_set(legal.begin(), legal.end());
      if (legal_set != stepped) ++mask_mismatches;
    }
    if (seq.size() == 8) return;
    for (std::size_t i = 0; i < alphabet.size(); ++i) {
      seq.push_back(alphabet[i]);
      visit(next[i] ? &*next[i] : nullptr);
      seq.pop_back();
    }
  };
  const DecoderState init = DecoderState::initial(g);
  visit(&init);
  return {mismatches == 0 && mask_mismatches == 0 && finished > 0,
          fmt("%zu sequences (%zu finished), %zu verdict mismatches; %zu reachable "
              "states, %zu mask mismatches",
              sequences, finished, mismatches, states, mask_mismatches)};
}

// 5. Analytic gradients against central differences on a tiny model.
Outcome gradients() {
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{3, 4, 5, 1});
  Setup s(corpus, 40);
  std::string detail;
  bool pass = true;
  for (PositionalMode mode : {PositionalMode::kSequential, PositionalMode::kTree}) {
    ModelConfig cfg = s.config(mode);
    cfg.d_model = 32;
    cfg.heads = 2;
    cfg.encoder_layers = 1;
    cfg.decoder_layers = 1;
    cfg.ff_width = 16;
    cfg.d_idx = 2;
    cfg.path_len = 16;
    std::vector<Sample> shallow;
    for (const Sample& x : corpus) {
      try {
        edge_paths(x.tree, cfg.path_len);
        shallow.push_back(x);
      } catch (const Error&) {
      }
    }
    if (shallow.empty()) fail("no toy sample fits the tiny path length");
    const Transformer<double> model(cfg, 11);
    const std::vector<Example> batch = make_examples(shallow, s.sub, *s.codec, cfg);
    const GradCheckResult r = grad_check(model, batch, 3000, 9);
    pass = pass && r.max_relative_error <= 1e-6;
    detail += fmt("%s max rel err %.3g over %zu of %zu params%s",
                  std::string(positional_name(mode)).c_str(), r.max_relative_error,
                  r.checked, model.params().size(),
                  mode == PositionalMode::kSequential ? "; " : "");
  }
  return {pass, detail};
}

// 6. Overfitting 50 samples in tree mode.
Outcome overfit() {
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{50, 1, 8, 2});
  Setup s(corpus, 2000);
  const ModelConfig cfg = s.config(PositionalMode::kTree);
  Transformer<float> model(cfg, 1);
  const std::vector<Example> data = make_examples(corpus, s.sub, *s.codec, cfg);
  TrainOptions opts;
  opts.epochs = 300;
  const TrainResult tr = train(model, data, opts);
  const Decoded d = decode_all(model, s, corpus, true);
  const EvalReport r = evaluate(d.tokens, references(corpus), false);
  return {r.em_accuracy >= 0.95,
          fmt("EM %.1f%% after %zu epochs (final loss %.4f), constrained k=5",
              100 * r.em_accuracy, opts.epochs, tr.epoch_losses.back())};
}

// 7. Constrained decoding is always well formed; unconstrained is not.
Outcome wellformed() {
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{200, 5, 8, 2});
  Setup s(corpus, 2000);
  const ModelConfig cfg = s.config(PositionalMode::kTree);
  Transformer<float> model(cfg, 5);
  const std::vector<Example> data = make_examples(corpus, s.sub, *s.codec, cfg);
  TrainOptions opts;
  opts.epochs = 2;
  train(model, data, opts);
  const Decoded with = decode_all(model, s, corpus, true);
  const Decoded without = decode_all(model, s, corpus, false);
  const std::size_t n = corpus.size();
  return {with.accepted == n && without.accepted < n,
          fmt("constrained %zu/%zu accepted; unconstrained %zu/%zu accepted "
              "(model trained %zu epochs)",
              with.accepted, n, without.accepted, n, opts.epochs)};
}

// 8. Tree vs sequential positions, and the effect of literal masking.
std::size_t directional_epochs() {
  const char* env = std::getenv("TREESEQ_DIRECTIONAL_EPOCHS");
  return env ? static_cast<std::size_t>(std::atoi(env)) : 150;
}

Outcome directional() {
  const std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{500, 8, 8, 2});
  const std::vector<Sample> train_set(corpus.begin(), corpus.begin() + 400);
  const std::vector<Sample> test_set(corpus.begin() + 400, corpus.end());
  const std::vector<std::vector<AstToken>> refs = references(test_set);
  Setup s(train_set, 2000);
  const std::size_t epochs = directional_epochs();
  std::map<PositionalMode, double> em;
  std::map<PositionalMode, std::pair<double, double>> recall;  // plain, masked
  bool masking_helps = true;
  std::string per_seed;
  for (PositionalMode mode : {PositionalMode::kTree, PositionalMode::kSequential}) {
    per_seed += std::string(positional_name(mode)) + " EM";
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const ModelConfig cfg = s.config(mode);
      Transformer<float> model(cfg, seed);
      const std::vector<Example> data = make_examples(train_set, s.sub, *s.codec, cfg);
      TrainOptions opts;
      opts.epochs = epochs;
      opts.seed = seed;
      train(model, data, opts);
      const Decoded d = decode_all(model, s, test_set, true);
      const EvalReport plain = evaluate(d.tokens, refs, false);
      const EvalReport masked = evaluate(d.tokens, refs, true);
      em[mode] += plain.em_accuracy / 5;
      recall[mode].first += plain.seq_recall / 5;
      recall[mode].second += masked.seq_recall / 5;
      per_seed += fmt(" %.0f", 100 * plain.em_accuracy);
    }
    per_seed += "; ";
    masking_helps = masking_helps && recall[mode].second > recall[mode].first;
  }
  const PositionalMode tree = PositionalMode::kTree, seq = PositionalMode::kSequential;
  return {em[tree] >= em[seq] && masking_helps,
          fmt("%zu epochs; mean EM tree %.1f%% vs seq %.1f%%; seq recall plain/masked "
              "tree %.1f/%.1f%%, seq %.1f/%.1f%%; %s",
              epochs, 100 * em[tree], 100 * em[seq], 100 * recall[tree].first,
              100 * recall[tree].second, 100 * recall[seq].first,
              100 * recall[seq].second, per_seed.c_str())};
}

// 9. Metric values checked against hand-computed oracles.
Outcome metric_oracles() {
  using S = TokenSeq;
  struct Case {
    const char* name;
    double got, want;
  };
  std::vector<S> refs10, preds10;
  for (int i = 0; i < 10; ++i) {
    refs10.push_back({"x"});
    preds10.push_back({i < 3 ? "x" : "y"});
  }
  const PrefixScores one = prefix_scores({S{"a", "b", "x"}}, {S{"a", "b", "c", "d"}});
  const PrefixScores two = prefix_scores({S{"a", "b", "x"}, S{"q"}},
                                         {S{"a", "b", "c", "d"}, S{"r", "s"}});
  const PrefixScores same = prefix_scores({S{"a", "b"}}, {S{"a", "b"}});
  // p1 = 3/4, p2 = 2/3, p3 = 1/2, p4 = 1e-9, no brevity penalty.
  const double bleu_abcd = std::exp((std::log(0.75) + std::log(2.0 / 3.0) +
                                     std::log(0.5) + std::log(1e-9)) / 4);
  const std::vector<Case> cases = {
      {"bleu identical", bleu({S{"a", "b", "c", "d", "e"}}, {S{"a", "b", "c", "d", "e"}}), 1.0},
      {"bleu empty", bleu({S{}}, {S{"a", "b"}}), 0.0},
      {"bleu abcd/abce", bleu({S{"a", "b", "c", "d"}}, {S{"a", "b", "c", "e"}}), bleu_abcd},
      {"bleu frozen", bleu({S{"a", "b", "c", "d"}}, {S{"a", "b", "c", "e"}}),
       0.0039763536438352535},
      {"em identical", exact_match(refs10, refs10), 1.0},
      {"em different", exact_match({S{"a"}, S{"b"}}, {S{"c"}, S{"d"}}), 0.0},
      {"em 3 of 10", exact_match(preds10, refs10), 0.3},
      {"seq recall", one.seq_recall, 0.5},
      {"seq precision", one.seq_precision, 2.0 / 3.0},
      {"token recall", two.token_recall, 2.0 / 6.0},
      {"token precision", two.token_precision, 2.0 / 4.0},
      {"identical token recall", same.token_recall, 1.0},
      {"identical token precision", same.token_precision, 1.0},
      {"identical seq recall", same.seq_recall, 1.0},
      {"identical seq precision", same.seq_precision, 1.0},
  };
  double worst = 0.0;
  std::string bad;
  for (const Case& c : cases) {
    const double err = std::abs(c.got - c.want);
    worst = std::max(worst, err);
    if (err > 1e-12) bad += std::string(" ") + c.name;
  }
  return {bad.empty(), fmt("%zu oracle values, max abs err %.3g%s%s", cases.size(),
                           worst, bad.empty() ? "" : "; off:", bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"a=10 tokens and edge paths", fig1},
      {"round-trip of 1000 toy trees", roundtrip},
      {"tree encoding properties", encoding},
      {"mask soundness and completeness", masks},
      {"gradient check", gradients},
      {"overfit 50 samples", overfit},
      {"well-formed constrained output", wellformed},
      {"tree vs sequential, literal masking", directional},
      {"metric oracles", metric_oracles},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion: %s\n", argv[i]);
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty()) {
    for (std::size_t n = 1; n <= criteria.size(); ++n) selected.push_back(static_cast<int>(n));
  }
  int failures = 0;
  for (int n : selected) {
    const auto& [name, run] = criteria[n - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s (%s) [%.1f s]\n", n, out.pass ? "PASS" : "FAIL",
                name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
