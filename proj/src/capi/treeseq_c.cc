#include "treeseq/treeseq.h"

#include <atomic>
#include <cstring>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <thread>

#include "core/automaton.h"
#include "core/beam_search.h"
#include "core/delinearize.h"
#include "core/edge_paths.h"
#include "core/error.h"
#include "core/grammar.h"
#include "core/metrics.h"
#include "core/model.h"
#include "core/toy_corpus.h"
#include "core/training.h"
#include "core/tree_encoding.h"
#include "core/typed_tree.h"
#include "core/vocab.h"

using namespace treeseq;
using nlohmann::json;

struct ts_corpus {
  std::vector<Sample> samples;
};

struct ts_grammar {
  GrammarGraph graph;
};

struct ts_vocab {
  static constexpr int kFormatVersion = 1;
  SubwordVocab subword;
  AstVocab ast;
};

struct ts_model {
  Checkpoint checkpoint;
  std::unique_ptr<Transformer<float>> net;
  std::unique_ptr<TargetCodec> codec;

  void rebuild(std::vector<float> params) {
    net = std::make_unique<Transformer<float>>(checkpoint.config,
                                               std::move(params));
    codec = std::make_unique<TargetCodec>(checkpoint.ast, checkpoint.subword);
  }
  void sync() {
    auto p = net->params();
    checkpoint.params.assign(p.begin(), p.end());
  }
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ts_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return TS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<ts_status>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    g_last_error = "internal error";
  }
  return TS_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (!p) fail(std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  require(out, "output pointer");
  *out = dup(s);
}

std::vector<TypedTree> trees_of(const ts_corpus* c) {
  std::vector<TypedTree> trees;
  trees.reserve(c->samples.size());
  for (const Sample& s : c->samples) trees.push_back(s.tree);
  return trees;
}

ModelConfig to_core(const ts_model_config& c) {
  ModelConfig m;
  m.d_model = c.d_model;
  m.heads = c.heads;
  m.encoder_layers = c.encoder_layers;
  m.decoder_layers = c.decoder_layers;
  m.ff_width = c.ff_width;
  m.d_idx = c.d_idx;
  m.path_len = c.path_len;
  m.dropout = c.dropout;
  m.positional = c.positional == TS_POSITIONAL_TREE ? PositionalMode::kTree
                                                    : PositionalMode::kSequential;
  m.learning_rate = c.learning_rate;
  m.batch_size = c.batch_size;
  return m;
}

ts_model_config from_core(const ModelConfig& m) {
  ts_model_config c;
  c.d_model = m.d_model;
  c.heads = m.heads;
  c.encoder_layers = m.encoder_layers;
  c.decoder_layers = m.decoder_layers;
  c.ff_width = m.ff_width;
  c.d_idx = m.d_idx;
  c.path_len = m.path_len;
  c.dropout = m.dropout;
  c.positional = m.positional == PositionalMode::kTree ? TS_POSITIONAL_TREE
                                                       : TS_POSITIONAL_SEQ;
  c.learning_rate = m.learning_rate;
  c.batch_size = m.batch_size;
  return c;
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "0.1.0"; }

const char* ts_last_error(void) { return g_last_error.c_str(); }

void ts_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------
// Corpus

ts_status ts_corpus_load(const char* path, ts_corpus** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    auto c = std::make_unique<ts_corpus>();
    c->samples = read_corpus_file(path);
    *out = c.release();
  });
}

ts_status ts_corpus_parse(const char* jsonl, ts_corpus** out) {
  return guard([&] {
    require(jsonl, "corpus text");
    require(out, "output pointer");
    auto c = std::make_unique<ts_corpus>();
    c->samples = read_corpus(jsonl);
    *out = c.release();
  });
}

ts_status ts_corpus_generate_toy(size_t count, uint64_t seed, size_t max_depth,
                                 ts_corpus** out) {
  return guard([&] {
    require(out, "output pointer");
    ToyOptions opts;
    opts.count = count;
    opts.seed = seed;
    opts.max_depth = max_depth;
    auto c = std::make_unique<ts_corpus>();
    c->samples = generate_toy_corpus(opts);
    *out = c.release();
  });
}

ts_status ts_corpus_save(const ts_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    write_corpus_file(corpus->samples, path);
  });
}

size_t ts_corpus_size(const ts_corpus* corpus) {
  return corpus ? corpus->samples.size() : 0;
}

ts_status ts_corpus_slice(const ts_corpus* corpus, size_t begin, size_t end,
                          ts_corpus** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(out, "output pointer");
    if (begin > end || end > corpus->samples.size()) {
      fail("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
           ") is outside the corpus");
    }
    auto c = std::make_unique<ts_corpus>();
    c->samples.assign(corpus->samples.begin() + begin,
                      corpus->samples.begin() + end);
    *out = c.release();
  });
}

ts_status ts_corpus_tokens(const ts_corpus* corpus, size_t index,
                           char** json_out) {
  return guard([&] {
    require(corpus, "corpus");
    if (index >= corpus->samples.size()) fail("sample index out of range");
    put(json_out,
        json(token_texts(linearize(corpus->samples[index].tree))).dump());
  });
}

ts_status ts_corpus_edge_paths(const ts_corpus* corpus, size_t path_len,
                               char** jsonl_out) {
  return guard([&] {
    require(corpus, "corpus");
    std::string out;
    for (std::size_t i = 0; i < corpus->samples.size(); ++i) {
      const TypedTree& tree = corpus->samples[i].tree;
      std::vector<EdgePath> paths;
      try {
        paths = edge_paths(tree, path_len);
      } catch (const Error& e) {
        fail("sample " + std::to_string(i + 1) + ": " + e.what());
      }
      json line{{"index", i},
                {"tokens", token_texts(linearize(tree))},
                {"paths", paths}};
      out += line.dump() + "\n";
    }
    put(jsonl_out, out);
  });
}

ts_status ts_corpus_encoding_csv(const ts_corpus* corpus, size_t index,
                                 size_t d_idx, size_t path_len,
                                 char** csv_out) {
  return guard([&] {
    require(corpus, "corpus");
    if (index >= corpus->samples.size()) fail("sample index out of range");
    EncodingConfig cfg{d_idx, path_len};
    cfg.validate();
    const TypedTree& tree = corpus->samples[index].tree;
    const std::vector<AstToken> tokens = linearize(tree);
    const DenseMatrix m = encode_paths(edge_paths(tree, path_len), cfg);
    std::ostringstream os;
    os.precision(17);
    os << "token";
    for (std::size_t j = 0; j < m.cols; ++j) os << ",e" << j;
    os << "\n";
    for (std::size_t i = 0; i < m.rows; ++i) {
      std::string text = token_text(tokens[i]);
      bool quote = text.find_first_of(",\"\n") != std::string::npos;
      if (quote) {
        std::string q = "\"";
        for (char ch : text) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        text = q + "\"";
      }
      os << text;
      for (std::size_t j = 0; j < m.cols; ++j) os << "," << m.at(i, j);
      os << "\n";
    }
    put(csv_out, os.str());
  });
}

void ts_corpus_free(ts_corpus* corpus) { delete corpus; }

// ---------------------------------------------------------------------------
// Grammar

ts_status ts_grammar_induce(const ts_corpus* corpus, ts_grammar** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(out, "output pointer");
    std::vector<TypedTree> trees = trees_of(corpus);
    auto g = std::make_unique<ts_grammar>(ts_grammar{GrammarGraph::induce(trees)});
    *out = g.release();
  });
}

ts_status ts_grammar_load(const char* path, ts_grammar** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    auto g = std::make_unique<ts_grammar>(
        ts_grammar{GrammarGraph::load(read_file(path))});
    *out = g.release();
  });
}

ts_status ts_grammar_save(const ts_grammar* grammar, const char* path) {
  return guard([&] {
    require(grammar, "grammar");
    require(path, "path");
    write_file(path, grammar->graph.save());
  });
}

ts_status ts_grammar_stats(const ts_grammar* grammar, char** json_out) {
  return guard([&] {
    require(grammar, "grammar");
    GrammarStats s = grammar->graph.stats();
    put(json_out, json{{"object_types", s.object_types},
                       {"attributes", s.attributes},
                       {"edges", s.child_edges}}
                      .dump());
  });
}

ts_status ts_grammar_accepts(const ts_grammar* grammar, const char* tokens_json,
                             int* accepted) {
  return guard([&] {
    require(grammar, "grammar");
    require(tokens_json, "token list");
    require(accepted, "output pointer");
    std::vector<std::string> texts;
    try {
      texts = json::parse(tokens_json).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail(std::string("token list must be a JSON array of strings: ") +
           e.what());
    }
    std::vector<AstToken> tokens = parse_token_texts(texts);
    try {
      *accepted = grammar->graph.accepts(delinearize(tokens, grammar->graph));
    } catch (const Error&) {
      *accepted = 0;
    }
  });
}

void ts_grammar_free(ts_grammar* grammar) { delete grammar; }

// ---------------------------------------------------------------------------
// Round trip

ts_status ts_roundtrip(const ts_corpus* corpus, const ts_grammar* grammar,
                       size_t path_len, char** report_json) {
  bool all_ok = false;
  ts_status st = guard([&] {
    require(corpus, "corpus");
    require(grammar, "grammar");
    if (corpus->samples.empty()) fail("corpus is empty");
    const GrammarGraph& g = grammar->graph;
    json failures = json::array();
    for (std::size_t i = 0; i < corpus->samples.size(); ++i) {
      const TypedTree& tree = corpus->samples[i].tree;
      std::string problem;
      try {
        const std::vector<AstToken> tokens = linearize(tree);
        if (!(delinearize(tokens, g) == tree)) {
          problem = "delinearize(linearize(t)) differs from t";
        } else {
          const std::vector<EdgePath> paths = edge_paths(tree, path_len);
          DecoderState state = DecoderState::initial(g);
          for (std::size_t k = 0; k < tokens.size() && problem.empty(); ++k) {
            if (state.next_edge_path(path_len) != paths[k]) {
              problem = "automaton path differs at token " + std::to_string(k);
            }
            state.step(tokens[k]);
          }
          if (problem.empty() && !state.finished()) {
            problem = "automaton did not reach the finished state";
          }
        }
      } catch (const Error& e) {
        problem = e.what();
      }
      if (!problem.empty()) {
        failures.push_back(json{{"sample", i + 1}, {"error", problem}});
      }
    }
    const std::size_t n = corpus->samples.size();
    json report{{"samples", n},
                {"passed", n - failures.size()},
                {"failed", failures.size()},
                {"pass_rate", static_cast<double>(n - failures.size()) /
                                  static_cast<double>(n)},
                {"failures", failures}};
    put(report_json, report.dump(1));
    all_ok = failures.empty();
  });
  if (st == TS_OK && !all_ok) {
    g_last_error = "round trip failed on some samples";
    return TS_ERR_VERIFICATION;
  }
  return st;
}

// ---------------------------------------------------------------------------
// Vocabulary

ts_status ts_vocab_train(const ts_corpus* corpus, size_t size, ts_vocab** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(out, "output pointer");
    if (corpus->samples.empty()) fail("corpus is empty");
    auto v = std::make_unique<ts_vocab>();
    const std::vector<std::string> texts = subword_training_texts(corpus->samples);
    v->subword = SubwordVocab::train(texts, size);
    v->ast = AstVocab::build(corpus->samples);
    *out = v.release();
  });
}

ts_status ts_vocab_load(const char* path, ts_vocab** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      fail(std::string("vocabulary file is not valid JSON: ") + e.what());
    }
    auto v = std::make_unique<ts_vocab>();
    try {
      if (j.at("format_version").get<int>() != ts_vocab::kFormatVersion) {
        fail("unsupported vocabulary format version");
      }
      v->subword = SubwordVocab::from_json(j.at("subword"));
      v->ast = AstVocab::from_json(j.at("ast"));
    } catch (const json::exception& e) {
      fail(std::string("malformed vocabulary file: ") + e.what());
    }
    *out = v.release();
  });
}

ts_status ts_vocab_save(const ts_vocab* vocab, const char* path) {
  return guard([&] {
    require(vocab, "vocabulary");
    require(path, "path");
    json j{{"format_version", ts_vocab::kFormatVersion},
           {"subword", vocab->subword.to_json()},
           {"ast", vocab->ast.to_json()}};
    write_file(path, j.dump(1) + "\n");
  });
}

size_t ts_vocab_subword_size(const ts_vocab* vocab) {
  return vocab ? vocab->subword.size() : 0;
}

size_t ts_vocab_ast_size(const ts_vocab* vocab) {
  return vocab ? vocab->ast.size() : 0;
}

void ts_vocab_free(ts_vocab* vocab) { delete vocab; }

// ---------------------------------------------------------------------------
// Model

void ts_model_config_default(ts_model_config* cfg) {
  if (cfg) *cfg = from_core(ModelConfig{});
}

ts_status ts_model_create(const ts_model_config* cfg, const ts_vocab* vocab,
                          uint64_t seed, ts_model** out) {
  return guard([&] {
    require(cfg, "config");
    require(vocab, "vocabulary");
    require(out, "output pointer");
    auto m = std::make_unique<ts_model>();
    m->checkpoint.config = to_core(*cfg);
    m->checkpoint.ast = vocab->ast;
    m->checkpoint.subword = vocab->subword;
    m->checkpoint.config.src_vocab = vocab->subword.size();
    m->checkpoint.config.tgt_vocab = vocab->ast.size() + vocab->subword.size();
    m->checkpoint.config.validate();
    Transformer<float> init(m->checkpoint.config, seed);
    auto p = init.params();
    m->rebuild(std::vector<float>(p.begin(), p.end()));
    m->sync();
    *out = m.release();
  });
}

ts_status ts_model_train(ts_model* model, const ts_corpus* corpus,
                         size_t epochs, uint64_t seed, size_t threads,
                         ts_epoch_callback callback, void* user,
                         double* final_loss) {
  return guard([&] {
    require(model, "model");
    require(corpus, "corpus");
    const std::vector<Example> data =
        make_examples(corpus->samples, model->checkpoint.subword, *model->codec,
                      model->checkpoint.config);
    TrainOptions opts;
    opts.epochs = epochs;
    opts.seed = seed;
    opts.threads = threads == 0 ? 1 : threads;
    if (callback) {
      opts.on_epoch = [&](std::size_t e, double l) { callback(e, l, user); };
    }
    TrainResult r = train(*model->net, data, opts);
    model->sync();
    if (final_loss) *final_loss = r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back();
  });
}

ts_status ts_model_loss(const ts_model* model, const ts_corpus* corpus,
                        double* loss) {
  return guard([&] {
    require(model, "model");
    require(corpus, "corpus");
    require(loss, "output pointer");
    const std::vector<Example> data =
        make_examples(corpus->samples, model->checkpoint.subword, *model->codec,
                      model->checkpoint.config);
    *loss = mean_loss<float>(*model->net, data);
  });
}

ts_status ts_model_save(const ts_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    write_file(path, model->checkpoint.save());
  });
}

ts_status ts_model_load(const char* path, ts_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "output pointer");
    auto m = std::make_unique<ts_model>();
    m->checkpoint = Checkpoint::load(read_file(path));
    m->rebuild(m->checkpoint.params);
    *out = m.release();
  });
}

ts_status ts_model_get_config(const ts_model* model, ts_model_config* cfg) {
  return guard([&] {
    require(model, "model");
    require(cfg, "output pointer");
    *cfg = from_core(model->checkpoint.config);
  });
}

ts_status ts_model_config_json(const ts_model* model, char** json_out) {
  return guard([&] {
    require(model, "model");
    put(json_out, model->checkpoint.config.to_json().dump());
  });
}

ts_status ts_model_predict(const ts_model* model, const ts_corpus* corpus,
                           const ts_grammar* grammar, size_t beams,
                           size_t max_len, int constrained, size_t threads,
                           char** jsonl_out) {
  return guard([&] {
    require(model, "model");
    require(corpus, "corpus");
    require(jsonl_out, "output pointer");
    BeamDecoder<float> decoder(*model->net, *model->codec,
                               grammar ? &grammar->graph : nullptr);
    BeamOptions opts;
    opts.beams = beams;
    opts.max_len = max_len;
    opts.constrained = constrained != 0;
    const std::size_t n = corpus->samples.size();
    std::vector<std::string> lines(n);
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          const Sample& s = corpus->samples[i];
          std::vector<int> src = encode_source(s.nl, model->checkpoint.subword);
          std::vector<BeamHypothesis> hyps = decoder.search(src, opts);
          json line{{"index", i}, {"nl", s.nl}};
          if (hyps.empty()) {
            line["tokens"] = json::array();
            line["finished"] = false;
            line["parsable"] = false;
            line["score"] = nullptr;
          } else {
            const BeamHypothesis& best = hyps.front();
            line["tokens"] = token_texts(best.tokens);
            line["finished"] = best.finished;
            line["parsable"] = best.parsable;
            line["score"] = best.score;
          }
          lines[i] = line.dump() + "\n";
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!errors[i].empty()) {
        fail("sample " + std::to_string(i + 1) + ": " + errors[i]);
      }
      out += lines[i];
    }
    put(jsonl_out, out);
  });
}

void ts_model_free(ts_model* model) { delete model; }

// ---------------------------------------------------------------------------
// Evaluation

ts_status ts_evaluate(const char* predictions_jsonl, const ts_corpus* references,
                      int mask_literals, char** report_json,
                      char** table_text) {
  return guard([&] {
    require(predictions_jsonl, "predictions");
    require(references, "references");
    std::vector<std::vector<AstToken>> preds, refs;
    std::istringstream in(predictions_jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        json j = json::parse(line);
        preds.push_back(
            parse_token_texts(j.at("tokens").get<std::vector<std::string>>()));
      } catch (const json::exception& e) {
        fail("predictions line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (preds.size() != references->samples.size()) {
      fail(std::to_string(preds.size()) + " predictions for " +
           std::to_string(references->samples.size()) + " references");
    }
    for (const Sample& s : references->samples) refs.push_back(linearize(s.tree));
    EvalReport r = evaluate(preds, refs, mask_literals != 0);
    if (report_json) *report_json = dup(r.to_json().dump(1));
    if (table_text) *table_text = dup(r.to_table());
  });
}

}  // extern "C"
