// treeseq command-line tool. Talks to the library only through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.h"
#include "treeseq/treeseq.h"

using nlohmann::json;
using treeseq::RunManifest;

namespace {

// Carries a library status to the exit code.
struct Failure : std::runtime_error {
  Failure(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
  int code;
};

void check(ts_status st) {
  if (st != TS_OK) throw Failure(st, ts_last_error());
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Corpus = Handle<ts_corpus, ts_corpus_free>;
using Grammar = Handle<ts_grammar, ts_grammar_free>;
using Vocab = Handle<ts_vocab, ts_vocab_free>;
using Model = Handle<ts_model, ts_model_free>;

struct Text {
  char* s = nullptr;
  ~Text() { ts_string_free(s); }
  char** out() { return &s; }
  std::string str() const { return s ? s : ""; }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Failure(TS_ERR_IO, "cannot write " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure(TS_ERR_IO, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void load_corpus(const std::string& path, Corpus& c, RunManifest& m,
                 const std::string& role = "corpus") {
  m.add_input(role, path);
  check(ts_corpus_load(path.c_str(), c.out()));
}

ts_positional parse_positional(const std::string& s) {
  if (s == "tree") return TS_POSITIONAL_TREE;
  if (s == "seq" || s == "sequential") return TS_POSITIONAL_SEQ;
  throw Failure(TS_ERR_VALIDATION, "unknown positional mode '" + s + "'");
}

const char* positional_name(ts_positional p) {
  return p == TS_POSITIONAL_TREE ? "tree" : "seq";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar-constrained tree-to-sequence toolkit"};
  app.require_subcommand(1);
  std::string manifest_path;
  app.add_option("--manifest", manifest_path,
                 "Where to write the run manifest (default: next to the main "
                 "output, or ./treeseq-<command>.manifest.json)");

  std::string corpus, grammar, vocab, checkpoint, out, predictions;
  std::uint64_t seed = 1;
  std::size_t beams = 5, max_len = 250, path_len = 16, d_idx = 4;
  std::size_t count = 50, max_depth = 8, size = 2000, epochs = 300, index = 0;
  std::size_t threads = 1;
  std::string positional = "tree";
  bool constrained = false, mask_literals = false;
  ts_model_config cfg;
  ts_model_config_default(&cfg);
  std::optional<std::size_t> d_model;

  auto* gen = app.add_subcommand("gen-toy", "Generate a seeded toy corpus");
  gen->add_option("--count", count, "Number of samples")->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--max-depth", max_depth, "Object-node levels below sos")
      ->capture_default_str();
  gen->add_option("--out", out, "Output corpus JSONL")->required();

  auto* induce = app.add_subcommand("induce", "Induce a grammar graph");
  induce->add_option("--corpus", corpus)->required();
  induce->add_option("--out", out, "Output grammar JSON")->required();

  auto* roundtrip = app.add_subcommand(
      "roundtrip", "Check linearize/delinearize, automaton replay and paths");
  roundtrip->add_option("--corpus", corpus)->required();
  roundtrip->add_option("--grammar", grammar)->required();
  roundtrip->add_option("--path-len", path_len)->capture_default_str();
  roundtrip->add_option("--out", out, "Report JSON (default: stdout)");

  auto* paths = app.add_subcommand("paths", "Dump edge paths as JSONL");
  paths->add_option("--corpus", corpus)->required();
  paths->add_option("--path-len", path_len)->capture_default_str();
  paths->add_option("--out", out, "Output JSONL (default: stdout)");

  auto* encode = app.add_subcommand("encode", "Dump tree encodings as CSV");
  encode->add_option("--corpus", corpus)->required();
  encode->add_option("--index", index, "Sample index (0-based)")
      ->capture_default_str();
  encode->add_option("--d-idx", d_idx)->capture_default_str();
  encode->add_option("--path-len", path_len)->capture_default_str();
  encode->add_option("--out", out, "Output CSV (default: stdout)");

  auto* vocab_cmd = app.add_subcommand("vocab", "Vocabulary tools");
  vocab_cmd->require_subcommand(1);
  auto* vtrain = vocab_cmd->add_subcommand("train", "Train the vocabularies");
  vtrain->add_option("--input,--corpus", corpus)->required();
  vtrain->add_option("--size", size, "Subword vocabulary size")
      ->capture_default_str();
  vtrain->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--corpus", corpus)->required();
  train->add_option("--vocab", vocab)->required();
  train->add_option("--checkpoint", checkpoint, "Output checkpoint")->required();
  train->add_option("--epochs", epochs)->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--positional", positional, "seq|tree")->capture_default_str();
  train->add_option("--d-idx", d_idx)->capture_default_str();
  train->add_option("--path-len", path_len)->capture_default_str();
  train->add_option("--d-model", d_model,
                    "Model width (tree mode default: d_idx * path_len)");
  train->add_option("--heads", cfg.heads)->capture_default_str();
  train->add_option("--encoder-layers", cfg.encoder_layers)->capture_default_str();
  train->add_option("--decoder-layers", cfg.decoder_layers)->capture_default_str();
  train->add_option("--ff-width", cfg.ff_width)->capture_default_str();
  train->add_option("--dropout", cfg.dropout)->capture_default_str();
  train->add_option("--lr", cfg.learning_rate)->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  train->add_option("--threads", threads, "Gradient workers (speed only)")
      ->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Decode with beam search");
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--corpus", corpus)->required();
  predict->add_option("--grammar", grammar,
                      "Grammar (required with --constrained or tree mode)");
  predict->add_option("--out", out, "Predictions JSONL")->required();
  predict->add_option("--beams", beams)->capture_default_str();
  predict->add_option("--max-len", max_len)->capture_default_str();
  predict->add_flag("--constrained", constrained, "Mask with the grammar");
  auto* pos_opt = predict->add_option(
      "--positional", positional, "Expected mode of the checkpoint (seq|tree)");
  predict->add_option("--threads", threads, "Samples decoded in parallel")
      ->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions");
  evaluate->add_option("--predictions", predictions)->required();
  evaluate->add_option("--corpus", corpus, "Reference corpus")->required();
  evaluate->add_flag("--mask-literals", mask_literals);
  evaluate->add_option("--out", out, "Report JSON");

  CLI11_PARSE(app, argc, argv);

  CLI::App* cmd = app.get_subcommands().front();
  std::string command = cmd->get_name();
  if (cmd == vocab_cmd) command = "vocab train";
  RunManifest manifest(command);
  json config;
  int code = 0;
  std::string message;

  try {
    if (cmd == gen) {
      config = {{"count", count}, {"seed", seed}, {"max_depth", max_depth}};
      manifest.set_seed(seed);
      Corpus c;
      check(ts_corpus_generate_toy(count, seed, max_depth, c.out()));
      check(ts_corpus_save(c.get(), out.c_str()));
      manifest.add_output("corpus", out);
      std::cout << "wrote " << ts_corpus_size(c.get()) << " samples to " << out
                << "\n";
    } else if (cmd == induce) {
      Corpus c;
      load_corpus(corpus, c, manifest);
      Grammar g;
      check(ts_grammar_induce(c.get(), g.out()));
      check(ts_grammar_save(g.get(), out.c_str()));
      manifest.add_output("grammar", out);
      Text stats;
      check(ts_grammar_stats(g.get(), stats.out()));
      json s = json::parse(stats.str());
      config = {{"stats", s}};
      std::cout << "object types: " << s["object_types"]
                << "\nattributes: " << s["attributes"]
                << "\nchild edges: " << s["edges"] << "\n";
    } else if (cmd == roundtrip) {
      config = {{"path_len", path_len}};
      Corpus c;
      load_corpus(corpus, c, manifest);
      Grammar g;
      manifest.add_input("grammar", grammar);
      check(ts_grammar_load(grammar.c_str(), g.out()));
      Text report;
      ts_status st = ts_roundtrip(c.get(), g.get(), path_len, report.out());
      if (report.s) {
        write_text(out, report.str() + "\n");
        if (!out.empty()) manifest.add_output("report", out);
      }
      check(st);
    } else if (cmd == paths) {
      config = {{"path_len", path_len}};
      Corpus c;
      load_corpus(corpus, c, manifest);
      Text jsonl;
      check(ts_corpus_edge_paths(c.get(), path_len, jsonl.out()));
      write_text(out, jsonl.str());
      if (!out.empty()) manifest.add_output("paths", out);
    } else if (cmd == encode) {
      config = {{"index", index}, {"d_idx", d_idx}, {"path_len", path_len}};
      Corpus c;
      load_corpus(corpus, c, manifest);
      Text csv;
      check(ts_corpus_encoding_csv(c.get(), index, d_idx, path_len, csv.out()));
      write_text(out, csv.str());
      if (!out.empty()) manifest.add_output("encoding", out);
    } else if (cmd == vocab_cmd) {
      config = {{"size", size}};
      Corpus c;
      load_corpus(corpus, c, manifest);
      Vocab v;
      check(ts_vocab_train(c.get(), size, v.out()));
      check(ts_vocab_save(v.get(), out.c_str()));
      manifest.add_output("vocab", out);
      std::cout << "subword tokens: " << ts_vocab_subword_size(v.get())
                << "\nAST tokens: " << ts_vocab_ast_size(v.get()) << "\n";
    } else if (cmd == train) {
      cfg.positional = parse_positional(positional);
      cfg.d_idx = d_idx;
      cfg.path_len = path_len;
      cfg.d_model = d_model ? *d_model
                            : (cfg.positional == TS_POSITIONAL_TREE
                                   ? d_idx * path_len
                                   : cfg.d_model);
      manifest.set_seed(seed);
      Corpus c;
      load_corpus(corpus, c, manifest);
      Vocab v;
      manifest.add_input("vocab", vocab);
      check(ts_vocab_load(vocab.c_str(), v.out()));
      Model m;
      check(ts_model_create(&cfg, v.get(), seed, m.out()));
      Text cj;
      check(ts_model_config_json(m.get(), cj.out()));
      config = {{"model", json::parse(cj.str())},
                {"epochs", epochs},
                {"threads", threads}};
      double loss = 0;
      auto progress = [](size_t epoch, double l, void*) {
        std::fprintf(stderr, "epoch %zu loss %.6f\n", epoch, l);
      };
      const double t0 = manifest.elapsed_seconds();
      check(ts_model_train(m.get(), c.get(), epochs, seed, threads, progress,
                           nullptr, &loss));
      manifest.add_timing("train", manifest.elapsed_seconds() - t0);
      config["final_loss"] = loss;
      check(ts_model_save(m.get(), checkpoint.c_str()));
      manifest.add_output("checkpoint", checkpoint);
      std::cout << "final loss " << loss << "\n";
    } else if (cmd == predict) {
      manifest.add_input("checkpoint", checkpoint);
      Model m;
      check(ts_model_load(checkpoint.c_str(), m.out()));
      ts_model_config mc;
      check(ts_model_get_config(m.get(), &mc));
      if (!pos_opt->empty() && parse_positional(positional) != mc.positional) {
        throw Failure(TS_ERR_VALIDATION,
                      std::string("checkpoint was trained in ") +
                          positional_name(mc.positional) +
                          " mode, not " + positional);
      }
      Corpus c;
      load_corpus(corpus, c, manifest);
      Grammar g;
      if (!grammar.empty()) {
        manifest.add_input("grammar", grammar);
        check(ts_grammar_load(grammar.c_str(), g.out()));
      }
      config = {{"beams", beams},
                {"max_len", max_len},
                {"constrained", constrained},
                {"positional", positional_name(mc.positional)},
                {"threads", threads}};
      Text jsonl;
      const double t0 = manifest.elapsed_seconds();
      check(ts_model_predict(m.get(), c.get(), g.get(), beams, max_len,
                             constrained ? 1 : 0, threads, jsonl.out()));
      manifest.add_timing("decode", manifest.elapsed_seconds() - t0);
      write_text(out, jsonl.str());
      manifest.add_output("predictions", out);
      std::size_t n = 0, parsable = 0;
      std::istringstream lines(jsonl.str());
      for (std::string line; std::getline(lines, line);) {
        ++n;
        if (json::parse(line).value("parsable", false)) ++parsable;
      }
      config["parsable"] = parsable;
      std::cout << parsable << "/" << n << " outputs parsable\n";
    } else if (cmd == evaluate) {
      config = {{"mask_literals", mask_literals}};
      manifest.add_input("predictions", predictions);
      const std::string preds = read_text(predictions);
      Corpus c;
      load_corpus(corpus, c, manifest, "references");
      Text report, table;
      check(ts_evaluate(preds.c_str(), c.get(), mask_literals ? 1 : 0,
                        report.out(), table.out()));
      if (!out.empty()) {
        write_text(out, report.str() + "\n");
        manifest.add_output("report", out);
      }
      std::cout << table.str();
    }
  } catch (const Failure& f) {
    code = f.code;
    message = f.what();
  } catch (const std::exception& e) {
    code = TS_ERR_INTERNAL;
    message = e.what();
  }

  manifest.set_config(config);
  manifest.set_status(code, message);
  if (manifest_path.empty()) {
    manifest_path = out.empty() || out == "-"
                        ? "treeseq-" + cmd->get_name() + ".manifest.json"
                        : out + ".manifest.json";
    if (cmd == train) manifest_path = checkpoint + ".manifest.json";
  }
  {
    std::ofstream f(manifest_path);
    if (f) f << manifest.to_json().dump(1) << "\n";
    if (!f) {
      std::cerr << "error: cannot write manifest " << manifest_path << "\n";
      if (code == 0) code = TS_ERR_IO;
    }
  }
  if (code != 0) std::cerr << "error: " << message << "\n";
  return code;
}
