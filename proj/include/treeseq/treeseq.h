/* C interface to the treeseq toolkit.
 *
 * Every object is an opaque handle released with its *_free function.
 * Functions return a ts_status; on failure ts_last_error() describes the
 * problem for the calling thread. Strings returned through char** are
 * owned by the caller and released with ts_string_free. */
#ifndef TREESEQ_TREESEQ_H
#define TREESEQ_TREESEQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(TREESEQ_BUILDING)
#define TS_API __attribute__((visibility("default")))
#else
#define TS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ts_status {
  TS_OK = 0,
  TS_ERR_VALIDATION = 1,
  TS_ERR_IO = 2,
  TS_ERR_VERIFICATION = 3,
  TS_ERR_INTERNAL = 4
} ts_status;

typedef struct ts_corpus ts_corpus;
typedef struct ts_grammar ts_grammar;
typedef struct ts_vocab ts_vocab;
typedef struct ts_model ts_model;

TS_API const char* ts_version(void);
TS_API const char* ts_last_error(void);
TS_API void ts_string_free(char* s);

/* Corpus: JSONL records {"nl": ..., "tree": ...}. */
TS_API ts_status ts_corpus_load(const char* path, ts_corpus** out);
TS_API ts_status ts_corpus_parse(const char* jsonl, ts_corpus** out);
TS_API ts_status ts_corpus_generate_toy(size_t count, uint64_t seed,
                                        size_t max_depth, ts_corpus** out);
TS_API ts_status ts_corpus_save(const ts_corpus* corpus, const char* path);
TS_API size_t ts_corpus_size(const ts_corpus* corpus);
/* New corpus holding samples [begin, end). */
TS_API ts_status ts_corpus_slice(const ts_corpus* corpus, size_t begin,
                                 size_t end, ts_corpus** out);
/* JSON array of the linearized token texts of one sample. */
TS_API ts_status ts_corpus_tokens(const ts_corpus* corpus, size_t index,
                                  char** json_out);
/* JSONL, one line per sample: {"index", "tokens", "paths"}. */
TS_API ts_status ts_corpus_edge_paths(const ts_corpus* corpus,
                                      size_t path_len, char** jsonl_out);
/* CSV of the tree encodings of every token of one sample: token, then
 * d_idx * path_len columns. */
TS_API ts_status ts_corpus_encoding_csv(const ts_corpus* corpus, size_t index,
                                        size_t d_idx, size_t path_len,
                                        char** csv_out);
TS_API void ts_corpus_free(ts_corpus* corpus);

/* Grammar graph. */
TS_API ts_status ts_grammar_induce(const ts_corpus* corpus, ts_grammar** out);
TS_API ts_status ts_grammar_load(const char* path, ts_grammar** out);
TS_API ts_status ts_grammar_save(const ts_grammar* grammar, const char* path);
/* {"object_types", "attributes", "edges"} */
TS_API ts_status ts_grammar_stats(const ts_grammar* grammar, char** json_out);
/* `tokens_json` is a JSON array of token texts. */
TS_API ts_status ts_grammar_accepts(const ts_grammar* grammar,
                                    const char* tokens_json, int* accepted);
TS_API void ts_grammar_free(ts_grammar* grammar);

/* Checks linearize/delinearize, automaton replay and edge-path agreement
 * on every sample. Returns TS_ERR_VERIFICATION if any sample fails; the
 * JSON report lists failures either way. */
TS_API ts_status ts_roundtrip(const ts_corpus* corpus,
                              const ts_grammar* grammar, size_t path_len,
                              char** report_json);

/* Subword vocabulary (NL + string literals) plus AST word vocabulary. */
TS_API ts_status ts_vocab_train(const ts_corpus* corpus, size_t size,
                                ts_vocab** out);
TS_API ts_status ts_vocab_load(const char* path, ts_vocab** out);
TS_API ts_status ts_vocab_save(const ts_vocab* vocab, const char* path);
TS_API size_t ts_vocab_subword_size(const ts_vocab* vocab);
TS_API size_t ts_vocab_ast_size(const ts_vocab* vocab);
TS_API void ts_vocab_free(ts_vocab* vocab);

typedef enum ts_positional { TS_POSITIONAL_SEQ = 0, TS_POSITIONAL_TREE = 1 } ts_positional;

typedef struct ts_model_config {
  size_t d_model;
  size_t heads;
  size_t encoder_layers;
  size_t decoder_layers;
  size_t ff_width;
  size_t d_idx;
  size_t path_len;
  double dropout;
  ts_positional positional;
  double learning_rate;
  size_t batch_size;
} ts_model_config;

TS_API void ts_model_config_default(ts_model_config* cfg);

typedef void (*ts_epoch_callback)(size_t epoch, double loss, void* user);

TS_API ts_status ts_model_create(const ts_model_config* cfg,
                                 const ts_vocab* vocab, uint64_t seed,
                                 ts_model** out);
/* Trains in place; `threads` only affects speed. */
TS_API ts_status ts_model_train(ts_model* model, const ts_corpus* corpus,
                                size_t epochs, uint64_t seed, size_t threads,
                                ts_epoch_callback callback, void* user,
                                double* final_loss);
/* Mean per-token negative log-likelihood on a corpus. */
TS_API ts_status ts_model_loss(const ts_model* model, const ts_corpus* corpus,
                               double* loss);
TS_API ts_status ts_model_save(const ts_model* model, const char* path);
TS_API ts_status ts_model_load(const char* path, ts_model** out);
TS_API ts_status ts_model_get_config(const ts_model* model,
                                     ts_model_config* cfg);
TS_API ts_status ts_model_config_json(const ts_model* model, char** json_out);
/* Beam search for every sample of `corpus`. `grammar` is required when
 * constrained or in tree mode. Output JSONL, one line per sample:
 * {"index", "nl", "tokens", "finished", "parsable", "score"}. */
TS_API ts_status ts_model_predict(const ts_model* model,
                                  const ts_corpus* corpus,
                                  const ts_grammar* grammar, size_t beams,
                                  size_t max_len, int constrained,
                                  size_t threads, char** jsonl_out);
TS_API void ts_model_free(ts_model* model);

/* Scores prediction JSONL (as written by ts_model_predict, or any JSONL
 * with a "tokens" array per line) against the reference corpus. */
TS_API ts_status ts_evaluate(const char* predictions_jsonl,
                             const ts_corpus* references, int mask_literals,
                             char** report_json, char** table_text);

#ifdef __cplusplus
}
#endif

#endif /* TREESEQ_TREESEQ_H */
