#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "automaton.h"
#include "grammar.h"
#include "model.h"
#include "vocab.h"

namespace treeseq {

struct BeamOptions {
  std::size_t beams = 5;
  std::size_t max_len = 250;  // generated ids after sos
  bool constrained = true;
};

struct BeamHypothesis {
  std::vector<int> ids;  // decoder ids, starting with sos
  std::vector<AstToken> tokens;  // decoded AST tokens
  double log_prob = 0;
  double score = 0;  // log_prob / generated ids
  bool finished = false;  // emitted eos before max_len
  bool parsable = false;  // finished and delinearizes under the grammar
};

// Called for every expansion actually kept: the automaton state before the
// id, whether a string-literal run is open, and the chosen id.
using StepObserver =
    std::function<void(const DecoderState&, bool in_literal, int id)>;

// Beam search over the decoder id space. Constrained search masks every
// step with the automaton's legal set (a string literal is a run of
// subword ids closed by literal-end). Unconstrained search admits every
// id; in tree mode a shape-only automaton follows along to supply edge
// paths and freezes at the last path once the output stops being a tree.
template <typename T>
class BeamDecoder {
 public:
  // `grammar` may be null only for unconstrained sequential-mode search.
  BeamDecoder(const Transformer<T>& model, const TargetCodec& codec,
              const GrammarGraph* grammar);

  // Ranked: finished hypotheses first, each group by descending score.
  std::vector<BeamHypothesis> search(std::span<const int> src,
                                     const BeamOptions& options,
                                     const StepObserver& observer = {}) const;

 private:
  std::vector<int> ids_for(const TokenClass& cls) const;

  const Transformer<T>* model_;
  const TargetCodec* codec_;
  const GrammarGraph* grammar_;
  std::vector<int> subword_ids_;  // non-special subword ids in target space
  std::map<TokenClass, std::vector<int>> class_ids_;
};

}  // namespace treeseq
