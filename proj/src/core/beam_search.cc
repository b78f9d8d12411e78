#include "beam_search.h"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>

#include "delinearize.h"
#include "error.h"

namespace treeseq {

namespace {

template <typename T>
struct Hyp {
  std::vector<int> ids;
  std::optional<DecoderState> state;  // absent without a grammar
  bool in_run = false;
  bool tracking = false;  // state still follows the output
  EdgePath path;          // path of ids.back()
  std::vector<T> position;  // positional row of ids.back()
  DecoderCache<T> cache;
  double log_prob = 0;
};

struct Candidate {
  std::size_t parent;
  int id;
  double log_prob;
};

}  // namespace

template <typename T>
BeamDecoder<T>::BeamDecoder(const Transformer<T>& model,
                            const TargetCodec& codec,
                            const GrammarGraph* grammar)
    : model_(&model), codec_(&codec), grammar_(grammar) {
  if (model.config().tgt_vocab != codec.size()) {
    fail("model target vocabulary (" + std::to_string(model.config().tgt_vocab) +
         ") does not match the codec (" + std::to_string(codec.size()) + ")");
  }
  const int offset = codec.subword_offset();
  for (std::size_t i = SubwordVocab::kSpecials; i < codec.subword().size(); ++i) {
    subword_ids_.push_back(offset + static_cast<int>(i));
  }
  if (!grammar_) return;
  const AstVocab& ast = codec.ast();
  for (const std::string& type : grammar_->object_types()) {
    if (type == kSosType || type == kEosType || symbol_category(type)) continue;
    if (ast.id_of(AstToken::node(type)) == AstVocab::kUnk) {
      fail("vocabulary lacks grammar type '" + type + "'");
    }
  }
}

template <typename T>
std::vector<int> BeamDecoder<T>::ids_for(const TokenClass& cls) const {
  const AstVocab& ast = codec_->ast();
  switch (cls.kind) {
    case TokenKind::kSos: return {};
    case TokenKind::kEos: return {AstVocab::kEos};
    case TokenKind::kListEnd: return {AstVocab::kListEnd};
    case TokenKind::kNodeType: return {ast.id_of(AstToken::node(cls.type))};
    case TokenKind::kLiteral: break;
  }
  if (cls.category == LiteralCategory::kString) {
    std::vector<int> ids = subword_ids_;
    ids.push_back(codec_->literal_end());
    return ids;
  }
  std::vector<int> ids = ast.literal_ids(cls.category);
  ids.push_back(ast.sentinel(cls.category));
  return ids;
}

template <typename T>
std::vector<BeamHypothesis> BeamDecoder<T>::search(
    std::span<const int> src, const BeamOptions& options,
    const StepObserver& observer) const {
  if (options.beams == 0) fail("beam count must be at least 1");
  if (options.max_len == 0) fail("maximum length must be at least 1");
  const ModelConfig& cfg = model_->config();
  const bool tree = cfg.positional == PositionalMode::kTree;
  if (options.constrained && !grammar_) {
    fail("constrained decoding requires a grammar");
  }
  if (tree && !grammar_) fail("tree positional mode requires a grammar");
  const AutomatonMode mode = options.constrained ? AutomatonMode::kConstrained
                                                 : AutomatonMode::kShapeOnly;
  const int lit_end = codec_->literal_end();
  const int sub_pad = codec_->subword_offset() + SubwordVocab::kPad;

  auto position_row = [&](std::size_t index, const EdgePath& path) {
    Mat<T> m = tree ? tree_positions<T>({path}, cfg.d_idx, cfg.path_len)
                    : sequential_positions<T>(index + 1, cfg.d_model);
    const T* row = m.row(m.rows - 1);
    return std::vector<T>(row, row + cfg.d_model);
  };
  // Path the next token will occupy; nullopt when it exceeds the budget.
  auto next_path = [&](const Hyp<T>& h) -> std::optional<EdgePath> {
    if (!tree) return EdgePath{};
    if (!h.tracking) return h.path;
    try {
      return h.state->next_edge_path(cfg.path_len);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto track = [](Hyp<T>& h, const AstToken& token) {
    if (!h.tracking) return;
    if (h.state->can_step(token)) {
      h.state->step(token);
    } else {
      h.tracking = false;
    }
  };
  const AstToken string_leaf = AstToken::literal(LiteralCategory::kString, {});

  const EncoderMemory<T> memory = model_->encode(src);
  Hyp<T> first;
  first.ids = {AstVocab::kSos};
  if (grammar_) {
    first.state = DecoderState::initial(*grammar_, mode);
    first.state->step(AstToken::sos());
    first.tracking = true;
  }
  first.path = EdgePath(tree ? cfg.path_len : 0, 0);
  first.position = position_row(0, first.path);
  first.cache = model_->empty_cache();

  std::vector<Hyp<T>> active{std::move(first)};
  std::vector<Hyp<T>> done, cut;

  auto kth_done_score = [&] {
    std::vector<double> scores;
    for (const auto& h : done) {
      scores.push_back(h.log_prob / static_cast<double>(h.ids.size() - 1));
    }
    std::nth_element(scores.begin(), scores.begin() + (options.beams - 1),
                     scores.end(), std::greater<>());
    return scores[options.beams - 1];
  };
  while (!active.empty()) {
    // Stop once k finished hypotheses outscore every live one at its
    // current length. A heuristic under length normalization: a live
    // hypothesis could still raise its average with confident tokens.
    if (done.size() >= options.beams) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : active) {
        best_live = std::max(
            best_live, h.log_prob / static_cast<double>(h.ids.size() - 1));
      }
      if (best_live < kth_done_score()) break;
    }
    std::vector<Candidate> candidates;
    std::vector<std::optional<EdgePath>> paths(active.size());
    for (std::size_t hi = 0; hi < active.size(); ++hi) {
      Hyp<T>& h = active[hi];
      paths[hi] = next_path(h);
      if (!paths[hi] && !options.constrained) {
        h.tracking = false;
        paths[hi] = h.path;
      }
      std::vector<int> legal;
      if (options.constrained) {
        if (h.in_run) {
          legal = ids_for(TokenClass{TokenKind::kLiteral, {},
                                     LiteralCategory::kString});
        } else {
          for (const TokenClass& cls : h.state->legal_tokens()) {
            std::vector<int> ids = ids_for(cls);
            legal.insert(legal.end(), ids.begin(), ids.end());
          }
        }
      }
      if (!paths[hi] || (options.constrained && legal.empty())) {
        cut.push_back(std::move(h));
        continue;
      }
      std::vector<T> logp =
          model_->decode_step(memory, h.cache, h.ids.back(), h.position);
      if (!options.constrained) {
        for (int id = 0; id < static_cast<int>(logp.size()); ++id) {
          if (id != AstVocab::kPad && id != AstVocab::kSos && id != sub_pad) {
            legal.push_back(id);
          }
        }
      }
      std::sort(legal.begin(), legal.end());
      legal.erase(std::unique(legal.begin(), legal.end()), legal.end());
      const std::size_t keep = std::min(2 * options.beams, legal.size());
      std::partial_sort(legal.begin(), legal.begin() + keep, legal.end(),
                        [&](int a, int b) {
                          return logp[a] != logp[b] ? logp[a] > logp[b] : a < b;
                        });
      for (std::size_t i = 0; i < keep; ++i) {
        candidates.push_back(
            {hi, legal[i], h.log_prob + static_cast<double>(logp[legal[i]])});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.log_prob > b.log_prob;
                     });

    // Finished candidates ranked within the top k are kept; live ones fill
    // up to k beams.
    std::vector<Hyp<T>> next;
    for (std::size_t rank = 0; rank < candidates.size(); ++rank) {
      if (next.size() >= options.beams) break;
      const Candidate& c = candidates[rank];
      Hyp<T> h = active[c.parent];
      if (observer && h.state) observer(*h.state, h.in_run, c.id);
      h.ids.push_back(c.id);
      h.log_prob = c.log_prob;
      bool finished = false;
      if (codec_->is_subword(c.id)) {
        h.path = tree ? *paths[c.parent] : EdgePath{};
        if (c.id == lit_end) {
          if (options.constrained) {
            h.state->step(string_leaf);
          } else if (h.state) {
            track(h, string_leaf);
          }
          h.in_run = false;
        } else {
          h.in_run = true;
        }
      } else {
        const AstToken token = parse_token_text(codec_->ast().text(c.id));
        if (options.constrained) {
          h.path = tree ? *paths[c.parent] : EdgePath{};
          h.state->step(token);
          finished = h.state->finished();
        } else {
          if (h.in_run && h.state) track(h, string_leaf);
          h.in_run = false;
          if (tree) {
            if (h.tracking) {
              try {
                h.path = h.state->next_edge_path(cfg.path_len);
              } catch (const Error&) {
                h.tracking = false;
              }
            }
          }
          if (h.state) track(h, token);
          finished = c.id == AstVocab::kEos;
        }
      }
      h.position = position_row(h.ids.size() - 1, h.path);
      if (finished) {
        if (rank < options.beams) done.push_back(std::move(h));
      } else if (h.ids.size() - 1 >= options.max_len) {
        cut.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }

  std::vector<BeamHypothesis> out;
  auto emit = [&](const Hyp<T>& h, bool finished) {
    BeamHypothesis r;
    r.ids = h.ids;
    r.tokens = codec_->decode(h.ids);
    r.log_prob = h.log_prob;
    r.score = h.ids.size() > 1
                  ? h.log_prob / static_cast<double>(h.ids.size() - 1)
                  : h.log_prob;
    r.finished = finished;
    if (finished && grammar_) {
      try {
        delinearize(r.tokens, *grammar_);
        r.parsable = true;
      } catch (const Error&) {
        r.parsable = false;
      }
    }
    out.push_back(std::move(r));
  };
  for (const auto& h : done) emit(h, true);
  for (const auto& h : cut) emit(h, false);
  for (const auto& h : active) emit(h, false);
  std::stable_sort(out.begin(), out.end(),
                   [](const BeamHypothesis& a, const BeamHypothesis& b) {
                     if (a.finished != b.finished) return a.finished;
                     return a.score > b.score;
                   });
  return out;
}

template class BeamDecoder<float>;
template class BeamDecoder<double>;

}  // namespace treeseq
