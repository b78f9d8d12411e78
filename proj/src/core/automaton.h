#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "edge_paths.h"
#include "grammar.h"
#include "typed_tree.h"

namespace treeseq {

// What a legal-token mask is made of. Literal classes stand for every value
// of their category.
struct TokenClass {
  TokenKind kind = TokenKind::kSos;
  std::string type;  // node types only
  LiteralCategory category = LiteralCategory::kString;  // literals only

  static TokenClass of(const AstToken& token);
  bool matches(const AstToken& token) const { return *this == of(token); }

  friend auto operator<=>(const TokenClass&, const TokenClass&) = default;
};

std::string describe(const TokenClass& cls);

// kConstrained only admits children the grammar has seen under the current
// attribute. kShapeOnly uses the grammar for slot layouts but admits any
// known symbol in any slot; it exists so unconstrained decoding can still
// track tree positions.
enum class AutomatonMode { kConstrained, kShapeOnly };

// Pushdown recognizer state. Copying is cheap relative to a decoder step,
// which is what beam search relies on.
class DecoderState {
 public:
  static DecoderState initial(const GrammarGraph& grammar,
                              AutomatonMode mode = AutomatonMode::kConstrained);

  bool finished() const { return finished_; }
  bool started() const { return started_; }
  std::size_t depth() const { return 2 * frames_.size(); }

  // Sorted, unique.
  std::vector<TokenClass> legal_tokens() const;
  bool can_step(const AstToken& token) const;
  // Throws Error listing the legal set when the token is not legal.
  void step(const AstToken& token);
  DecoderState stepped(const AstToken& token) const {
    DecoderState next = *this;
    next.step(token);
    return next;
  }

  // Edge path the next token will occupy. Throws when it needs more than
  // `path_len` entries.
  EdgePath next_edge_path(std::size_t path_len) const;

  friend bool operator==(const DecoderState& a, const DecoderState& b) {
    return a.started_ == b.started_ && a.finished_ == b.finished_ &&
           a.frames_ == b.frames_;
  }

 private:
  struct Frame {
    const std::vector<AttributeInfo>* attrs = nullptr;
    std::size_t cursor = 0;  // index of the open attribute
    std::size_t count = 0;   // children started in the open attribute

    friend bool operator==(const Frame&, const Frame&) = default;
  };

  DecoderState(const GrammarGraph* grammar, AutomatonMode mode)
      : grammar_(grammar), mode_(mode) {}

  bool admits(const AttributeInfo& attr, const std::string& symbol) const;
  void close_child();

  const GrammarGraph* grammar_;
  AutomatonMode mode_;
  bool started_ = false;
  bool finished_ = false;
  std::vector<Frame> frames_;
};

}  // namespace treeseq
