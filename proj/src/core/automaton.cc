#include "automaton.h"

#include <algorithm>

#include "error.h"

namespace treeseq {

TokenClass TokenClass::of(const AstToken& token) {
  TokenClass cls;
  cls.kind = token.kind;
  if (token.kind == TokenKind::kNodeType) cls.type = token.text;
  if (token.kind == TokenKind::kLiteral) cls.category = token.category;
  return cls;
}

std::string describe(const TokenClass& cls) {
  switch (cls.kind) {
    case TokenKind::kSos: return "sos";
    case TokenKind::kEos: return "eos";
    case TokenKind::kListEnd: return "le";
    case TokenKind::kNodeType: return cls.type;
    case TokenKind::kLiteral: return literal_symbol(cls.category);
  }
  return "?";
}

namespace {

TokenClass class_of_symbol(const std::string& symbol) {
  TokenClass cls;
  if (symbol == kEosType) {
    cls.kind = TokenKind::kEos;
  } else if (auto category = symbol_category(symbol)) {
    cls.kind = TokenKind::kLiteral;
    cls.category = *category;
  } else {
    cls.kind = TokenKind::kNodeType;
    cls.type = symbol;
  }
  return cls;
}

std::string symbol_of(const AstToken& token) {
  switch (token.kind) {
    case TokenKind::kSos: return std::string(kSosType);
    case TokenKind::kEos: return std::string(kEosType);
    case TokenKind::kLiteral: return literal_symbol(token.category);
    case TokenKind::kNodeType: return token.text;
    case TokenKind::kListEnd: return "le";
  }
  return {};
}

}  // namespace

DecoderState DecoderState::initial(const GrammarGraph& grammar,
                                   AutomatonMode mode) {
  return DecoderState(&grammar, mode);
}

bool DecoderState::admits(const AttributeInfo& attr,
                          const std::string& symbol) const {
  if (mode_ == AutomatonMode::kConstrained) return attr.children.count(symbol);
  if (symbol == kSosType) return false;
  return grammar_->has_type(symbol) || symbol_category(symbol).has_value();
}

std::vector<TokenClass> DecoderState::legal_tokens() const {
  std::vector<TokenClass> out;
  if (finished_) return out;
  if (!started_) {
    out.push_back(TokenClass{TokenKind::kSos, {}, {}});
    return out;
  }
  const Frame& top = frames_.back();
  const AttributeInfo& attr = (*top.attrs)[top.cursor];
  if (mode_ == AutomatonMode::kConstrained) {
    for (const std::string& symbol : attr.children) {
      out.push_back(class_of_symbol(symbol));
    }
  } else {
    for (const std::string& symbol : grammar_->object_types()) {
      if (symbol != kSosType) out.push_back(class_of_symbol(symbol));
    }
    for (LiteralCategory c : kAllCategories) {
      out.push_back(TokenClass{TokenKind::kLiteral, {}, c});
    }
  }
  if (attr.kind == SlotKind::kList) {
    out.push_back(TokenClass{TokenKind::kListEnd, {}, {}});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool DecoderState::can_step(const AstToken& token) const {
  if (finished_) return false;
  if (!started_) return token.kind == TokenKind::kSos;
  if (token.kind == TokenKind::kSos) return false;
  const Frame& top = frames_.back();
  const AttributeInfo& attr = (*top.attrs)[top.cursor];
  if (token.kind == TokenKind::kListEnd) return attr.kind == SlotKind::kList;
  if (attr.kind == SlotKind::kSingle && top.count > 0) return false;
  return admits(attr, symbol_of(token));
}

void DecoderState::step(const AstToken& token) {
  if (!can_step(token)) {
    std::string legal;
    for (const TokenClass& cls : legal_tokens()) {
      if (!legal.empty()) legal += ", ";
      legal += describe(cls);
    }
    fail("token '" + token_text(token) + "' is not legal here; legal: {" +
         legal + "}");
  }
  if (!started_) {
    started_ = true;
    frames_.push_back(Frame{&grammar_->attributes_of(kSosType), 0, 0});
    if (frames_.back().attrs->empty()) fail("grammar has no sos attributes");
    return;
  }
  Frame& top = frames_.back();
  if (token.kind == TokenKind::kListEnd) {
    ++top.cursor;
    top.count = 0;
    close_child();
    return;
  }
  ++top.count;
  if (token.kind == TokenKind::kNodeType) {
    const std::vector<AttributeInfo>& attrs =
        grammar_->attributes_of(token.text);
    if (!attrs.empty()) {
      frames_.push_back(Frame{&attrs, 0, 0});
      return;
    }
  }
  // Leaf child: a filled singleton moves on to the next attribute.
  if ((*top.attrs)[top.cursor].kind == SlotKind::kSingle) {
    ++top.cursor;
    top.count = 0;
  }
  close_child();
}

// Pops every frame whose attributes are exhausted; each pop completes one
// child of the frame below.
void DecoderState::close_child() {
  while (!frames_.empty() && frames_.back().cursor == frames_.back().attrs->size()) {
    frames_.pop_back();
    if (frames_.empty()) {
      finished_ = true;
      return;
    }
    Frame& parent = frames_.back();
    if ((*parent.attrs)[parent.cursor].kind == SlotKind::kSingle) {
      ++parent.cursor;
      parent.count = 0;
    }
  }
}

EdgePath DecoderState::next_edge_path(std::size_t path_len) const {
  if (finished_) fail("no next position: the tree is complete");
  EdgePath path(path_len, 0);
  if (!started_) return path;
  if (depth() > path_len) {
    fail("tree depth " + std::to_string(depth()) +
         " exceeds edge path length " + std::to_string(path_len));
  }
  std::size_t l = 0;
  for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
    // The top frame's next child is count+1; lower frames are building
    // their count-th child.
    const bool top = it == frames_.rbegin();
    path[l++] = static_cast<std::uint32_t>(top ? it->count + 1 : it->count);
    path[l++] = static_cast<std::uint32_t>(it->cursor + 1);
  }
  return path;
}

}  // namespace treeseq
