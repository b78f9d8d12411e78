#include "delinearize.h"

#include <cstddef>

#include "error.h"

namespace treeseq {

namespace {

class Parser {
 public:
  Parser(const std::vector<AstToken>& tokens, const GrammarGraph& grammar)
      : tokens_(tokens), grammar_(grammar) {}

  TypedTree parse() {
    const AstToken& first = next("sos");
    if (first.kind != TokenKind::kSos) {
      fail("sequence must start with sos, got " + token_text(first));
    }
    ObjectNode root = parse_attributes(std::string(kSosType));
    if (pos_ != tokens_.size()) {
      fail("trailing tokens after eos at position " + std::to_string(pos_));
    }
    return TypedTree::from_root(std::move(root));
  }

 private:
  const AstToken& next(const std::string& expecting) {
    if (pos_ >= tokens_.size()) {
      fail("incomplete sequence: expected " + expecting + " at position " +
           std::to_string(pos_));
    }
    return tokens_[pos_++];
  }

  ObjectNode parse_attributes(const std::string& type) {
    ObjectNode node;
    node.type = type;
    for (const AttributeInfo& attr : grammar_.attributes_of(type)) {
      AttributeSlot slot{attr.name, attr.kind, {}};
      const std::string where = type + "." + attr.name;
      if (attr.kind == SlotKind::kSingle) {
        slot.children.push_back(parse_child(attr, next("child of " + where)));
      } else {
        for (;;) {
          const AstToken& token = next("child or le in " + where);
          if (token.kind == TokenKind::kListEnd) break;
          slot.children.push_back(parse_child(attr, token));
        }
      }
      node.attrs.push_back(std::move(slot));
    }
    return node;
  }

  ObjectNode parse_child(const AttributeInfo& attr, const AstToken& token) {
    std::string symbol;
    switch (token.kind) {
      case TokenKind::kSos:
      case TokenKind::kListEnd:
        fail(token_text(token) + " not allowed under " + attr.owner + "." +
             attr.name + " at position " + std::to_string(pos_ - 1));
      case TokenKind::kEos: symbol = std::string(kEosType); break;
      case TokenKind::kLiteral: symbol = literal_symbol(token.category); break;
      case TokenKind::kNodeType: symbol = token.text; break;
    }
    if (!attr.children.count(symbol)) {
      fail(symbol + " not allowed under " + attr.owner + "." + attr.name +
           " at position " + std::to_string(pos_ - 1));
    }
    if (token.kind == TokenKind::kLiteral) {
      return ObjectNode{std::string(category_name(token.category)),
                        Literal{token.category, token.text},
                        {}};
    }
    return parse_attributes(symbol);
  }

  const std::vector<AstToken>& tokens_;
  const GrammarGraph& grammar_;
  std::size_t pos_ = 0;
};

}  // namespace

TypedTree delinearize(const std::vector<AstToken>& tokens,
                      const GrammarGraph& grammar) {
  return Parser(tokens, grammar).parse();
}

}  // namespace treeseq
