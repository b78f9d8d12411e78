#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace treeseq {

enum class LiteralCategory { kString, kNumber, kIdentifier, kBoolean, kNone };

inline constexpr LiteralCategory kAllCategories[] = {
    LiteralCategory::kString, LiteralCategory::kNumber,
    LiteralCategory::kIdentifier, LiteralCategory::kBoolean,
    LiteralCategory::kNone};

std::string_view category_name(LiteralCategory category);
std::optional<LiteralCategory> parse_category(std::string_view name);

struct Literal {
  LiteralCategory category = LiteralCategory::kString;
  std::string value;

  friend bool operator==(const Literal&, const Literal&) = default;
};

enum class SlotKind { kSingle, kList };

std::string_view slot_kind_name(SlotKind kind);

struct AttributeSlot;

// An object node either carries a literal (and then has no attribute slots)
// or names a construct whose ordered attribute slots hold child nodes.
// Literal nodes use their category name as `type`.
struct ObjectNode {
  std::string type;
  std::optional<Literal> literal;
  std::vector<AttributeSlot> attrs;

  bool is_literal() const { return literal.has_value(); }
};

struct AttributeSlot {
  std::string name;
  SlotKind kind = SlotKind::kSingle;
  std::vector<ObjectNode> children;
};

bool operator==(const ObjectNode& a, const ObjectNode& b);
bool operator==(const AttributeSlot& a, const AttributeSlot& b);

inline constexpr std::string_view kSosType = "sos";
inline constexpr std::string_view kEosType = "eos";
inline constexpr std::string_view kStartSlot = "start";
inline constexpr std::string_view kEndSlot = "end";

// True for names usable as a user node type. Reserved words, literal
// category names, and anything that would be ambiguous in token text are
// rejected.
bool valid_type_name(std::string_view name);

// A validated tree rooted at the synthetic `sos` node:
// sos.start holds the real root, sos.end holds the `eos` leaf.
class TypedTree {
 public:
  // Validates `body` and wraps it with sos/eos.
  static TypedTree wrap(ObjectNode body);
  // Validates an already wrapped root.
  static TypedTree from_root(ObjectNode root);

  const ObjectNode& root() const { return root_; }
  const ObjectNode& body() const { return root_.attrs[0].children[0]; }

  std::size_t node_count() const;  // incl. sos and eos
  std::size_t list_slot_count() const;
  // Longest edge path, counting object->attribute and attribute->object hops.
  std::size_t depth() const;

  friend bool operator==(const TypedTree& a, const TypedTree& b) {
    return a.root_ == b.root_;
  }

 private:
  explicit TypedTree(ObjectNode root) : root_(std::move(root)) {}
  ObjectNode root_;
};

enum class TokenKind { kSos, kEos, kListEnd, kNodeType, kLiteral };

struct AstToken {
  TokenKind kind = TokenKind::kSos;
  std::string text;  // node type or literal value; empty otherwise
  LiteralCategory category = LiteralCategory::kString;  // literals only
  bool masked = false;  // literal replaced by its category sentinel

  static AstToken sos() { return {TokenKind::kSos, {}, {}, false}; }
  static AstToken eos() { return {TokenKind::kEos, {}, {}, false}; }
  static AstToken list_end() { return {TokenKind::kListEnd, {}, {}, false}; }
  static AstToken node(std::string type) {
    return {TokenKind::kNodeType, std::move(type), {}, false};
  }
  static AstToken literal(LiteralCategory category, std::string value) {
    return {TokenKind::kLiteral, std::move(value), category, false};
  }

  friend bool operator==(const AstToken&, const AstToken&) = default;
};

// Canonical single-string rendering, e.g. `sos`, `Module`, `'a'`, `10`,
// `identifier:x`, `<STR>`. parse_token_text inverts it.
std::string token_text(const AstToken& token);
AstToken parse_token_text(std::string_view text);
std::vector<std::string> token_texts(const std::vector<AstToken>& tokens);
std::vector<AstToken> parse_token_texts(const std::vector<std::string>& texts);

// Interchange format (JSON object node). Throws Error on malformed input.
ObjectNode node_from_json(const nlohmann::json& j);
nlohmann::json node_to_json(const ObjectNode& node);
TypedTree read_tree(std::string_view document);
std::string write_tree(const TypedTree& tree);

std::vector<AstToken> linearize(const TypedTree& tree);

struct Sample {
  std::string nl;
  TypedTree tree;
};

// JSONL corpus: one {"nl": str, "tree": <object node>} per line.
std::vector<Sample> read_corpus(std::string_view text);
std::vector<Sample> read_corpus_file(const std::string& path);
std::string write_corpus(const std::vector<Sample>& corpus);
void write_corpus_file(const std::vector<Sample>& corpus,
                       const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace treeseq
