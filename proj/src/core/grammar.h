#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "typed_tree.h"

namespace treeseq {

// Grammar symbol for a child node: its type, or `<category>` for literals.
std::string child_symbol(const ObjectNode& node);
std::string literal_symbol(LiteralCategory category);
std::optional<LiteralCategory> symbol_category(std::string_view symbol);

struct AttributeInfo {
  std::string owner;
  std::string name;
  std::size_t position = 0;  // 1-based
  SlotKind kind = SlotKind::kSingle;
  std::set<std::string> children;

  friend bool operator==(const AttributeInfo&, const AttributeInfo&) = default;
};

struct Violation {
  std::string owner;
  std::string attribute;
  std::string child;
  std::string message;
};

struct GrammarStats {
  std::size_t object_types = 0;
  std::size_t attributes = 0;
  std::size_t child_edges = 0;
};

// Bipartite graph: object types own ordered attributes (owner edges);
// attributes point to the child symbols observed under them (child edges).
class GrammarGraph {
 public:
  static constexpr int kFormatVersion = 1;

  static GrammarGraph induce(std::span<const TypedTree> corpus);

  // nullopt when accepted, otherwise the first violation in preorder.
  std::optional<Violation> first_violation(const TypedTree& tree) const;
  bool accepts(const TypedTree& tree) const {
    return !first_violation(tree).has_value();
  }

  bool has_type(std::string_view symbol) const {
    return object_types_.count(std::string(symbol)) > 0;
  }
  // Ordered attributes of an object type; empty for leaves and unknown types.
  const std::vector<AttributeInfo>& attributes_of(std::string_view type) const;

  const std::set<std::string>& object_types() const { return object_types_; }
  const std::map<std::string, std::vector<AttributeInfo>>& attributes() const {
    return attributes_;
  }
  GrammarStats stats() const;

  // Every (owner, attribute, child) triple the graph allows.
  std::set<std::tuple<std::string, std::string, std::string>> triples() const;

  std::string save() const;
  static GrammarGraph load(std::string_view document);

  friend bool operator==(const GrammarGraph&, const GrammarGraph&) = default;

 private:
  std::set<std::string> object_types_;
  std::map<std::string, std::vector<AttributeInfo>> attributes_;
};

}  // namespace treeseq
