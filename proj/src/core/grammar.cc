#include "grammar.h"

#include <algorithm>
#include <tuple>

#include "error.h"

namespace treeseq {

using nlohmann::json;

std::string literal_symbol(LiteralCategory category) {
  return "<" + std::string(category_name(category)) + ">";
}

std::string child_symbol(const ObjectNode& node) {
  if (node.literal) return literal_symbol(node.literal->category);
  return node.type;
}

std::optional<LiteralCategory> symbol_category(std::string_view symbol) {
  if (symbol.size() < 3 || symbol.front() != '<' || symbol.back() != '>') {
    return std::nullopt;
  }
  return parse_category(symbol.substr(1, symbol.size() - 2));
}

namespace {

const std::vector<AttributeInfo> kNoAttributes;

void induce_node(const ObjectNode& node, std::set<std::string>& types,
                 std::map<std::string, std::vector<AttributeInfo>>& attrs) {
  types.insert(child_symbol(node));
  if (node.literal) return;

  auto [it, inserted] = attrs.try_emplace(node.type);
  std::vector<AttributeInfo>& known = it->second;
  if (inserted) {
    for (std::size_t i = 0; i < node.attrs.size(); ++i) {
      known.push_back(AttributeInfo{node.type, node.attrs[i].name, i + 1,
                                    node.attrs[i].kind, {}});
    }
  } else {
    if (known.size() != node.attrs.size()) {
      fail("attribute-order conflict: " + node.type + " seen with " +
           std::to_string(known.size()) + " and " +
           std::to_string(node.attrs.size()) + " attributes");
    }
    for (std::size_t i = 0; i < known.size(); ++i) {
      if (known[i].name != node.attrs[i].name) {
        fail("attribute-order conflict: " + node.type + " position " +
             std::to_string(i + 1) + " is '" + known[i].name + "' and '" +
             node.attrs[i].name + "'");
      }
      if (known[i].kind != node.attrs[i].kind) {
        fail("slot-kind conflict: " + node.type + "." + known[i].name +
             " is both single and list");
      }
    }
  }
  for (std::size_t i = 0; i < node.attrs.size(); ++i) {
    for (const ObjectNode& child : node.attrs[i].children) {
      attrs[node.type][i].children.insert(child_symbol(child));
      induce_node(child, types, attrs);
    }
  }
}

std::optional<Violation> check_node(
    const ObjectNode& node, const std::set<std::string>& types,
    const std::map<std::string, std::vector<AttributeInfo>>& grammar) {
  if (node.literal) return std::nullopt;
  auto it = grammar.find(node.type);
  if (it == grammar.end()) {
    if (node.attrs.empty() && types.count(node.type)) return std::nullopt;
    return Violation{node.type, "", "", "unknown object type " + node.type};
  }
  const std::vector<AttributeInfo>& known = it->second;
  if (known.size() != node.attrs.size()) {
    return Violation{node.type, "", "",
                     "attribute count mismatch on " + node.type};
  }
  for (std::size_t i = 0; i < known.size(); ++i) {
    const AttributeSlot& slot = node.attrs[i];
    if (slot.name != known[i].name) {
      return Violation{node.type, slot.name, "",
                       "attribute order mismatch on " + node.type};
    }
    if (slot.kind != known[i].kind) {
      return Violation{node.type, slot.name, "",
                       "slot kind mismatch on " + node.type + "." + slot.name};
    }
    if (slot.kind == SlotKind::kSingle && slot.children.size() != 1) {
      return Violation{node.type, slot.name, "",
                       "singleton slot without exactly one child"};
    }
    for (const ObjectNode& child : slot.children) {
      std::string symbol = child_symbol(child);
      if (!known[i].children.count(symbol)) {
        return Violation{node.type, slot.name, symbol,
                         symbol + " not allowed under " + node.type + "." +
                             slot.name};
      }
      if (auto v = check_node(child, types, grammar)) return v;
    }
  }
  return std::nullopt;
}

}  // namespace

GrammarGraph GrammarGraph::induce(std::span<const TypedTree> corpus) {
  if (corpus.empty()) fail("cannot induce a grammar from an empty corpus");
  GrammarGraph g;
  for (const TypedTree& tree : corpus) {
    induce_node(tree.root(), g.object_types_, g.attributes_);
  }
  std::erase_if(g.attributes_,
                [](const auto& entry) { return entry.second.empty(); });
  return g;
}

std::optional<Violation> GrammarGraph::first_violation(
    const TypedTree& tree) const {
  return check_node(tree.root(), object_types_, attributes_);
}

const std::vector<AttributeInfo>& GrammarGraph::attributes_of(
    std::string_view type) const {
  auto it = attributes_.find(std::string(type));
  return it == attributes_.end() ? kNoAttributes : it->second;
}

GrammarStats GrammarGraph::stats() const {
  GrammarStats s;
  s.object_types = object_types_.size();
  for (const auto& [owner, attrs] : attributes_) {
    s.attributes += attrs.size();
    for (const AttributeInfo& a : attrs) s.child_edges += a.children.size();
  }
  return s;
}

std::set<std::tuple<std::string, std::string, std::string>>
GrammarGraph::triples() const {
  std::set<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& [owner, attrs] : attributes_) {
    for (const AttributeInfo& a : attrs) {
      for (const std::string& c : a.children) out.emplace(owner, a.name, c);
    }
  }
  return out;
}

std::string GrammarGraph::save() const {
  json attributes = json::array();
  json children = json::object();
  for (const auto& [owner, attrs] : attributes_) {
    for (const AttributeInfo& a : attrs) {
      attributes.push_back({{"owner", owner},
                            {"name", a.name},
                            {"position", a.position},
                            {"kind", slot_kind_name(a.kind)}});
      children[owner + "." + a.name] = a.children;
    }
  }
  json doc = {{"format_version", kFormatVersion},
              {"object_types", object_types_},
              {"attributes", std::move(attributes)},
              {"children", std::move(children)}};
  return doc.dump(1) + "\n";
}

GrammarGraph GrammarGraph::load(std::string_view document) {
  GrammarGraph g;
  try {
    json doc = json::parse(document);
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      fail("grammar format version mismatch: expected " +
           std::to_string(kFormatVersion));
    }
    for (const json& t : doc.at("object_types")) {
      g.object_types_.insert(t.get<std::string>());
    }
    const json& children = doc.at("children");
    for (const json& a : doc.at("attributes")) {
      AttributeInfo info;
      info.owner = a.at("owner").get<std::string>();
      info.name = a.at("name").get<std::string>();
      info.position = a.at("position").get<std::size_t>();
      const std::string kind = a.at("kind").get<std::string>();
      if (kind != "single" && kind != "list") fail("bad slot kind " + kind);
      info.kind = kind == "list" ? SlotKind::kList : SlotKind::kSingle;
      for (const json& c : children.at(info.owner + "." + info.name)) {
        info.children.insert(c.get<std::string>());
      }
      g.attributes_[info.owner].push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed grammar document: ") + e.what());
  }
  for (auto& [owner, attrs] : g.attributes_) {
    std::sort(attrs.begin(), attrs.end(),
              [](const AttributeInfo& a, const AttributeInfo& b) {
                return a.position < b.position;
              });
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (attrs[i].position != i + 1) {
        fail("grammar attributes of " + owner + " are not 1..k consecutive");
      }
    }
    if (!g.object_types_.count(owner)) {
      fail("attribute owner " + owner + " is not an object type");
    }
  }
  return g;
}

}  // namespace treeseq
