#include "typed_tree.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "error.h"

namespace treeseq {

using nlohmann::json;

std::string_view category_name(LiteralCategory category) {
  switch (category) {
    case LiteralCategory::kString: return "string";
    case LiteralCategory::kNumber: return "number";
    case LiteralCategory::kIdentifier: return "identifier";
    case LiteralCategory::kBoolean: return "boolean";
    case LiteralCategory::kNone: return "none";
  }
  return "string";
}

std::optional<LiteralCategory> parse_category(std::string_view name) {
  for (LiteralCategory c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view slot_kind_name(SlotKind kind) {
  return kind == SlotKind::kList ? "list" : "single";
}

bool operator==(const AttributeSlot& a, const AttributeSlot& b) {
  return a.name == b.name && a.kind == b.kind && a.children == b.children;
}

bool operator==(const ObjectNode& a, const ObjectNode& b) {
  return a.type == b.type && a.literal == b.literal && a.attrs == b.attrs;
}

bool valid_type_name(std::string_view name) {
  if (name.empty()) return false;
  if (name == kSosType || name == kEosType || name == "le") return false;
  if (parse_category(name)) return false;
  auto head = static_cast<unsigned char>(name.front());
  if (!std::isalpha(head) && head != '_') return false;
  return std::all_of(name.begin(), name.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_' || c == '.';
  });
}

namespace {

void validate_body_node(const ObjectNode& node, const std::string& where) {
  if (node.literal) {
    if (!node.attrs.empty()) {
      fail(where + ": literal node '" + node.type + "' has attributes");
    }
    if (node.type != category_name(node.literal->category)) {
      fail(where + ": literal node type '" + node.type +
           "' must equal its category '" +
           std::string(category_name(node.literal->category)) + "'");
    }
    return;
  }
  if (!valid_type_name(node.type)) {
    fail(where + ": invalid node type '" + node.type + "'");
  }
  std::set<std::string> seen;
  for (const AttributeSlot& slot : node.attrs) {
    if (slot.name.empty()) fail(where + ": empty attribute name");
    if (!seen.insert(slot.name).second) {
      fail(where + ": duplicate attribute '" + slot.name + "' on " + node.type);
    }
    if (slot.kind == SlotKind::kSingle && slot.children.size() != 1) {
      fail(where + ": singleton slot " + node.type + "." + slot.name +
           " has " + std::to_string(slot.children.size()) + " children");
    }
    for (std::size_t i = 0; i < slot.children.size(); ++i) {
      validate_body_node(slot.children[i], where + "/" + node.type + "." +
                                               slot.name + "[" +
                                               std::to_string(i) + "]");
    }
  }
}

ObjectNode eos_node() { return ObjectNode{std::string(kEosType), {}, {}}; }

void count_nodes(const ObjectNode& node, std::size_t& nodes,
                 std::size_t& lists) {
  ++nodes;
  for (const AttributeSlot& slot : node.attrs) {
    if (slot.kind == SlotKind::kList) ++lists;
    for (const ObjectNode& child : slot.children) {
      count_nodes(child, nodes, lists);
    }
  }
}

std::size_t node_depth(const ObjectNode& node, std::size_t here) {
  std::size_t best = here;
  for (const AttributeSlot& slot : node.attrs) {
    for (const ObjectNode& child : slot.children) {
      best = std::max(best, node_depth(child, here + 2));
    }
  }
  return best;
}

}  // namespace

TypedTree TypedTree::wrap(ObjectNode body) {
  ObjectNode root;
  root.type = std::string(kSosType);
  root.attrs.push_back(
      AttributeSlot{std::string(kStartSlot), SlotKind::kSingle, {}});
  root.attrs.push_back(
      AttributeSlot{std::string(kEndSlot), SlotKind::kSingle, {eos_node()}});
  root.attrs[0].children.push_back(std::move(body));
  return from_root(std::move(root));
}

TypedTree TypedTree::from_root(ObjectNode root) {
  if (root.type != kSosType || root.literal || root.attrs.size() != 2 ||
      root.attrs[0].name != kStartSlot || root.attrs[1].name != kEndSlot ||
      root.attrs[0].kind != SlotKind::kSingle ||
      root.attrs[1].kind != SlotKind::kSingle ||
      root.attrs[0].children.size() != 1 ||
      root.attrs[1].children.size() != 1) {
    fail("tree root must be sos with singleton slots start and end");
  }
  if (!(root.attrs[1].children[0] == eos_node())) {
    fail("sos.end must hold the eos leaf");
  }
  validate_body_node(root.attrs[0].children[0], "root");
  return TypedTree(std::move(root));
}

std::size_t TypedTree::node_count() const {
  std::size_t nodes = 0, lists = 0;
  count_nodes(root_, nodes, lists);
  return nodes;
}

std::size_t TypedTree::list_slot_count() const {
  std::size_t nodes = 0, lists = 0;
  count_nodes(root_, nodes, lists);
  return lists;
}

std::size_t TypedTree::depth() const { return node_depth(root_, 0); }

// ---------------------------------------------------------------------------
// Token text

namespace {

constexpr std::string_view kMaskedString = "<STR>";

std::string masked_text(LiteralCategory category) {
  if (category == LiteralCategory::kString) return std::string(kMaskedString);
  std::string name(category_name(category));
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return "<" + name + ">";
}

bool looks_numeric(std::string_view text) {
  if (text.empty()) return false;
  auto c = static_cast<unsigned char>(text.front());
  return std::isdigit(c) || c == '-' || c == '+' || c == '.';
}

}  // namespace

std::string token_text(const AstToken& token) {
  switch (token.kind) {
    case TokenKind::kSos: return "sos";
    case TokenKind::kEos: return "eos";
    case TokenKind::kListEnd: return "le";
    case TokenKind::kNodeType: return token.text;
    case TokenKind::kLiteral: break;
  }
  if (token.masked) return masked_text(token.category);
  if (token.category == LiteralCategory::kString) {
    std::string out = "'";
    for (char ch : token.text) {
      if (ch == '\\' || ch == '\'') out.push_back('\\');
      out.push_back(ch);
    }
    out.push_back('\'');
    return out;
  }
  if (token.category == LiteralCategory::kNumber && looks_numeric(token.text)) {
    return token.text;
  }
  return std::string(category_name(token.category)) + ":" + token.text;
}

AstToken parse_token_text(std::string_view text) {
  if (text == "sos") return AstToken::sos();
  if (text == "eos") return AstToken::eos();
  if (text == "le") return AstToken::list_end();
  for (LiteralCategory c : kAllCategories) {
    if (text == masked_text(c)) {
      AstToken t = AstToken::literal(c, masked_text(c));
      t.masked = true;
      return t;
    }
  }
  if (!text.empty() && text.front() == '\'') {
    if (text.size() < 2 || text.back() != '\'') {
      fail("unterminated string token: " + std::string(text));
    }
    std::string value;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      if (text[i] == '\\' && i + 2 < text.size()) ++i;
      value.push_back(text[i]);
    }
    return AstToken::literal(LiteralCategory::kString, std::move(value));
  }
  if (looks_numeric(text)) {
    return AstToken::literal(LiteralCategory::kNumber, std::string(text));
  }
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    if (auto c = parse_category(text.substr(0, colon))) {
      return AstToken::literal(*c, std::string(text.substr(colon + 1)));
    }
  }
  if (!valid_type_name(text)) {
    fail("unrecognised token text: " + std::string(text));
  }
  return AstToken::node(std::string(text));
}

std::vector<std::string> token_texts(const std::vector<AstToken>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const AstToken& t : tokens) out.push_back(token_text(t));
  return out;
}

std::vector<AstToken> parse_token_texts(const std::vector<std::string>& texts) {
  std::vector<AstToken> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(parse_token_text(t));
  return out;
}

// ---------------------------------------------------------------------------
// Interchange

ObjectNode node_from_json(const json& j) {
  if (!j.is_object()) fail("object node must be a JSON object");
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string()) {
    fail("object node requires a string 'type'");
  }
  ObjectNode node;
  node.type = type_it->get<std::string>();
  if (auto lit = j.find("literal"); lit != j.end() && !lit->is_null()) {
    if (!lit->is_object() || !lit->contains("category") ||
        !lit->contains("value") || !(*lit)["category"].is_string() ||
        !(*lit)["value"].is_string()) {
      fail("literal must be {\"category\": str, \"value\": str}");
    }
    auto category = parse_category((*lit)["category"].get<std::string>());
    if (!category) {
      fail("unknown literal category '" +
           (*lit)["category"].get<std::string>() + "'");
    }
    node.literal = Literal{*category, (*lit)["value"].get<std::string>()};
  }
  if (auto attrs = j.find("attrs"); attrs != j.end() && !attrs->is_null()) {
    if (!attrs->is_array()) fail("'attrs' must be an array");
    for (const json& a : *attrs) {
      if (!a.is_array() || a.size() != 3 || !a[0].is_string() ||
          !a[1].is_string() || !a[2].is_array()) {
        fail("attribute must be [name, \"single\"|\"list\", [children]]");
      }
      AttributeSlot slot;
      slot.name = a[0].get<std::string>();
      const std::string kind = a[1].get<std::string>();
      if (kind == "single") {
        slot.kind = SlotKind::kSingle;
      } else if (kind == "list") {
        slot.kind = SlotKind::kList;
      } else {
        fail("unknown slot kind '" + kind + "'");
      }
      for (const json& child : a[2]) {
        slot.children.push_back(node_from_json(child));
      }
      node.attrs.push_back(std::move(slot));
    }
  }
  return node;
}

json node_to_json(const ObjectNode& node) {
  json j;
  j["type"] = node.type;
  if (node.literal) {
    j["literal"] = {{"category", category_name(node.literal->category)},
                    {"value", node.literal->value}};
  } else {
    j["literal"] = nullptr;
  }
  json attrs = json::array();
  for (const AttributeSlot& slot : node.attrs) {
    json children = json::array();
    for (const ObjectNode& child : slot.children) {
      children.push_back(node_to_json(child));
    }
    attrs.push_back(json::array({slot.name, slot_kind_name(slot.kind),
                                 std::move(children)}));
  }
  j["attrs"] = std::move(attrs);
  return j;
}

TypedTree read_tree(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed tree document: ") + e.what());
  }
  return TypedTree::wrap(node_from_json(j));
}

std::string write_tree(const TypedTree& tree) {
  return node_to_json(tree.body()).dump();
}

// ---------------------------------------------------------------------------
// Linearization

namespace {

void linearize_node(const ObjectNode& node, std::vector<AstToken>& out) {
  if (node.literal) {
    out.push_back(AstToken::literal(node.literal->category,
                                    node.literal->value));
    return;
  }
  if (node.type == kSosType) {
    out.push_back(AstToken::sos());
  } else if (node.type == kEosType) {
    out.push_back(AstToken::eos());
  } else {
    out.push_back(AstToken::node(node.type));
  }
  for (const AttributeSlot& slot : node.attrs) {
    for (const ObjectNode& child : slot.children) linearize_node(child, out);
    if (slot.kind == SlotKind::kList) out.push_back(AstToken::list_end());
  }
}

}  // namespace

std::vector<AstToken> linearize(const TypedTree& tree) {
  std::vector<AstToken> out;
  linearize_node(tree.root(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus files

std::vector<Sample> read_corpus(std::string_view text) {
  std::vector<Sample> corpus;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json record = json::parse(line);
      if (!record.is_object() || !record.contains("tree")) {
        fail("record requires a 'tree' field");
      }
      std::string nl;
      if (auto it = record.find("nl"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) fail("'nl' must be a string");
        nl = it->get<std::string>();
      }
      corpus.push_back(
          Sample{std::move(nl), TypedTree::wrap(node_from_json(record["tree"]))});
    } catch (const json::exception& e) {
      fail("corpus line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

std::vector<Sample> read_corpus_file(const std::string& path) {
  return read_corpus(read_file(path));
}

std::string write_corpus(const std::vector<Sample>& corpus) {
  std::string out;
  for (const Sample& s : corpus) {
    json record = {{"nl", s.nl}, {"tree", node_to_json(s.tree.body())}};
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_corpus_file(const std::vector<Sample>& corpus,
                       const std::string& path) {
  write_file(path, write_corpus(corpus));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) fail_io("error reading '" + path + "'");
  return buffer.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail_io("error writing '" + path + "'");
}

}  // namespace treeseq
