#include "toy_corpus.h"

#include <array>
#include <random>
#include <string>
#include <string_view>

#include "error.h"

namespace treeseq {

namespace {

constexpr std::array<std::string_view, 12> kVariables = {
    "x", "y", "z", "a", "b", "n", "total", "count", "result", "value",
    "data", "items"};
constexpr std::array<std::string_view, 8> kFunctions = {
    "print", "len", "max", "min", "sum", "open", "str", "int"};
constexpr std::array<std::string_view, 12> kStrings = {
    "hello", "world", "data.csv", "hello world", "output.txt", "name",
    "error", "done", "test", "config.json", "utf-8", "a,b"};

struct Operator {
  std::string_view type;
  std::string_view phrase;
};
constexpr std::array<Operator, 4> kOperators = {{{"Add", "sum"},
                                                 {"Sub", "difference"},
                                                 {"Mult", "product"},
                                                 {"Div", "quotient"}}};

ObjectNode leaf(std::string_view type) {
  return ObjectNode{std::string(type), {}, {}};
}

ObjectNode literal(LiteralCategory category, std::string value) {
  return ObjectNode{std::string(category_name(category)),
                    Literal{category, std::move(value)},
                    {}};
}

AttributeSlot single(std::string name, ObjectNode child) {
  AttributeSlot slot{std::move(name), SlotKind::kSingle, {}};
  slot.children.push_back(std::move(child));
  return slot;
}

AttributeSlot list(std::string name, std::vector<ObjectNode> children) {
  return AttributeSlot{std::move(name), SlotKind::kList, std::move(children)};
}

struct Phrase {
  ObjectNode node;
  std::string text;
};

class Generator {
 public:
  Generator(std::uint64_t seed, std::size_t max_depth)
      : rng_(seed), max_depth_(max_depth) {}

  Sample program(std::size_t max_statements) {
    const std::size_t n = 1 + pick(max_statements);
    std::vector<ObjectNode> body;
    std::string text;
    for (std::size_t i = 0; i < n; ++i) {
      Phrase s = statement(2);
      if (i > 0) text += " ; ";
      text += s.text;
      body.push_back(std::move(s.node));
    }
    ObjectNode module{"Module", {}, {}};
    module.attrs.push_back(list("body", std::move(body)));
    return Sample{std::move(text), TypedTree::wrap(std::move(module))};
  }

 private:
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool chance(unsigned percent) { return rng_() % 100 < percent; }

  Phrase name(std::size_t level) {
    (void)level;
    std::string id(kVariables[pick(kVariables.size())]);
    ObjectNode node{"Name", {}, {}};
    node.attrs.push_back(single("id", literal(LiteralCategory::kIdentifier, id)));
    return {std::move(node), id};
  }

  Phrase function_name() {
    std::string id(kFunctions[pick(kFunctions.size())]);
    ObjectNode node{"Name", {}, {}};
    node.attrs.push_back(single("id", literal(LiteralCategory::kIdentifier, id)));
    return {std::move(node), id};
  }

  Phrase atom(std::size_t level) {
    switch (pick(3)) {
      case 0: return name(level);
      case 1: {
        std::string n = std::to_string(pick(21));
        ObjectNode node{"Num", {}, {}};
        node.attrs.push_back(single("n", literal(LiteralCategory::kNumber, n)));
        return {std::move(node), n};
      }
      default: {
        std::string s(kStrings[pick(kStrings.size())]);
        ObjectNode node{"Str", {}, {}};
        node.attrs.push_back(single("s", literal(LiteralCategory::kString, s)));
        return {std::move(node), "\"" + s + "\""};
      }
    }
  }

  Phrase call(std::size_t level) {
    Phrase func = function_name();
    std::vector<ObjectNode> args;
    std::string text = "call " + func.text + " (";
    const std::size_t n = pick(3);
    for (std::size_t i = 0; i < n; ++i) {
      Phrase arg = expression(level + 1);
      text += (i == 0 ? " " : " , ") + arg.text;
      args.push_back(std::move(arg.node));
    }
    text += " )";
    ObjectNode node{"Call", {}, {}};
    node.attrs.push_back(single("func", std::move(func.node)));
    node.attrs.push_back(list("args", std::move(args)));
    return {std::move(node), text};
  }

  // `level` is the object-node level of the expression itself.
  Phrase expression(std::size_t level) {
    const bool room = level + 2 <= max_depth_;
    const unsigned binop_chance = level <= 3 ? 45 : level <= 4 ? 30 : 15;
    if (room && chance(binop_chance)) {
      const Operator& op = kOperators[pick(kOperators.size())];
      Phrase left = expression(level + 1);
      Phrase right = expression(level + 1);
      ObjectNode node{"BinOp", {}, {}};
      node.attrs.push_back(single("left", std::move(left.node)));
      node.attrs.push_back(single("op", leaf(op.type)));
      node.attrs.push_back(single("right", std::move(right.node)));
      return {std::move(node), std::string(op.phrase) + " of " + left.text +
                                   " and " + right.text};
    }
    if (room && level <= 3 && chance(10)) return call(level);
    return atom(level);
  }

  Phrase statement(std::size_t level) {
    if (chance(25)) {
      Phrase c = call(level + 1);
      ObjectNode node{"Expr", {}, {}};
      node.attrs.push_back(single("value", std::move(c.node)));
      return {std::move(node), c.text};
    }
    std::vector<ObjectNode> targets;
    std::string text = "set ";
    const std::size_t n = chance(15) ? 2 : 1;
    for (std::size_t i = 0; i < n; ++i) {
      Phrase t = name(level + 1);
      text += (i == 0 ? "" : " and ") + t.text;
      targets.push_back(std::move(t.node));
    }
    Phrase value = expression(level + 1);
    text += " to " + value.text;
    ObjectNode node{"Assign", {}, {}};
    node.attrs.push_back(list("targets", std::move(targets)));
    node.attrs.push_back(single("value", std::move(value.node)));
    return {std::move(node), text};
  }

  std::mt19937_64 rng_;
  std::size_t max_depth_;
};

}  // namespace

std::vector<Sample> generate_toy_corpus(const ToyOptions& options) {
  if (options.max_depth < 4) fail("toy corpus depth must be at least 4");
  if (options.max_statements == 0) fail("max_statements must be positive");
  Generator gen(options.seed, options.max_depth);
  std::vector<Sample> out;
  out.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    out.push_back(gen.program(options.max_statements));
  }
  return out;
}

}  // namespace treeseq
