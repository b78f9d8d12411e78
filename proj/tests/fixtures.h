#pragma once

#include <string>
#include <vector>

#include "core/grammar.h"
#include "core/typed_tree.h"

namespace fixtures {

using namespace treeseq;

inline ObjectNode leaf(LiteralCategory c, std::string value) {
  return ObjectNode{std::string(category_name(c)), Literal{c, std::move(value)},
                    {}};
}

inline ObjectNode node(std::string type, std::vector<AttributeSlot> attrs = {}) {
  return ObjectNode{std::move(type), std::nullopt, std::move(attrs)};
}

inline AttributeSlot single(std::string name, ObjectNode child) {
  return AttributeSlot{std::move(name), SlotKind::kSingle, {std::move(child)}};
}

inline AttributeSlot list(std::string name, std::vector<ObjectNode> children) {
  return AttributeSlot{std::move(name), SlotKind::kList, std::move(children)};
}

// The "a=10" program: Module(body=[Assign(targets=[Name('a')], value=Num(10))]).
inline TypedTree fig1_tree() {
  return TypedTree::wrap(node(
      "Module",
      {list("body",
            {node("Assign",
                  {list("targets",
                        {node("Name", {single("id", leaf(LiteralCategory::kString,
                                                         "a"))})}),
                   single("value",
                          node("Num", {single("n", leaf(LiteralCategory::kNumber,
                                                        "10"))}))})})}));
}

// Small call grammar with five object types (sos, eos, Module, Call, Name):
// Module.body: [Call]; Call.func: Name; Call.args: [Name | Call];
// Name.id: <identifier>.
inline ObjectNode name(const std::string& id) {
  return node("Name", {single("id", leaf(LiteralCategory::kIdentifier, id))});
}
inline ObjectNode call(ObjectNode func, std::vector<ObjectNode> args) {
  return node("Call", {single("func", std::move(func)), list("args", std::move(args))});
}
inline std::vector<TypedTree> call_corpus() {
  return {
      TypedTree::wrap(node("Module", {list("body", {call(name("f"), {})})})),
      TypedTree::wrap(node(
          "Module",
          {list("body", {call(name("g"), {name("x"), call(name("h"), {})})})})),
      TypedTree::wrap(node("Module", {list("body", {})})),
  };
}

}  // namespace fixtures
