#include "core/error.h"
#include "core/grammar.h"
#include "doctest.h"
#include "fixtures.h"

using namespace treeseq;

TEST_CASE("induced grammar of the a=10 program") {
  std::vector<TypedTree> corpus = {fixtures::fig1_tree()};
  GrammarGraph g = GrammarGraph::induce(corpus);
  // sos, eos, Module, Assign, Name, Num, <string>, <number>
  CHECK(g.object_types() ==
        std::set<std::string>{"<number>", "<string>", "Assign", "Module", "Name",
                              "Num", "eos", "sos"});
  GrammarStats s = g.stats();
  CHECK(s.object_types == 8);
  // sos.start, sos.end, Module.body, Assign.targets, Assign.value, Name.id, Num.n
  CHECK(s.attributes == 7);
  CHECK(s.child_edges == 7);
  const auto& assign = g.attributes_of("Assign");
  REQUIRE(assign.size() == 2);
  CHECK(assign[0].name == "targets");
  CHECK(assign[0].kind == SlotKind::kList);
  CHECK(assign[1].position == 2);
  CHECK(assign[1].children == std::set<std::string>{"Num"});
  CHECK(g.accepts(corpus[0]));
}

TEST_CASE("grammar serialization round trip is exact") {
  std::vector<TypedTree> corpus = fixtures::call_corpus();
  GrammarGraph g = GrammarGraph::induce(corpus);
  const std::string doc = g.save();
  GrammarGraph back = GrammarGraph::load(doc);
  CHECK(back == g);
  CHECK(back.save() == doc);
}

TEST_CASE("unseen combinations are violations") {
  std::vector<TypedTree> corpus = fixtures::call_corpus();
  GrammarGraph g = GrammarGraph::induce(corpus);
  using namespace fixtures;
  // A Call in the func slot was never observed.
  TypedTree odd = TypedTree::wrap(
      node("Module", {list("body", {call(call(name("f"), {}), {})})}));
  auto v = g.first_violation(odd);
  REQUIRE(v.has_value());
  CHECK(v->owner == "Call");
  CHECK(v->attribute == "func");
  CHECK(v->child == "Call");
  CHECK_FALSE(g.accepts(odd));
}

TEST_CASE("induction conflicts and errors") {
  using namespace fixtures;
  CHECK_THROWS_AS(GrammarGraph::induce(std::vector<TypedTree>{}), Error);
  // Same owner with different attribute orders.
  std::vector<TypedTree> order = {
      TypedTree::wrap(node("P", {single("a", name("x")), single("b", name("y"))})),
      TypedTree::wrap(node("P", {single("b", name("x")), single("a", name("y"))})),
  };
  CHECK_THROWS_AS(GrammarGraph::induce(order), Error);
  // Same attribute as singleton and list.
  std::vector<TypedTree> kinds = {
      TypedTree::wrap(node("P", {single("a", name("x"))})),
      TypedTree::wrap(node("P", {list("a", {name("x")})})),
  };
  CHECK_THROWS_AS(GrammarGraph::induce(kinds), Error);
  CHECK_THROWS_AS(GrammarGraph::load("{}"), Error);
  CHECK_THROWS_AS(GrammarGraph::load("not json"), Error);
}
