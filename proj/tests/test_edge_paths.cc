#include "core/edge_paths.h"
#include "core/error.h"
#include "doctest.h"
#include "fixtures.h"

using namespace treeseq;

TEST_CASE("a=10 edge paths with L=10") {
  const std::vector<EdgePath> expected = {
      {0, 0, 0, 0, 0, 0, 0, 0, 0, 0},  // sos
      {1, 1, 0, 0, 0, 0, 0, 0, 0, 0},  // Module
      {1, 1, 1, 1, 0, 0, 0, 0, 0, 0},  // Assign
      {1, 1, 1, 1, 1, 1, 0, 0, 0, 0},  // Name
      {1, 1, 1, 1, 1, 1, 1, 1, 0, 0},  // 'a'
      {2, 1, 1, 1, 1, 1, 0, 0, 0, 0},  // le (targets)
      {1, 2, 1, 1, 1, 1, 0, 0, 0, 0},  // Num
      {1, 1, 1, 2, 1, 1, 1, 1, 0, 0},  // 10
      {2, 1, 1, 1, 0, 0, 0, 0, 0, 0},  // le (body)
      {1, 2, 0, 0, 0, 0, 0, 0, 0, 0},  // eos
  };
  CHECK(edge_paths(fixtures::fig1_tree(), 10) == expected);
}

TEST_CASE("path depth and the length budget") {
  CHECK(path_depth({1, 2, 0, 0}) == 2);
  CHECK(path_depth({0, 0}) == 0);
  TypedTree t = fixtures::fig1_tree();
  CHECK(edge_paths(t, 8).size() == 10);
  CHECK_THROWS_AS(edge_paths(t, 7), Error);
}

TEST_CASE("sibling indices count up within a list") {
  using namespace fixtures;
  TypedTree t = TypedTree::wrap(
      node("Module", {list("body", {call(name("f"), {name("a"), name("b")})})}));
  std::vector<AstToken> tokens = linearize(t);
  std::vector<EdgePath> paths = edge_paths(t, 12);
  // Tokens: sos Module Call Name f Name a Name b le le eos
  REQUIRE(tokens.size() == 12);
  CHECK(token_text(tokens[7]) == "Name");
  CHECK(paths[5][0] == 1);
  CHECK(paths[5][1] == 2);
  CHECK(paths[7][0] == 2);
  CHECK(paths[7][1] == 2);
  CHECK(paths[9][0] == 3);  // list end after two args
}
