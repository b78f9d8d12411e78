#include "core/automaton.h"
#include "core/delinearize.h"
#include "core/edge_paths.h"
#include "core/error.h"
#include "doctest.h"
#include "fixtures.h"

using namespace treeseq;

namespace {

std::vector<std::string> describe_all(const std::vector<TokenClass>& classes) {
  std::vector<std::string> out;
  for (const TokenClass& c : classes) out.push_back(describe(c));
  return out;
}

}  // namespace

TEST_CASE("legal sets while replaying a=10") {
  std::vector<TypedTree> corpus = {fixtures::fig1_tree()};
  GrammarGraph g = GrammarGraph::induce(corpus);
  DecoderState s = DecoderState::initial(g);
  CHECK(s.legal_tokens().size() == 1);
  CHECK(s.legal_tokens()[0].kind == TokenKind::kSos);
  const std::vector<AstToken> tokens = linearize(corpus[0]);
  const std::vector<EdgePath> paths = edge_paths(corpus[0], 10);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    CAPTURE(i);
    CHECK(s.next_edge_path(10) == paths[i]);
    bool listed = false;
    for (const TokenClass& c : s.legal_tokens()) listed |= c.matches(tokens[i]);
    CHECK(listed);
    s.step(tokens[i]);
  }
  CHECK(s.finished());
  CHECK(s.legal_tokens().empty());
}

TEST_CASE("list slots offer le, singleton slots do not") {
  std::vector<TypedTree> corpus = {fixtures::fig1_tree()};
  GrammarGraph g = GrammarGraph::induce(corpus);
  DecoderState s = DecoderState::initial(g)
                       .stepped(AstToken::sos())
                       .stepped(AstToken::node("Module"));
  CHECK(describe_all(s.legal_tokens()) ==
        describe_all({TokenClass{TokenKind::kListEnd, {}, {}},
                      TokenClass{TokenKind::kNodeType, "Assign", {}}}));
  DecoderState in_name = s.stepped(AstToken::node("Assign"))
                             .stepped(AstToken::node("Name"));
  auto legal = in_name.legal_tokens();
  REQUIRE(legal.size() == 1);
  CHECK(legal[0].kind == TokenKind::kLiteral);
  CHECK(legal[0].category == LiteralCategory::kString);
  // Any value of the right category is legal.
  CHECK(in_name.can_step(AstToken::literal(LiteralCategory::kString, "zzz")));
  CHECK_FALSE(in_name.can_step(AstToken::literal(LiteralCategory::kNumber, "1")));
  CHECK_FALSE(in_name.can_step(AstToken::list_end()));
  CHECK_THROWS_AS(in_name.step(AstToken::list_end()), Error);
}

TEST_CASE("states are values") {
  std::vector<TypedTree> corpus = fixtures::call_corpus();
  GrammarGraph g = GrammarGraph::induce(corpus);
  DecoderState a = DecoderState::initial(g).stepped(AstToken::sos());
  DecoderState b = a;
  b.step(AstToken::node("Module"));
  CHECK_FALSE(a == b);
  CHECK(a == DecoderState::initial(g).stepped(AstToken::sos()));
}

TEST_CASE("path budget is enforced") {
  std::vector<TypedTree> corpus = {fixtures::fig1_tree()};
  GrammarGraph g = GrammarGraph::induce(corpus);
  DecoderState s = DecoderState::initial(g);
  for (const char* t : {"sos", "Module", "Assign", "Name"}) {
    s.step(parse_token_text(t));
  }
  CHECK(s.next_edge_path(8).size() == 8);
  CHECK_THROWS_AS(s.next_edge_path(6), Error);
}

TEST_CASE("shape-only mode admits any known symbol") {
  std::vector<TypedTree> corpus = {fixtures::fig1_tree()};
  GrammarGraph g = GrammarGraph::induce(corpus);
  DecoderState s = DecoderState::initial(g, AutomatonMode::kShapeOnly)
                       .stepped(AstToken::sos());
  // Constrained mode would only allow Module here.
  CHECK(s.can_step(AstToken::node("Num")));
  CHECK(s.can_step(AstToken::literal(LiteralCategory::kIdentifier, "q")));
  CHECK_FALSE(s.can_step(AstToken::sos()));
  CHECK_FALSE(s.can_step(AstToken::list_end()));
}

TEST_CASE("delinearize inverts linearize and rejects bad input") {
  std::vector<TypedTree> corpus = fixtures::call_corpus();
  GrammarGraph g = GrammarGraph::induce(corpus);
  for (const TypedTree& t : corpus) CHECK(delinearize(linearize(t), g) == t);
  auto parse = [&](std::vector<std::string> texts) {
    return delinearize(parse_token_texts(texts), g);
  };
  CHECK_THROWS_AS(parse({"Module", "le", "eos"}), Error);
  CHECK_THROWS_AS(parse({"sos", "Module", "le"}), Error);
  CHECK_THROWS_AS(parse({"sos", "Module", "le", "eos", "eos"}), Error);
  CHECK_THROWS_AS(parse({"sos", "Module", "Name", "identifier:x", "le", "eos"}),
                  Error);
  CHECK_NOTHROW(parse({"sos", "Module", "le", "eos"}));
}
