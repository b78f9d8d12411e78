#include "core/error.h"
#include "core/toy_corpus.h"
#include "core/vocab.h"
#include "doctest.h"
#include "fixtures.h"

using namespace treeseq;

TEST_CASE("first merge of the aaab/aaac corpus") {
  std::vector<std::string> corpus = {"aaab", "aaac"};
  SubwordVocab v = SubwordVocab::train(corpus, 4);
  CHECK(v.alphabet_size() == 3);
  REQUIRE(v.merges().size() == 1);
  CHECK(v.merges()[0] == std::pair<std::string, std::string>{"a", "a"});
  // specials 0..2, alphabet a=3 b=4 c=5, merged aa=6
  CHECK(v.encode("aaab") == std::vector<int>{6, 3, 4});
  CHECK(v.decode(v.encode("aaab")) == "aaab");
}

TEST_CASE("vocabulary size limits") {
  std::vector<std::string> corpus = {"aaab", "aaac"};
  SubwordVocab chars = SubwordVocab::train(corpus, 3);
  CHECK(chars.merges().empty());
  CHECK(chars.size() == 6);
  CHECK_THROWS_AS(SubwordVocab::train(corpus, 2), Error);
  CHECK_THROWS_AS(SubwordVocab::train(std::vector<std::string>{}, 10), Error);
  CHECK(chars.encode("").empty());
  CHECK(chars.encode("az") ==
        std::vector<int>{3, SubwordVocab::kUnk});
}

TEST_CASE("training is deterministic and serialization exact") {
  std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{200, 3, 8, 2});
  std::vector<std::string> texts = subword_training_texts(corpus);
  SubwordVocab a = SubwordVocab::train(texts, 300);
  SubwordVocab b = SubwordVocab::train(texts, 300);
  CHECK(a.merges() == b.merges());
  SubwordVocab c = SubwordVocab::load(a.save());
  CHECK(c == a);
  for (const std::string& t : texts) CHECK(c.encode(t) == a.encode(t));
}

TEST_CASE("encode/decode round trip over corpus lines") {
  std::vector<Sample> corpus = generate_toy_corpus(ToyOptions{1000, 11, 8, 2});
  std::vector<std::string> texts = subword_training_texts(corpus);
  SubwordVocab v = SubwordVocab::train(texts, 500);
  std::size_t checked = 0;
  for (const Sample& s : corpus) {
    CHECK(v.decode(v.encode(s.nl)) == s.nl);
    ++checked;
  }
  CHECK(checked == 1000);
  // Multi-byte code points survive too.
  SubwordVocab u = SubwordVocab::train(std::vector<std::string>{"héllo wörld"}, 20);
  CHECK(u.decode(u.encode("wörld héllo")) == "wörld héllo");
}

TEST_CASE("literal masking") {
  std::vector<AstToken> tokens = parse_token_texts({"sos", "Name", "'a'", "10", "eos"});
  std::vector<AstToken> masked = mask_literals(tokens);
  CHECK(token_texts(masked) ==
        std::vector<std::string>{"sos", "Name", "<STR>", "10", "eos"});
  CHECK(mask_literals(masked) == masked);
  std::vector<AstToken> plain = parse_token_texts({"sos", "Module", "le", "eos"});
  CHECK(mask_literals(plain) == plain);
}

TEST_CASE("target codec keeps id spaces apart") {
  std::vector<Sample> corpus = {Sample{"set a to 10", fixtures::fig1_tree()}};
  AstVocab ast = AstVocab::build(corpus);
  SubwordVocab sub = SubwordVocab::train(subword_training_texts(corpus), 30);
  TargetCodec codec(ast, sub);
  std::vector<AstToken> tokens = linearize(corpus[0].tree);
  std::vector<EdgePath> paths(tokens.size());
  for (std::size_t i = 0; i < paths.size(); ++i) paths[i] = {static_cast<unsigned>(i)};
  TargetCodec::Encoded enc = codec.encode(tokens, &paths);
  CHECK(codec.decode(enc.ids) == tokens);
  REQUIRE(enc.ids.size() == enc.paths.size());
  // 'a' is one subword followed by literal-end; both carry the leaf path.
  std::size_t run = 0;
  for (std::size_t i = 0; i < enc.ids.size(); ++i) {
    if (codec.is_subword(enc.ids[i])) {
      CHECK(enc.paths[i] == EdgePath{4});
      ++run;
    } else {
      CHECK(enc.ids[i] < static_cast<int>(ast.size()));
    }
  }
  CHECK(run == 2);
  CHECK(enc.ids[5] == codec.literal_end());
  CHECK(AstVocab::from_json(ast.to_json()) == ast);
  // Unknown non-string literals fall back to their category sentinel.
  CHECK(ast.id_of(AstToken::literal(LiteralCategory::kNumber, "99")) ==
        ast.sentinel(LiteralCategory::kNumber));
}
