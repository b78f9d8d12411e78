#include <cmath>

#include "core/error.h"
#include "core/tree_encoding.h"
#include "doctest.h"

using namespace treeseq;

TEST_CASE("index blocks match direct sinusoid values") {
  // d_idx = 4: frequencies 1 and 10000^(-1/2) = 0.01.
  const std::vector<std::vector<double>> expected = {
      {0.0, 1.0, 0.0, 1.0},
      {0.8414709848078965, 0.5403023058681398, 0.009999833334166664,
       0.9999500004166653},
      {0.1411200080598672, -0.9899924966004454, 0.02999550020249566,
       0.9995500337489875},
      {-0.9589242746631385, 0.28366218546322625, 0.04997916927067833,
       0.9987502603949663},
  };
  const int idx[] = {0, 1, 3, 5};
  for (int k = 0; k < 4; ++k) {
    std::vector<double> e = encode_index(idx[k], 4);
    REQUIRE(e.size() == 4);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(e[j] - expected[k][j]) < 1e-15);
  }
}

TEST_CASE("path encoding concatenates index blocks") {
  EncodingConfig cfg{4, 3};
  std::vector<double> e = encode_path({1, 3, 0}, cfg);
  REQUIRE(e.size() == 12);
  std::vector<double> b1 = encode_index(1, 4), b3 = encode_index(3, 4),
                      b0 = encode_index(0, 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(e[j] == b1[j]);
    CHECK(e[4 + j] == b3[j]);
    CHECK(e[8 + j] == b0[j]);
  }
  CHECK_THROWS_AS(encode_path({1, 2}, cfg), Error);
  CHECK_THROWS_AS((EncodingConfig{3, 4}.validate()), Error);
}

TEST_CASE("rotation maps idx to idx+k") {
  std::vector<double> r = treeseq::apply(sibling_rotation(2, 4), encode_index(3, 4));
  std::vector<double> t = encode_index(5, 4);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(r[j] - t[j]) < 1e-9);
  std::vector<double> back = treeseq::apply(sibling_rotation(-1, 4), encode_index(1, 4));
  std::vector<double> zero = {0.0, 1.0, 0.0, 1.0};
  for (int j = 0; j < 4; ++j) CHECK(std::abs(back[j] - zero[j]) < 1e-9);
}

TEST_CASE("child encoding is the parent's shifted right by one block") {
  EncodingConfig cfg{4, 5};
  std::vector<double> child = encode_path({2, 1, 3, 1, 0}, cfg);
  std::vector<double> parent = encode_path({1, 3, 1, 0, 0}, cfg);
  for (std::size_t j = 0; j + 4 < child.size(); ++j) {
    CHECK(child[4 + j] == parent[j]);
  }
}

TEST_CASE("sequential encoding uses the same sinusoid layout") {
  std::vector<double> s = sequential_encoding(3, 4);
  std::vector<double> e = encode_index(3, 4);
  CHECK(s == e);
  CHECK(sequential_encoding(0, 8)[1] == 1.0);
}
