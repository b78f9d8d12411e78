#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "typed_tree.h"

namespace treeseq {

struct ToyOptions {
  std::size_t count = 50;
  std::uint64_t seed = 1;
  std::size_t max_depth = 8;       // object-node levels below sos, >= 4
  std::size_t max_statements = 2;  // per Module body
};

// Seeded assignment/arithmetic programs over twelve node types (Module,
// Assign, Expr, Call, BinOp, Name, Num, Str, Add, Sub, Mult, Div), each
// paired with a deterministic English description.
std::vector<Sample> generate_toy_corpus(const ToyOptions& options);

}  // namespace treeseq
