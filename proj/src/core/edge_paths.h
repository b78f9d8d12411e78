#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "typed_tree.h"

namespace treeseq {

// Fixed-length edge path: entry l is the index of the l-th edge walking from
// the node up to the root (1-based); unused entries are zero.
using EdgePath = std::vector<std::uint32_t>;

std::size_t path_depth(const EdgePath& path);

// One path per token of linearize(tree). List-end tokens take the position
// one past the last child of their slot.
std::vector<EdgePath> edge_paths(const TypedTree& tree, std::size_t path_len);

}  // namespace treeseq
