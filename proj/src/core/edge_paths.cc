#include "edge_paths.h"

#include <algorithm>

#include "error.h"

namespace treeseq {

std::size_t path_depth(const EdgePath& path) {
  std::size_t n = 0;
  while (n < path.size() && path[n] != 0) ++n;
  return n;
}

namespace {

struct PathWalker {
  std::size_t path_len;
  std::vector<EdgePath>& out;

  // `up` holds the edges from this node to the root, nearest first.
  void emit(const std::vector<std::uint32_t>& up) {
    if (up.size() > path_len) {
      fail("tree depth " + std::to_string(up.size()) +
           " exceeds edge path length " + std::to_string(path_len));
    }
    EdgePath p(path_len, 0);
    std::copy(up.begin(), up.end(), p.begin());
    out.push_back(std::move(p));
  }

  void visit(const ObjectNode& node, const std::vector<std::uint32_t>& up) {
    emit(up);
    for (std::size_t a = 0; a < node.attrs.size(); ++a) {
      const AttributeSlot& slot = node.attrs[a];
      std::vector<std::uint32_t> child_up(up.size() + 2);
      std::copy(up.begin(), up.end(), child_up.begin() + 2);
      child_up[1] = static_cast<std::uint32_t>(a + 1);
      for (std::size_t c = 0; c < slot.children.size(); ++c) {
        child_up[0] = static_cast<std::uint32_t>(c + 1);
        visit(slot.children[c], child_up);
      }
      if (slot.kind == SlotKind::kList) {
        child_up[0] = static_cast<std::uint32_t>(slot.children.size() + 1);
        emit(child_up);
      }
    }
  }
};

}  // namespace

std::vector<EdgePath> edge_paths(const TypedTree& tree, std::size_t path_len) {
  std::vector<EdgePath> out;
  PathWalker walker{path_len, out};
  walker.visit(tree.root(), {});
  return out;
}

}  // namespace treeseq
