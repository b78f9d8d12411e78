#pragma once

#include <vector>

#include "grammar.h"
#include "typed_tree.h"

namespace treeseq {

// Rebuilds the tree from its token sequence, using the grammar for slot
// layouts and child legality. Throws Error on illegal tokens, truncated
// input, or trailing tokens after eos.
TypedTree delinearize(const std::vector<AstToken>& tokens,
                      const GrammarGraph& grammar);

}  // namespace treeseq
