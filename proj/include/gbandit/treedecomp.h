#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gbandit/model.h"

namespace gbandit {

/// Bags over action variables joined into a single rooted tree.
/// `width` follows the max-bag-size convention (one more than the usual
/// treewidth).
struct TreeDecomposition {
  std::vector<std::vector<int>> bags;
  std::vector<std::pair<int, int>> tree_edges;
  int root = 0;
  int width = 0;

  std::size_t num_edges() const { return tree_edges.size(); }
};

struct Violation {
  enum class Kind { kVertexCover, kEdgeCover, kRunningIntersection, kNotATree, kBadBag, kWidthMismatch };
  Kind kind;
  std::string witness;
};

std::string to_string(Violation::Kind kind);

/// Min-fill elimination order, ties broken by lowest vertex id.
std::vector<int> min_fill_order(const Subgraph &graph);

/// Tree decomposition from the min-fill order. Non-maximal bags are
/// absorbed into a neighbour; components are chained to bag 0.
TreeDecomposition decompose(const Subgraph &graph);

/// Empty iff every vertex and edge is covered, bags containing each vertex
/// are connected, tree_edges form a spanning tree over the bags, and
/// `width` equals the max bag size.
std::vector<Violation> validate(const TreeDecomposition &td, const Subgraph &graph);

/// Parent of each bag when rooted at td.root (root maps to -1), plus a
/// post-order (children before parents).
struct RootedTree {
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<int> postorder;
};

RootedTree root_tree(const TreeDecomposition &td);

}  // namespace gbandit
