#include "gbandit/treedecomp.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace gbandit {
namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

bool is_subset(const std::vector<int> &small, const std::vector<int> &big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kVertexCover: return "vertex-cover";
    case Violation::Kind::kEdgeCover: return "edge-cover";
    case Violation::Kind::kRunningIntersection: return "running-intersection";
    case Violation::Kind::kNotATree: return "not-a-tree";
    case Violation::Kind::kBadBag: return "bad-bag";
    case Violation::Kind::kWidthMismatch: return "width-mismatch";
  }
  return "unknown";
}

std::vector<int> min_fill_order(const Subgraph &graph) {
  std::map<int, std::set<int>> adj;
  for (int v : graph.vertices) adj[v];
  for (const auto &[a, b] : graph.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  std::vector<int> order;
  order.reserve(adj.size());
  while (!adj.empty()) {
    int best = -1;
    std::size_t best_fill = 0;
    for (const auto &[v, nbrs] : adj) {
      std::size_t fill = 0;
      for (auto i = nbrs.begin(); i != nbrs.end(); ++i)
        for (auto j = std::next(i); j != nbrs.end(); ++j)
          if (!adj.at(*i).count(*j)) ++fill;
      // map iterates in ascending id, so strict < keeps the lowest id on ties
      if (best < 0 || fill < best_fill) {
        best = v;
        best_fill = fill;
      }
    }
    const std::set<int> nbrs = adj.at(best);
    for (auto i = nbrs.begin(); i != nbrs.end(); ++i) {
      adj.at(*i).erase(best);
      for (auto j = std::next(i); j != nbrs.end(); ++j) {
        adj.at(*i).insert(*j);
        adj.at(*j).insert(*i);
      }
    }
    adj.erase(best);
    order.push_back(best);
  }
  return order;
}

TreeDecomposition decompose(const Subgraph &graph) {
  TreeDecomposition td;
  if (graph.vertices.empty()) return td;

  const std::vector<int> order = min_fill_order(graph);
  std::map<int, int> step_of;
  for (std::size_t i = 0; i < order.size(); ++i) step_of[order[i]] = static_cast<int>(i);

  // Replay the elimination to collect bags.
  std::map<int, std::set<int>> adj;
  for (int v : graph.vertices) adj[v];
  for (const auto &[a, b] : graph.edges) {
    adj[a].insert(b);
    adj[b].insert(a);
  }
  const std::size_t n = order.size();
  std::vector<std::vector<int>> bags(n);
  std::vector<int> parent(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = order[i];
    const std::set<int> nbrs = adj.at(v);
    bags[i].assign(nbrs.begin(), nbrs.end());
    bags[i].push_back(v);
    std::sort(bags[i].begin(), bags[i].end());
    int first = -1;
    for (int u : nbrs) {
      const int s = step_of.at(u);
      if (first < 0 || s < first) first = s;
    }
    parent[i] = first;
    for (auto a = nbrs.begin(); a != nbrs.end(); ++a) {
      adj.at(*a).erase(v);
      for (auto b = std::next(a); b != nbrs.end(); ++b) {
        adj.at(*a).insert(*b);
        adj.at(*b).insert(*a);
      }
    }
    adj.erase(v);
  }

  // Bag adjacency, then absorb bags contained in a neighbour.
  std::vector<std::set<int>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    if (parent[i] >= 0) {
      nb[i].insert(parent[i]);
      nb[static_cast<std::size_t>(parent[i])].insert(static_cast<int>(i));
    }
  std::vector<bool> alive(n, true);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n && !changed; ++i) {
      if (!alive[i]) continue;
      for (int j : nb[i]) {
        if (!is_subset(bags[i], bags[static_cast<std::size_t>(j)])) continue;
        for (int k : nb[i]) {
          nb[static_cast<std::size_t>(k)].erase(static_cast<int>(i));
          if (k != j) {
            nb[static_cast<std::size_t>(k)].insert(j);
            nb[static_cast<std::size_t>(j)].insert(k);
          }
        }
        nb[i].clear();
        alive[i] = false;
        changed = true;
        break;
      }
    }
  }

  std::vector<int> index(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (alive[i]) {
      index[i] = static_cast<int>(td.bags.size());
      td.bags.push_back(bags[i]);
    }
  DisjointSets components(td.bags.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    for (int j : nb[i])
      if (index[i] < index[static_cast<std::size_t>(j)]) {
        td.tree_edges.emplace_back(index[i], index[static_cast<std::size_t>(j)]);
        components.unite(index[i], index[static_cast<std::size_t>(j)]);
      }
  }
  // Chain remaining components onto bag 0; the joined bags share no variables.
  for (int b = 1; b < static_cast<int>(td.bags.size()); ++b)
    if (components.unite(0, b)) td.tree_edges.emplace_back(0, b);
  std::sort(td.tree_edges.begin(), td.tree_edges.end());

  td.root = 0;
  for (const auto &bag : td.bags) td.width = std::max(td.width, static_cast<int>(bag.size()));
  return td;
}

std::vector<Violation> validate(const TreeDecomposition &td, const Subgraph &graph) {
  std::vector<Violation> out;
  const std::set<int> vertices(graph.vertices.begin(), graph.vertices.end());
  const int nbags = static_cast<int>(td.bags.size());

  int max_bag = 0;
  for (int b = 0; b < nbags; ++b) {
    const auto &bag = td.bags[static_cast<std::size_t>(b)];
    max_bag = std::max(max_bag, static_cast<int>(bag.size()));
    if (bag.empty()) out.push_back({Violation::Kind::kBadBag, "bag " + std::to_string(b) + " is empty"});
    if (!std::is_sorted(bag.begin(), bag.end()) || std::adjacent_find(bag.begin(), bag.end()) != bag.end())
      out.push_back({Violation::Kind::kBadBag, "bag " + std::to_string(b) + " is not sorted and unique"});
    for (int v : bag)
      if (!vertices.count(v))
        out.push_back({Violation::Kind::kBadBag,
                       "bag " + std::to_string(b) + " holds non-graph vertex " + std::to_string(v)});
  }
  if (max_bag != td.width)
    out.push_back({Violation::Kind::kWidthMismatch,
                   "width " + std::to_string(td.width) + " but max bag size " + std::to_string(max_bag)});

  auto contains = [&](int b, int v) {
    const auto &bag = td.bags[static_cast<std::size_t>(b)];
    return std::find(bag.begin(), bag.end(), v) != bag.end();
  };

  for (int v : graph.vertices) {
    bool covered = false;
    for (int b = 0; b < nbags && !covered; ++b) covered = contains(b, v);
    if (!covered) out.push_back({Violation::Kind::kVertexCover, "vertex " + std::to_string(v) + " in no bag"});
  }
  for (const auto &[a, c] : graph.edges) {
    bool covered = false;
    for (int b = 0; b < nbags && !covered; ++b) covered = contains(b, a) && contains(b, c);
    if (!covered)
      out.push_back(
          {Violation::Kind::kEdgeCover, "edge " + std::to_string(a) + "-" + std::to_string(c) + " in no bag"});
  }

  bool edges_ok = true;
  for (const auto &[a, b] : td.tree_edges)
    if (a < 0 || b < 0 || a >= nbags || b >= nbags || a == b) {
      edges_ok = false;
      out.push_back({Violation::Kind::kNotATree,
                     "tree edge " + std::to_string(a) + "-" + std::to_string(b) + " is invalid"});
    }
  if (nbags > 0 && (td.root < 0 || td.root >= nbags))
    out.push_back({Violation::Kind::kNotATree, "root " + std::to_string(td.root) + " out of range"});
  if (!edges_ok) return out;

  DisjointSets ds(static_cast<std::size_t>(nbags));
  for (const auto &[a, b] : td.tree_edges)
    if (!ds.unite(a, b))
      out.push_back({Violation::Kind::kNotATree, "tree edge " + std::to_string(a) + "-" + std::to_string(b) +
                                                     " closes a cycle"});
  for (int b = 1; b < nbags; ++b)
    if (ds.find(b) != ds.find(0)) {
      out.push_back({Violation::Kind::kNotATree, "bag " + std::to_string(b) + " is disconnected from bag 0"});
      break;
    }

  for (int v : vertices) {
    DisjointSets local(static_cast<std::size_t>(nbags));
    for (const auto &[a, b] : td.tree_edges)
      if (contains(a, v) && contains(b, v)) local.unite(a, b);
    int rep = -1;
    for (int b = 0; b < nbags; ++b) {
      if (!contains(b, v)) continue;
      if (rep < 0) {
        rep = local.find(b);
      } else if (local.find(b) != rep) {
        out.push_back({Violation::Kind::kRunningIntersection,
                       "bags holding vertex " + std::to_string(v) + " are not connected"});
        break;
      }
    }
  }
  return out;
}

RootedTree root_tree(const TreeDecomposition &td) {
  const std::size_t n = td.bags.size();
  RootedTree rt;
  rt.parent.assign(n, -1);
  rt.children.assign(n, {});
  if (n == 0) return rt;
  std::vector<std::vector<int>> adj(n);
  for (const auto &[a, b] : td.tree_edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto &a : adj) std::sort(a.begin(), a.end());

  std::vector<bool> seen(n, false);
  std::vector<int> preorder;
  std::vector<int> stack{td.root};
  seen[static_cast<std::size_t>(td.root)] = true;
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    preorder.push_back(b);
    for (auto it = adj[static_cast<std::size_t>(b)].rbegin(); it != adj[static_cast<std::size_t>(b)].rend(); ++it) {
      if (seen[static_cast<std::size_t>(*it)]) continue;
      seen[static_cast<std::size_t>(*it)] = true;
      rt.parent[static_cast<std::size_t>(*it)] = b;
      stack.push_back(*it);
    }
  }
  for (int b : preorder)
    if (rt.parent[static_cast<std::size_t>(b)] >= 0) rt.children[static_cast<std::size_t>(rt.parent[static_cast<std::size_t>(b)])].push_back(b);
  for (auto &c : rt.children) std::sort(c.begin(), c.end());
  rt.postorder.assign(preorder.rbegin(), preorder.rend());
  return rt;
}

}  // namespace gbandit
