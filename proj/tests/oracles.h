#pragma once

// Reference computations used to check the library. Everything here is
// written from the definitions, without calling the code under test.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gbandit/env.h"
#include "gbandit/model.h"

namespace oracle {

using gbandit::DecomposableModel;
using gbandit::JointAssignment;

/// Calls `fn` for every assignment of `vars` (others taken from `base`),
/// first variable most significant.
inline void for_each_assignment(const DecomposableModel &model, const std::vector<int> &vars, JointAssignment base,
                                const std::function<void(const JointAssignment &)> &fn) {
  for (int v : vars) base.set(v, 0);
  for (;;) {
    fn(base);
    int i = static_cast<int>(vars.size()) - 1;
    while (i >= 0) {
      const int v = vars[static_cast<std::size_t>(i)];
      if (base[v] + 1 < model.domain_size(v)) {
        base.set(v, base[v] + 1);
        break;
      }
      base.set(v, 0);
      --i;
    }
    if (i < 0) return;
  }
}

inline std::vector<int> all_vars(const DecomposableModel &model) {
  std::vector<int> v(model.num_variables());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
  return v;
}

inline std::vector<JointAssignment> complete_assignments(const DecomposableModel &model) {
  std::vector<JointAssignment> out;
  for_each_assignment(model, all_vars(model), JointAssignment(model.num_variables()),
                      [&](const JointAssignment &x) { out.push_back(x); });
  return out;
}

/// Row index of x inside scope s's table: members in ascending id order,
/// lowest id most significant.
inline std::size_t table_row(const DecomposableModel &model, std::size_t s, const JointAssignment &x) {
  std::size_t row = 0;
  for (int v : model.scopes()[s].members()) row = row * static_cast<std::size_t>(model.domain_size(v)) + x[v];
  return row;
}

inline double evaluate(const DecomposableModel &model, const std::vector<std::vector<double>> &tables,
                       const JointAssignment &x) {
  double f = 0.0;
  for (std::size_t s = 0; s < model.num_scopes(); ++s) f += tables[s][table_row(model, s, x)];
  return f;
}

/// Dense v(x) from the definition.
inline std::vector<int> coefficient_column(const DecomposableModel &model, const JointAssignment &x) {
  std::vector<int> v;
  for (std::size_t s = 0; s < model.num_scopes(); ++s) {
    std::size_t size = 1;
    for (int m : model.scopes()[s].members()) size *= static_cast<std::size_t>(model.domain_size(m));
    std::vector<int> block(size, 0);
    block[table_row(model, s, x)] = 1;
    v.insert(v.end(), block.begin(), block.end());
  }
  return v;
}

struct Best {
  JointAssignment action;
  double value = -std::numeric_limits<double>::infinity();
};

/// Maximum of F over all joint actions for a fixed context.
inline Best brute_best(const DecomposableModel &model, const std::vector<std::vector<double>> &tables,
                       const JointAssignment &context) {
  Best best;
  for_each_assignment(model, model.action_variables(), context, [&](const JointAssignment &x) {
    const double f = evaluate(model, tables, x);
    if (f > best.value) best = {x, f};
  });
  return best;
}

/// Rank of an integer matrix (rows are vectors) by fraction-free Bareiss
/// elimination over big integers.
inline std::size_t bareiss_rank(std::vector<std::vector<int>> rows_in) {
  using boost::multiprecision::cpp_int;
  if (rows_in.empty()) return 0;
  const std::size_t cols = rows_in.front().size();
  std::vector<std::vector<cpp_int>> a;
  for (const auto &r : rows_in) a.emplace_back(r.begin(), r.end());
  std::size_t rank = 0;
  cpp_int prev = 1;
  for (std::size_t c = 0; c < cols && rank < a.size(); ++c) {
    std::size_t p = rank;
    while (p < a.size() && a[p][c] == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[p], a[rank]);
    for (std::size_t i = rank + 1; i < a.size(); ++i) {
      for (std::size_t j = c + 1; j < cols; ++j) a[i][j] = (a[rank][c] * a[i][j] - a[i][c] * a[rank][j]) / prev;
      a[i][c] = 0;
    }
    prev = a[rank][c];
    ++rank;
  }
  return rank;
}

/// rank(M) over all complete assignments, optionally skipping contexts.
inline std::size_t coefficient_rank(const DecomposableModel &model,
                                    const std::function<bool(const JointAssignment &)> &keep = nullptr) {
  std::set<std::vector<int>> cols;
  for (const auto &x : complete_assignments(model))
    if (!keep || keep(x)) cols.insert(coefficient_column(model, x));
  return bareiss_rank({cols.begin(), cols.end()});
}

/// Edges {i, j} with i < j that co-occur in some scope.
inline std::set<std::pair<int, int>> interaction_edges(const DecomposableModel &model) {
  std::set<std::pair<int, int>> e;
  for (const auto &s : model.scopes())
    for (int a : s.members())
      for (int b : s.members())
        if (a < b) e.insert({a, b});
  return e;
}

}  // namespace oracle
