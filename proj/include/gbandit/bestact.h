#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "gbandit/model.h"
#include "gbandit/treedecomp.h"

namespace gbandit {

/// Either an approximate payoff or an abstention.
struct OracleReply {
  std::optional<double> value;

  static OracleReply abstain() { return {}; }
  static OracleReply of(double v) { return {v}; }
  bool abstained() const { return !value.has_value(); }
};

/// Approximate global payoff F^eps for a complete assignment.
using PayoffOracle = std::function<OracleReply(const JointAssignment &)>;

/// Per-round memo in front of an oracle. Repeated queries get the first
/// reply and do not reach the oracle again.
class OracleSession {
 public:
  explicit OracleSession(const PayoffOracle &oracle) : oracle_(oracle) {}

  OracleReply query(const JointAssignment &complete);

  /// Distinct queries forwarded to the oracle.
  std::size_t calls() const { return calls_; }
  /// All queries, memo hits included.
  std::size_t lookups() const { return lookups_; }

 private:
  struct Hash {
    std::size_t operator()(const std::vector<int> &v) const noexcept;
  };

  const PayoffOracle &oracle_;
  std::unordered_map<std::vector<int>, OracleReply, Hash> memo_;
  std::size_t calls_ = 0;
  std::size_t lookups_ = 0;
};

struct DpRow {
  /// Oracle value of the chosen candidate; unset when the bag had nothing
  /// to choose.
  std::optional<double> value;
  /// Values of DpTable::subtree_vars.
  std::vector<int> extension;
};

/// One bag's table, indexed by the lexicographic rank of the separator
/// assignment.
struct DpTable {
  int bag = -1;
  std::vector<int> separator;
  std::vector<int> free_vars;
  std::vector<int> subtree_vars;
  std::vector<DpRow> rows;
};

struct BestActResult {
  /// Complete assignment actually chosen: BestAct's answer, or the
  /// abstained query when interrupted.
  JointAssignment played;
  bool interrupted = false;
  std::size_t oracle_calls = 0;
  std::size_t oracle_lookups = 0;
};

/// Dynamic program over a rooted tree decomposition of the action
/// subgraph that only ever sees global payoffs. Every candidate for a bag
/// is scored by one oracle call on a complete assignment: context, the
/// separator values, the candidate, each child's stored best extension,
/// and defaults on every other action variable.
class BestAct {
 public:
  BestAct(const DecomposableModel &model, TreeDecomposition td, JointAssignment defaults);

  const TreeDecomposition &decomposition() const { return td_; }
  const RootedTree &rooted() const { return rooted_; }

  BestActResult run(const JointAssignment &context, const PayoffOracle &oracle) const;

  /// Computes all rows of `bag`. `tables` must already hold the bag's
  /// children. Returns std::nullopt and sets `abstained` on the first
  /// abstention.
  std::optional<DpTable> process_bag(int bag, const JointAssignment &context, const std::vector<DpTable> &tables,
                                     OracleSession &session, JointAssignment &abstained) const;

  /// m^{2w}(|edges|+1), the per-round call budget.
  double call_bound() const;

 private:
  struct BagPlan {
    std::vector<int> separator;
    std::vector<int> free_vars;
    std::vector<int> subtree_vars;
    std::vector<int> children;
  };

  JointAssignment base_assignment(const JointAssignment &context) const;
  std::size_t separator_rank(const BagPlan &plan, const JointAssignment &x) const;

  const DecomposableModel &model_;
  TreeDecomposition td_;
  JointAssignment defaults_;
  RootedTree rooted_;
  std::vector<BagPlan> plans_;
};

}  // namespace gbandit
