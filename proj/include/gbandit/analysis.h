#pragma once

#include <cstdint>
#include <vector>

#include "gbandit/env.h"
#include "gbandit/model.h"
#include "gbandit/treedecomp.h"

namespace gbandit {

/// Columns v(x) of the coefficient matrix, optionally without the joint
/// contexts in `excluded`.
struct CoefficientMatrixView {
  enum class Strategy { kExhaustive, kSampled };

  const DecomposableModel *model = nullptr;
  std::vector<JointAssignment> excluded;
  Strategy strategy = Strategy::kExhaustive;
  std::size_t column_cap = 1'000'000;
  std::size_t samples = 10'000;
  std::uint64_t seed = 0;
  /// Rational elimination instead of floating point with pivot tolerance.
  bool exact = false;
};

struct RankResult {
  std::size_t rank = 0;
  /// False for sampled views: the value is then a lower bound.
  bool exact = true;
  std::size_t columns = 0;
};

/// Number of columns the view would enumerate.
std::size_t column_count(const CoefficientMatrixView &view);

RankResult rank(const CoefficientMatrixView &view);

struct MatchingBound {
  std::size_t bound = 0;
  std::size_t matching_size = 0;
  std::size_t matching_columns = 0;
  std::size_t independent_set_size = 0;
  std::size_t independent_columns = 0;
};

/// Certified lower bound on rank(M) for models whose scopes are all pairs,
/// from two explicit families of independent columns: non-default values
/// of each pair in a greedy matching, and non-default values of each
/// vertex in an independent set plus the all-default column.
MatchingBound matching_lower_bound(const DecomposableModel &model);

struct TradeoffRow {
  std::vector<JointAssignment> excluded;
  double excluded_mass = 0.0;
  std::size_t restricted_rank = 0;
  /// T * P(excluded) + rank * w * |bags| * T^{2/3} * ln(T * m * max(1, |tree edges|)).
  double bound = 0.0;
};

std::vector<TradeoffRow> restricted_rank_tradeoff(const DecomposableModel &model, const ContextSource &source,
                                                  const std::vector<std::vector<JointAssignment>> &candidates,
                                                  const TreeDecomposition &td, double horizon);

struct ExponentFit {
  double slope = 0.0;
  bool zero_regret = false;
  std::size_t points = 0;
};

/// Least-squares slope of log R(t) against log t over t in [T/10, T],
/// sampled at up to 100 log-spaced rounds (t is 1-based).
ExponentFit fit_regret_exponent(const std::vector<double> &curve);

/// Rounds 10^{k/10} for k = 0, 1, ... that do not exceed T, plus T itself.
std::vector<std::size_t> checkpoints(std::size_t horizon);

struct RegretSummary {
  std::vector<std::vector<double>> curves;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::vector<std::size_t> interrupted_rounds;
  ExponentFit fit;
};

RegretSummary summarize(std::vector<std::vector<double>> curves, std::vector<std::size_t> interrupted_rounds);

}  // namespace gbandit
