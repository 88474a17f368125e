#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gbandit/bestact.h"
#include "gbandit/env.h"
#include "gbandit/model.h"
#include "gbandit/payest.h"
#include "gbandit/treedecomp.h"

namespace gbandit {

struct RoundRecord {
  std::int64_t t = 0;
  JointAssignment context;
  /// Complete assignment that was played (context included).
  JointAssignment played;
  std::optional<double> observed_payoff;
  bool interrupted = false;
  std::size_t oracle_calls = 0;
  double instantaneous_regret = 0.0;
};

struct RunConfig {
  std::int64_t horizon = 0;
  /// Empty means T^{-1/3}.
  std::optional<double> epsilon;
  std::optional<double> delta;
  EstimatorMode estimator = EstimatorMode::kKwik;
  std::uint64_t seed = 0;
  /// Empty means T * m^{2w} * (|edges| + 1).
  std::optional<double> query_cap;
  double confidence_scale = 4.5;

  double resolved_epsilon() const;
  double resolved_delta() const;
};

/// Kwik parameters for a run, with auto-tuned epsilon/delta and the default
/// query cap filled in.
KwikParams resolve_kwik_params(const RunConfig &config, const BestAct &planner);

/// The online loop: each round plans with BestAct against the estimator;
/// on the first abstention the abstained query's action is played and its
/// payoff is fed back, otherwise BestAct's action is played.
class GraphicalBandit {
 public:
  GraphicalBandit(const DecomposableModel &model, TreeDecomposition td, std::unique_ptr<PayoffEstimator> estimator,
                  JointAssignment defaults);
  GraphicalBandit(const DecomposableModel &model, TreeDecomposition td, std::unique_ptr<PayoffEstimator> estimator)
      : GraphicalBandit(model, std::move(td), std::move(estimator), default_action(model)) {}

  /// One round against `env`; regret is scored with the environment's
  /// exact optimum.
  RoundRecord step(std::int64_t t, Environment &env);

  const PayoffEstimator &estimator() const { return *estimator_; }
  const BestAct &planner() const { return planner_; }
  /// Observations handed to the estimator so far.
  std::size_t observations() const { return observations_; }

 private:
  const DecomposableModel &model_;
  BestAct planner_;
  std::unique_ptr<PayoffEstimator> estimator_;
  std::size_t observations_ = 0;
};

/// Full run of `config.horizon` rounds.
std::vector<RoundRecord> run(const DecomposableModel &model, const TreeDecomposition &td, Environment &env,
                             const RunConfig &config);

std::vector<double> cumulative_regret(const std::vector<RoundRecord> &records);

}  // namespace gbandit
