#include "gbandit/bandit.h"

#include <algorithm>
#include <cmath>

namespace gbandit {

double RunConfig::resolved_epsilon() const {
  if (epsilon) return *epsilon;
  return std::pow(static_cast<double>(std::max<std::int64_t>(horizon, 1)), -1.0 / 3.0);
}

double RunConfig::resolved_delta() const {
  if (delta) return *delta;
  return std::pow(static_cast<double>(std::max<std::int64_t>(horizon, 1)), -1.0 / 3.0);
}

KwikParams resolve_kwik_params(const RunConfig &config, const BestAct &planner) {
  KwikParams p;
  p.epsilon = config.resolved_epsilon();
  p.delta = config.resolved_delta();
  p.query_cap = config.query_cap ? *config.query_cap
                                 : std::max(1.0, static_cast<double>(config.horizon) * planner.call_bound());
  p.confidence_scale = config.confidence_scale;
  return p;
}

GraphicalBandit::GraphicalBandit(const DecomposableModel &model, TreeDecomposition td,
                                 std::unique_ptr<PayoffEstimator> estimator, JointAssignment defaults)
    : model_(model), planner_(model, std::move(td), std::move(defaults)), estimator_(std::move(estimator)) {
  if (!estimator_) throw ModelError("bandit needs an estimator");
  if (estimator_->dimension() != model_.dimension())
    throw ModelError("estimator dimension " + std::to_string(estimator_->dimension()) + " does not match model dimension " +
                     std::to_string(model_.dimension()));
  if (model_.action_variables().empty()) throw ModelError("bandit needs at least one action variable");
}

RoundRecord GraphicalBandit::step(std::int64_t t, Environment &env) {
  RoundRecord rec;
  rec.t = t;
  rec.context = env.next_context();

  PayoffOracle oracle = [this](const JointAssignment &x) {
    const Prediction p = estimator_->predict(coefficient_vector(model_, x));
    return p.abstained() ? OracleReply::abstain() : OracleReply::of(*p.value);
  };
  BestActResult result = planner_.run(rec.context, oracle);
  rec.played = std::move(result.played);
  rec.interrupted = result.interrupted;
  rec.oracle_calls = result.oracle_calls;
  if (rec.interrupted) {
    const double payoff = env.sample(rec.played);
    estimator_->observe(coefficient_vector(model_, rec.played), payoff);
    ++observations_;
    rec.observed_payoff = payoff;
  }
  const double best = env.optimum(rec.context).value;
  rec.instantaneous_regret = std::max(0.0, best - env.expected(rec.played));
  return rec;
}

std::vector<RoundRecord> run(const DecomposableModel &model, const TreeDecomposition &td, Environment &env,
                             const RunConfig &config) {
  if (config.horizon < 0) throw ModelError("horizon must be nonnegative");
  std::vector<RoundRecord> records;
  if (config.horizon == 0) return records;
  const BestAct probe(model, td, default_action(model));
  const KwikParams params = resolve_kwik_params(config, probe);
  GraphicalBandit bandit(model, td, make_estimator(config.estimator, model.dimension(), params));
  records.reserve(static_cast<std::size_t>(config.horizon));
  for (std::int64_t t = 1; t <= config.horizon; ++t) records.push_back(bandit.step(t, env));
  return records;
}

std::vector<double> cumulative_regret(const std::vector<RoundRecord> &records) {
  std::vector<double> out;
  out.reserve(records.size());
  double total = 0.0;
  for (const auto &r : records) out.push_back(total += r.instantaneous_regret);
  return out;
}

}  // namespace gbandit
