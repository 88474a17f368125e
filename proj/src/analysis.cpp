#include "gbandit/analysis.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "gbandit/payest.h"

namespace gbandit {
namespace {

std::set<std::vector<int>> context_keys(const DecomposableModel &model, const std::vector<JointAssignment> &contexts) {
  std::set<std::vector<int>> keys;
  for (const auto &x : contexts) {
    std::vector<int> key;
    for (int c : model.context_variables()) key.push_back(x[c]);
    keys.insert(std::move(key));
  }
  return keys;
}

std::vector<int> context_key(const DecomposableModel &model, const JointAssignment &x) {
  std::vector<int> key;
  for (int c : model.context_variables()) key.push_back(x[c]);
  return key;
}

template <class Scalar>
std::size_t exhaustive_rank(const DecomposableModel &model, const std::set<std::vector<int>> &excluded) {
  SpanBasis<Scalar> basis(model.dimension());
  const auto &actions = model.action_variables();
  for (const auto &ctx : all_contexts(model)) {
    if (excluded.count(context_key(model, ctx))) continue;
    JointAssignment x = ctx;
    for (int a : actions) x.set(a, 0);
    do {
      basis.add(to_dense<Scalar>(coefficient_vector(model, x)));
    } while (next_assignment(model, actions, x));
  }
  return basis.rank();
}

}  // namespace

std::size_t column_count(const CoefficientMatrixView &view) {
  const auto &model = *view.model;
  const std::size_t contexts = model.count_assignments(model.context_variables());
  const std::size_t actions = model.count_assignments(model.action_variables());
  const std::size_t excluded = context_keys(model, view.excluded).size();
  const std::size_t kept = contexts - std::min(contexts, excluded);
  if (actions != 0 && kept > SIZE_MAX / actions) return SIZE_MAX;
  return kept * actions;
}

RankResult rank(const CoefficientMatrixView &view) {
  if (!view.model) throw ModelError("coefficient matrix view has no model");
  const auto &model = *view.model;
  const auto excluded = context_keys(model, view.excluded);
  const std::size_t columns = column_count(view);

  if (view.strategy == CoefficientMatrixView::Strategy::kExhaustive) {
    if (columns > view.column_cap)
      throw ModelError("exhaustive rank would enumerate " + std::to_string(columns) + " columns (cap " +
                       std::to_string(view.column_cap) + "); use the sampled strategy");
    const std::size_t r =
        view.exact ? exhaustive_rank<ExactScalar>(model, excluded) : exhaustive_rank<double>(model, excluded);
    return {r, true, columns};
  }

  RankResult out{0, false, 0};
  if (columns == 0) return out;
  Rng rng(view.seed, Rng::Role::kAnalysis);
  SpanBasis<double> basis(model.dimension());
  std::size_t attempts = 0;
  while (out.columns < view.samples && attempts < 100 * view.samples + 100) {
    ++attempts;
    JointAssignment x(model.num_variables());
    for (std::size_t i = 0; i < model.num_variables(); ++i)
      x.set(static_cast<int>(i), rng.index(model.domain_size(static_cast<int>(i))));
    if (excluded.count(context_key(model, x))) continue;
    ++out.columns;
    basis.add(to_dense<double>(coefficient_vector(model, x)));
  }
  out.rank = basis.rank();
  return out;
}

MatchingBound matching_lower_bound(const DecomposableModel &model) {
  for (const auto &s : model.scopes())
    if (s.size() != 2) throw ModelError("matching lower bound applies only to models whose scopes are all pairs");

  const std::size_t n = model.num_variables();
  MatchingBound out;

  // Greedy maximal matching over scopes in declaration order.
  std::vector<bool> matched(n, false);
  for (const auto &s : model.scopes()) {
    const auto a = static_cast<std::size_t>(s.members()[0]);
    const auto b = static_cast<std::size_t>(s.members()[1]);
    if (matched[a] || matched[b]) continue;
    matched[a] = matched[b] = true;
    ++out.matching_size;
    out.matching_columns += static_cast<std::size_t>(model.domain_size(s.members()[0]) * model.domain_size(s.members()[1]) - 1);
  }

  // Independent sets among covered vertices: the matching's complement
  // (independent because the matching is maximal) and a greedy
  // minimum-degree one. Each vertex contributes its non-default values.
  std::vector<std::set<int>> adj(n);
  std::vector<bool> covered(n, false);
  for (const auto &s : model.scopes()) {
    const int a = s.members()[0];
    const int b = s.members()[1];
    adj[static_cast<std::size_t>(a)].insert(b);
    adj[static_cast<std::size_t>(b)].insert(a);
    covered[static_cast<std::size_t>(a)] = covered[static_cast<std::size_t>(b)] = true;
  }
  auto columns_for = [&](const std::vector<int> &set) {
    std::size_t cols = 1;
    for (int v : set) cols += static_cast<std::size_t>(model.domain_size(v) - 1);
    return set.empty() ? std::size_t{0} : cols;
  };

  std::vector<int> complement;
  for (std::size_t v = 0; v < n; ++v)
    if (covered[v] && !matched[v]) complement.push_back(static_cast<int>(v));

  std::vector<int> greedy;
  {
    std::vector<int> order;
    for (std::size_t v = 0; v < n; ++v)
      if (covered[v]) order.push_back(static_cast<int>(v));
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return adj[static_cast<std::size_t>(a)].size() < adj[static_cast<std::size_t>(b)].size();
    });
    std::vector<bool> blocked(n, false);
    for (int v : order) {
      if (blocked[static_cast<std::size_t>(v)]) continue;
      greedy.push_back(v);
      blocked[static_cast<std::size_t>(v)] = true;
      for (int u : adj[static_cast<std::size_t>(v)]) blocked[static_cast<std::size_t>(u)] = true;
    }
  }
  const std::vector<int> &best_set = columns_for(greedy) >= columns_for(complement) ? greedy : complement;
  out.independent_set_size = best_set.size();
  out.independent_columns = columns_for(best_set);
  out.bound = std::max(out.matching_columns, out.independent_columns);
  return out;
}

std::vector<TradeoffRow> restricted_rank_tradeoff(const DecomposableModel &model, const ContextSource &source,
                                                  const std::vector<std::vector<JointAssignment>> &candidates,
                                                  const TreeDecomposition &td, double horizon) {
  if (!source.is_iid()) throw ModelError("restricted-rank tradeoff needs an i.i.d. context distribution");
  const double m = model.max_domain_size();
  const double edges = std::max<double>(1.0, static_cast<double>(td.num_edges()));
  const double rank_unit = static_cast<double>(td.width) * static_cast<double>(td.bags.size()) *
                           std::pow(horizon, 2.0 / 3.0) * std::log(horizon * m * edges);
  std::vector<TradeoffRow> rows;
  for (const auto &candidate : candidates) {
    TradeoffRow row;
    row.excluded = candidate;
    std::set<std::vector<int>> seen;
    for (const auto &ctx : candidate)
      if (seen.insert(context_key(model, ctx)).second) row.excluded_mass += source.probability(ctx);
    CoefficientMatrixView view;
    view.model = &model;
    view.excluded = candidate;
    view.exact = true;
    row.restricted_rank = rank(view).rank;
    row.bound = horizon * row.excluded_mass + static_cast<double>(row.restricted_rank) * rank_unit;
    rows.push_back(std::move(row));
  }
  return rows;
}

ExponentFit fit_regret_exponent(const std::vector<double> &curve) {
  if (curve.size() < 100) throw ModelError("exponent fit needs at least 100 rounds");
  const double horizon = static_cast<double>(curve.size());
  const double lo = std::log(horizon / 10.0);
  const double hi = std::log(horizon);
  std::set<std::size_t> rounds;
  for (int k = 0; k < 100; ++k) {
    const double t = std::exp(lo + (hi - lo) * k / 99.0);
    rounds.insert(std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(t)), 1, curve.size()));
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t t : rounds) {
    const double r = curve[t - 1];
    if (r <= 0.0) continue;
    xs.push_back(std::log(static_cast<double>(t)));
    ys.push_back(std::log(r));
  }
  ExponentFit fit;
  fit.points = xs.size();
  if (xs.size() < 10) {
    fit.zero_regret = true;
    return fit;
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return fit;
}

std::vector<std::size_t> checkpoints(std::size_t horizon) {
  std::vector<std::size_t> out;
  for (int k = 0;; ++k) {
    const auto t = static_cast<std::size_t>(std::llround(std::pow(10.0, k / 10.0)));
    if (t > horizon) break;
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  if (horizon > 0 && (out.empty() || out.back() != horizon)) out.push_back(horizon);
  return out;
}

RegretSummary summarize(std::vector<std::vector<double>> curves, std::vector<std::size_t> interrupted_rounds) {
  RegretSummary s;
  s.curves = std::move(curves);
  s.interrupted_rounds = std::move(interrupted_rounds);
  if (s.curves.empty()) return s;
  const std::size_t len = s.curves.front().size();
  for (const auto &c : s.curves)
    if (c.size() != len) throw ModelError("regret curves differ in length");
  const double k = static_cast<double>(s.curves.size());
  s.mean.assign(len, 0.0);
  s.stderr_.assign(len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    for (const auto &c : s.curves) sum += c[t];
    const double mean = sum / k;
    double var = 0.0;
    for (const auto &c : s.curves) var += (c[t] - mean) * (c[t] - mean);
    s.mean[t] = mean;
    s.stderr_[t] = s.curves.size() > 1 ? std::sqrt(var / (k - 1.0) / k) : 0.0;
  }
  if (len >= 100) s.fit = fit_regret_exponent(s.mean);
  return s;
}

}  // namespace gbandit
