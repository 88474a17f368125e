#include "gbandit/env.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "gbandit/payest.h"
#include "gbandit/treedecomp.h"

namespace gbandit {

GroundTruth::GroundTruth(const DecomposableModel &model, std::vector<std::vector<double>> tables)
    : tables_(std::move(tables)) {
  if (tables_.size() != model.num_scopes())
    throw ModelError("ground truth has " + std::to_string(tables_.size()) + " tables for " +
                     std::to_string(model.num_scopes()) + " scopes");
  for (std::size_t s = 0; s < tables_.size(); ++s) {
    if (tables_[s].size() != model.block_size(s))
      throw ModelError("table " + std::to_string(s) + " has " + std::to_string(tables_[s].size()) +
                       " entries, expected " + std::to_string(model.block_size(s)));
    for (double v : tables_[s])
      if (!std::isfinite(v)) throw ModelError("table " + std::to_string(s) + " holds a non-finite entry");
  }
}

double GroundTruth::potential(const DecomposableModel &model, std::size_t scope, const JointAssignment &x) const {
  return tables_[scope][model.local_index(scope, x)];
}

double GroundTruth::evaluate(const DecomposableModel &model, const JointAssignment &x) const {
  double total = 0.0;
  for (std::size_t s = 0; s < tables_.size(); ++s) total += potential(model, s, x);
  return total;
}

std::vector<double> GroundTruth::payoff_vector() const {
  std::vector<double> out;
  for (const auto &t : tables_) out.insert(out.end(), t.begin(), t.end());
  return out;
}

namespace {

struct Factor {
  std::vector<int> vars;
  std::vector<double> table;
};

std::size_t factor_index(const DecomposableModel &model, const std::vector<int> &vars, const JointAssignment &x) {
  std::size_t idx = 0;
  for (int v : vars) idx = idx * static_cast<std::size_t>(model.domain_size(v)) + static_cast<std::size_t>(x[v]);
  return idx;
}

struct Elimination {
  int var;
  std::vector<int> rest;
  std::vector<int> argmax;
};

}  // namespace

Extremum optimize_potentials(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &evidence,
                             bool maximize) {
  model.check_assignment(evidence);
  const double sign = maximize ? 1.0 : -1.0;
  std::vector<int> free_vars;
  for (std::size_t i = 0; i < model.num_variables(); ++i)
    if (!evidence.assigned(static_cast<int>(i))) free_vars.push_back(static_cast<int>(i));

  JointAssignment scratch = evidence;
  for (int v : free_vars) scratch.set(v, 0);

  std::vector<Factor> factors;
  std::set<std::pair<int, int>> edges;
  for (std::size_t s = 0; s < model.num_scopes(); ++s) {
    Factor f;
    for (int v : model.scopes()[s].members())
      if (!evidence.assigned(v)) f.vars.push_back(v);
    f.table.resize(model.count_assignments(f.vars));
    do {
      f.table[factor_index(model, f.vars, scratch)] = sign * gt.potential(model, s, scratch);
    } while (next_assignment(model, f.vars, scratch));
    for (std::size_t i = 0; i < f.vars.size(); ++i)
      for (std::size_t j = i + 1; j < f.vars.size(); ++j) edges.emplace(f.vars[i], f.vars[j]);
    factors.push_back(std::move(f));
  }

  const std::vector<int> order = min_fill_order(Subgraph{free_vars, {edges.begin(), edges.end()}});
  std::vector<Elimination> steps;
  for (int v : order) {
    std::vector<Factor> touching;
    std::vector<Factor> kept;
    for (auto &f : factors)
      (std::binary_search(f.vars.begin(), f.vars.end(), v) ? touching : kept).push_back(std::move(f));
    factors = std::move(kept);

    std::set<int> rest_set;
    for (const auto &f : touching) rest_set.insert(f.vars.begin(), f.vars.end());
    rest_set.erase(v);
    Elimination step{v, {rest_set.begin(), rest_set.end()}, {}};
    Factor merged{step.rest, {}};
    const std::size_t rows = model.count_assignments(step.rest);
    merged.table.assign(rows, 0.0);
    step.argmax.assign(rows, 0);
    for (int r : step.rest) scratch.set(r, 0);
    do {
      double best = -std::numeric_limits<double>::infinity();
      int best_value = 0;
      for (int value = 0; value < model.domain_size(v); ++value) {
        scratch.set(v, value);
        double total = 0.0;
        for (const auto &f : touching) total += f.table[factor_index(model, f.vars, scratch)];
        if (total > best) {
          best = total;
          best_value = value;
        }
      }
      const std::size_t idx = factor_index(model, step.rest, scratch);
      merged.table[idx] = best;
      step.argmax[idx] = best_value;
    } while (next_assignment(model, step.rest, scratch));
    factors.push_back(std::move(merged));
    steps.push_back(std::move(step));
  }

  Extremum out{evidence, 0.0};
  for (auto it = steps.rbegin(); it != steps.rend(); ++it)
    out.assignment.set(it->var, it->argmax[factor_index(model, it->rest, out.assignment)]);
  out.value = gt.evaluate(model, out.assignment);
  return out;
}

Extremum exact_best_action(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &context) {
  JointAssignment evidence(model.num_variables());
  for (int c : model.context_variables()) {
    if (!context.assigned(c)) throw ModelError("context variable " + std::to_string(c) + " is unassigned");
    evidence.set(c, context[c]);
  }
  return optimize_potentials(model, gt, evidence, true);
}

Extremum brute_force_best_action(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &context) {
  JointAssignment x(model.num_variables());
  for (int c : model.context_variables()) {
    if (!context.assigned(c)) throw ModelError("context variable " + std::to_string(c) + " is unassigned");
    x.set(c, context[c]);
  }
  const auto &actions = model.action_variables();
  for (int a : actions) x.set(a, 0);
  Extremum best{x, -std::numeric_limits<double>::infinity()};
  do {
    const double value = gt.evaluate(model, x);
    if (value > best.value) best = {x, value};
  } while (next_assignment(model, actions, x));
  return best;
}

PayoffRange payoff_range(const DecomposableModel &model, const GroundTruth &gt) {
  const JointAssignment none(model.num_variables());
  return {optimize_potentials(model, gt, none, false).value, optimize_potentials(model, gt, none, true).value};
}

GroundTruth normalize(const DecomposableModel &model, const GroundTruth &gt, double lo, double hi) {
  const PayoffRange range = payoff_range(model, gt);
  const double spread = range.max - range.min;
  double scale = 1.0;
  double shift = 0.5 * (lo + hi) - range.max;
  if (spread > 1e-12) {
    scale = (hi - lo) / spread;
    shift = lo - scale * range.min;
  }
  auto tables = gt.tables();
  for (std::size_t s = 0; s < tables.size(); ++s)
    for (double &v : tables[s]) {
      v = v * scale + (s == 0 ? shift : 0.0);
      v = std::ldexp(std::round(std::ldexp(v, 30)), -30);
    }
  GroundTruth out(model, std::move(tables));
  const PayoffRange check = payoff_range(model, out);
  if (check.min < 0.0 || check.max > 1.0)
    throw ModelError("normalized payoff range [" + std::to_string(check.min) + ", " + std::to_string(check.max) +
                     "] leaves [0,1]");
  return out;
}

double sample_payoff(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &x,
                     const NoiseModel &noise, Rng &rng) {
  if (!model.is_complete(x)) throw ModelError("payoff needs a complete assignment");
  const double mean = gt.evaluate(model, x);
  switch (noise.kind) {
    case NoiseKind::kNoiseless: return mean;
    case NoiseKind::kBernoulli: return rng.bernoulli(mean) ? 1.0 : 0.0;
    case NoiseKind::kTruncatedAdditive:
      if (mean >= noise.half_width && mean <= 1.0 - noise.half_width)
        return mean + rng.uniform(-noise.half_width, noise.half_width);
      return rng.bernoulli(mean) ? 1.0 : 0.0;
  }
  return mean;
}

namespace {

void check_distribution(const std::vector<double> &p, const std::string &what) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ModelError(what + ": probabilities must be nonnegative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(15);
    msg << what << ": probabilities sum to " << total << ", expected 1";
    throw ModelError(msg.str());
  }
}

double draw_index(const std::vector<double> &p, Rng &rng, std::size_t &out) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) {
      out = i;
      return acc;
    }
  }
  // Rounding left u above the cumulative total: take the last positive entry.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) {
      out = i;
      break;
    }
  return acc;
}

JointAssignment context_only(const DecomposableModel &model, const JointAssignment &x) {
  JointAssignment out(model.num_variables());
  for (int c : model.context_variables()) {
    if (!x.assigned(c)) throw ModelError("context variable " + std::to_string(c) + " is unassigned");
    out.set(c, x[c]);
  }
  return out;
}

}  // namespace

ContextSource ContextSource::replay(const DecomposableModel &model, std::vector<JointAssignment> sequence) {
  ContextSource s;
  s.mode_ = Mode::kReplay;
  s.context_vars_ = model.context_variables();
  s.num_variables_ = model.num_variables();
  for (auto &x : sequence) {
    model.check_assignment(x);
    x = context_only(model, x);
  }
  s.sequence_ = std::move(sequence);
  return s;
}

ContextSource ContextSource::iid_marginals(const DecomposableModel &model, std::vector<std::vector<double>> marginals) {
  const auto &ctx = model.context_variables();
  if (marginals.size() != ctx.size())
    throw ModelError("got " + std::to_string(marginals.size()) + " marginals for " + std::to_string(ctx.size()) +
                     " context variables");
  for (std::size_t j = 0; j < ctx.size(); ++j) {
    const std::string what = "context variable " + std::to_string(ctx[j]);
    if (marginals[j].size() != static_cast<std::size_t>(model.domain_size(ctx[j])))
      throw ModelError(what + ": marginal has " + std::to_string(marginals[j].size()) + " entries, domain size is " +
                       std::to_string(model.domain_size(ctx[j])));
    check_distribution(marginals[j], what);
  }
  ContextSource s;
  s.mode_ = Mode::kMarginals;
  s.context_vars_ = ctx;
  s.num_variables_ = model.num_variables();
  s.marginals_ = std::move(marginals);
  return s;
}

ContextSource ContextSource::iid_support(const DecomposableModel &model, std::vector<JointAssignment> contexts,
                                         std::vector<double> weights) {
  if (contexts.empty() || contexts.size() != weights.size())
    throw ModelError("support needs one weight per context and at least one context");
  check_distribution(weights, "context support");
  std::set<std::vector<int>> seen;
  for (auto &x : contexts) {
    model.check_assignment(x);
    x = context_only(model, x);
    if (!seen.insert(x.values()).second) throw ModelError("context support lists a context twice");
  }
  ContextSource s;
  s.mode_ = Mode::kSupport;
  s.context_vars_ = model.context_variables();
  s.num_variables_ = model.num_variables();
  s.sequence_ = std::move(contexts);
  s.weights_ = std::move(weights);
  return s;
}

ContextSource ContextSource::uniform(const DecomposableModel &model) {
  std::vector<std::vector<double>> marginals;
  for (int c : model.context_variables())
    marginals.emplace_back(static_cast<std::size_t>(model.domain_size(c)), 1.0 / model.domain_size(c));
  // 1/d summed d times can miss 1 by an ulp; fix up the last entry.
  for (auto &m : marginals) {
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < m.size(); ++i) rest -= m[i];
    m.back() = rest;
  }
  return iid_marginals(model, std::move(marginals));
}

JointAssignment ContextSource::next(Rng &rng) {
  switch (mode_) {
    case Mode::kReplay:
      if (cursor_ >= sequence_.size()) throw std::out_of_range("replay context sequence exhausted");
      return sequence_[cursor_++];
    case Mode::kMarginals: {
      JointAssignment x(num_variables_);
      for (std::size_t j = 0; j < context_vars_.size(); ++j) {
        std::size_t value = 0;
        draw_index(marginals_[j], rng, value);
        x.set(context_vars_[j], static_cast<int>(value));
      }
      return x;
    }
    case Mode::kSupport: {
      std::size_t idx = 0;
      draw_index(weights_, rng, idx);
      return sequence_[idx];
    }
  }
  throw std::logic_error("unknown context mode");
}

double ContextSource::probability(const JointAssignment &context) const {
  switch (mode_) {
    case Mode::kReplay: throw ModelError("replay contexts have no distribution");
    case Mode::kMarginals: {
      double p = 1.0;
      for (std::size_t j = 0; j < context_vars_.size(); ++j)
        p *= marginals_[j][static_cast<std::size_t>(context[context_vars_[j]])];
      return p;
    }
    case Mode::kSupport:
      for (std::size_t i = 0; i < sequence_.size(); ++i) {
        bool same = true;
        for (int c : context_vars_) same = same && sequence_[i][c] == context[c];
        if (same) return weights_[i];
      }
      return 0.0;
  }
  throw std::logic_error("unknown context mode");
}

std::vector<JointAssignment> all_contexts(const DecomposableModel &model) {
  std::vector<JointAssignment> out;
  const auto &ctx = model.context_variables();
  JointAssignment x(model.num_variables());
  for (int c : ctx) x.set(c, 0);
  do {
    out.push_back(x);
  } while (next_assignment(model, ctx, x));
  return out;
}

std::vector<JointAssignment> rank_greedy_contexts(const DecomposableModel &model) {
  const auto contexts = all_contexts(model);
  const auto &actions = model.action_variables();
  auto columns_of = [&](const JointAssignment &ctx) {
    std::vector<CoefficientVector> cols;
    JointAssignment x = ctx;
    for (int a : actions) x.set(a, 0);
    do {
      cols.push_back(coefficient_vector(model, x));
    } while (next_assignment(model, actions, x));
    return cols;
  };

  SpanBasis<double> seen(model.dimension());
  std::vector<bool> used(contexts.size(), false);
  std::vector<JointAssignment> order;
  while (order.size() < contexts.size()) {
    std::size_t best = contexts.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      if (used[i]) continue;
      SpanBasis<double> trial = seen;
      std::size_t gain = 0;
      for (const auto &col : columns_of(contexts[i])) gain += trial.add(to_dense<double>(col)) ? 1 : 0;
      if (best == contexts.size() || gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    used[best] = true;
    for (const auto &col : columns_of(contexts[best])) seen.add(to_dense<double>(col));
    order.push_back(contexts[best]);
  }
  return order;
}

std::vector<JointAssignment> parse_replay(const DecomposableModel &model, const std::string &text) {
  std::vector<JointAssignment> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  const auto &ctx = model.context_variables();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    JointAssignment x(model.num_variables());
    std::istringstream fields(line);
    std::string field;
    std::size_t j = 0;
    while (std::getline(fields, field, ',')) {
      if (j >= ctx.size())
        throw ModelError("replay line " + std::to_string(lineno) + ": more values than context variables");
      int value = 0;
      try {
        std::size_t used = 0;
        value = std::stoi(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception &) {
        throw ModelError("replay line " + std::to_string(lineno) + ": bad value '" + field + "'");
      }
      if (value < 0 || value >= model.domain_size(ctx[j]))
        throw ModelError("replay line " + std::to_string(lineno) + ": value " + std::to_string(value) +
                         " out of range for variable " + std::to_string(ctx[j]));
      x.set(ctx[j++], value);
    }
    if (j != ctx.size())
      throw ModelError("replay line " + std::to_string(lineno) + ": expected " + std::to_string(ctx.size()) +
                       " values, got " + std::to_string(j));
    out.push_back(std::move(x));
  }
  return out;
}

std::string format_replay(const DecomposableModel &model, const std::vector<JointAssignment> &contexts) {
  std::string out;
  const auto &ctx = model.context_variables();
  for (const auto &x : contexts) {
    for (std::size_t j = 0; j < ctx.size(); ++j) {
      if (j) out += ',';
      out += std::to_string(x[ctx[j]]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::vector<double>> random_tables(const DecomposableModel &model, Rng &rng) {
  std::vector<std::vector<double>> tables;
  for (std::size_t s = 0; s < model.num_scopes(); ++s) {
    std::vector<double> t(model.block_size(s));
    for (double &v : t) v = rng.uniform();
    tables.push_back(std::move(t));
  }
  return tables;
}

std::vector<int> sample_subset(const std::vector<int> &pool, std::size_t k, Rng &rng) {
  std::vector<int> copy = pool;
  rng.shuffle(copy.begin(), copy.end());
  copy.resize(std::min(k, copy.size()));
  return copy;
}

}  // namespace

GeneratedInstance generate_model(const GeneratorSpec &spec) {
  if (spec.n_action < 1) throw ModelError("generator needs at least one action variable");
  if (spec.n_context < 0) throw ModelError("generator needs a nonnegative context count");
  if (spec.arity < 1) throw ModelError("generator arity must be >= 1");
  if (spec.domain_min < 2 || spec.domain_max < spec.domain_min)
    throw ModelError("generator domain sizes need 2 <= domain_min <= domain_max");
  if (spec.family == GraphFamily::kSparse) {
    if (spec.width < 2) throw ModelError("sparse family needs width >= 2");
    if (spec.arity > spec.width)
      throw ModelError("width target " + std::to_string(spec.width) + " is below the clique bound of arity " +
                       std::to_string(spec.arity));
  }

  Rng rng(spec.seed, Rng::Role::kModel);
  const int n = spec.n_action + spec.n_context;
  std::vector<VariableSpec> vars;
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) {
    const int d = spec.domain_min + rng.index(spec.domain_max - spec.domain_min + 1);
    const bool action = i < spec.n_action;
    vars.push_back({i, d, action ? VariableKind::kAction : VariableKind::kContext});
    names.push_back((action ? "a" : "c") + std::to_string(action ? i : i - spec.n_action));
  }

  std::vector<std::vector<int>> scopes;
  // Cliques of the action structure; context scopes attach inside one.
  std::vector<std::vector<int>> cliques;
  if (spec.family == GraphFamily::kTree) {
    for (int i = 1; i < spec.n_action; ++i) {
      const int parent = rng.index(i);
      if (spec.arity >= 2) scopes.push_back({parent, i});
      cliques.push_back({parent, i});
    }
    if (spec.n_action == 1 || spec.arity == 1)
      for (int i = 0; i < spec.n_action; ++i) scopes.push_back({i});
    if (cliques.empty()) cliques.push_back({0});
  } else {
    const int w = std::min(spec.width, spec.n_action);
    std::vector<int> first(static_cast<std::size_t>(w));
    std::iota(first.begin(), first.end(), 0);
    cliques.push_back(first);
    for (int v = 1; v < w; ++v) {
      std::vector<int> earlier(first.begin(), first.begin() + v);
      auto scope = sample_subset(earlier, static_cast<std::size_t>(spec.arity - 1), rng);
      scope.push_back(v);
      if (scope.size() > 1 || spec.arity == 1) scopes.push_back(scope);
    }
    for (int v = w; v < spec.n_action; ++v) {
      auto base = cliques[static_cast<std::size_t>(rng.index(static_cast<int>(cliques.size())))];
      base.erase(base.begin() + rng.index(static_cast<int>(base.size())));
      auto scope = sample_subset(base, static_cast<std::size_t>(spec.arity - 1), rng);
      scope.push_back(v);
      scopes.push_back(scope);
      base.push_back(v);
      cliques.push_back(base);
    }
  }
  for (int c = spec.n_action; c < n; ++c) {
    const auto &clique = cliques[static_cast<std::size_t>(rng.index(static_cast<int>(cliques.size())))];
    const std::size_t take = spec.arity >= 3 ? 1 + rng.below(std::min<std::size_t>(clique.size(), static_cast<std::size_t>(spec.arity - 1)))
                                             : (spec.arity == 2 ? 1 : 0);
    auto scope = sample_subset(clique, take, rng);
    scope.push_back(c);
    scopes.push_back(scope);
  }
  // Anything still uncovered gets a unary potential.
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (const auto &s : scopes)
    for (int v : s) covered[static_cast<std::size_t>(v)] = true;
  for (int v = 0; v < n; ++v)
    if (!covered[static_cast<std::size_t>(v)]) scopes.push_back({v});

  std::vector<Scope> model_scopes;
  std::set<std::vector<int>> seen;
  for (auto &s : scopes) {
    Scope scope(s);
    if (seen.insert(scope.members()).second) model_scopes.push_back(std::move(scope));
  }
  DecomposableModel model(std::move(vars), std::move(model_scopes));
  GroundTruth raw(model, random_tables(model, rng));
  GroundTruth truth = normalize(model, raw);
  return {std::move(model), std::move(truth), std::move(names)};
}

GeneratedInstance sponsored_search(std::uint64_t seed, SponsoredSearchSizes sizes) {
  if (sizes.cities < 2 || sizes.costs < 2 || sizes.hotels < 2)
    throw ModelError("sponsored search domains need at least 2 values each");
  enum { kYOrigin, kYCost, kYDest, kYHotel, kXOrigin, kXDest };
  std::vector<VariableSpec> vars{{kYOrigin, sizes.cities, VariableKind::kAction},
                                 {kYCost, sizes.costs, VariableKind::kAction},
                                 {kYDest, sizes.cities, VariableKind::kAction},
                                 {kYHotel, sizes.hotels, VariableKind::kAction},
                                 {kXOrigin, sizes.cities, VariableKind::kContext},
                                 {kXDest, sizes.cities, VariableKind::kContext}};
  std::vector<Scope> scopes{Scope{kYOrigin, kYCost, kYDest}, Scope{kYHotel, kYCost, kYDest}, Scope{kYOrigin, kXOrigin},
                            Scope{kYDest, kXDest}};
  DecomposableModel model(std::move(vars), std::move(scopes));
  Rng rng(seed, Rng::Role::kModel);
  GroundTruth raw(model, random_tables(model, rng));
  GroundTruth truth = normalize(model, raw);
  return {std::move(model), std::move(truth), {"y_origin", "y_cost", "y_dest", "y_hotel", "x_origin", "x_dest"}};
}

GeneratedInstance sum_product_toy() {
  std::vector<VariableSpec> vars{{0, 2, VariableKind::kAction}, {1, 2, VariableKind::kAction}, {2, 2, VariableKind::kAction}};
  DecomposableModel model(std::move(vars), {Scope{0, 1}, Scope{1, 2}});
  // a = 0, b = 1; rows in lexicographic order aa, ab, ba, bb.
  GroundTruth truth(model, {{0.0, 1.0, 1.0, 2.0}, {0.0, 0.0, 0.0, 1.0}});
  return {std::move(model), std::move(truth), {"x1", "x2", "x3"}};
}

DecomposableModel unary_model(int n, VariableKind kind) {
  std::vector<VariableSpec> vars;
  std::vector<Scope> scopes;
  for (int i = 0; i < n; ++i) {
    vars.push_back({i, 2, kind});
    scopes.push_back(Scope{i});
  }
  return {std::move(vars), std::move(scopes)};
}

DecomposableModel full_scope_model(std::vector<int> domain_sizes, VariableKind kind) {
  std::vector<VariableSpec> vars;
  std::vector<int> all;
  for (std::size_t i = 0; i < domain_sizes.size(); ++i) {
    vars.push_back({static_cast<int>(i), domain_sizes[i], kind});
    all.push_back(static_cast<int>(i));
  }
  return {std::move(vars), {Scope(all)}};
}

nlohmann::ordered_json dump_instance(const DecomposableModel &model, const GroundTruth &gt,
                                     const std::vector<std::string> &names) {
  nlohmann::ordered_json j;
  j["format"] = "gbandit-model";
  j["version"] = 1;
  auto vars = nlohmann::ordered_json::array();
  for (const auto &v : model.variables()) {
    nlohmann::ordered_json jv;
    jv["id"] = v.id;
    if (static_cast<std::size_t>(v.id) < names.size()) jv["name"] = names[static_cast<std::size_t>(v.id)];
    jv["kind"] = v.kind == VariableKind::kAction ? "action" : "context";
    jv["domain_size"] = v.domain_size;
    vars.push_back(std::move(jv));
  }
  j["variables"] = std::move(vars);
  auto scopes = nlohmann::ordered_json::array();
  for (const auto &s : model.scopes()) scopes.push_back(s.members());
  j["scopes"] = std::move(scopes);
  j["tables"] = gt.tables();
  return j;
}

GeneratedInstance load_instance(const nlohmann::ordered_json &j) {
  if (j.at("format") != "gbandit-model" || j.at("version") != 1)
    throw ModelError("not a gbandit-model dump of version 1");
  std::vector<VariableSpec> vars;
  std::vector<std::string> names;
  for (const auto &jv : j.at("variables")) {
    const std::string kind = jv.at("kind");
    if (kind != "action" && kind != "context") throw ModelError("unknown variable kind '" + kind + "'");
    vars.push_back({jv.at("id").get<int>(), jv.at("domain_size").get<int>(),
                    kind == "action" ? VariableKind::kAction : VariableKind::kContext});
    names.push_back(jv.value("name", ""));
  }
  std::vector<Scope> scopes;
  for (const auto &s : j.at("scopes")) scopes.emplace_back(s.get<std::vector<int>>());
  DecomposableModel model(std::move(vars), std::move(scopes));
  GroundTruth truth(model, j.at("tables").get<std::vector<std::vector<double>>>());
  return {std::move(model), std::move(truth), std::move(names)};
}

Environment::Environment(const DecomposableModel &model, GroundTruth truth, ContextSource contexts, NoiseModel noise,
                         std::uint64_t seed)
    : model_(model),
      truth_(std::move(truth)),
      contexts_(std::move(contexts)),
      noise_(noise),
      context_rng_(seed, Rng::Role::kContexts),
      noise_rng_(seed, Rng::Role::kNoise) {}

JointAssignment Environment::next_context() { return contexts_.next(context_rng_); }

double Environment::sample(const JointAssignment &complete) {
  return sample_payoff(model_, truth_, complete, noise_, noise_rng_);
}

const Extremum &Environment::optimum(const JointAssignment &context) {
  std::vector<int> key;
  for (int c : model_.context_variables()) key.push_back(context[c]);
  auto it = optima_.find(key);
  if (it == optima_.end()) it = optima_.emplace(std::move(key), exact_best_action(model_, truth_, context)).first;
  return it->second;
}

}  // namespace gbandit
