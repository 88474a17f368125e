#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gbandit/model.h"
#include "gbandit/rng.h"

namespace gbandit {

/// Hidden potential tables, one per scope, laid out like the coefficient
/// vector blocks.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(const DecomposableModel &model, std::vector<std::vector<double>> tables);

  const std::vector<std::vector<double>> &tables() const { return tables_; }
  double potential(const DecomposableModel &model, std::size_t scope, const JointAssignment &x) const;
  /// F(x) summed scope by scope in declaration order.
  double evaluate(const DecomposableModel &model, const JointAssignment &x) const;
  /// Flattened tables; F(x) = f . v(x).
  std::vector<double> payoff_vector() const;

 private:
  std::vector<std::vector<double>> tables_;
};

struct Extremum {
  JointAssignment assignment;
  double value = 0.0;
};

/// Max-sum variable elimination on the true potentials. Variables assigned
/// in `evidence` stay fixed; every other variable is optimised. `maximize`
/// false gives the minimum. The returned value is F re-evaluated at the
/// returned assignment.
Extremum optimize_potentials(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &evidence,
                             bool maximize);

/// Exact argmax over joint actions for a complete joint context.
Extremum exact_best_action(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &context);

/// Enumeration over every joint action; for tests and small instances.
Extremum brute_force_best_action(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &context);

struct PayoffRange {
  double min = 0.0;
  double max = 0.0;
};

PayoffRange payoff_range(const DecomposableModel &model, const GroundTruth &gt);

/// Affine rescale of F onto [lo, hi]: every table is scaled, the shift goes
/// into the first table, then entries are rounded to a 2^-30 grid so that
/// sums of potentials are exact in double precision.
GroundTruth normalize(const DecomposableModel &model, const GroundTruth &gt, double lo = 0.05, double hi = 0.95);

enum class NoiseKind { kNoiseless, kBernoulli, kTruncatedAdditive };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kBernoulli;
  double half_width = 0.0;
};

/// One payoff draw with mean F(x). Truncated additive noise is used only
/// when F(x) is in [half_width, 1 - half_width]; otherwise a Bernoulli draw
/// keeps the mean exact.
double sample_payoff(const DecomposableModel &model, const GroundTruth &gt, const JointAssignment &x,
                     const NoiseModel &noise, Rng &rng);

/// Nature's joint contexts: replay of a fixed sequence, or i.i.d. draws
/// from independent per-variable categoricals or a weighted support set.
class ContextSource {
 public:
  enum class Mode { kReplay, kMarginals, kSupport };

  static ContextSource replay(const DecomposableModel &model, std::vector<JointAssignment> sequence);
  /// `marginals[j]` is the distribution of the j-th context variable.
  static ContextSource iid_marginals(const DecomposableModel &model, std::vector<std::vector<double>> marginals);
  static ContextSource iid_support(const DecomposableModel &model, std::vector<JointAssignment> contexts,
                                   std::vector<double> weights);
  /// Uniform over all joint contexts.
  static ContextSource uniform(const DecomposableModel &model);

  Mode mode() const { return mode_; }
  bool is_iid() const { return mode_ != Mode::kReplay; }
  std::size_t replay_length() const { return sequence_.size(); }

  /// Next context; replay mode ignores `rng` and throws once exhausted.
  JointAssignment next(Rng &rng);
  /// Probability of a joint context under an i.i.d. source.
  double probability(const JointAssignment &context) const;

  const std::vector<std::vector<double>> &marginals() const { return marginals_; }
  const std::vector<JointAssignment> &support() const { return sequence_; }
  const std::vector<double> &weights() const { return weights_; }

 private:
  Mode mode_ = Mode::kReplay;
  std::vector<int> context_vars_;
  std::size_t num_variables_ = 0;
  std::vector<JointAssignment> sequence_;
  std::size_t cursor_ = 0;
  std::vector<std::vector<double>> marginals_;
  std::vector<double> weights_;
};

/// Every joint context in lexicographic order.
std::vector<JointAssignment> all_contexts(const DecomposableModel &model);

/// Contexts ordered greedily by how much each one's coefficient vectors
/// (all joint actions) enlarge the span seen so far; ties go to the
/// lexicographically first context. A worst case for restricted-rank
/// comparisons.
std::vector<JointAssignment> rank_greedy_contexts(const DecomposableModel &model);

/// One joint context per line, comma-separated value indices of the
/// context variables in ascending id order.
std::vector<JointAssignment> parse_replay(const DecomposableModel &model, const std::string &text);
std::string format_replay(const DecomposableModel &model, const std::vector<JointAssignment> &contexts);

struct GeneratedInstance {
  DecomposableModel model;
  GroundTruth truth;
  std::vector<std::string> names;
};

enum class GraphFamily { kTree, kSparse };

struct GeneratorSpec {
  int n_action = 4;
  int n_context = 2;
  int arity = 2;
  int domain_min = 2;
  int domain_max = 2;
  GraphFamily family = GraphFamily::kTree;
  /// Target max bag size for kSparse.
  int width = 3;
  std::uint64_t seed = 0;
};

/// Random instance: structure from `spec.family`, potentials i.i.d.
/// uniform on [0,1), then normalized. Deterministic in the seed.
GeneratedInstance generate_model(const GeneratorSpec &spec);

struct SponsoredSearchSizes {
  int cities = 2;
  int costs = 2;
  int hotels = 2;
};

/// Ad-serving example: actions y_origin, y_cost, y_dest, y_hotel and
/// contexts x_origin, x_dest with scopes {y_origin, y_cost, y_dest},
/// {y_hotel, y_cost, y_dest}, {y_origin, x_origin}, {y_dest, x_dest}.
GeneratedInstance sponsored_search(std::uint64_t seed, SponsoredSearchSizes sizes = {});

/// F = f_{1,2} + f_{2,3} on three binary variables with f_{1,2} = x1 + x2
/// and f_{2,3} = x2 * x3 (values a = 0, b = 1). Not normalized.
GeneratedInstance sum_product_toy();

/// n binary variables with one unary potential each.
DecomposableModel unary_model(int n, VariableKind kind = VariableKind::kAction);
/// A single scope covering every variable.
DecomposableModel full_scope_model(std::vector<int> domain_sizes, VariableKind kind = VariableKind::kAction);

/// Structured text dump of model and potentials.
nlohmann::ordered_json dump_instance(const DecomposableModel &model, const GroundTruth &gt,
                                     const std::vector<std::string> &names = {});
GeneratedInstance load_instance(const nlohmann::ordered_json &j);

/// Simulated Nature for one run: contexts, payoff noise and a cache of
/// exact per-context optima for regret scoring.
class Environment {
 public:
  Environment(const DecomposableModel &model, GroundTruth truth, ContextSource contexts, NoiseModel noise,
              std::uint64_t seed);

  const DecomposableModel &model() const { return model_; }
  const GroundTruth &truth() const { return truth_; }
  const NoiseModel &noise() const { return noise_; }

  JointAssignment next_context();
  double sample(const JointAssignment &complete);
  double expected(const JointAssignment &complete) const { return truth_.evaluate(model_, complete); }
  const Extremum &optimum(const JointAssignment &context);

 private:
  const DecomposableModel &model_;
  GroundTruth truth_;
  ContextSource contexts_;
  NoiseModel noise_;
  Rng context_rng_;
  Rng noise_rng_;
  std::map<std::vector<int>, Extremum> optima_;
};

}  // namespace gbandit
