#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gbandit {

/// Raised for structurally invalid models, assignments and arguments.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class VariableKind { kAction, kContext };

struct VariableSpec {
  int id = 0;
  int domain_size = 2;
  VariableKind kind = VariableKind::kAction;
};

/// Sorted, deduplicated, nonempty set of variable ids.
class Scope {
 public:
  Scope() = default;
  explicit Scope(std::vector<int> members);
  Scope(std::initializer_list<int> members) : Scope(std::vector<int>(members)) {}

  const std::vector<int> &members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool contains(int var) const;

  friend bool operator==(const Scope &, const Scope &) = default;

 private:
  std::vector<int> members_;
};

/// Assignment of value indices to a subset of the model's variables.
/// Unassigned variables hold kUnassigned.
class JointAssignment {
 public:
  static constexpr int kUnassigned = -1;

  JointAssignment() = default;
  explicit JointAssignment(std::size_t num_variables) : values_(num_variables, kUnassigned) {}
  explicit JointAssignment(std::vector<int> values) : values_(std::move(values)) {}

  std::size_t num_variables() const { return values_.size(); }
  int operator[](int var) const { return values_[static_cast<std::size_t>(var)]; }
  bool assigned(int var) const { return values_[static_cast<std::size_t>(var)] != kUnassigned; }
  void set(int var, int value) { values_[static_cast<std::size_t>(var)] = value; }
  void clear(int var) { values_[static_cast<std::size_t>(var)] = kUnassigned; }

  /// Ids of assigned variables, ascending.
  std::vector<int> scope() const;
  const std::vector<int> &values() const { return values_; }

  friend bool operator==(const JointAssignment &, const JointAssignment &) = default;
  friend auto operator<=>(const JointAssignment &, const JointAssignment &) = default;

 private:
  std::vector<int> values_;
};

/// One-hot-per-block binary vector v(x): positions of the ones, ascending.
struct CoefficientVector {
  std::vector<std::size_t> indices;
  std::size_t dimension = 0;

  std::vector<double> dense() const;
  friend bool operator==(const CoefficientVector &, const CoefficientVector &) = default;
};

/// Variables, their action/context split and the declared potential scopes.
/// Immutable after construction.
class DecomposableModel {
 public:
  DecomposableModel(std::vector<VariableSpec> variables, std::vector<Scope> scopes);

  std::size_t num_variables() const { return variables_.size(); }
  const std::vector<VariableSpec> &variables() const { return variables_; }
  const VariableSpec &variable(int id) const { return variables_[static_cast<std::size_t>(id)]; }
  int domain_size(int id) const { return variable(id).domain_size; }
  bool is_action(int id) const { return variable(id).kind == VariableKind::kAction; }

  const std::vector<int> &action_variables() const { return actions_; }
  const std::vector<int> &context_variables() const { return contexts_; }

  const std::vector<Scope> &scopes() const { return scopes_; }
  std::size_t num_scopes() const { return scopes_.size(); }

  /// k = max |P|.
  int arity_bound() const { return arity_; }
  /// m = max |X_i|.
  int max_domain_size() const { return max_domain_; }
  /// N = sum over scopes of the product of member domain sizes.
  std::size_t dimension() const { return dimension_; }

  std::size_t block_offset(std::size_t scope) const { return offsets_[scope]; }
  std::size_t block_size(std::size_t scope) const { return offsets_[scope + 1] - offsets_[scope]; }

  /// Position of x_P inside block `scope`: lexicographic with the lowest
  /// variable id most significant.
  std::size_t local_index(std::size_t scope, const JointAssignment &x) const;
  /// Inverse of local_index: writes the scope's members into `x`.
  void decode_local(std::size_t scope, std::size_t local, JointAssignment &x) const;

  bool is_complete(const JointAssignment &x) const;
  /// Throws ModelError if any value is out of range or the size is wrong.
  void check_assignment(const JointAssignment &x) const;

  /// Number of complete assignments restricted to `vars` (saturates at SIZE_MAX).
  std::size_t count_assignments(std::span<const int> vars) const;

 private:
  std::vector<VariableSpec> variables_;
  std::vector<Scope> scopes_;
  std::vector<int> actions_;
  std::vector<int> contexts_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::size_t>> strides_;
  std::size_t dimension_ = 0;
  int arity_ = 0;
  int max_domain_ = 0;
};

struct InteractionGraph {
  std::size_t num_vertices = 0;
  /// Sorted pairs (i < j), ascending.
  std::vector<std::pair<int, int>> edges;
  /// Action variables, ascending.
  std::vector<int> action_vertices;
  /// Edges of G restricted to action variables.
  std::vector<std::pair<int, int>> action_edges;

  bool has_edge(int a, int b) const;
};

/// Graph on an explicit vertex subset; the input to tree decomposition.
struct Subgraph {
  std::vector<int> vertices;
  std::vector<std::pair<int, int>> edges;
};

InteractionGraph build_interaction_graph(const DecomposableModel &model);
Subgraph action_subgraph(const InteractionGraph &graph);

CoefficientVector coefficient_vector(const DecomposableModel &model, const JointAssignment &x);

/// Fills every unassigned action variable of `partial` from `defaults`.
/// Context variables must already be assigned in `partial`.
JointAssignment complete_with_defaults(const DecomposableModel &model, const JointAssignment &partial,
                                       const JointAssignment &defaults);

/// Value index 0 on every action variable, context unassigned.
JointAssignment default_action(const DecomposableModel &model);

/// Advances `x` over the variables `vars` in lexicographic order (first
/// listed variable most significant). Returns false after the last one,
/// leaving `x` reset to all zeros on `vars`.
bool next_assignment(const DecomposableModel &model, std::span<const int> vars, JointAssignment &x);

/// Compact "v0:v1:..." rendering of the values at `vars`.
std::string format_values(const JointAssignment &x, std::span<const int> vars);

}  // namespace gbandit
