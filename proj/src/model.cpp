#include "gbandit/model.h"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

namespace gbandit {

Scope::Scope(std::vector<int> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (members_.empty()) throw ModelError("scope must be nonempty");
}

bool Scope::contains(int var) const { return std::binary_search(members_.begin(), members_.end(), var); }

std::vector<int> JointAssignment::scope() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (values_[i] != kUnassigned) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<double> CoefficientVector::dense() const {
  std::vector<double> out(dimension, 0.0);
  for (auto i : indices) out[i] = 1.0;
  return out;
}

DecomposableModel::DecomposableModel(std::vector<VariableSpec> variables, std::vector<Scope> scopes)
    : variables_(std::move(variables)), scopes_(std::move(scopes)) {
  const int n = static_cast<int>(variables_.size());
  if (n == 0) throw ModelError("model has no variables");
  for (int i = 0; i < n; ++i) {
    const auto &v = variables_[static_cast<std::size_t>(i)];
    if (v.id != i) throw ModelError("variable ids must be contiguous from 0; found id " + std::to_string(v.id) +
                                    " at position " + std::to_string(i));
    if (v.domain_size < 2)
      throw ModelError("variable " + std::to_string(i) + " has domain size " + std::to_string(v.domain_size) +
                       " (< 2)");
    (v.kind == VariableKind::kAction ? actions_ : contexts_).push_back(i);
    max_domain_ = std::max(max_domain_, v.domain_size);
  }
  if (scopes_.empty()) throw ModelError("model has no scopes");

  std::set<std::vector<int>> seen;
  offsets_.push_back(0);
  for (std::size_t s = 0; s < scopes_.size(); ++s) {
    const auto &members = scopes_[s].members();
    if (members.empty()) throw ModelError("scope " + std::to_string(s) + " is empty");
    for (int var : members)
      if (var < 0 || var >= n)
        throw ModelError("scope " + std::to_string(s) + " references unknown variable " + std::to_string(var));
    if (!seen.insert(members).second) throw ModelError("duplicate scope at position " + std::to_string(s));
    arity_ = std::max(arity_, static_cast<int>(members.size()));

    std::vector<std::size_t> stride(members.size());
    std::size_t block = 1;
    for (std::size_t j = members.size(); j-- > 0;) {
      stride[j] = block;
      block *= static_cast<std::size_t>(domain_size(members[j]));
    }
    strides_.push_back(std::move(stride));
    offsets_.push_back(offsets_.back() + block);
  }
  dimension_ = offsets_.back();
}

std::size_t DecomposableModel::local_index(std::size_t scope, const JointAssignment &x) const {
  const auto &members = scopes_[scope].members();
  const auto &stride = strides_[scope];
  std::size_t idx = 0;
  for (std::size_t j = 0; j < members.size(); ++j) {
    const int value = x[members[j]];
    if (value == JointAssignment::kUnassigned)
      throw ModelError("variable " + std::to_string(members[j]) + " is unassigned");
    idx += static_cast<std::size_t>(value) * stride[j];
  }
  return idx;
}

void DecomposableModel::decode_local(std::size_t scope, std::size_t local, JointAssignment &x) const {
  const auto &members = scopes_[scope].members();
  const auto &stride = strides_[scope];
  for (std::size_t j = 0; j < members.size(); ++j) {
    x.set(members[j], static_cast<int>(local / stride[j]));
    local %= stride[j];
  }
}

bool DecomposableModel::is_complete(const JointAssignment &x) const {
  if (x.num_variables() != variables_.size()) return false;
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (!x.assigned(static_cast<int>(i))) return false;
  return true;
}

void DecomposableModel::check_assignment(const JointAssignment &x) const {
  if (x.num_variables() != variables_.size())
    throw ModelError("assignment covers " + std::to_string(x.num_variables()) + " variables, model has " +
                     std::to_string(variables_.size()));
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const int value = x[static_cast<int>(i)];
    if (value != JointAssignment::kUnassigned && (value < 0 || value >= variables_[i].domain_size))
      throw ModelError("value " + std::to_string(value) + " out of range for variable " + std::to_string(i));
  }
}

std::size_t DecomposableModel::count_assignments(std::span<const int> vars) const {
  std::size_t total = 1;
  for (int v : vars) {
    const auto d = static_cast<std::size_t>(domain_size(v));
    if (total > std::numeric_limits<std::size_t>::max() / d) return std::numeric_limits<std::size_t>::max();
    total *= d;
  }
  return total;
}

bool InteractionGraph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
}

InteractionGraph build_interaction_graph(const DecomposableModel &model) {
  std::set<std::pair<int, int>> edges;
  for (const auto &scope : model.scopes()) {
    const auto &m = scope.members();
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = i + 1; j < m.size(); ++j) edges.emplace(m[i], m[j]);
  }
  InteractionGraph g;
  g.num_vertices = model.num_variables();
  g.edges.assign(edges.begin(), edges.end());
  g.action_vertices = model.action_variables();
  for (const auto &[a, b] : g.edges)
    if (model.is_action(a) && model.is_action(b)) g.action_edges.emplace_back(a, b);
  return g;
}

Subgraph action_subgraph(const InteractionGraph &graph) { return {graph.action_vertices, graph.action_edges}; }

CoefficientVector coefficient_vector(const DecomposableModel &model, const JointAssignment &x) {
  model.check_assignment(x);
  if (!model.is_complete(x)) {
    std::ostringstream msg;
    msg << "coefficient vector needs a complete assignment; missing variables:";
    for (std::size_t i = 0; i < model.num_variables(); ++i)
      if (!x.assigned(static_cast<int>(i))) msg << ' ' << i;
    throw ModelError(msg.str());
  }
  CoefficientVector v;
  v.dimension = model.dimension();
  v.indices.reserve(model.num_scopes());
  for (std::size_t s = 0; s < model.num_scopes(); ++s) v.indices.push_back(model.block_offset(s) + model.local_index(s, x));
  return v;
}

JointAssignment complete_with_defaults(const DecomposableModel &model, const JointAssignment &partial,
                                       const JointAssignment &defaults) {
  model.check_assignment(partial);
  model.check_assignment(defaults);
  std::vector<int> missing;
  for (int c : model.context_variables())
    if (!partial.assigned(c)) missing.push_back(c);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "context variables must be assigned before completion; missing:";
    for (int c : missing) msg << ' ' << c;
    throw ModelError(msg.str());
  }
  JointAssignment out = partial;
  for (int a : model.action_variables()) {
    if (out.assigned(a)) continue;
    if (!defaults.assigned(a)) throw ModelError("defaults do not cover action variable " + std::to_string(a));
    out.set(a, defaults[a]);
  }
  return out;
}

JointAssignment default_action(const DecomposableModel &model) {
  JointAssignment x(model.num_variables());
  for (int a : model.action_variables()) x.set(a, 0);
  return x;
}

bool next_assignment(const DecomposableModel &model, std::span<const int> vars, JointAssignment &x) {
  for (std::size_t j = vars.size(); j-- > 0;) {
    const int var = vars[j];
    const int next = x[var] + 1;
    if (next < model.domain_size(var)) {
      x.set(var, next);
      return true;
    }
    x.set(var, 0);
  }
  return false;
}

std::string format_values(const JointAssignment &x, std::span<const int> vars) {
  std::string out;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    if (j) out += ':';
    out += std::to_string(x[vars[j]]);
  }
  return out;
}

}  // namespace gbandit
