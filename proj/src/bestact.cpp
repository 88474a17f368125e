#include "gbandit/bestact.h"

#include <algorithm>
#include <cmath>
#include <set>

namespace gbandit {

std::size_t OracleSession::Hash::operator()(const std::vector<int> &v) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int x : v) {
    h ^= static_cast<std::size_t>(x + 1);
    h *= 0x100000001b3ULL;
  }
  return h;
}

OracleReply OracleSession::query(const JointAssignment &complete) {
  ++lookups_;
  auto [it, inserted] = memo_.try_emplace(complete.values());
  if (inserted) {
    ++calls_;
    it->second = oracle_(complete);
  }
  return it->second;
}

BestAct::BestAct(const DecomposableModel &model, TreeDecomposition td, JointAssignment defaults)
    : model_(model), td_(std::move(td)), defaults_(std::move(defaults)) {
  model_.check_assignment(defaults_);
  for (int a : model_.action_variables())
    if (!defaults_.assigned(a)) throw ModelError("defaults must assign action variable " + std::to_string(a));

  std::set<int> covered;
  for (const auto &bag : td_.bags)
    for (int v : bag) {
      if (v < 0 || v >= static_cast<int>(model_.num_variables()) || !model_.is_action(v))
        throw ModelError("decomposition bag holds non-action variable " + std::to_string(v));
      covered.insert(v);
    }
  for (int a : model_.action_variables())
    if (!covered.count(a)) throw ModelError("decomposition misses action variable " + std::to_string(a));
  if (model_.action_variables().empty()) return;

  rooted_ = root_tree(td_);
  plans_.resize(td_.bags.size());
  for (int b : rooted_.postorder) {
    auto &plan = plans_[static_cast<std::size_t>(b)];
    const auto &bag = td_.bags[static_cast<std::size_t>(b)];
    const int p = rooted_.parent[static_cast<std::size_t>(b)];
    if (p >= 0) {
      const auto &pbag = td_.bags[static_cast<std::size_t>(p)];
      std::set_intersection(bag.begin(), bag.end(), pbag.begin(), pbag.end(), std::back_inserter(plan.separator));
    }
    std::set_difference(bag.begin(), bag.end(), plan.separator.begin(), plan.separator.end(),
                        std::back_inserter(plan.free_vars));
    plan.children = rooted_.children[static_cast<std::size_t>(b)];
    std::vector<int> subtree = plan.free_vars;
    for (int c : plan.children) {
      const auto &cs = plans_[static_cast<std::size_t>(c)].subtree_vars;
      subtree.insert(subtree.end(), cs.begin(), cs.end());
    }
    std::sort(subtree.begin(), subtree.end());
    subtree.erase(std::unique(subtree.begin(), subtree.end()), subtree.end());
    plan.subtree_vars = std::move(subtree);
  }
}

double BestAct::call_bound() const {
  const double m = model_.max_domain_size();
  return std::pow(m, 2.0 * td_.width) * static_cast<double>(td_.num_edges() + 1);
}

JointAssignment BestAct::base_assignment(const JointAssignment &context) const {
  model_.check_assignment(context);
  JointAssignment base = defaults_;
  for (int c : model_.context_variables()) {
    if (!context.assigned(c)) throw ModelError("context variable " + std::to_string(c) + " is unassigned");
    base.set(c, context[c]);
  }
  return base;
}

std::size_t BestAct::separator_rank(const BagPlan &plan, const JointAssignment &x) const {
  std::size_t rank = 0;
  for (int v : plan.separator) rank = rank * static_cast<std::size_t>(model_.domain_size(v)) + static_cast<std::size_t>(x[v]);
  return rank;
}

std::optional<DpTable> BestAct::process_bag(int bag, const JointAssignment &context, const std::vector<DpTable> &tables,
                                            OracleSession &session, JointAssignment &abstained) const {
  const BagPlan &plan = plans_.at(static_cast<std::size_t>(bag));
  for (int c : plan.children)
    if (tables.at(static_cast<std::size_t>(c)).bag != c)
      throw std::logic_error("child bag " + std::to_string(c) + " not processed before bag " + std::to_string(bag));

  DpTable table;
  table.bag = bag;
  table.separator = plan.separator;
  table.free_vars = plan.free_vars;
  table.subtree_vars = plan.subtree_vars;
  table.rows.resize(model_.count_assignments(plan.separator));

  const JointAssignment base = base_assignment(context);
  JointAssignment query = base;
  for (int v : plan.separator) query.set(v, 0);
  do {
    DpRow &row = table.rows[separator_rank(plan, query)];
    for (int v : plan.free_vars) query.set(v, 0);
    bool have_best = false;
    do {
      for (int c : plan.children) {
        const auto &child = tables[static_cast<std::size_t>(c)];
        const auto &ext = child.rows[separator_rank(plans_[static_cast<std::size_t>(c)], query)].extension;
        for (std::size_t j = 0; j < child.subtree_vars.size(); ++j) query.set(child.subtree_vars[j], ext[j]);
      }
      std::optional<double> value;
      if (!plan.free_vars.empty()) {
        const OracleReply reply = session.query(query);
        if (reply.abstained()) {
          abstained = query;
          return std::nullopt;
        }
        value = reply.value;
      }
      // Candidates arrive in lexicographic order, so strict improvement
      // keeps the smallest assignment among ties.
      if (!have_best || (value && *value > *row.value)) {
        have_best = true;
        row.value = value;
        row.extension.resize(plan.subtree_vars.size());
        for (std::size_t j = 0; j < plan.subtree_vars.size(); ++j) row.extension[j] = query[plan.subtree_vars[j]];
      }
    } while (next_assignment(model_, plan.free_vars, query));
  } while (next_assignment(model_, plan.separator, query));
  return table;
}

BestActResult BestAct::run(const JointAssignment &context, const PayoffOracle &oracle) const {
  BestActResult result;
  OracleSession session(oracle);
  JointAssignment played = base_assignment(context);

  if (!plans_.empty()) {
    std::vector<DpTable> tables(plans_.size());
    JointAssignment abstained;
    for (int b : rooted_.postorder) {
      auto table = process_bag(b, context, tables, session, abstained);
      if (!table) {
        result.played = std::move(abstained);
        result.interrupted = true;
        result.oracle_calls = session.calls();
        result.oracle_lookups = session.lookups();
        return result;
      }
      tables[static_cast<std::size_t>(b)] = std::move(*table);
    }
    const auto &root = tables[static_cast<std::size_t>(td_.root)];
    const auto &ext = root.rows.front().extension;
    for (std::size_t j = 0; j < root.subtree_vars.size(); ++j) played.set(root.subtree_vars[j], ext[j]);
  }
  result.played = std::move(played);
  result.oracle_calls = session.calls();
  result.oracle_lookups = session.lookups();
  return result;
}

}  // namespace gbandit
