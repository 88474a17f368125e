#include <doctest.h>

#include <cmath>
#include <set>

#include "gbandit/env.h"
#include "gbandit/model.h"
#include "oracles.h"

using namespace gbandit;

namespace {

std::vector<GeneratedInstance> small_corpus(int count) {
  std::vector<GeneratedInstance> out;
  for (int i = 0; i < count; ++i) {
    GeneratorSpec spec;
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    spec.n_action = 1 + i % 5;
    spec.n_context = i % 3;
    spec.arity = 1 + i % 3;
    spec.domain_max = 2 + i % 2;
    spec.family = i % 2 ? GraphFamily::kSparse : GraphFamily::kTree;
    spec.width = 3;
    out.push_back(generate_model(spec));
  }
  return out;
}

std::vector<int> dense_of(const CoefficientVector &v) {
  std::vector<int> d(v.dimension, 0);
  for (auto i : v.indices) d[i] = 1;
  return d;
}

}  // namespace

TEST_CASE("scopes are sorted and deduplicated") {
  Scope s{3, 1, 3, 2};
  CHECK(s.members() == std::vector<int>{1, 2, 3});
  CHECK(s.contains(2));
  CHECK_FALSE(s.contains(0));
  CHECK_THROWS_AS(Scope(std::vector<int>{}), ModelError);
}

TEST_CASE("model construction rejects malformed input") {
  using V = VariableSpec;
  CHECK_THROWS_AS(DecomposableModel({}, {Scope{0}}), ModelError);
  CHECK_THROWS_AS(DecomposableModel({V{0, 1}}, {Scope{0}}), ModelError);
  CHECK_THROWS_AS(DecomposableModel({V{0, 2}, V{2, 2}}, {Scope{0}}), ModelError);
  CHECK_THROWS_AS(DecomposableModel({V{0, 2}}, {}), ModelError);
  CHECK_THROWS_AS(DecomposableModel({V{0, 2}}, {Scope{0, 1}}), ModelError);
  CHECK_THROWS_AS(DecomposableModel({V{0, 2}, V{1, 2}}, {Scope{0, 1}, Scope{1, 0}}), ModelError);
}

TEST_CASE("derived sizes: arity bound, max domain, dimension") {
  const auto inst = sponsored_search(0, {3, 2, 4});
  const auto &m = inst.model;
  CHECK(m.arity_bound() == 3);
  CHECK(m.max_domain_size() == 4);
  // 3*2*3 + 4*2*3 + 3*3 + 3*3
  CHECK(m.dimension() == 18 + 24 + 9 + 9);
  CHECK(m.action_variables() == std::vector<int>{0, 1, 2, 3});
  CHECK(m.context_variables() == std::vector<int>{4, 5});
  std::size_t sum = 0;
  for (std::size_t s = 0; s < m.num_scopes(); ++s) {
    CHECK(m.block_offset(s) == sum);
    sum += m.block_size(s);
  }
  CHECK(sum == m.dimension());
}

TEST_CASE("sponsored search interaction graph has the seven expected edges") {
  const auto inst = sponsored_search(0);
  const auto g = build_interaction_graph(inst.model);
  enum { yo, yc, yd, yh, xo, xd };
  const std::vector<std::pair<int, int>> expected{{yo, yc}, {yo, yd}, {yo, xo}, {yc, yd},
                                                  {yc, yh}, {yd, yh}, {yd, xd}};
  CHECK(g.edges == expected);
  CHECK(g.action_edges == std::vector<std::pair<int, int>>{{yo, yc}, {yo, yd}, {yc, yd}, {yc, yh}, {yd, yh}});
  CHECK(g.action_vertices == std::vector<int>{yo, yc, yd, yh});
  CHECK(g.has_edge(yd, yo));
  CHECK_FALSE(g.has_edge(yo, yh));
}

TEST_CASE("single full scope gives the complete graph, unary scopes give none") {
  const auto full = full_scope_model({2, 3, 2, 2});
  CHECK(build_interaction_graph(full).edges.size() == 6);
  CHECK(build_interaction_graph(unary_model(5)).edges.empty());
}

TEST_CASE("interaction graph matches scope co-occurrence on random models") {
  for (const auto &inst : small_corpus(60)) {
    const auto g = build_interaction_graph(inst.model);
    const auto expected = oracle::interaction_edges(inst.model);
    CHECK(std::set<std::pair<int, int>>(g.edges.begin(), g.edges.end()) == expected);
    const auto sub = action_subgraph(g);
    for (const auto &[a, b] : sub.edges) {
      CHECK(inst.model.is_action(a));
      CHECK(inst.model.is_action(b));
      CHECK(expected.count({a, b}) == 1);
    }
    std::size_t action_edges = 0;
    for (const auto &[a, b] : expected) action_edges += inst.model.is_action(a) && inst.model.is_action(b);
    CHECK(sub.edges.size() == action_edges);
  }
}

TEST_CASE("coefficient vector of the two-potential toy at (a, b, a)") {
  const auto toy = sum_product_toy();
  const JointAssignment x(std::vector<int>{0, 1, 0});
  const auto v = coefficient_vector(toy.model, x);
  CHECK(v.dense() == std::vector<double>{0, 1, 0, 0, 0, 0, 1, 0});
  CHECK(v.indices == std::vector<std::size_t>{1, 6});
}

TEST_CASE("unary binary scope at value 0 is (1, 0)") {
  const auto m = unary_model(1);
  CHECK(coefficient_vector(m, JointAssignment(std::vector<int>{0})).dense() == std::vector<double>{1, 0});
  CHECK(coefficient_vector(m, JointAssignment(std::vector<int>{1})).dense() == std::vector<double>{0, 1});
}

TEST_CASE("coefficient vector needs a complete assignment") {
  const auto inst = sponsored_search(0);
  JointAssignment x(inst.model.num_variables());
  x.set(0, 1);
  x.set(4, 0);
  try {
    coefficient_vector(inst.model, x);
    FAIL("expected an error");
  } catch (const ModelError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("1") != std::string::npos);
    CHECK(msg.find("5") != std::string::npos);
  }
  JointAssignment bad(std::vector<int>{0, 0, 0, 0, 0, 2});
  CHECK_THROWS_AS(coefficient_vector(inst.model, bad), ModelError);
}

TEST_CASE("f . v(x) equals F(x) on 200 random models") {
  int checked = 0;
  for (const auto &inst : small_corpus(200)) {
    const auto f = inst.truth.payoff_vector();
    for (const auto &x : oracle::complete_assignments(inst.model)) {
      const auto v = coefficient_vector(inst.model, x);
      CHECK(v.indices.size() == inst.model.num_scopes());
      CHECK(dense_of(v) == oracle::coefficient_column(inst.model, x));
      double dot = 0.0;
      for (auto i : v.indices) dot += f[i];
      const double direct = oracle::evaluate(inst.model, inst.truth.tables(), x);
      CHECK(dot == direct);
      CHECK(inst.truth.evaluate(inst.model, x) == direct);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("one-hot per block and N <= (mn)^k") {
  for (const auto &inst : small_corpus(100)) {
    const auto &m = inst.model;
    for (const auto &x : oracle::complete_assignments(m)) {
      const auto v = coefficient_vector(m, x);
      for (std::size_t s = 0; s < m.num_scopes(); ++s) {
        int hits = 0;
        for (auto i : v.indices) hits += i >= m.block_offset(s) && i < m.block_offset(s) + m.block_size(s);
        CHECK(hits == 1);
      }
    }
    const double bound = std::pow(static_cast<double>(m.max_domain_size() * m.num_variables()), m.arity_bound());
    CHECK(static_cast<double>(m.dimension()) <= bound);
  }
}

TEST_CASE("complete_with_defaults") {
  const auto inst = sponsored_search(3);
  const auto &m = inst.model;
  const auto defaults = default_action(m);
  for (int a : m.action_variables()) CHECK(defaults[a] == 0);

  SUBCASE("a complete assignment is unchanged") {
    const JointAssignment x(std::vector<int>{1, 0, 1, 1, 0, 1});
    CHECK(complete_with_defaults(m, x, defaults) == x);
  }
  SUBCASE("a context alone gets the defaults on every action") {
    JointAssignment ctx(m.num_variables());
    ctx.set(4, 1);
    ctx.set(5, 0);
    CHECK(complete_with_defaults(m, ctx, defaults).values() == std::vector<int>{0, 0, 0, 0, 1, 0});
  }
  SUBCASE("missing context variables are an error") {
    JointAssignment partial(m.num_variables());
    partial.set(4, 1);
    CHECK_THROWS_AS(complete_with_defaults(m, partial, defaults), ModelError);
  }
  SUBCASE("changing one action only moves scopes that contain it") {
    for (int a : m.action_variables()) {
      JointAssignment ctx(m.num_variables());
      ctx.set(4, 1);
      ctx.set(5, 1);
      JointAssignment p0 = ctx;
      JointAssignment p1 = ctx;
      p0.set(a, 0);
      p1.set(a, 1);
      const auto x0 = complete_with_defaults(m, p0, defaults);
      const auto x1 = complete_with_defaults(m, p1, defaults);
      double local = 0.0;
      for (std::size_t s = 0; s < m.num_scopes(); ++s)
        if (m.scopes()[s].contains(a))
          local += inst.truth.tables()[s][oracle::table_row(m, s, x1)] - inst.truth.tables()[s][oracle::table_row(m, s, x0)];
      CHECK(inst.truth.evaluate(m, x1) - inst.truth.evaluate(m, x0) == doctest::Approx(local).epsilon(1e-12));
    }
  }
}

TEST_CASE("next_assignment walks every assignment once") {
  const auto m = full_scope_model({2, 3, 2});
  const std::vector<int> vars{0, 1, 2};
  JointAssignment x(std::vector<int>{0, 0, 0});
  std::set<std::vector<int>> seen;
  do {
    seen.insert(x.values());
  } while (next_assignment(m, vars, x));
  CHECK(seen.size() == 12);
  CHECK(x.values() == std::vector<int>{0, 0, 0});
  CHECK(format_values(JointAssignment(std::vector<int>{1, 2, 0}), vars) == "1:2:0");
  CHECK(m.count_assignments(vars) == 12);
}

TEST_CASE("local index round trip") {
  const auto inst = sponsored_search(0, {3, 2, 2});
  const auto &m = inst.model;
  for (std::size_t s = 0; s < m.num_scopes(); ++s)
    for (std::size_t i = 0; i < m.block_size(s); ++i) {
      JointAssignment x(m.num_variables());
      m.decode_local(s, i, x);
      CHECK(m.local_index(s, x) == i);
      CHECK(oracle::table_row(m, s, x) == i);
    }
}
