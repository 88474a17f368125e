#include <doctest.h>

#include <cmath>

#include "gbandit/env.h"
#include "gbandit/payest.h"
#include "gbandit/rng.h"
#include "oracles.h"

using namespace gbandit;

namespace {

CoefficientVector basis_vector(std::size_t i, std::size_t n) { return {{i}, n}; }

template <class Learner>
void span_matches_rank(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.seed = seed;
  spec.n_action = 2 + static_cast<int>(seed % 3);
  spec.n_context = static_cast<int>(seed % 2);
  spec.arity = 2;
  spec.domain_max = 3;
  const auto inst = generate_model(spec);
  auto xs = oracle::complete_assignments(inst.model);
  Rng rng(seed, Rng::Role::kQueries);
  rng.shuffle(xs.begin(), xs.end());
  Learner learner(inst.model.dimension());
  for (const auto &x : xs) {
    const auto phi = coefficient_vector(inst.model, x);
    const double truth = oracle::evaluate(inst.model, inst.truth.tables(), x);
    const auto p = learner.predict(phi);
    if (p.abstained()) learner.observe(phi, truth);
    else CHECK(std::abs(*p.value - truth) <= 1e-9);
  }
  CHECK(learner.abstain_count() == oracle::coefficient_rank(inst.model));
  CHECK(learner.rank() == learner.abstain_count());
  CHECK(learner.query_count() == xs.size());
}

KwikParams params(double eps = 0.1) {
  KwikParams p;
  p.epsilon = eps;
  p.delta = 0.1;
  p.query_cap = 1000;
  return p;
}

}  // namespace

TEST_CASE_TEMPLATE("span learner basics", Learner, FloatSpanLearner, ExactSpanLearner) {
  Learner l(4);
  const CoefficientVector a{{0, 2}, 4};
  const CoefficientVector b{{1, 2}, 4};
  const CoefficientVector c{{0, 3}, 4};
  const CoefficientVector d{{1, 3}, 4};

  SUBCASE("empty learner abstains") { CHECK(l.predict(a).abstained()); }
  SUBCASE("an observed vector is predicted exactly") {
    REQUIRE(l.predict(a).abstained());
    l.observe(a, 0.3);
    CHECK(l.rank() == 1);
    const auto p = l.predict(a);
    REQUIRE_FALSE(p.abstained());
    CHECK(*p.value == 0.3);
  }
  SUBCASE("linear combinations are predicted from the span") {
    for (auto [v, y] : {std::pair{a, 0.1}, std::pair{b, 0.4}, std::pair{c, 0.25}}) {
      REQUIRE(l.predict(v).abstained());
      l.observe(v, y);
    }
    CHECK(l.rank() == 3);
    // d = b + c - a
    const auto p = l.predict(d);
    REQUIRE_FALSE(p.abstained());
    CHECK(*p.value == doctest::Approx(0.4 + 0.25 - 0.1).epsilon(1e-12));
  }
  SUBCASE("protocol violations") {
    CHECK_THROWS_AS(l.observe(a, 0.1), ProtocolError);
    REQUIRE(l.predict(a).abstained());
    CHECK_THROWS_AS(l.observe(b, 0.1), ProtocolError);
    l.observe(a, 0.1);
    CHECK_FALSE(l.predict(a).abstained());
    CHECK_THROWS_AS(l.observe(a, 0.1), ProtocolError);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(l.predict(basis_vector(0, 5)), ModelError);
  }
}

TEST_CASE("span learner abstains exactly rank(M) times over every complete assignment") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    span_matches_rank<FloatSpanLearner>(seed);
    span_matches_rank<ExactSpanLearner>(seed);
  }
}

TEST_CASE("basis insert with a zero residual is a protocol error") {
  SpanBasis<double> basis(3);
  CHECK(basis.add({1, 1, 0}, 0.5));
  CHECK_FALSE(basis.add({2, 2, 0}, 1.0));
  CHECK_THROWS_AS(basis.insert_residual({0, 0, 0}, 0.0), ProtocolError);
}

TEST_CASE("kwik: a fresh learner has width sqrt(|P|) and abstains") {
  KwikLearner l(8, params());
  const CoefficientVector phi{{0, 2, 4, 6}, 8};
  CHECK(l.width(phi) == doctest::Approx(2.0));
  CHECK(l.predict(phi).abstained());
  CHECK(l.abstain_count() == 1);
}

TEST_CASE("kwik: one observation shrinks the width only along phi") {
  KwikLearner l(6, params());
  const CoefficientVector phi{{0, 3}, 6};
  const CoefficientVector psi{{1, 4}, 6};
  const CoefficientVector mixed{{0, 4}, 6};
  const double before = l.width(phi);
  const double before_psi = l.width(psi);
  const double before_mixed = l.width(mixed);
  REQUIRE(l.predict(phi).abstained());
  l.observe(phi, 0.7);
  CHECK(l.width(phi) < before);
  CHECK(l.width(psi) == before_psi);
  CHECK(l.width(mixed) <= before_mixed);
}

TEST_CASE("kwik: repeated noiseless observations converge to the closed-form ridge estimate") {
  const auto p = params(0.1);
  KwikLearner l(8, p);
  const CoefficientVector phi{{0, 2, 4, 6}, 8};
  const double y = 0.62;
  const double theta = p.threshold();
  const auto cap = static_cast<std::size_t>(10 * std::ceil(4.0 / (theta * theta)));
  std::size_t n = 0;
  while (l.predict(phi).abstained()) {
    l.observe(phi, y);
    REQUIRE(++n <= cap);
  }
  const auto pred = l.predict(phi);
  REQUIRE_FALSE(pred.abstained());
  // Ridge with lambda = 1 on n copies of phi: phi^T w = y * |phi|^2 n / (1 + |phi|^2 n).
  const double closed = y * 4.0 * static_cast<double>(n) / (1.0 + 4.0 * static_cast<double>(n));
  CHECK(*pred.value == doctest::Approx(closed).epsilon(1e-9));
  CHECK(std::abs(*pred.value - y) <= p.epsilon);
  // Stopping rule: width^2 = 4 / (1 + 4n) has just dropped below theta^2.
  CHECK(4.0 / (1.0 + 4.0 * static_cast<double>(n)) <= theta * theta);
  CHECK(4.0 / (1.0 + 4.0 * static_cast<double>(n - 1)) > theta * theta);
}

TEST_CASE("kwik: widths never grow and the gram stays symmetric positive definite") {
  const auto inst = sponsored_search(2);
  KwikLearner l(inst.model.dimension(), params(0.2));
  auto xs = oracle::complete_assignments(inst.model);
  Rng rng(1, Rng::Role::kQueries);
  Rng noise(1, Rng::Role::kNoise);
  const auto probe = coefficient_vector(inst.model, xs[5]);
  double last = l.width(probe);
  for (int i = 0; i < 3000; ++i) {
    const auto &x = xs[rng.below(xs.size())];
    const auto phi = coefficient_vector(inst.model, x);
    if (l.predict(phi).abstained()) l.observe(phi, noise.bernoulli(inst.truth.evaluate(inst.model, x)) ? 1.0 : 0.0);
    const double w = l.width(probe);
    CHECK(w <= last + 1e-12);
    last = w;
  }
  CHECK(l.abstain_count() <= l.query_count());
  const Eigen::MatrixXd &a = l.gram();
  CHECK((a - a.transpose()).norm() == 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("kwik: payoff outside [0,1] and protocol errors") {
  KwikLearner l(4, params());
  const CoefficientVector phi{{1}, 4};
  REQUIRE(l.predict(phi).abstained());
  CHECK_THROWS_AS(l.observe(phi, 1.5), ModelError);
  CHECK_THROWS_AS(l.observe(phi, -0.1), ModelError);
  CHECK_THROWS_AS(l.observe(CoefficientVector{{2}, 4}, 0.5), ProtocolError);
  l.observe(phi, 0.5);
  CHECK_THROWS_AS(l.observe(phi, 0.5), ProtocolError);
  CHECK_THROWS_AS(l.predict(CoefficientVector{{1}, 3}), ModelError);
  KwikParams bad = params();
  bad.delta = 1.5;
  CHECK_THROWS_AS(KwikLearner(4, bad), ModelError);
}

TEST_CASE("kwik: predictions are clamped to [0,1]") {
  KwikParams p = params(0.5);
  p.confidence_scale = 50.0;
  KwikLearner l(1, p);
  const CoefficientVector phi{{0}, 1};
  while (l.predict(phi).abstained()) l.observe(phi, 1.0);
  const auto pred = l.predict(phi);
  CHECK(*pred.value <= 1.0);
  CHECK(*pred.value >= 0.0);
}

TEST_CASE("kwik: error rate stays under delta on a Bernoulli stream") {
  const auto model = full_scope_model({2, 2, 2});
  long preds = 0;
  long bad = 0;
  const double eps = 0.1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng mr(seed, Rng::Role::kModel);
    std::vector<double> table(8);
    for (auto &v : table) v = mr.uniform();
    const auto gt = normalize(model, GroundTruth(model, {table}));
    KwikParams p;
    p.epsilon = eps;
    p.delta = 0.1;
    p.query_cap = 20000;
    KwikLearner l(model.dimension(), p);
    Rng q(seed, Rng::Role::kQueries);
    Rng nz(seed, Rng::Role::kNoise);
    for (int i = 0; i < 20000; ++i) {
      const JointAssignment x(std::vector<int>{q.index(2), q.index(2), q.index(2)});
      const auto phi = coefficient_vector(model, x);
      const double f = gt.evaluate(model, x);
      const auto pr = l.predict(phi);
      if (pr.abstained()) {
        l.observe(phi, nz.bernoulli(f) ? 1.0 : 0.0);
      } else {
        ++preds;
        bad += std::abs(*pr.value - f) > eps;
      }
    }
  }
  const double rate = static_cast<double>(bad) / static_cast<double>(preds);
  const double se = std::sqrt(0.1 * 0.9 / static_cast<double>(preds));
  MESSAGE("violation rate " << rate);
  CHECK(rate <= 0.1 + 2.0 * se);
}

TEST_CASE("snapshots restore learners that continue bit-for-bit") {
  const auto inst = sponsored_search(9);
  auto xs = oracle::complete_assignments(inst.model);
  for (auto mode : {EstimatorMode::kKwik, EstimatorMode::kDeterministic}) {
    auto learner = make_estimator(mode, inst.model.dimension(), params(0.2));
    Rng rng(4, Rng::Role::kQueries);
    Rng noise(4, Rng::Role::kNoise);
    auto step = [&](PayoffEstimator &l, Rng &r, Rng &nz, std::vector<std::optional<double>> &log) {
      const auto &x = xs[r.below(xs.size())];
      const auto phi = coefficient_vector(inst.model, x);
      const auto p = l.predict(phi);
      log.push_back(p.value);
      const double f = inst.truth.evaluate(inst.model, x);
      if (p.abstained()) l.observe(phi, mode == EstimatorMode::kKwik ? (nz.bernoulli(f) ? 1.0 : 0.0) : f);
    };
    std::vector<std::optional<double>> warmup;
    for (int i = 0; i < 200; ++i) step(*learner, rng, noise, warmup);

    const auto snap = learner->snapshot();
    auto restored = restore_estimator(nlohmann::ordered_json::parse(snap.dump()));
    CHECK(restored->snapshot() == snap);

    Rng r1 = rng;
    Rng r2 = rng;
    Rng n1 = noise;
    Rng n2 = noise;
    std::vector<std::optional<double>> a;
    std::vector<std::optional<double>> b;
    for (int i = 0; i < 300; ++i) {
      step(*learner, r1, n1, a);
      step(*restored, r2, n2, b);
    }
    CHECK(a == b);
    CHECK(learner->abstain_count() == restored->abstain_count());
  }
  ExactSpanLearner exact(3);
  REQUIRE(exact.predict(CoefficientVector{{0}, 3}).abstained());
  exact.observe(CoefficientVector{{0}, 3}, 0.1);
  const auto snap = exact.snapshot();
  CHECK(snap["scalar"] == "rational");
  auto back = restore_estimator(snap);
  CHECK(*back->predict(CoefficientVector{{0}, 3}).value == 0.1);

  auto broken = snap;
  broken["version"] = 99;
  CHECK_THROWS(restore_estimator(broken));
  broken["format"] = "nope";
  CHECK_THROWS(restore_estimator(broken));
}
