#include "gbandit/payest.h"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace gbandit {
namespace detail {

std::string scalar_to_string(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string scalar_to_string(const ExactScalar &x) { return x.str(); }

void scalar_from_json(const nlohmann::ordered_json &j, double &out) {
  const std::string s = j.get<std::string>();
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc()) throw std::runtime_error("bad number in snapshot: " + s);
}

void scalar_from_json(const nlohmann::ordered_json &j, ExactScalar &out) { out = ExactScalar(j.get<std::string>()); }

}  // namespace detail

double KwikParams::threshold() const {
  if (!(epsilon > 0.0) || !(delta > 0.0) || !(delta < 1.0))
    throw ModelError("kwik parameters need epsilon > 0 and delta in (0,1)");
  if (!(query_cap >= 1.0)) throw ModelError("kwik query cap must be >= 1");
  return confidence_scale * epsilon / std::sqrt(std::log((1.0 + query_cap) / delta));
}

KwikLearner::KwikLearner(std::size_t dimension, KwikParams params)
    : params_(params),
      threshold_(params.threshold()),
      gram_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(dimension)) *
            params.ridge),
      gram_inv_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(dimension)) /
                params.ridge),
      moment_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension))),
      weights_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension))) {
  if (!(params.ridge > 0.0)) throw ModelError("ridge parameter must be positive");
}

void KwikLearner::check_dimension(const CoefficientVector &phi) const {
  if (phi.dimension != dimension())
    throw ModelError("coefficient vector has dimension " + std::to_string(phi.dimension) + ", learner expects " +
                     std::to_string(dimension()));
}

double KwikLearner::width(const CoefficientVector &phi) const {
  check_dimension(phi);
  double quad = 0.0;
  for (auto i : phi.indices)
    for (auto j : phi.indices) quad += gram_inv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return std::sqrt(std::max(quad, 0.0));
}

double KwikLearner::raw_estimate(const CoefficientVector &phi) const {
  check_dimension(phi);
  double est = 0.0;
  for (auto i : phi.indices) est += weights_(static_cast<Eigen::Index>(i));
  return est;
}

Prediction KwikLearner::predict(const CoefficientVector &phi) {
  ++queries_;
  if (width(phi) <= threshold_) {
    pending_.reset();
    return {std::clamp(raw_estimate(phi), 0.0, 1.0)};
  }
  ++abstains_;
  pending_ = phi;
  return {};
}

void KwikLearner::observe(const CoefficientVector &phi, double payoff) {
  check_dimension(phi);
  if (!(payoff >= 0.0 && payoff <= 1.0))
    throw ModelError("kwik payoff must lie in [0,1], got " + std::to_string(payoff));
  if (!pending_ || *pending_ != phi) throw ProtocolError("observe without a matching abstention");
  pending_.reset();

  Eigen::VectorXd k = Eigen::VectorXd::Zero(gram_inv_.rows());
  for (auto i : phi.indices) k += gram_inv_.col(static_cast<Eigen::Index>(i));
  double quad = 0.0;
  for (auto i : phi.indices) quad += k(static_cast<Eigen::Index>(i));
  const double denom = 1.0 + quad;
  const double residual = payoff - raw_estimate(phi);

  gram_inv_.noalias() -= (k * k.transpose()) / denom;
  weights_ += k * (residual / denom);
  for (auto i : phi.indices) {
    moment_(static_cast<Eigen::Index>(i)) += payoff;
    for (auto j : phi.indices) gram_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
  }
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd &m) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(detail::scalar_to_string(m(r, c)));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json &j, Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  if (static_cast<Eigen::Index>(j.size()) != n) throw std::runtime_error("matrix row count mismatch in snapshot");
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto &row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != n) throw std::runtime_error("matrix column count mismatch in snapshot");
    for (Eigen::Index c = 0; c < n; ++c) detail::scalar_from_json(row.at(static_cast<std::size_t>(c)), m(r, c));
  }
  return m;
}

nlohmann::ordered_json vector_to_json(const Eigen::VectorXd &v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(detail::scalar_to_string(v(i)));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::ordered_json &j, Eigen::Index n) {
  if (static_cast<Eigen::Index>(j.size()) != n) throw std::runtime_error("vector length mismatch in snapshot");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) detail::scalar_from_json(j.at(static_cast<std::size_t>(i)), v(i));
  return v;
}

}  // namespace

// Field order: format, version, dimension, epsilon, delta, query_cap, ridge,
// confidence_scale, abstain_count, query_count, gram, gram_inverse, moment,
// weights. Reals are shortest round-trip decimal strings.
nlohmann::ordered_json KwikLearner::snapshot() const {
  nlohmann::ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["dimension"] = dimension();
  j["epsilon"] = detail::scalar_to_string(params_.epsilon);
  j["delta"] = detail::scalar_to_string(params_.delta);
  j["query_cap"] = detail::scalar_to_string(params_.query_cap);
  j["ridge"] = detail::scalar_to_string(params_.ridge);
  j["confidence_scale"] = detail::scalar_to_string(params_.confidence_scale);
  j["abstain_count"] = abstains_;
  j["query_count"] = queries_;
  j["gram"] = matrix_to_json(gram_);
  j["gram_inverse"] = matrix_to_json(gram_inv_);
  j["moment"] = vector_to_json(moment_);
  j["weights"] = vector_to_json(weights_);
  return j;
}

KwikLearner KwikLearner::restore(const nlohmann::ordered_json &j) {
  if (j.at("format") != kFormat || j.at("version") != kVersion)
    throw std::runtime_error("not a kwik learner snapshot of version " + std::to_string(kVersion));
  KwikParams p;
  detail::scalar_from_json(j.at("epsilon"), p.epsilon);
  detail::scalar_from_json(j.at("delta"), p.delta);
  detail::scalar_from_json(j.at("query_cap"), p.query_cap);
  detail::scalar_from_json(j.at("ridge"), p.ridge);
  detail::scalar_from_json(j.at("confidence_scale"), p.confidence_scale);
  const std::size_t dim = j.at("dimension");
  KwikLearner out(dim, p);
  const auto n = static_cast<Eigen::Index>(dim);
  out.abstains_ = j.at("abstain_count");
  out.queries_ = j.at("query_count");
  out.gram_ = matrix_from_json(j.at("gram"), n);
  out.gram_inv_ = matrix_from_json(j.at("gram_inverse"), n);
  out.moment_ = vector_from_json(j.at("moment"), n);
  out.weights_ = vector_from_json(j.at("weights"), n);
  return out;
}

std::unique_ptr<PayoffEstimator> make_estimator(EstimatorMode mode, std::size_t dimension, const KwikParams &params) {
  switch (mode) {
    case EstimatorMode::kDeterministic:
#ifdef GBANDIT_EXACT_SPAN
      return std::make_unique<ExactSpanLearner>(dimension);
#else
      return std::make_unique<FloatSpanLearner>(dimension);
#endif
    case EstimatorMode::kKwik:
      return std::make_unique<KwikLearner>(dimension, params);
  }
  throw std::logic_error("unknown estimator mode");
}

std::unique_ptr<PayoffEstimator> restore_estimator(const nlohmann::ordered_json &j) {
  const std::string format = j.at("format");
  if (format == KwikLearner::kFormat) return std::make_unique<KwikLearner>(KwikLearner::restore(j));
  if (format == FloatSpanLearner::kFormat) {
    if (j.at("scalar") == "rational") return std::make_unique<ExactSpanLearner>(ExactSpanLearner::restore(j));
    return std::make_unique<FloatSpanLearner>(FloatSpanLearner::restore(j));
  }
  throw std::runtime_error("unknown estimator snapshot format: " + format);
}

}  // namespace gbandit
