#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "gbandit/model.h"

namespace gbandit {

/// Observing without a matching abstention, or observing a vector the
/// learner could already predict.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Prediction {
  std::optional<double> value;

  bool abstained() const { return !value.has_value(); }
};

/// Selective-prediction payoff estimator over coefficient vectors: either
/// predicts, or abstains and then must be shown the observed payoff.
class PayoffEstimator {
 public:
  virtual ~PayoffEstimator() = default;

  virtual std::size_t dimension() const = 0;
  virtual Prediction predict(const CoefficientVector &phi) = 0;
  /// Only valid right after predict(phi) abstained.
  virtual void observe(const CoefficientVector &phi, double payoff) = 0;

  virtual std::size_t abstain_count() const = 0;
  virtual std::size_t query_count() const = 0;

  virtual nlohmann::ordered_json snapshot() const = 0;
};

using ExactScalar = boost::multiprecision::cpp_rational;

namespace detail {

template <class Scalar>
bool is_negligible(const Scalar &x) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return std::abs(x) <= Scalar(1e-8);
  } else {
    return x == 0;
  }
}

template <class Scalar>
Scalar magnitude(const Scalar &x) {
  if constexpr (std::is_floating_point_v<Scalar>) {
    return std::abs(x);
  } else {
    return boost::multiprecision::abs(x);
  }
}

std::string scalar_to_string(double x);
std::string scalar_to_string(const ExactScalar &x);
void scalar_from_json(const nlohmann::ordered_json &j, double &out);
void scalar_from_json(const nlohmann::ordered_json &j, ExactScalar &out);

}  // namespace detail

/// Span of observed coefficient vectors kept in reduced row-echelon form.
/// Each row carries the payoff of the same linear combination of
/// observations, so a vector in the span is predicted by reduction alone.
template <class Scalar>
class SpanBasis {
 public:
  explicit SpanBasis(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t rank() const { return rows_.size(); }
  const std::vector<std::size_t> &pivots() const { return pivots_; }

  /// Reduces `vec` against the basis; returns the payoff of the removed
  /// component and leaves the residual in `vec`.
  Scalar reduce(std::vector<Scalar> &vec) const {
    Scalar payoff = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Scalar c = vec[pivots_[i]];
      if (c == 0) continue;
      const auto &row = rows_[i];
      for (std::size_t j = 0; j < dimension_; ++j)
        if (row[j] != 0) vec[j] -= c * row[j];
      vec[pivots_[i]] = 0;
      payoff += c * payoffs_[i];
    }
    return payoff;
  }

  static bool is_zero(const std::vector<Scalar> &vec) {
    for (const auto &x : vec)
      if (!detail::is_negligible(x)) return false;
    return true;
  }

  /// Adds an already reduced, nonzero residual with its residual payoff.
  void insert_residual(std::vector<Scalar> residual, Scalar payoff) {
    std::size_t pivot = dimension_;
    Scalar best = 0;
    for (std::size_t j = 0; j < dimension_; ++j) {
      const Scalar mag = detail::magnitude(residual[j]);
      if (!detail::is_negligible(residual[j]) && mag > best) {
        best = mag;
        pivot = j;
      }
    }
    if (pivot == dimension_) throw ProtocolError("residual is zero; vector already in span");
    const Scalar scale = residual[pivot];
    for (auto &x : residual) x /= scale;
    payoff /= scale;
    residual[pivot] = 1;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const Scalar c = rows_[i][pivot];
      if (c == 0) continue;
      for (std::size_t j = 0; j < dimension_; ++j)
        if (residual[j] != 0) rows_[i][j] -= c * residual[j];
      rows_[i][pivot] = 0;
      payoffs_[i] -= c * payoff;
    }
    rows_.push_back(std::move(residual));
    payoffs_.push_back(payoff);
    pivots_.push_back(pivot);
  }

  /// Returns true when `vec` was independent and got added.
  bool add(std::vector<Scalar> vec, Scalar payoff = 0) {
    payoff -= reduce(vec);
    if (is_zero(vec)) return false;
    insert_residual(std::move(vec), payoff);
    return true;
  }

  const std::vector<std::vector<Scalar>> &rows() const { return rows_; }
  const std::vector<Scalar> &payoffs() const { return payoffs_; }

  void restore(std::vector<std::vector<Scalar>> rows, std::vector<Scalar> payoffs, std::vector<std::size_t> pivots) {
    rows_ = std::move(rows);
    payoffs_ = std::move(payoffs);
    pivots_ = std::move(pivots);
  }

 private:
  std::size_t dimension_;
  std::vector<std::vector<Scalar>> rows_;
  std::vector<Scalar> payoffs_;
  std::vector<std::size_t> pivots_;
};

template <class Scalar>
std::vector<Scalar> to_dense(const CoefficientVector &phi) {
  std::vector<Scalar> out(phi.dimension, Scalar(0));
  for (auto i : phi.indices) out[i] = Scalar(1);
  return out;
}

/// Deterministic-payoff estimator: predicts exactly when the query lies in
/// the span of past observations.
template <class Scalar>
class SpanLearner final : public PayoffEstimator {
 public:
  static constexpr const char *kFormat = "gbandit-span-state";
  static constexpr int kVersion = 1;

  explicit SpanLearner(std::size_t dimension) : basis_(dimension) {}

  std::size_t dimension() const override { return basis_.dimension(); }
  std::size_t rank() const { return basis_.rank(); }
  const SpanBasis<Scalar> &basis() const { return basis_; }

  Prediction predict(const CoefficientVector &phi) override {
    check_dimension(phi);
    ++queries_;
    auto residual = to_dense<Scalar>(phi);
    const Scalar estimate = basis_.reduce(residual);
    if (SpanBasis<Scalar>::is_zero(residual)) {
      pending_.reset();
      return {static_cast<double>(estimate)};
    }
    ++abstains_;
    pending_ = phi;
    return {};
  }

  void observe(const CoefficientVector &phi, double payoff) override {
    check_dimension(phi);
    if (!pending_ || *pending_ != phi) throw ProtocolError("observe without a matching abstention");
    pending_.reset();
    auto residual = to_dense<Scalar>(phi);
    const Scalar residual_payoff = Scalar(payoff) - basis_.reduce(residual);
    basis_.insert_residual(std::move(residual), residual_payoff);
  }

  std::size_t abstain_count() const override { return abstains_; }
  std::size_t query_count() const override { return queries_; }

  nlohmann::ordered_json snapshot() const override {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["scalar"] = std::is_floating_point_v<Scalar> ? "double" : "rational";
    j["dimension"] = basis_.dimension();
    j["abstain_count"] = abstains_;
    j["query_count"] = queries_;
    j["pivots"] = basis_.pivots();
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < basis_.rank(); ++i) {
      nlohmann::ordered_json row;
      auto entries = nlohmann::ordered_json::array();
      const auto &r = basis_.rows()[i];
      for (std::size_t c = 0; c < r.size(); ++c)
        if (r[c] != 0) entries.push_back({c, detail::scalar_to_string(r[c])});
      row["entries"] = std::move(entries);
      row["payoff"] = detail::scalar_to_string(basis_.payoffs()[i]);
      rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    return j;
  }

  static SpanLearner restore(const nlohmann::ordered_json &j) {
    if (j.at("format") != kFormat || j.at("version") != kVersion)
      throw std::runtime_error("not a span learner snapshot of version " + std::to_string(kVersion));
    const std::size_t dim = j.at("dimension");
    SpanLearner out(dim);
    out.abstains_ = j.at("abstain_count");
    out.queries_ = j.at("query_count");
    std::vector<std::vector<Scalar>> rows;
    std::vector<Scalar> payoffs;
    for (const auto &row : j.at("rows")) {
      std::vector<Scalar> r(dim, Scalar(0));
      for (const auto &e : row.at("entries")) detail::scalar_from_json(e.at(1), r[e.at(0).get<std::size_t>()]);
      Scalar p;
      detail::scalar_from_json(row.at("payoff"), p);
      rows.push_back(std::move(r));
      payoffs.push_back(std::move(p));
    }
    out.basis_.restore(std::move(rows), std::move(payoffs), j.at("pivots").get<std::vector<std::size_t>>());
    return out;
  }

 private:
  void check_dimension(const CoefficientVector &phi) const {
    if (phi.dimension != basis_.dimension())
      throw ModelError("coefficient vector has dimension " + std::to_string(phi.dimension) + ", learner expects " +
                       std::to_string(basis_.dimension()));
  }

  SpanBasis<Scalar> basis_;
  std::optional<CoefficientVector> pending_;
  std::size_t abstains_ = 0;
  std::size_t queries_ = 0;
};

using FloatSpanLearner = SpanLearner<double>;
using ExactSpanLearner = SpanLearner<ExactScalar>;

struct KwikParams {
  double epsilon = 0.1;
  double delta = 0.1;
  /// Upper bound on the total number of predict calls.
  double query_cap = 1e6;
  double ridge = 1.0;
  /// Multiplier c in theta = c * epsilon / sqrt(ln((1 + query_cap) / delta)).
  double confidence_scale = 4.5;

  double threshold() const;
};

/// Ridge-regression KWIK learner. Predicts clamp(w^T phi, 0, 1) when the
/// confidence width sqrt(phi^T A^{-1} phi) is at most the threshold, and
/// abstains otherwise. A^{-1} and w are kept current with Sherman-Morrison
/// updates.
class KwikLearner final : public PayoffEstimator {
 public:
  static constexpr const char *kFormat = "gbandit-kwik-state";
  static constexpr int kVersion = 1;

  KwikLearner(std::size_t dimension, KwikParams params);

  std::size_t dimension() const override { return static_cast<std::size_t>(gram_.rows()); }
  const KwikParams &params() const { return params_; }
  double threshold() const { return threshold_; }

  double width(const CoefficientVector &phi) const;
  double raw_estimate(const CoefficientVector &phi) const;

  Prediction predict(const CoefficientVector &phi) override;
  void observe(const CoefficientVector &phi, double payoff) override;

  std::size_t abstain_count() const override { return abstains_; }
  std::size_t query_count() const override { return queries_; }

  const Eigen::MatrixXd &gram() const { return gram_; }
  const Eigen::VectorXd &moment() const { return moment_; }

  nlohmann::ordered_json snapshot() const override;
  static KwikLearner restore(const nlohmann::ordered_json &j);

 private:
  void check_dimension(const CoefficientVector &phi) const;

  KwikParams params_;
  double threshold_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd gram_inv_;
  Eigen::VectorXd moment_;
  Eigen::VectorXd weights_;
  std::optional<CoefficientVector> pending_;
  std::size_t abstains_ = 0;
  std::size_t queries_ = 0;
};

enum class EstimatorMode { kDeterministic, kKwik };

std::unique_ptr<PayoffEstimator> make_estimator(EstimatorMode mode, std::size_t dimension, const KwikParams &params);
/// Inverse of PayoffEstimator::snapshot().
std::unique_ptr<PayoffEstimator> restore_estimator(const nlohmann::ordered_json &j);

}  // namespace gbandit
