#pragma once

#include <algorithm>
#include <utility>

#include <Eigen/Dense>

#include "cmekit/error.hpp"
#include "cmekit/kernel.hpp"

namespace cmekit {

/// Finite expansion sum_i w_i phi(z_i) in the RKHS of `kernel`. Used for
/// (conditional) mean embeddings and for predicted conditional embeddings.
class WeightedEmbedding {
 public:
  WeightedEmbedding(KernelSpec kernel, Points support, Eigen::VectorXd weights)
      : kernel_(std::move(kernel)), support_(std::move(support)), weights_(std::move(weights)) {
    validate_points(support_, "embedding");
    detail::require(weights_.size() == support_.rows(), "embedding: weights/support length mismatch");
    detail::require(weights_.allFinite(), "embedding: non-finite weight");
  }

  /// phi(x)
  static WeightedEmbedding feature(const KernelSpec& kernel, PointRef x) {
    Points support(1, x.size());
    support.row(0) = x;
    return {kernel, std::move(support), Eigen::VectorXd::Ones(1)};
  }

  [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }
  [[nodiscard]] const Points& support() const { return support_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
  [[nodiscard]] Eigen::Index size() const { return weights_.size(); }

  /// f(x) = <f, phi(x)>
  [[nodiscard]] double operator()(PointRef x) const {
    return weights_.dot(kernel_column(kernel_, support_, x));
  }

  /// Linear combination a*this + b*other over the concatenated support.
  [[nodiscard]] WeightedEmbedding combine(double a, const WeightedEmbedding& other, double b) const {
    detail::require(kernel_ == other.kernel_, "embedding: kernel mismatch");
    detail::require(support_.cols() == other.support_.cols(), "embedding: dimension mismatch");
    Points support(support_.rows() + other.support_.rows(), support_.cols());
    support << support_, other.support_;
    Eigen::VectorXd weights(weights_.size() + other.weights_.size());
    weights << a * weights_, b * other.weights_;
    return {kernel_, std::move(support), std::move(weights)};
  }

  friend WeightedEmbedding operator-(const WeightedEmbedding& a, const WeightedEmbedding& b) {
    return a.combine(1.0, b, -1.0);
  }

  friend WeightedEmbedding operator+(const WeightedEmbedding& a, const WeightedEmbedding& b) {
    return a.combine(1.0, b, 1.0);
  }

 private:
  KernelSpec kernel_;
  Points support_;
  Eigen::VectorXd weights_;
};

/// Empirical mean embedding with uniform weights 1/n.
inline WeightedEmbedding mean_embed(const KernelSpec& k, const Points& samples) {
  validate_points(samples, "mean_embed");
  const auto n = samples.rows();
  return {k, samples, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};
}

inline double embed_inner(const WeightedEmbedding& a, const WeightedEmbedding& b) {
  detail::require(a.kernel() == b.kernel(), "embed_inner: kernel mismatch");
  detail::require(a.support().cols() == b.support().cols(), "embed_inner: dimension mismatch");
  const Eigen::MatrixXd kab = cross_gram(a.kernel(), a.support(), b.support());
  return a.weights().dot(kab * b.weights());
}

/// Raw value; may be slightly negative from round-off.
inline double embed_norm_sq(const WeightedEmbedding& a) {
  const auto g = gram(a.kernel(), a.support());
  return a.weights().dot(g.entries() * a.weights());
}

namespace detail {

/// Sum of k(p_i, q_j) computed in an argument-order independent way, so the
/// MMD estimators are exactly symmetric in (P, Q).
inline double cross_sum(const KernelSpec& k, const Points& p, const Points& q) {
  const bool swap = std::lexicographical_compare(q.data(), q.data() + q.size(), p.data(), p.data() + p.size());
  return swap ? cross_gram(k, q, p).sum() : cross_gram(k, p, q).sum();
}

}  // namespace detail

/// V-statistic ||mu_P - mu_Q||^2 expanded as three double sums.
inline double mmd_sq_biased(const KernelSpec& k, const Points& p, const Points& q) {
  validate_points(p, "mmd: sample P");
  validate_points(q, "mmd: sample Q");
  detail::require(p.cols() == q.cols(), "mmd: dimension mismatch");
  const double n = static_cast<double>(p.rows());
  const double m = static_cast<double>(q.rows());
  const double kpp = gram(k, p).entries().sum() / (n * n);
  const double kqq = gram(k, q).entries().sum() / (m * m);
  const double kpq = detail::cross_sum(k, p, q) / (n * m);
  return kpp + kqq - 2.0 * kpq;
}

/// U-statistic with the diagonal terms removed from the within-sample sums.
/// Unbiased for the population MMD^2, hence can be negative.
inline double mmd_sq_unbiased(const KernelSpec& k, const Points& p, const Points& q) {
  validate_points(p, "mmd: sample P");
  validate_points(q, "mmd: sample Q");
  detail::require(p.rows() >= 2 && q.rows() >= 2, "mmd: unbiased estimator needs n >= 2 and m >= 2");
  detail::require(p.cols() == q.cols(), "mmd: dimension mismatch");
  const double n = static_cast<double>(p.rows());
  const double m = static_cast<double>(q.rows());
  const auto gp = gram(k, p);
  const auto gq = gram(k, q);
  const double kpp = (gp.entries().sum() - gp.entries().trace()) / (n * (n - 1.0));
  const double kqq = (gq.entries().sum() - gq.entries().trace()) / (m * (m - 1.0));
  const double kpq = detail::cross_sum(k, p, q) / (n * m);
  return kpp + kqq - 2.0 * kpq;
}

}  // namespace cmekit
