#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>

#include "cmekit/embedding.hpp"
#include "cmekit/error.hpp"
#include "cmekit/kernel.hpp"

namespace cmekit {

/// Training data (x_i, y_i), i = 1..n.
struct PairedSample {
  Points x;
  Points y;

  [[nodiscard]] Eigen::Index size() const { return x.rows(); }

  void validate() const {
    validate_points(x, "paired sample X");
    validate_points(y, "paired sample Y");
    detail::require(x.rows() == y.rows(), "paired sample: X and Y lengths differ");
  }
};

struct Tikhonov {
  bool operator==(const Tikhonov&) const = default;
};

/// Keeps spectral components s >= lambda, inverts them, drops the rest.
struct Cutoff {
  bool operator==(const Cutoff&) const = default;
};

/// `steps` gradient iterations with step size `step_size`; lambda only
/// enters through validation, the iteration count is the regularizer.
struct Landweber {
  int steps = 1;
  double step_size = 1.0;
  bool operator==(const Landweber&) const = default;
};

using SpectralFilter = std::variant<Tikhonov, Cutoff, Landweber>;

inline std::string filter_name(const SpectralFilter& f) {
  return std::visit(
      [](const auto& v) -> std::string {
        using F = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<F, Tikhonov>) return "tikhonov";
        else if constexpr (std::is_same_v<F, Cutoff>) return "cutoff";
        else return "landweber";
      },
      f);
}

/// g_lambda(s), the scalar filter applied to each spectral value s >= 0.
inline double filter_value(const SpectralFilter& f, double lambda, double s) {
  detail::require(std::isfinite(lambda) && lambda > 0.0, "filter: lambda must be > 0");
  detail::require(!(s < 0.0), "filter: spectral value must be >= 0");
  return std::visit(
      [&](const auto& v) -> double {
        using F = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<F, Tikhonov>) {
          return 1.0 / (s + lambda);
        } else if constexpr (std::is_same_v<F, Cutoff>) {
          return s >= lambda ? 1.0 / s : 0.0;
        } else {
          detail::require(v.steps >= 1, "landweber: steps must be >= 1");
          detail::require(v.step_size > 0.0, "landweber: step_size must be > 0");
          const double m = static_cast<double>(v.steps);
          if (s == 0.0) return m * v.step_size;
          const double t = v.step_size * s;
          // 1 - (1 - t)^m, accurate for small t
          const double damped = t < 0.5 ? -std::expm1(m * std::log1p(-t)) : 1.0 - std::pow(1.0 - t, m);
          return damped / s;
        }
      },
      f);
}

/// Empirical regularized solution in Gram coordinates. The predicted
/// conditional mean embedding at x is sum_j (W k_X(x))_j phi(y_j).
class CmeEstimator {
 public:
  CmeEstimator(KernelSpec kernel, double lambda, SpectralFilter filter, Points x, Points y, Eigen::MatrixXd w)
      : kernel_(std::move(kernel)),
        lambda_(lambda),
        filter_(filter),
        x_(std::move(x)),
        y_(std::move(y)),
        w_(std::move(w)) {
    detail::require(std::isfinite(lambda_) && lambda_ > 0.0, "estimator: lambda must be > 0");
    validate_points(x_, "estimator X");
    validate_points(y_, "estimator Y");
    detail::require(x_.rows() == y_.rows(), "estimator: X and Y lengths differ");
    detail::require(w_.rows() == x_.rows() && w_.cols() == x_.rows(), "estimator: W must be n x n");
    detail::require(w_.allFinite(), "estimator: non-finite coefficient");
  }

  [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const SpectralFilter& filter() const { return filter_; }
  [[nodiscard]] const Points& x() const { return x_; }
  [[nodiscard]] const Points& y() const { return y_; }
  [[nodiscard]] const Eigen::MatrixXd& coefficients() const { return w_; }
  [[nodiscard]] Eigen::Index size() const { return x_.rows(); }

  /// Weights of the predicted embedding at each query point, one column
  /// per query: W * K_{X,Q}.
  [[nodiscard]] Eigen::MatrixXd prediction_weights(const Points& queries) const {
    detail::require(queries.cols() == x_.cols(), "predict: dimension mismatch");
    return w_ * cross_gram(kernel_, x_, queries);
  }

 private:
  KernelSpec kernel_;
  double lambda_;
  SpectralFilter filter_;
  Points x_;
  Points y_;
  Eigen::MatrixXd w_;
};

namespace detail {

inline void check_fit_inputs(const PairedSample& sample, double lambda) {
  sample.validate();
  require(std::isfinite(lambda) && lambda > 0.0, "fit: lambda must be > 0");
}

}  // namespace detail

/// Spectral-filter fit: with G_X / n = U diag(s) U^T,
/// W = (1/n) U diag(g_lambda(s)) U^T.
///
/// Eigenvalues below 1e-12 * max are treated as exactly zero.
inline CmeEstimator fit_cme(const PairedSample& sample, const KernelSpec& k, const SpectralFilter& f, double lambda) {
  detail::check_fit_inputs(sample, lambda);
  const double n = static_cast<double>(sample.size());
  const Eigen::MatrixXd scaled = gram(k, sample.x).entries() / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled);
  if (es.info() != Eigen::Success) throw NumericalError("fit_cme: eigendecomposition failed");

  Eigen::VectorXd s = es.eigenvalues();
  const double top = std::max(s.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] < 1e-12 * top) s[i] = 0.0;

  if (const auto* lw = std::get_if<Landweber>(&f)) {
    detail::require(lw->step_size * top <= 2.0, "fit_cme: landweber step_size * max spectrum exceeds 2");
  }

  Eigen::VectorXd g(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) g[i] = filter_value(f, lambda, s[i]);

  const Eigen::MatrixXd& u = es.eigenvectors();
  Eigen::MatrixXd w = (u * g.asDiagonal() * u.transpose()) / n;
  return {k, lambda, f, sample.x, sample.y, std::move(w)};
}

/// Tikhonov closed form W = (G_X + n lambda I)^{-1}, via a Cholesky solve.
/// If the factorization fails a diagonal jitter of 1e-10 * trace / n is
/// added once; a second failure is an error.
inline CmeEstimator fit_tikhonov_closed_form(const PairedSample& sample, const KernelSpec& k, double lambda) {
  detail::check_fit_inputs(sample, lambda);
  const auto n = sample.size();
  Eigen::MatrixXd a = gram(k, sample.x).entries();
  a.diagonal().array() += static_cast<double>(n) * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    a.diagonal().array() += 1e-10 * a.trace() / static_cast<double>(n);
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_tikhonov_closed_form: matrix not positive definite");
  }
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return {k, lambda, Tikhonov{}, sample.x, sample.y, std::move(w)};
}

inline WeightedEmbedding predict_embedding(const CmeEstimator& est, PointRef x) {
  detail::require(x.size() == est.x().cols(), "predict: dimension mismatch");
  Eigen::VectorXd weights = est.coefficients() * kernel_column(est.kernel(), est.x(), x);
  return {est.kernel(), est.y(), std::move(weights)};
}

/// Plug-in estimate of E[f(Y) | X = x] given f evaluated at the training Y.
inline double predict_conditional_expectation(const CmeEstimator& est, PointRef x, const Eigen::VectorXd& f_at_y) {
  detail::require(f_at_y.size() == est.size(), "predict: f_at_Y length must equal n");
  detail::require(x.size() == est.x().cols(), "predict: dimension mismatch");
  return f_at_y.dot(est.coefficients() * kernel_column(est.kernel(), est.x(), x));
}

/// ||A||_HS^2 = trace(W^T G_Y W G_X).
inline double hs_norm_sq(const CmeEstimator& est) {
  const auto gx = gram(est.kernel(), est.x());
  const auto gy = gram(est.kernel(), est.y());
  const Eigen::MatrixXd left = est.coefficients().transpose() * gy.entries() * est.coefficients();
  return left.cwiseProduct(gx.entries().transpose()).sum();
}

/// (1/n) sum_i ||phi(y_i) - F(x_i)||^2 over `sample`.
inline double empirical_risk(const CmeEstimator& est, const PairedSample& sample) {
  sample.validate();
  detail::require(sample.x.cols() == est.x().cols() && sample.y.cols() == est.y().cols(),
                  "empirical_risk: dimension mismatch");
  const KernelSpec& k = est.kernel();
  const Eigen::MatrixXd omega = est.prediction_weights(sample.x);  // n_train x n_eval
  const auto gy = gram(k, est.y());
  const Eigen::MatrixXd k_eval_train = cross_gram(k, sample.y, est.y());

  double acc = 0.0;
  const Eigen::MatrixXd gy_omega = gy.entries() * omega;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double self = eval(k, sample.y.row(i), sample.y.row(i));
    const double cross = k_eval_train.row(i).dot(omega.col(i));
    const double pred = omega.col(i).dot(gy_omega.col(i));
    acc += self - 2.0 * cross + pred;
  }
  return acc / static_cast<double>(sample.size());
}

inline double regularized_empirical_risk(const CmeEstimator& est, const PairedSample& sample) {
  return empirical_risk(est, sample) + est.lambda() * hs_norm_sq(est);
}

}  // namespace cmekit
