#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmekit/embedding.hpp"
#include "cmekit/error.hpp"
#include "cmekit/estimator.hpp"
#include "cmekit/kernel.hpp"
#include "cmekit/random.hpp"

namespace cmekit {

/// Markov chain on m enumerated states with marginal pi for X and
/// transition rows p(e_i, .). The optional second transition matrix is the
/// comparison kernel p' for MMD identities.
struct FiniteMarkovModel {
  Points states;
  Eigen::VectorXd marginal;
  Eigen::MatrixXd transition;
  std::optional<Eigen::MatrixXd> transition_alt;

  [[nodiscard]] Eigen::Index size() const { return states.rows(); }

  void validate() const {
    validate_points(states, "model states");
    const auto m = states.rows();
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j)
        detail::require(!same_point(states.row(i), states.row(j)), "model: states must be pairwise distinct");
    detail::require(marginal.size() == m, "model: marginal length must equal number of states");
    detail::require(marginal.allFinite() && (marginal.array() >= 0.0).all(), "model: marginal must be nonnegative");
    detail::require(std::abs(marginal.sum() - 1.0) <= 1e-12, "model: marginal must sum to 1");
    check_stochastic(transition, "transition");
    if (transition_alt) check_stochastic(*transition_alt, "transition_alt");
  }

 private:
  void check_stochastic(const Eigen::MatrixXd& p, const char* what) const {
    const auto m = states.rows();
    const std::string name(what);
    detail::require(p.rows() == m && p.cols() == m, "model: " + name + " must be m x m");
    detail::require(p.allFinite() && (p.array() >= 0.0).all(), "model: " + name + " entries must be nonnegative");
    for (Eigen::Index i = 0; i < m; ++i)
      detail::require(std::abs(p.row(i).sum() - 1.0) <= 1e-12, "model: " + name + " rows must sum to 1");
  }
};

/// Linear map from coefficients c of f = sum_j c_j phi(z_j) to the values
/// of the mapped function at the model states: values = B c.
struct ValuesMap {
  Points support;
  Eigen::MatrixXd matrix;
};

/// F(e_i) = sum_j C(i, j) phi(e_j).
struct RegressionFunctionRep {
  Eigen::MatrixXd coeffs;
};

/// Default canonical placement of m states at 0, 1, ..., m-1 on the line.
inline Points line_states(Eigen::Index m) {
  Points s(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) s(i, 0) = static_cast<double>(i);
  return s;
}

/// Power iteration from the uniform vector.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
  detail::require(p.rows() >= 1 && p.rows() == p.cols(), "stationary_distribution: matrix must be square");
  const auto m = p.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(m, 1.0 / static_cast<double>(m));
  constexpr int kMaxIterations = 1000000;
  for (int it = 0; it < kMaxIterations; ++it) {
    Eigen::RowVectorXd next = pi * p;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().sum();
    pi = next;
    if (change <= 1e-15 && (pi * p - pi).cwiseAbs().maxCoeff() <= 1e-12) return pi.transpose();
  }
  throw NumericalError("stationary_distribution: power iteration did not converge");
}

namespace detail {

/// Cholesky factor of a state Gram matrix. Nonsingularity means min
/// eigenvalue > 1e-10 * max; otherwise a jitter of 1e-10 * trace / m is
/// added once, and the check repeated.
inline Eigen::LLT<Eigen::MatrixXd> checked_gram_factor(Eigen::MatrixXd k, const char* what) {
  const auto m = k.rows();
  auto well_conditioned = [](const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    return top > 0.0 && es.eigenvalues().minCoeff() > 1e-10 * top;
  };
  if (!well_conditioned(k)) {
    k.diagonal().array() += 1e-10 * k.trace() / static_cast<double>(m);
    if (!well_conditioned(k)) throw NumericalError(std::string(what) + ": singular Gram matrix");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": Gram factorization failed");
  return llt;
}

/// Union of point lists, deduplicated by exact coordinates, in first-seen
/// order. `index_of` maps each input row to its merged index.
class PointUnion {
 public:
  explicit PointUnion(Eigen::Index dim) : dim_(dim) {}

  std::vector<Eigen::Index> add(const Points& pts) {
    require(pts.cols() == dim_, "support alignment: dimension mismatch");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      std::vector<double> key(pts.row(i).data(), pts.row(i).data() + dim_);
      auto [it, inserted] = lookup_.try_emplace(std::move(key), static_cast<Eigen::Index>(rows_.size()));
      if (inserted) rows_.emplace_back(pts.row(i));
      idx[static_cast<std::size_t>(i)] = it->second;
    }
    return idx;
  }

  [[nodiscard]] Points points() const {
    Points out(static_cast<Eigen::Index>(rows_.size()), dim_);
    for (std::size_t i = 0; i < rows_.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows_[i];
    return out;
  }

  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(rows_.size()); }

 private:
  Eigen::Index dim_;
  std::map<std::vector<double>, Eigen::Index> lookup_;
  std::vector<Eigen::RowVectorXd> rows_;
};

/// Sums the columns of `coeffs` into merged positions.
inline Eigen::MatrixXd scatter_columns(const Eigen::MatrixXd& coeffs, const std::vector<Eigen::Index>& idx,
                                       Eigen::Index width) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(coeffs.rows(), width);
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(idx[j]) += coeffs.col(static_cast<Eigen::Index>(j));
  return out;
}

}  // namespace detail

/// Estimator with X = Y = states whose predicted embedding at e_i is
/// sum_j target(i, j) phi(e_j): W K_E = target^T, so W = (K_E^{-1} target)^T.
/// With target = P this realizes F* exactly (the well-specified case).
inline CmeEstimator state_supported_estimator(const FiniteMarkovModel& model, const KernelSpec& k,
                                              const Eigen::MatrixXd& target, double lambda = 1.0) {
  model.validate();
  const auto m = model.size();
  detail::require(target.rows() == m && target.cols() == m, "state_supported_estimator: target must be m x m");
  const auto llt = detail::checked_gram_factor(gram(k, model.states).entries(), "state_supported_estimator");
  Eigen::MatrixXd w = llt.solve(target).transpose();
  return {k, lambda, Tikhonov{}, model.states, model.states, std::move(w)};
}

/// F* as a state-supported regression function: C = P.
inline RegressionFunctionRep exact_regression_function(const FiniteMarkovModel& model) { return {model.transition}; }

/// Exact [P f](e_i) = sum_j P(i, j) f(e_j): B = P K_E on support = states.
inline ValuesMap exact_operator_values(const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  const Eigen::MatrixXd ke = gram(k, model.states).entries();
  detail::checked_gram_factor(ke, "exact_operator_values");
  return {model.states, model.transition * ke};
}

/// Same as exact_operator_values for the comparison kernel p'.
inline ValuesMap exact_operator_values_alt(const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  detail::require(model.transition_alt.has_value(), "model: transition_alt missing");
  const Eigen::MatrixXd ke = gram(k, model.states).entries();
  detail::checked_gram_factor(ke, "exact_operator_values");
  return {model.states, *model.transition_alt * ke};
}

/// Restriction of the estimated operator to the test span: for
/// f = sum_j c_j phi(z_j) with z ranging over Y followed by the states
/// (deduplicated), (A f)(e_i) = (W k_X(e_i))^T K_{Y,Z} c.
inline ValuesMap estimator_values(const CmeEstimator& est, const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  detail::require(est.kernel() == k, "estimator_values: kernel mismatch");
  detail::require(est.x().cols() == model.states.cols(), "estimator_values: dimension mismatch");
  detail::PointUnion merged(model.states.cols());
  merged.add(est.y());
  merged.add(model.states);
  Points support = merged.points();
  const Eigen::MatrixXd weights = est.prediction_weights(model.states);  // n x m
  Eigen::MatrixXd b = weights.transpose() * cross_gram(k, est.y(), support);
  return {std::move(support), std::move(b)};
}

/// Values map of a state-supported regression function F used as A* phi:
/// (A f)(e_i) = <f, F(e_i)> = (C K_E c)_i over support = states.
inline ValuesMap regression_function_values(const RegressionFunctionRep& f, const FiniteMarkovModel& model,
                                            const KernelSpec& k) {
  model.validate();
  detail::require(f.coeffs.rows() == model.size() && f.coeffs.cols() == model.size(),
                  "regression function: coefficients must be m x m");
  return {model.states, f.coeffs * gram(k, model.states).entries()};
}

/// Exact ||A - B||_{H -> L2(pi)} on a finite state space.
///
/// (A - B) f only depends on f through its values on the merged support Z,
/// so any component of f orthogonal to span{phi(z)} is annihilated and the
/// supremum over the unit ball may be taken over that span. With
/// D = B_A - B_B this is the top generalized eigenvalue of (D^T Pi D, K_Z),
/// computed here through the equivalent m x m matrix
/// Pi^{1/2} D K_Z^{-1} D^T Pi^{1/2}.
inline double op_norm_diff(const ValuesMap& a, const ValuesMap& b, const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  const auto m = model.size();
  detail::require(a.matrix.rows() == m && b.matrix.rows() == m, "op_norm_diff: values maps must have one row per state");
  detail::require(a.matrix.cols() == a.support.rows() && b.matrix.cols() == b.support.rows(),
                  "op_norm_diff: support alignment failure");
  detail::PointUnion merged(a.support.cols());
  const auto ia = merged.add(a.support);
  const auto ib = merged.add(b.support);
  const Points z = merged.points();
  const Eigen::MatrixXd d = detail::scatter_columns(a.matrix, ia, merged.size()) -
                            detail::scatter_columns(b.matrix, ib, merged.size());

  const auto llt = detail::checked_gram_factor(gram(k, z).entries(), "op_norm_diff");
  const Eigen::VectorXd sqrt_pi = model.marginal.cwiseSqrt();
  const Eigen::MatrixXd weighted = sqrt_pi.asDiagonal() * d;                          // m x |Z|
  const Eigen::MatrixXd half = llt.matrixL().solve(weighted.transpose());             // L^{-1} D^T Pi^{1/2}
  const Eigen::MatrixXd small = half.transpose() * half;                              // m x m
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
}

/// E ||F*(X) - A* phi(X)||^2 with F*(e_i) = sum_j P(i, j) phi(e_j) and
/// A* phi(e_i) = sum_l (W k_X(e_i))_l phi(y_l).
inline double exact_excess_risk(const CmeEstimator& est, const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  detail::require(est.kernel() == k, "exact_excess_risk: kernel mismatch");
  detail::PointUnion merged(model.states.cols());
  const auto iy = merged.add(est.y());
  const auto ie = merged.add(model.states);
  const Eigen::MatrixXd kz = gram(k, merged.points()).entries();
  const Eigen::MatrixXd predicted = est.prediction_weights(model.states).transpose();  // m x n
  const Eigen::MatrixXd diff = detail::scatter_columns(model.transition, ie, merged.size()) -
                               detail::scatter_columns(predicted, iy, merged.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < model.size(); ++i) acc += model.marginal[i] * diff.row(i).dot(kz * diff.row(i).transpose());
  return acc;
}

/// int d_k(p(x, .), p'(x, .))^2 d pi(x).
inline double exact_mmd_integral(const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  detail::require(model.transition_alt.has_value(), "exact_mmd_integral: model has no transition_alt");
  const Eigen::MatrixXd ke = gram(k, model.states).entries();
  const Eigen::MatrixXd diff = model.transition - *model.transition_alt;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < model.size(); ++i) acc += model.marginal[i] * diff.row(i).dot(ke * diff.row(i).transpose());
  return acc;
}

/// R(F) = E ||phi(Y) - F(X)||^2 evaluated state by state.
inline double exact_risk(const RegressionFunctionRep& f, const FiniteMarkovModel& model, const KernelSpec& k) {
  model.validate();
  const auto m = model.size();
  detail::require(f.coeffs.rows() == m && f.coeffs.cols() == m, "exact_risk: coefficients must be m x m");
  const Eigen::MatrixXd ke = gram(k, model.states).entries();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd ci = f.coeffs.row(i).transpose();
    const Eigen::VectorXd kci = ke * ci;
    const double fnorm = ci.dot(kci);
    double row = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) row += model.transition(i, j) * (ke(j, j) - 2.0 * kci[j] + fnorm);
    acc += model.marginal[i] * row;
  }
  return acc;
}

/// <T F_i, T F_j> for F_i = k(anchor, .) e_i with (e_i) orthonormal in H,
/// built by Gram-Schmidt on phi(e_1), ..., phi(e_r). With the operator
/// kernel K = k Id, T F_i is the rank-one tensor mu ⊗ e_i with
/// mu = sum_a pi_a k(anchor, e_a) phi(e_a), and the inner products are
/// evaluated as Hilbert-Schmidt inner products of those tensors.
inline Eigen::MatrixXd generalized_cov_ons_check(const FiniteMarkovModel& model, const KernelSpec& k, PointRef anchor,
                                                 Eigen::Index r) {
  model.validate();
  const auto m = model.size();
  detail::require(r >= 1 && r <= m, "generalized_cov_ons_check: need 1 <= r <= m");
  detail::require(anchor.size() == model.states.cols(), "generalized_cov_ons_check: anchor dimension mismatch");
  const Eigen::MatrixXd ke = gram(k, model.states).entries();
  detail::require((ke.array() > 0.0).all(), "generalized_cov_ons_check: kernel must be strictly positive on states");

  // Modified Gram-Schmidt with one reorthogonalization pass, in the K_E metric.
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(m, i);
    const double initial = std::sqrt(v.dot(ke * v));
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < i; ++j) v -= basis.col(j).dot(ke * v) * basis.col(j);
    const double norm = std::sqrt(std::max(v.dot(ke * v), 0.0));
    if (!(norm > 1e-12 * initial)) throw NumericalError("generalized_cov_ons_check: Gram-Schmidt breakdown");
    basis.col(i) = v / norm;
  }

  Eigen::VectorXd mu(m);
  for (Eigen::Index a = 0; a < m; ++a) mu[a] = model.marginal[a] * eval(k, anchor, model.states.row(a));

  // <mu ⊗ u, mu ⊗ v>_HS = trace(T_u^T K T_v K) with T_u = mu u^T.
  Eigen::MatrixXd out(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      const Eigen::MatrixXd ti = mu * basis.col(i).transpose();
      const Eigen::MatrixXd tj = mu * basis.col(j).transpose();
      out(i, j) = (ti.transpose() * ke * tj * ke).trace();
    }
  return out;
}

/// M = sum_{a,b} pi_a pi_b k(anchor, e_a) k(anchor, e_b) k(e_a, e_b).
inline double generalized_cov_constant(const FiniteMarkovModel& model, const KernelSpec& k, PointRef anchor) {
  double acc = 0.0;
  for (Eigen::Index a = 0; a < model.size(); ++a)
    for (Eigen::Index b = 0; b < model.size(); ++b)
      acc += model.marginal[a] * model.marginal[b] * eval(k, anchor, model.states.row(a)) *
             eval(k, anchor, model.states.row(b)) * eval(k, model.states.row(a), model.states.row(b));
  return acc;
}

namespace detail {

/// Inverse-CDF draw from a probability vector.
inline Eigen::Index categorical(CounterRng& rng, const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  const double u = rng.uniform();
  double cum = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    cum += probs[i];
    if (u < cum && probs[i] > 0.0) return i;
  }
  return last_positive;
}

}  // namespace detail

/// n iid pairs: x ~ pi, y ~ p(x, .).
inline PairedSample sample_pairs(const FiniteMarkovModel& model, Eigen::Index n, std::uint64_t seed) {
  model.validate();
  detail::require(n >= 1, "sample_pairs: n must be >= 1");
  CounterRng rng(seed);
  const auto d = model.states.cols();
  PairedSample out{Points(n, d), Points(n, d)};
  const Eigen::RowVectorXd pi = model.marginal.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = detail::categorical(rng, pi);
    const auto yi = detail::categorical(rng, model.transition.row(xi));
    out.x.row(i) = model.states.row(xi);
    out.y.row(i) = model.states.row(yi);
  }
  return out;
}

/// Stationary Ornstein-Uhlenbeck pairs for dX = -theta X dt + dW:
/// x ~ N(0, 1/(2 theta)), y = x e^{-theta tau} + N(0, (1 - e^{-2 theta tau}) / (2 theta)).
/// tau = 0 is accepted and gives y = x.
inline PairedSample ou_sample_pairs(double theta, double tau, Eigen::Index n, std::uint64_t seed) {
  detail::require(std::isfinite(theta) && theta > 0.0, "ou: theta must be > 0");
  detail::require(std::isfinite(tau) && tau >= 0.0, "ou: tau must be >= 0");
  detail::require(n >= 1, "ou: n must be >= 1");
  CounterRng rng(seed);
  const double stationary_sd = std::sqrt(1.0 / (2.0 * theta));
  const double decay = std::exp(-theta * tau);
  const double noise_sd = std::sqrt(-std::expm1(-2.0 * theta * tau) / (2.0 * theta));
  PairedSample out{Points(n, 1), Points(n, 1)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = stationary_sd * rng.normal();
    const double eps = rng.normal();
    out.x(i, 0) = x;
    out.y(i, 0) = tau == 0.0 ? x : x * decay + noise_sd * eps;
  }
  return out;
}

/// V(x) = (x^2 - 1)^2
inline double double_well_potential(double x) { return (x * x - 1.0) * (x * x - 1.0); }
inline double double_well_gradient(double x) { return 4.0 * x * (x * x - 1.0); }

/// Euler-Maruyama for dX = -V'(X) dt + sqrt(2 / beta) dW started at x = 0.
/// After a 10^4 step burn-in, pair i is (x_{i s}, x_{(i+1) s}) with
/// s = steps_per_pair, so consecutive pairs share an endpoint.
inline PairedSample double_well_pairs(double beta, double dt, int steps_per_pair, Eigen::Index n, std::uint64_t seed) {
  detail::require(std::isfinite(beta) && beta > 0.0, "double_well: beta must be > 0");
  detail::require(std::isfinite(dt) && dt > 0.0, "double_well: dt must be > 0");
  detail::require(steps_per_pair >= 1, "double_well: steps_per_pair must be >= 1");
  detail::require(n >= 1, "double_well: n must be >= 1");
  constexpr int kBurnIn = 10000;
  CounterRng rng(seed);
  const double noise = std::sqrt(2.0 * dt / beta);
  double x = 0.0;
  std::int64_t step = 0;
  auto advance = [&] {
    x += -double_well_gradient(x) * dt + noise * rng.normal();
    ++step;
    if (!(std::abs(x) <= 1e6)) {
      std::ostringstream msg;
      msg << "double_well: trajectory diverged at step " << step << " (dt = " << dt << ", beta = " << beta << ")";
      throw NumericalError(msg.str());
    }
  };
  for (int i = 0; i < kBurnIn; ++i) advance();
  PairedSample out{Points(n, 1), Points(n, 1)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.x(i, 0) = x;
    for (int s = 0; s < steps_per_pair; ++s) advance();
    out.y(i, 0) = x;
  }
  return out;
}

}  // namespace cmekit
