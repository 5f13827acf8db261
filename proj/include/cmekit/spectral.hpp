#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cmekit/error.hpp"
#include "cmekit/estimator.hpp"
#include "cmekit/kernel.hpp"
#include "cmekit/random.hpp"

namespace cmekit {

/// Eigenpairs of the regularized transition-operator estimate restricted to
/// span{phi(x_i)}. Eigenfunction j is f_j = sum_i coeffs(i, j) phi(x_i).
struct EdmdResult {
  Eigen::VectorXcd eigenvalues;  // sorted by modulus, descending
  Eigen::MatrixXcd coeffs;       // n x r
  Eigen::VectorXd residuals;     // ||A f_j - mu_j f_j||_H / ||f_j||_H
  Points x;
  KernelSpec kernel;
  double lambda = 0.0;

  [[nodiscard]] Eigen::Index rank() const { return eigenvalues.size(); }
};

namespace detail {

/// Cholesky factor of G_X + n lambda I, with the same single-jitter policy
/// as the Tikhonov closed form.
inline Eigen::LLT<Eigen::MatrixXd> regularized_gram_factor(const Eigen::MatrixXd& gx, double lambda) {
  const auto n = gx.rows();
  Eigen::MatrixXd a = gx;
  a.diagonal().array() += static_cast<double>(n) * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    a.diagonal().array() += 1e-10 * a.trace() / static_cast<double>(n);
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw NumericalError("edmd: regularized Gram matrix not positive definite");
  }
  return llt;
}

/// Order: modulus descending, then real part descending, then positive
/// imaginary part first.
inline bool eigen_order(const std::complex<double>& a, const std::complex<double>& b) {
  const double ma = std::abs(a);
  const double mb = std::abs(b);
  if (ma != mb) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

inline std::vector<Eigen::Index> sorted_order(const Eigen::VectorXcd& values) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return eigen_order(values[a], values[b]); });
  return idx;
}

struct RawEigen {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
};

inline RawEigen dense_top_eigen(const Eigen::MatrixXd& m, Eigen::Index r) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, true);
  if (es.info() != Eigen::Success) throw NumericalError("edmd: eigensolver failed");
  const auto order = sorted_order(es.eigenvalues());
  RawEigen out{Eigen::VectorXcd(r), Eigen::MatrixXcd(m.rows(), r)};
  for (Eigen::Index j = 0; j < r; ++j) {
    out.values[j] = es.eigenvalues()[order[static_cast<std::size_t>(j)]];
    out.vectors.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
  }
  return out;
}

/// Block subspace iteration with Rayleigh-Ritz extraction for the r
/// dominant eigenpairs of the operator v -> apply(v). Deterministic: the
/// starting block comes from a fixed-seed counter generator.
template <class Apply>
RawEigen subspace_top_eigen(Eigen::Index n, Eigen::Index r, Apply&& apply) {
  const Eigen::Index p = std::min(n, std::max<Eigen::Index>(2 * r, r + 10));
  CounterRng rng(0x5eedULL);
  Eigen::MatrixXd start(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) start(i, j) = rng.normal();
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(start).householderQ() * Eigen::MatrixXd::Identity(n, p);

  constexpr int kMaxIterations = 2000;
  // Stop once residuals reach roundoff level of the solve, i.e. when the
  // worst residual has not halved over the last kStallWindow iterations.
  constexpr int kStallWindow = 20;
  RawEigen out;
  double best = std::numeric_limits<double>::infinity();
  int best_it = 0;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::MatrixXd z = apply(q);
    const Eigen::MatrixXd h = q.transpose() * z;
    Eigen::EigenSolver<Eigen::MatrixXd> es(h, true);
    if (es.info() != Eigen::Success) throw NumericalError("edmd: Ritz eigensolver failed");
    const auto order = sorted_order(es.eigenvalues());

    Eigen::VectorXcd theta(r);
    Eigen::MatrixXcd ritz(p, r);
    for (Eigen::Index j = 0; j < r; ++j) {
      theta[j] = es.eigenvalues()[order[static_cast<std::size_t>(j)]];
      ritz.col(j) = es.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    }
    const Eigen::MatrixXcd v = q.cast<std::complex<double>>() * ritz;
    const Eigen::MatrixXcd mv = z.cast<std::complex<double>>() * ritz;
    const double scale = std::max(std::abs(theta[0]), 1e-300);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < r; ++j)
      worst = std::max(worst, (mv.col(j) - theta[j] * v.col(j)).norm() / v.col(j).norm());
    out = RawEigen{theta, v};
    if (worst <= 1e-13 * scale) return out;
    if (worst < 0.5 * best) {
      best = worst;
      best_it = it;
    } else if (it - best_it >= kStallWindow) {
      return out;
    }
    q = Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(n, p);
  }
  // Best available Ritz pairs; their residuals are reported to the caller.
  return out;
}

}  // namespace detail

/// M = (G_X + n lambda I)^{-1} K_YX. For f = sum_j v_j phi(x_j) the
/// estimated operator maps f to sum_i (M v)_i phi(x_i).
inline Eigen::MatrixXd edmd_matrix(const PairedSample& sample, const KernelSpec& k, double lambda) {
  detail::check_fit_inputs(sample, lambda);
  const auto gx = gram(k, sample.x);
  const auto llt = detail::regularized_gram_factor(gx.entries(), lambda);
  return llt.solve(cross_gram(k, sample.y, sample.x));
}

/// Dense problems up to this size use the full nonsymmetric eigensolver;
/// larger ones use subspace iteration on the top r eigenpairs.
inline constexpr Eigen::Index kDenseEdmdLimit = 600;

inline EdmdResult edmd_eigen(const PairedSample& sample, const KernelSpec& k, double lambda, Eigen::Index r) {
  detail::check_fit_inputs(sample, lambda);
  const auto n = sample.size();
  if (r < 1 || r > n) throw ValidationError("edmd: r out of range");

  const Eigen::MatrixXd gx = gram(k, sample.x).entries();
  const auto llt = detail::regularized_gram_factor(gx, lambda);
  const Eigen::MatrixXd kyx = cross_gram(k, sample.y, sample.x);
  auto apply = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd { return llt.solve(kyx * v); };

  detail::RawEigen raw = (n <= kDenseEdmdLimit || 3 * r > n) ? detail::dense_top_eigen(llt.solve(kyx), r)
                                                              : detail::subspace_top_eigen(n, r, apply);

  const Eigen::MatrixXcd gxc = gx.cast<std::complex<double>>();
  const double diag_max = gx.diagonal().maxCoeff();
  for (Eigen::Index j = 0; j < r; ++j) {
    // Conjugate partner of the previous column: copy it exactly.
    if (j > 0 && raw.values[j - 1].imag() > 0.0 &&
        std::abs(raw.values[j] - std::conj(raw.values[j - 1])) <= 1e-10 * std::abs(raw.values[j - 1])) {
      raw.values[j] = std::conj(raw.values[j - 1]);
      raw.vectors.col(j) = raw.vectors.col(j - 1).conjugate();
      continue;
    }
    if (raw.values[j].imag() == 0.0) raw.vectors.col(j) = raw.vectors.col(j).real().cast<std::complex<double>>();
    auto v = raw.vectors.col(j);
    const double euclid = v.norm();
    const double h_norm_sq = std::real(v.dot(gxc * v));
    if (h_norm_sq > 1e-24 * euclid * euclid * diag_max) v /= std::sqrt(h_norm_sq);
    else v /= euclid;
    const double vmax = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(v[i]) > 1e-12 * vmax) {
        v *= std::conj(v[i]) / std::abs(v[i]);
        v[i] = std::abs(v[i]);
        break;
      }
    }
  }

  EdmdResult res{raw.values, raw.vectors, Eigen::VectorXd(r), sample.x, k, lambda};
  Eigen::MatrixXcd applied(n, r);
  applied.real() = llt.solve(kyx * res.coeffs.real());
  applied.imag() = llt.solve(kyx * res.coeffs.imag());
  for (Eigen::Index j = 0; j < r; ++j) {
    const Eigen::VectorXcd diff = applied.col(j) - res.eigenvalues[j] * res.coeffs.col(j);
    const double f_norm_sq = std::real(res.coeffs.col(j).dot(gxc * res.coeffs.col(j)));
    const double r_norm_sq = std::max(std::real(diff.dot(gxc * diff)), 0.0);
    // A zero function satisfies every eigen-equation.
    res.residuals[j] = f_norm_sq > 1e-24 * diag_max ? std::sqrt(r_norm_sq / f_norm_sq) : 0.0;
  }
  return res;
}

inline std::complex<double> eval_eigenfunction(const EdmdResult& res, Eigen::Index j, PointRef x) {
  if (j < 0 || j >= res.rank()) throw ValidationError("eval_eigenfunction: index out of range");
  const Eigen::VectorXd kx = kernel_column(res.kernel, res.x, x);
  return res.coeffs.col(j).transpose() * kx.cast<std::complex<double>>();
}

/// Two-way split by the sign of Re f_1: label 0 where positive, 1 where
/// negative. Exact zeros take the label of the nearest nonzero entry in
/// input order (earlier index wins a tie).
inline std::vector<int> sign_cluster(const EdmdResult& res, const Points& states) {
  if (res.rank() < 2) throw ValidationError("sign_cluster: needs r >= 2");
  const auto m = states.rows();
  std::vector<double> vals(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) vals[static_cast<std::size_t>(i)] = eval_eigenfunction(res, 1, states.row(i)).real();

  std::vector<int> labels(vals.size(), 0);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    double v = vals[i];
    for (std::size_t off = 1; v == 0.0 && off < vals.size(); ++off) {
      if (off <= i && vals[i - off] != 0.0) v = vals[i - off];
      else if (i + off < vals.size() && vals[i + off] != 0.0) v = vals[i + off];
    }
    labels[i] = v < 0.0 ? 1 : 0;
  }
  return labels;
}

}  // namespace cmekit
