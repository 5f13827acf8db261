#include <cmath>
#include <complex>
#include <numbers>

#include <gtest/gtest.h>

#include "cmekit/models.hpp"
#include "cmekit/spectral.hpp"
#include "test_support.hpp"

namespace cmekit {
namespace {

const KernelSpec kGauss = KernelSpec::gaussian(1.0);

PairedSample cycle_sample(Eigen::Index n, std::uint64_t seed) {
  FiniteMarkovModel model;
  model.states = line_states(3);
  model.marginal = Eigen::Vector3d::Constant(1.0 / 3.0);
  model.transition = Eigen::Matrix3d{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}};
  return sample_pairs(model, n, seed);
}

TEST(Edmd, MatrixMatchesDefinition) {
  CounterRng rng(3);
  const auto s = testing::random_sample(rng, 40, 2);
  const double lambda = 1e-3;
  Eigen::MatrixXd a = gram(kGauss, s.x).entries();
  a.diagonal().array() += 40.0 * lambda;
  const Eigen::MatrixXd expected = a.inverse() * cross_gram(kGauss, s.y, s.x);
  EXPECT_LE((edmd_matrix(s, kGauss, lambda) - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Edmd, IdentityDynamicsGivesUnitEigenvalues) {
  CounterRng rng(4);
  const auto x = testing::random_points(rng, 50, 1);
  const auto res = edmd_eigen({x, x}, kGauss, 1e-9, 3);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(res.eigenvalues[j].real(), 1.0, 1e-4);
    EXPECT_EQ(res.eigenvalues[j].imag(), 0.0);
  }
}

TEST(Edmd, SortedAndSmallResidualsDense) {
  CounterRng rng(5);
  const auto s = testing::random_sample(rng, 200, 1);
  const auto res = edmd_eigen(s, kGauss, 1e-3, 6);
  ASSERT_EQ(res.rank(), 6);
  for (Eigen::Index j = 0; j + 1 < 6; ++j) EXPECT_GE(std::abs(res.eigenvalues[j]), std::abs(res.eigenvalues[j + 1]));
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_LE(res.residuals[j], 1e-8);
}

TEST(Edmd, IterativePathMatchesDense) {
  CounterRng rng(6);
  const auto s = testing::random_sample(rng, 300, 1);
  const Eigen::MatrixXd gx = gram(kGauss, s.x).entries();
  const auto llt = detail::regularized_gram_factor(gx, 1e-3);
  const Eigen::MatrixXd kyx = cross_gram(kGauss, s.y, s.x);
  const auto dense = detail::dense_top_eigen(llt.solve(kyx), 4);
  const auto iter = detail::subspace_top_eigen(300, 4, [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    return llt.solve(kyx * v);
  });
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LE(std::abs(dense.values[j] - iter.values[j]), 1e-10);
}

TEST(Edmd, LargeSampleUsesIterativeSolverWithSmallResiduals) {
  const auto s = ou_sample_pairs(1.0, 0.5, kDenseEdmdLimit + 200, 17);
  const auto res = edmd_eigen(s, kGauss, 1e-3, 4);
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LE(res.residuals[j], 1e-8);
  EXPECT_NEAR(res.eigenvalues[0].real(), 1.0, 0.05);
}

TEST(Edmd, ConsistentWithConditionalExpectation) {
  CounterRng rng(7);
  const auto s = testing::random_sample(rng, 120, 1);
  const double lambda = 1e-3;
  const auto res = edmd_eigen(s, kGauss, lambda, 3);
  const auto est = fit_tikhonov_closed_form(s, kGauss, lambda);
  const Eigen::MatrixXd kyx = cross_gram(kGauss, s.y, s.x);
  for (Eigen::Index j = 0; j < 3; ++j) {
    if (res.eigenvalues[j].imag() != 0.0) continue;
    const Eigen::VectorXd v = res.coeffs.col(j).real();
    const Eigen::VectorXd f_at_y = kyx * v;
    for (double q : {-1.0, 0.0, 0.7}) {
      const auto x = make_points({{q}});
      const double lhs = predict_conditional_expectation(est, x.row(0), f_at_y);
      const double rhs = res.eigenvalues[j].real() * eval_eigenfunction(res, j, x.row(0)).real();
      EXPECT_NEAR(lhs, rhs, 1e-8);
    }
  }
}

TEST(Edmd, CycleHasConjugatePair) {
  const auto res = edmd_eigen(cycle_sample(300, 9), kGauss, 1e-6, 3);
  const auto rot = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  EXPECT_LE(std::abs(res.eigenvalues[0] - 1.0), 0.01);
  EXPECT_LE(std::abs(res.eigenvalues[1] - rot), 0.01);
  EXPECT_EQ(res.eigenvalues[2], std::conj(res.eigenvalues[1]));
  EXPECT_EQ(res.coeffs.col(2), res.coeffs.col(1).conjugate().eval());
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_LE(res.residuals[j], 1e-8);
}

TEST(Edmd, EigenfunctionsAreNormalized) {
  CounterRng rng(8);
  const auto s = testing::random_sample(rng, 60, 2);
  const auto res = edmd_eigen(s, kGauss, 1e-2, 4);
  const Eigen::MatrixXcd g = gram(kGauss, s.x).entries().cast<std::complex<double>>();
  for (Eigen::Index j = 0; j < 4; ++j) {
    EXPECT_NEAR(std::real(res.coeffs.col(j).dot(g * res.coeffs.col(j))), 1.0, 1e-10);
  }
}

TEST(Edmd, Deterministic) {
  CounterRng rng(9);
  const auto s = testing::random_sample(rng, 80, 1);
  const auto a = edmd_eigen(s, kGauss, 1e-3, 5);
  const auto b = edmd_eigen(s, kGauss, 1e-3, 5);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.coeffs, b.coeffs);
}

TEST(Edmd, Errors) {
  CounterRng rng(10);
  const auto s = testing::random_sample(rng, 5, 1);
  EXPECT_THROW(edmd_eigen(s, kGauss, 1e-3, 0), ValidationError);
  EXPECT_THROW(edmd_eigen(s, kGauss, 1e-3, 6), ValidationError);
  EXPECT_THROW(edmd_eigen(s, kGauss, 0.0, 2), ValidationError);
  const auto res = edmd_eigen(s, kGauss, 1e-3, 2);
  EXPECT_THROW(eval_eigenfunction(res, 2, s.x.row(0)), ValidationError);
  const auto one = edmd_eigen(s, kGauss, 1e-3, 1);
  EXPECT_THROW(sign_cluster(one, s.x), ValidationError);
}

TEST(SignCluster, ZerosFollowNearestNonzero) {
  const Points states = line_states(6);
  const auto k = KernelSpec::table(states, Eigen::MatrixXd::Identity(6, 6));
  Eigen::MatrixXcd coeffs = Eigen::MatrixXcd::Zero(6, 2);
  coeffs.col(1).real() << 0.0, -1.0, 0.0, 0.0, 2.0, 0.0;
  const EdmdResult res{Eigen::VectorXcd::Ones(2), coeffs, Eigen::VectorXd::Zero(2), states, k, 1.0};
  EXPECT_EQ(sign_cluster(res, states), (std::vector<int>{1, 1, 1, 0, 0, 0}));
}

TEST(SignCluster, SeparatesDoubleWell) {
  const auto s = double_well_pairs(3.0, 1e-2, 10, 1000, 2024);
  const auto res = edmd_eigen(s, KernelSpec::gaussian(0.5), 1e-4, 2);
  const auto labels = sign_cluster(res, s.x);
  double agree = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) agree += (labels[static_cast<std::size_t>(i)] == 0) == (s.x(i, 0) > 0.0);
  agree /= static_cast<double>(s.size());
  EXPECT_GE(std::max(agree, 1.0 - agree), 0.9);
}

}  // namespace
}  // namespace cmekit
