#include <cmath>

#include <gtest/gtest.h>

#include "cmekit/embedding.hpp"
#include "cmekit/models.hpp"
#include "test_support.hpp"

namespace cmekit {
namespace {

const KernelSpec kGauss = KernelSpec::gaussian(1.0);

TEST(Embedding, MeanEmbedBasics) {
  const auto one = mean_embed(kGauss, make_points({{0.2}}));
  EXPECT_EQ(one.weights().size(), 1);
  EXPECT_EQ(one.weights()[0], 1.0);

  const auto copies = mean_embed(kGauss, make_points({{0.2}, {0.2}, {0.2}}));
  EXPECT_NEAR(copies.weights().sum(), 1.0, 1e-15);
  EXPECT_NEAR(embed_norm_sq(copies), 1.0, 1e-15);

  const auto two = mean_embed(kGauss, make_points({{0.0}, {1.0}}));
  EXPECT_NEAR(embed_norm_sq(two), 0.8032653299, 1e-10);
  EXPECT_NEAR(embed_inner(two, two), 0.8032653299, 1e-10);
  EXPECT_THROW(mean_embed(kGauss, Points(0, 1)), ValidationError);
}

TEST(Embedding, InnerProductExamples) {
  const auto pts = make_points({{0.0}, {1.3}});
  const auto a = WeightedEmbedding::feature(kGauss, pts.row(0));
  const auto b = WeightedEmbedding::feature(kGauss, pts.row(1));
  EXPECT_EQ(embed_inner(a, b), eval(kGauss, pts.row(0), pts.row(1)));
  const WeightedEmbedding zero(kGauss, pts, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(embed_inner(zero, b), 0.0);
  EXPECT_EQ(embed_norm_sq(zero), 0.0);
  EXPECT_EQ(embed_norm_sq(a), 1.0);
  const auto other = WeightedEmbedding::feature(KernelSpec::gaussian(2.0), pts.row(0));
  EXPECT_THROW(embed_inner(a, other), ValidationError);
}

TEST(Embedding, ExpectationReproducing) {
  CounterRng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto f = WeightedEmbedding(kGauss, testing::random_points(rng, 7, 2), Eigen::VectorXd::Random(7));
    const auto samples = testing::random_points(rng, 13, 2);
    double mean = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i)
      mean += embed_inner(f, WeightedEmbedding::feature(kGauss, samples.row(i)));
    mean /= static_cast<double>(samples.rows());
    EXPECT_NEAR(embed_inner(f, mean_embed(kGauss, samples)), mean, 1e-12);
  }
}

TEST(Embedding, Bilinearity) {
  CounterRng rng(8);
  for (int t = 0; t < 20; ++t) {
    const WeightedEmbedding a(kGauss, testing::random_points(rng, 5, 2), Eigen::VectorXd::Random(5));
    const WeightedEmbedding b(kGauss, testing::random_points(rng, 4, 2), Eigen::VectorXd::Random(4));
    const WeightedEmbedding c(kGauss, testing::random_points(rng, 6, 2), Eigen::VectorXd::Random(6));
    const double alpha = rng.normal();
    const double beta = rng.normal();
    const auto combo = a.combine(alpha, b, beta);
    EXPECT_NEAR(embed_inner(combo, c), alpha * embed_inner(a, c) + beta * embed_inner(b, c), 1e-12);
    EXPECT_NEAR(embed_inner(a, c), embed_inner(c, a), 1e-14);
  }
}

TEST(Embedding, BiasedMmdExamples) {
  const auto p = make_points({{0.0}});
  const auto q = make_points({{1.0}});
  EXPECT_NEAR(mmd_sq_biased(kGauss, p, q), 0.7869386806, 1e-10);
  const auto same = make_points({{0.1}, {2.0}, {-1.0}});
  EXPECT_NEAR(mmd_sq_biased(kGauss, same, same), 0.0, 1e-15);
  EXPECT_THROW(mmd_sq_biased(kGauss, Points(0, 1), q), ValidationError);
}

TEST(Embedding, BiasedMmdMatchesBruteForceAndNorm) {
  CounterRng rng(99);
  for (int t = 0; t < 50; ++t) {
    const auto n = 1 + static_cast<Eigen::Index>(rng.next_u64() % 50);
    const auto m = 1 + static_cast<Eigen::Index>(rng.next_u64() % 50);
    const auto p = testing::random_points(rng, n, 2);
    const auto q = testing::random_points(rng, m, 2);
    const double v = mmd_sq_biased(kGauss, p, q);
    EXPECT_NEAR(v, testing::brute_force_mmd_sq(kGauss, p, q), 1e-12);
    EXPECT_NEAR(v, embed_norm_sq(mean_embed(kGauss, p) - mean_embed(kGauss, q)), 1e-12);
    EXPECT_EQ(v, mmd_sq_biased(kGauss, q, p));
    EXPECT_GE(v, -1e-10);
  }
}

TEST(Embedding, MmdTriangleInequality) {
  CounterRng rng(17);
  const auto lap = KernelSpec::laplacian(1.0);
  for (int t = 0; t < 100; ++t) {
    const auto a = testing::random_points(rng, 6, 2);
    const auto b = testing::random_points(rng, 8, 2);
    const auto c = testing::random_points(rng, 5, 2);
    auto d = [&](const Points& x, const Points& y) { return std::sqrt(std::max(mmd_sq_biased(lap, x, y), 0.0)); };
    EXPECT_LE(d(a, c), d(a, b) + d(b, c) + 1e-10);
  }
}

TEST(Embedding, UnbiasedMmdExamples) {
  const auto z = make_points({{0.5}, {0.5}, {0.5}});
  EXPECT_NEAR(mmd_sq_unbiased(kGauss, z, z), 0.0, 1e-15);
  EXPECT_NEAR(mmd_sq_unbiased(kGauss, make_points({{0.0}, {0.0}}), make_points({{1.0}, {1.0}})), 0.7869386806, 1e-10);
  EXPECT_THROW(mmd_sq_unbiased(kGauss, make_points({{0.0}}), make_points({{1.0}, {1.0}})), ValidationError);
  EXPECT_THROW(mmd_sq_unbiased(kGauss, make_points({{0.0}, {1.0}}), make_points({{1.0}})), ValidationError);
}

TEST(Embedding, UnbiasedMmdMonteCarloMean) {
  // Two laws on three states, compared through a one-state-conditioned model
  // so the population value comes from the exact oracle.
  FiniteMarkovModel model;
  model.states = line_states(3);
  model.marginal = Eigen::Vector3d(1.0, 0.0, 0.0);
  model.transition = Eigen::Matrix3d{{0.5, 0.3, 0.2}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  model.transition_alt = Eigen::Matrix3d{{0.2, 0.3, 0.5}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  const double exact = exact_mmd_integral(model, kGauss);
  const Eigen::VectorXd p = model.transition.row(0).transpose();
  const Eigen::VectorXd q = model.transition_alt->row(0).transpose();
  EXPECT_NEAR(exact, testing::population_mmd_sq(gram(kGauss, model.states).entries(), p, q), 1e-15);

  CounterRng rng(4242);
  constexpr int kResamples = 1000;
  constexpr Eigen::Index kSize = 20;
  auto draw = [&](const Eigen::VectorXd& probs) {
    Points out(kSize, 1);
    for (Eigen::Index i = 0; i < kSize; ++i) {
      const double u = rng.uniform();
      out(i, 0) = u < probs[0] ? 0.0 : (u < probs[0] + probs[1] ? 1.0 : 2.0);
    }
    return out;
  };
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < kResamples; ++t) {
    const double v = mmd_sq_unbiased(kGauss, draw(p), draw(q));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / kResamples;
  const double var = (sum_sq - kResamples * mean * mean) / (kResamples - 1);
  const double se = std::sqrt(var / kResamples);
  EXPECT_LE(std::abs(mean - exact), 3.0 * se) << "mean " << mean << " exact " << exact << " se " << se;
}

}  // namespace
}  // namespace cmekit
