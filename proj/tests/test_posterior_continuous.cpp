#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "acrt/posterior_continuous.hpp"

using namespace acrt;

namespace {

struct Instance {
  std::vector<std::vector<double>> clusters;
  double sigma_w2;
  double sigma_b2;
  NormalPosterior prior;
};

Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> n_dist(1, 4), m_dist(1, 5);
  std::uniform_real_distribution<double> rho_dist(0.0, 0.9), y_dist(-3.0, 3.0),
      var_dist(0.2, 4.0), mean_dist(-2.0, 2.0);
  Instance inst;
  inst.sigma_w2 = var_dist(gen);
  inst.sigma_b2 = inst.sigma_w2 * [&] {
    const double rho = rho_dist(gen);
    return rho / (1.0 - rho);
  }();
  inst.prior = {mean_dist(gen), var_dist(gen) * 25.0};
  inst.clusters.resize(n_dist(gen));
  for (auto& c : inst.clusters) {
    c.resize(m_dist(gen));
    for (auto& y : c) y = y_dist(gen);
  }
  return inst;
}

ClusterSufficientStats stats_of(const Instance& inst) {
  ClusterSufficientStats s{{}, inst.sigma_w2, inst.sigma_b2};
  for (const auto& c : inst.clusters) {
    double sum = 0.0;
    for (double y : c) sum += y;
    s.blocks.push_back({c.size(), sum});
  }
  return s;
}

// Explicit block-diagonal covariance and a direct solve.
struct DenseOracle {
  double one_sinv_one;
  double one_sinv_y;
  NormalPosterior posterior;
};

DenseOracle dense_oracle(const Instance& inst) {
  std::size_t N = 0;
  for (const auto& c : inst.clusters) N += c.size();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd y(N);
  std::size_t offset = 0;
  for (const auto& c : inst.clusters) {
    const auto m = static_cast<Eigen::Index>(c.size());
    sigma.block(offset, offset, m, m) =
        inst.sigma_b2 * Eigen::MatrixXd::Ones(m, m) +
        inst.sigma_w2 * Eigen::MatrixXd::Identity(m, m);
    for (std::size_t i = 0; i < c.size(); ++i) y(offset + i) = c[i];
    offset += c.size();
  }
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sigma);
  const Eigen::VectorXd sinv_one = lu.solve(ones);
  const double q1 = ones.dot(sinv_one);
  const double qy = y.dot(sinv_one);
  const double precision = 1.0 / inst.prior.variance + q1;
  return {q1, qy, {(inst.prior.mean / inst.prior.variance + qy) / precision, 1.0 / precision}};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(QuadForms, SingleObservation) {
  const auto q = quad_forms({{{1, 2.5}}, 0.75, 0.25});
  EXPECT_DOUBLE_EQ(q.one_sinv_one, 1.0);
  EXPECT_DOUBLE_EQ(q.one_sinv_y, 2.5);
}

TEST(QuadForms, NoClusteringIsDiagonal) {
  const auto q = quad_forms({{{3, 1.5}, {2, -4.0}}, 2.0, 0.0});
  EXPECT_DOUBLE_EQ(q.one_sinv_one, 5.0 / 2.0);
  EXPECT_DOUBLE_EQ(q.one_sinv_y, -2.5 / 2.0);
}

TEST(QuadForms, MatchesDenseInverseTwoClusters) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  Instance inst{{std::vector<double>(3), std::vector<double>(3)}, 1.0, 1.0, {0.0, 100.0}};
  for (auto& c : inst.clusters) {
    for (auto& y : c) y = z(gen);
  }
  const auto q = quad_forms(stats_of(inst));
  const auto oracle = dense_oracle(inst);
  EXPECT_LE(rel_err(q.one_sinv_one, oracle.one_sinv_one), 1e-10);
  EXPECT_LE(rel_err(q.one_sinv_y, oracle.one_sinv_y), 1e-10);
}

TEST(QuadForms, RejectsBadInputs) {
  EXPECT_THROW(quad_forms({{{1, 0.0}}, 0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(quad_forms({{{0, 0.0}}, 1.0, 1.0}), std::invalid_argument);
}

TEST(PosteriorUpdate, EmptyDataReturnsPrior) {
  const auto post = posterior_update({1.5, 7.0}, {{}, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(post.mean, 1.5);
  EXPECT_DOUBLE_EQ(post.variance, 7.0);
}

TEST(PosteriorUpdate, SingleObservationPlugIn) {
  const double y = 0.8;
  const auto post = posterior_update({0.0, 100.0}, {{{1, y}}, 0.5, 0.5});
  EXPECT_NEAR(post.mean, 100.0 * y / 101.0, 1e-15);
  EXPECT_NEAR(post.variance, 100.0 / 101.0, 1e-15);
}

TEST(PosteriorUpdate, RandomInstancesMatchDenseBayes) {
  std::mt19937_64 gen(2024);
  for (int t = 0; t < 200; ++t) {
    const auto inst = random_instance(gen);
    const auto post = posterior_update(inst.prior, stats_of(inst));
    const auto oracle = dense_oracle(inst);
    EXPECT_LE(rel_err(post.mean, oracle.posterior.mean), 1e-10) << "instance " << t;
    EXPECT_LE(rel_err(post.variance, oracle.posterior.variance), 1e-10) << "instance " << t;
  }
}

TEST(PosteriorUpdate, AddingAClusterContracts) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 50; ++t) {
    auto inst = random_instance(gen);
    const auto before = posterior_update(inst.prior, stats_of(inst));
    inst.clusters.push_back({0.3});
    const auto after = posterior_update(inst.prior, stats_of(inst));
    EXPECT_LT(after.variance, before.variance);
  }
}

TEST(Superiority, SymmetricCases) {
  EXPECT_DOUBLE_EQ(prob_superiority_exact({1.0, 0.3}, {1.0, 0.3}, 0.0), 0.5);
  EXPECT_NEAR(prob_superiority_exact({1.2, 0.3}, {0.7, 0.1}, 0.5), 0.5, 1e-15);
}

TEST(Superiority, DecreasingInDeltaAndArmSwap) {
  const NormalPosterior c{0.4, 0.05}, t{0.1, 0.08};
  double prev = 1.0;
  for (double d = -1.0; d <= 1.0; d += 0.05) {
    const double p = prob_superiority_exact(c, t, d);
    EXPECT_LT(p, prev);
    prev = p;
    EXPECT_NEAR(prob_superiority_exact(t, c, -d), 1.0 - p, 1e-12);
  }
}

TEST(SuperiorityMC, SingleDrawIsZeroOrOne) {
  RngStream rng(1);
  const double p = prob_superiority_mc({0.0, 1.0}, {0.0, 1.0}, 0.0, 1, rng);
  EXPECT_TRUE(p == 0.0 || p == 1.0);
  EXPECT_THROW(prob_superiority_mc({0.0, 1.0}, {0.0, 1.0}, 0.0, 0, rng), std::invalid_argument);
}

TEST(SuperiorityMC, IdenticalPosteriorsNearHalf) {
  RngStream rng(2);
  const double p = prob_superiority_mc({0.2, 0.5}, {0.2, 0.5}, 0.0, 100000, rng);
  EXPECT_NEAR(p, 0.5, 3.0 * 0.00158);
}

TEST(SuperiorityMC, ConvergesToExact) {
  const NormalPosterior c{0.3, 0.04}, t{0.1, 0.05};
  const double exact = prob_superiority_exact(c, t, 0.05);
  for (std::size_t M : {1000u, 10000u, 100000u}) {
    RngStream rng(M);
    const double p = prob_superiority_mc(c, t, 0.05, M, rng);
    EXPECT_NEAR(p, exact, 3.0 * std::sqrt(p * (1 - p) / M) + 1e-12) << "M=" << M;
  }
}

TEST(History, CumulativeMergesClusterIncrements) {
  // Two stages extending the same clusters equal one block per cluster.
  const ArmHistory history{{{0, 3, 1.2}, {1, 3, -0.3}}, {{0, 3, 0.9}, {1, 3, 0.6}}};
  const auto post = posterior_from_history({0.0, 100.0}, history, 1.0, 0.5,
                                           UpdateMode::CumulativeFixedPrior);
  const auto direct =
      posterior_update({0.0, 100.0}, {{{6, 2.1}, {6, 0.3}}, 1.0, 0.5});
  EXPECT_DOUBLE_EQ(post.mean, direct.mean);
  EXPECT_DOUBLE_EQ(post.variance, direct.variance);
}

TEST(History, StagewiseEqualsCumulativeForNewClusters) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> z;
  for (int t = 0; t < 50; ++t) {
    ArmHistory history;
    std::size_t id = 0;
    for (int k = 0; k < 4; ++k) {
      std::vector<StageIncrement> stage;
      for (int j = 0; j < 3; ++j) stage.push_back({id++, 5, z(gen) * 5});
      history.push_back(stage);
    }
    const NormalPosterior prior{z(gen), 50.0};
    const auto a = posterior_from_history(prior, history, 1.0, 0.7,
                                          UpdateMode::CumulativeFixedPrior);
    const auto b = posterior_from_history(prior, history, 1.0, 0.7,
                                          UpdateMode::StagewisePosteriorAsPrior);
    EXPECT_NEAR(a.mean, b.mean, 1e-9 * std::max(1.0, std::abs(a.mean)));
    EXPECT_NEAR(a.variance, b.variance, 1e-9 * a.variance);
  }
}

TEST(History, StagewiseDiffersWhenClustersAreExtended) {
  const ArmHistory history{{{0, 2, 1.0}}, {{0, 2, 3.0}}};
  const auto a = posterior_from_history({0.0, 100.0}, history, 1.0, 1.0,
                                        UpdateMode::CumulativeFixedPrior);
  const auto b = posterior_from_history({0.0, 100.0}, history, 1.0, 1.0,
                                        UpdateMode::StagewisePosteriorAsPrior);
  // Ignoring the cross-stage covariance overstates the information.
  EXPECT_LT(b.variance, a.variance);
}
