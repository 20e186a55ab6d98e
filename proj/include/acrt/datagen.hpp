#pragma once

// Clustered outcome generation.
//
// Continuous: mu_j ~ N(mu, sigma_b2), Y_ij | mu_j ~ N(mu_j, sigma_w2).
// Binary: pi_j ~ Beta(pi v, (1 - pi) v), r_j | pi_j ~ Binomial(size, pi_j),
// with v = (1 - rho) / rho; pi_j = pi exactly when rho = 0.
//
// Clusters keep their latent effect for life, so design-2 stages extend the
// same clusters and the within-cluster covariance holds across stages.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "acrt/model.hpp"
#include "acrt/rng.hpp"

namespace acrt {

struct ClusterStateContinuous {
  double latent_mean = 0.0;
  std::vector<double> observations;

  [[nodiscard]] std::size_t size() const { return observations.size(); }
  [[nodiscard]] double sum() const {
    return std::accumulate(observations.begin(), observations.end(), 0.0);
  }
};

struct ClusterStateBinary {
  double latent_prop = 0.5;
  std::size_t events = 0;
  std::size_t size = 0;
};

/// Draws cluster means only; the clusters start with no observations.
inline std::vector<ClusterStateContinuous> draw_continuous_latents(
    std::size_t count, double mu, double sigma_b2, RngStream& rng) {
  if (!(sigma_b2 >= 0.0)) throw std::invalid_argument("sigma_b2 must be >= 0");
  const double sd = std::sqrt(sigma_b2);
  std::vector<ClusterStateContinuous> clusters(count);
  for (auto& c : clusters) c.latent_mean = mu + sd * rng.standard_normal();
  return clusters;
}

inline void extend_continuous_in_place(ClusterStateContinuous& cluster,
                                       std::size_t extra, double sigma_w2,
                                       RngStream& rng) {
  if (extra == 0) throw std::invalid_argument("extend by at least one subject");
  if (!(sigma_w2 > 0.0)) throw std::invalid_argument("sigma_w2 must be positive");
  const double sd = std::sqrt(sigma_w2);
  cluster.observations.reserve(cluster.observations.size() + extra);
  for (std::size_t i = 0; i < extra; ++i) {
    cluster.observations.push_back(cluster.latent_mean + sd * rng.standard_normal());
  }
}

inline ClusterStateContinuous extend_continuous_cluster(
    ClusterStateContinuous cluster, std::size_t extra, double sigma_w2,
    RngStream& rng) {
  extend_continuous_in_place(cluster, extra, sigma_w2, rng);
  return cluster;
}

inline std::vector<ClusterStateContinuous> new_continuous_clusters(
    std::size_t count, std::size_t size, double mu, double sigma_w2,
    double sigma_b2, RngStream& rng) {
  if (count == 0 || size == 0) {
    throw std::invalid_argument("count and size must be >= 1");
  }
  auto clusters = draw_continuous_latents(count, mu, sigma_b2, rng);
  for (auto& c : clusters) extend_continuous_in_place(c, size, sigma_w2, rng);
  return clusters;
}

/// Beta(a, b) via the gamma ratio, redrawn until strictly inside (0, 1).
inline double draw_beta(double a, double b, RngStream& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    const double p = x / (x + y);
    if (p > 0.0 && p < 1.0) return p;
  }
}

inline std::vector<ClusterStateBinary> draw_binary_latents(std::size_t count,
                                                           double pi, double rho,
                                                           RngStream& rng) {
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must lie in (0, 1)");
  const double v = beta_precision_from_icc(rho);
  std::vector<ClusterStateBinary> clusters(count);
  for (auto& c : clusters) {
    c.latent_prop = std::isinf(v) ? pi : draw_beta(pi * v, (1.0 - pi) * v, rng);
  }
  return clusters;
}

inline void extend_binary_in_place(ClusterStateBinary& cluster, std::size_t extra,
                                   RngStream& rng) {
  if (extra == 0) throw std::invalid_argument("extend by at least one subject");
  // Subject by subject, so a cluster's outcome sequence does not depend on
  // how its accrual is split into stages.
  for (std::size_t i = 0; i < extra; ++i) {
    if (rng.uniform() < cluster.latent_prop) ++cluster.events;
  }
  cluster.size += extra;
}

inline ClusterStateBinary extend_binary_cluster(ClusterStateBinary cluster,
                                                std::size_t extra, RngStream& rng) {
  extend_binary_in_place(cluster, extra, rng);
  return cluster;
}

inline std::vector<ClusterStateBinary> new_binary_clusters(std::size_t count,
                                                           std::size_t size,
                                                           double pi, double rho,
                                                           RngStream& rng) {
  if (count == 0 || size == 0) {
    throw std::invalid_argument("count and size must be >= 1");
  }
  auto clusters = draw_binary_latents(count, pi, rho, rng);
  for (auto& c : clusters) extend_binary_in_place(c, size, rng);
  return clusters;
}

/// Columnar dump: replication,arm,cluster,subject,value. Binary clusters are
/// written one row per subject, events first (value 1) then non-events.
class DatasetWriter {
 public:
  explicit DatasetWriter(std::ostream& out) : out_(out) {
    out_ << "replication,arm,cluster,subject,value\n";
  }

  void write(std::size_t replication, Arm arm,
             const std::vector<ClusterStateContinuous>& clusters) {
    out_.precision(17);
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      const auto& obs = clusters[j].observations;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        out_ << replication << ',' << arm_name(arm) << ',' << j << ',' << i << ','
             << obs[i] << '\n';
      }
    }
  }

  void write(std::size_t replication, Arm arm,
             const std::vector<ClusterStateBinary>& clusters) {
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      for (std::size_t i = 0; i < clusters[j].size; ++i) {
        out_ << replication << ',' << arm_name(arm) << ',' << j << ',' << i << ','
             << (i < clusters[j].events ? 1 : 0) << '\n';
      }
    }
  }

  static const char* arm_name(Arm arm) {
    switch (arm) {
      case Arm::Control: return "control";
      case Arm::Treatment: return "treatment";
      case Arm::Both: break;
    }
    return "both";
  }

 private:
  std::ostream& out_;
};

}  // namespace acrt
