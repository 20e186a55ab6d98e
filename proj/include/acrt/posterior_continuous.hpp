#pragma once

// Conjugate posterior for a population mean under the clustered normal model
//
//   Y ~ MVN(mu 1, Sigma),  Sigma = blockdiag(sigma_w2 I + sigma_b2 J),
//   mu ~ N(a, b2),
//
// giving mu | Y ~ N((b2 1'S^-1 Y + a) / (b2 1'S^-1 1 + 1), b2 / (b2 1'S^-1 1 + 1)).
//
// Each block is compound symmetric, so Sigma_j 1 = (sigma_w2 + m_j sigma_b2) 1
// and the quadratic forms reduce to per-cluster sizes and sums.

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "acrt/model.hpp"
#include "acrt/rng.hpp"

namespace acrt {

struct NormalPosterior {
  double mean = 0.0;
  double variance = 1.0;
};

struct ClusterBlock {
  std::size_t size = 0;
  double sum = 0.0;
};

struct ClusterSufficientStats {
  std::vector<ClusterBlock> blocks;
  double sigma_w2 = 1.0;
  double sigma_b2 = 0.0;
};

struct QuadForms {
  double one_sinv_one = 0.0;
  double one_sinv_y = 0.0;
};

inline QuadForms quad_forms(const ClusterSufficientStats& stats) {
  if (!(stats.sigma_w2 > 0.0) || !(stats.sigma_b2 >= 0.0)) {
    throw std::invalid_argument("need sigma_w2 > 0 and sigma_b2 >= 0");
  }
  QuadForms q;
  for (const auto& block : stats.blocks) {
    if (block.size == 0) throw std::invalid_argument("empty cluster block");
    const double m = static_cast<double>(block.size);
    const double denom = stats.sigma_w2 + m * stats.sigma_b2;
    q.one_sinv_one += m / denom;
    q.one_sinv_y += block.sum / denom;
  }
  return q;
}

inline NormalPosterior posterior_update(const NormalPosterior& prior,
                                        const ClusterSufficientStats& stats) {
  if (!(prior.variance > 0.0)) throw std::invalid_argument("prior variance must be > 0");
  const QuadForms q = quad_forms(stats);
  const double b2 = prior.variance;
  const double precision_scale = b2 * q.one_sinv_one + 1.0;
  return {(b2 * q.one_sinv_y + prior.mean) / precision_scale, b2 / precision_scale};
}

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// P(mu_c - mu_t > delta) for independent normal arm posteriors.
inline double prob_superiority_exact(const NormalPosterior& ctrl,
                                     const NormalPosterior& trt, double delta) {
  const double sd = std::sqrt(ctrl.variance + trt.variance);
  return standard_normal_cdf((ctrl.mean - trt.mean - delta) / sd);
}

/// Monte-Carlo estimate of P(mu_c - mu_t > delta) from M paired draws.
inline double prob_superiority_mc(const NormalPosterior& ctrl,
                                  const NormalPosterior& trt, double delta,
                                  std::size_t M, RngStream& rng) {
  if (M == 0) throw std::invalid_argument("M must be >= 1");
  const double sc = std::sqrt(ctrl.variance);
  const double st = std::sqrt(trt.variance);
  std::normal_distribution<double> z(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const double mc = ctrl.mean + sc * z(rng);
    const double mt = trt.mean + st * z(rng);
    if (mc - mt > delta) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(M);
}

/// Observations added to one cluster at one stage.
struct StageIncrement {
  std::size_t cluster = 0;
  std::size_t size = 0;
  double sum = 0.0;
};

/// Per-stage increments for one arm, stage 1 first.
using ArmHistory = std::vector<std::vector<StageIncrement>>;

/// Posterior after all stages in `history`.
///
/// CumulativeFixedPrior merges every increment into its cluster and updates
/// the fixed prior once. StagewisePosteriorAsPrior folds stage by stage,
/// using the previous posterior as prior and only the new observations as
/// data; new observations are compound symmetric among themselves and their
/// covariance with earlier members of the same cluster is ignored.
inline NormalPosterior posterior_from_history(const NormalPosterior& prior,
                                              const ArmHistory& history,
                                              double sigma_w2, double sigma_b2,
                                              UpdateMode mode) {
  if (mode == UpdateMode::CumulativeFixedPrior) {
    std::map<std::size_t, ClusterBlock> merged;
    for (const auto& stage : history) {
      for (const auto& inc : stage) {
        auto& block = merged[inc.cluster];
        block.size += inc.size;
        block.sum += inc.sum;
      }
    }
    ClusterSufficientStats stats{{}, sigma_w2, sigma_b2};
    stats.blocks.reserve(merged.size());
    for (const auto& [id, block] : merged) stats.blocks.push_back(block);
    return posterior_update(prior, stats);
  }

  NormalPosterior current = prior;
  for (const auto& stage : history) {
    ClusterSufficientStats stats{{}, sigma_w2, sigma_b2};
    stats.blocks.reserve(stage.size());
    for (const auto& inc : stage) stats.blocks.push_back({inc.size, inc.sum});
    current = posterior_update(current, stats);
  }
  return current;
}

}  // namespace acrt
