#pragma once

// Posterior of an arm's population proportion pi under the beta-binomial
// hierarchy
//
//   pi_j ~ Beta(pi v, (1 - pi) v),  r_j | pi_j ~ Binomial(m_j, pi_j),
//
// with v fixed and a uniform prior on pi. The posterior is one dimensional,
// so it is evaluated on a grid over [0, 1]; a random-walk Metropolis sampler
// on logit(pi) serves as an independent check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "acrt/rng.hpp"

namespace acrt {

struct BinaryCluster {
  std::size_t events = 0;
  std::size_t size = 0;
};

struct BinaryArmData {
  std::vector<BinaryCluster> clusters;
  double v = 1.0;  // beta precision alpha + beta
};

namespace detail {

inline void check_arm_data(const BinaryArmData& data) {
  if (!(data.v > 0.0) || !std::isfinite(data.v)) {
    throw std::invalid_argument("beta precision v must be positive and finite");
  }
  for (const auto& c : data.clusters) {
    if (c.events > c.size) throw std::invalid_argument("events exceed cluster size");
  }
}

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double log_choose(std::size_t m, std::size_t r) {
  return std::lgamma(static_cast<double>(m) + 1.0) -
         std::lgamma(static_cast<double>(r) + 1.0) -
         std::lgamma(static_cast<double>(m - r) + 1.0);
}

/// Multiplicities of each distinct (events, size) pair.
inline std::vector<std::pair<BinaryCluster, std::size_t>> tally(
    const BinaryArmData& data) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for (const auto& c : data.clusters) ++counts[{c.events, c.size}];
  std::vector<std::pair<BinaryCluster, std::size_t>> out;
  out.reserve(counts.size());
  for (const auto& [key, n] : counts) out.push_back({{key.first, key.second}, n});
  return out;
}

}  // namespace detail

/// Sum over clusters of the beta-binomial log pmf at population proportion pi.
inline double log_marginal_likelihood(double pi, const BinaryArmData& data) {
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must lie in (0, 1)");
  detail::check_arm_data(data);
  const double a = pi * data.v;
  const double b = (1.0 - pi) * data.v;
  const double log_b_prior = detail::log_beta(a, b);
  double total = 0.0;
  for (const auto& c : data.clusters) {
    const double r = static_cast<double>(c.events);
    const double m = static_cast<double>(c.size);
    total += detail::log_choose(c.size, c.events) +
             detail::log_beta(r + a, m - r + b) - log_b_prior;
  }
  return total;
}

/// Precomputed log rising factorials on the grid nodes x_i = i / (G - 1).
///
/// B(r + a, m - r + b) / B(a, b) = (a)_r (b)_{m-r} / (v)_m with a + b = v, so
/// the log likelihood at every node is a sum of table lookups. At the
/// endpoints log(0) = -inf gives the correct limit (zero density unless no
/// cluster has an event, resp. a non-event).
class GridKernel {
 public:
  GridKernel(double v, std::size_t grid_points, std::size_t max_size)
      : v_(v), points_(grid_points), max_size_(max_size) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("beta precision v must be positive and finite");
    }
    if (grid_points < 2) throw std::invalid_argument("need at least two grid points");
    const std::size_t width = max_size_ + 1;
    rising_.assign(points_ * width, 0.0);
    for (std::size_t i = 0; i < points_; ++i) {
      const double a = v_ * node(i);
      double acc = 0.0;
      for (std::size_t k = 1; k <= max_size_; ++k) {
        acc += std::log(a + static_cast<double>(k - 1));
        rising_[i * width + k] = acc;
      }
    }
    rising_v_.assign(width, 0.0);
    for (std::size_t k = 1; k <= max_size_; ++k) {
      rising_v_[k] = rising_v_[k - 1] + std::log(v_ + static_cast<double>(k - 1));
    }
  }

  [[nodiscard]] double v() const { return v_; }
  [[nodiscard]] std::size_t points() const { return points_; }
  [[nodiscard]] std::size_t max_size() const { return max_size_; }

  [[nodiscard]] double node(std::size_t i) const {
    return static_cast<double>(i) / static_cast<double>(points_ - 1);
  }

  /// log (a)_k at node i, a = v x_i.
  [[nodiscard]] double log_rising_a(std::size_t i, std::size_t k) const {
    return rising_[i * (max_size_ + 1) + k];
  }
  /// log (b)_k at node i, b = v (1 - x_i); mirrored so the grid is exactly
  /// symmetric under pi -> 1 - pi.
  [[nodiscard]] double log_rising_b(std::size_t i, std::size_t k) const {
    return rising_[(points_ - 1 - i) * (max_size_ + 1) + k];
  }

  /// Full log marginal likelihood at node i, including constants.
  [[nodiscard]] double log_likelihood(std::size_t i, const BinaryArmData& data) const {
    double total = 0.0;
    for (const auto& [c, count] : detail::tally(data)) {
      check_size(c.size);
      total += static_cast<double>(count) *
               (detail::log_choose(c.size, c.events) + log_rising_a(i, c.events) +
                log_rising_b(i, c.size - c.events) - rising_v_[c.size]);
    }
    return total;
  }

  void check_size(std::size_t size) const {
    if (size > max_size_) {
      throw std::invalid_argument("cluster size exceeds the grid kernel's table");
    }
  }

 private:
  double v_;
  std::size_t points_;
  std::size_t max_size_;
  std::vector<double> rising_;    // points_ x (max_size_ + 1)
  std::vector<double> rising_v_;  // log (v)_k
};

struct GridPosterior {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> cdf;

  [[nodiscard]] std::size_t size() const { return grid.size(); }
  [[nodiscard]] double spacing() const {
    return grid.size() > 1 ? grid[1] - grid[0] : 0.0;
  }

  /// Linear interpolation of the cdf; 0 below the grid, 1 above.
  [[nodiscard]] double cdf_at(double x) const {
    if (x <= grid.front()) return 0.0;
    if (x >= grid.back()) return 1.0;
    const double h = spacing();
    const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / h),
                            grid.size() - 2);
    const double t = (x - grid[i]) / h;
    return cdf[i] + t * (cdf[i + 1] - cdf[i]);
  }

  [[nodiscard]] double mean() const { return moment([](double x) { return x; }); }

  [[nodiscard]] double variance() const {
    const double mu = mean();
    return moment([mu](double x) { return (x - mu) * (x - mu); });
  }

  template <typename F>
  [[nodiscard]] double moment(F&& f) const {
    const double h = spacing();
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      total += 0.5 * h * (f(grid[i]) * density[i] + f(grid[i + 1]) * density[i + 1]);
    }
    return total;
  }
};

/// Normalized posterior on the kernel's grid. Log values are shifted by
/// their maximum before exponentiation, then scaled to unit trapezoid mass.
inline GridPosterior posterior_grid(const BinaryArmData& data, const GridKernel& kernel) {
  detail::check_arm_data(data);
  if (std::abs(data.v - kernel.v()) > 1e-12 * std::max(1.0, data.v)) {
    throw std::invalid_argument("grid kernel was built for a different v");
  }
  const auto tallies = detail::tally(data);
  for (const auto& [c, count] : tallies) kernel.check_size(c.size);

  const std::size_t G = kernel.points();
  GridPosterior post;
  post.grid.resize(G);
  post.density.resize(G);
  post.cdf.resize(G);

  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < G; ++i) {
    double lp = 0.0;
    for (const auto& [c, count] : tallies) {
      lp += static_cast<double>(count) *
            (kernel.log_rising_a(i, c.events) + kernel.log_rising_b(i, c.size - c.events));
    }
    post.grid[i] = kernel.node(i);
    post.density[i] = lp;
    max_log = std::max(max_log, lp);
  }
  if (!std::isfinite(max_log)) {
    throw std::runtime_error("posterior grid has no finite log density");
  }
  for (auto& d : post.density) d = std::exp(d - max_log);

  const double h = post.spacing();
  post.cdf[0] = 0.0;
  for (std::size_t i = 1; i < G; ++i) {
    post.cdf[i] = post.cdf[i - 1] + 0.5 * h * (post.density[i - 1] + post.density[i]);
  }
  const double mass = post.cdf.back();
  for (std::size_t i = 0; i < G; ++i) {
    post.density[i] /= mass;
    post.cdf[i] /= mass;
  }
  return post;
}

inline std::size_t max_cluster_size(const BinaryArmData& data) {
  std::size_t m = 0;
  for (const auto& c : data.clusters) m = std::max(m, c.size);
  return m;
}

inline GridPosterior posterior_grid(const BinaryArmData& data, std::size_t G) {
  if (G < 64) throw std::invalid_argument("grid needs at least 64 points");
  detail::check_arm_data(data);
  return posterior_grid(data, GridKernel(data.v, G, max_cluster_size(data)));
}

/// P(pi_t - pi_c > delta) = integral of f_t(x) F_c(x - delta) dx.
inline double prob_risk_diff_exceeds(const GridPosterior& trt, const GridPosterior& ctrl,
                                     double delta) {
  if (trt.size() != ctrl.size() || trt.size() < 2 ||
      trt.grid.front() != ctrl.grid.front() || trt.grid.back() != ctrl.grid.back()) {
    throw std::invalid_argument("posterior grids do not match");
  }
  const double h = trt.spacing();
  double total = 0.0;
  double prev = trt.density[0] * ctrl.cdf_at(trt.grid[0] - delta);
  for (std::size_t i = 1; i < trt.size(); ++i) {
    const double cur = trt.density[i] * ctrl.cdf_at(trt.grid[i] - delta);
    total += 0.5 * h * (prev + cur);
    prev = cur;
  }
  return std::clamp(total, 0.0, 1.0);
}

struct SamplerResult {
  std::vector<double> draws;
  double acceptance_rate = 0.0;
  double step = 0.0;
  bool tuning_warning = false;  // acceptance outside [0.1, 0.7]
};

/// Random-walk Metropolis on logit(pi) with target
/// log L(pi) + log pi + log(1 - pi) (uniform prior plus Jacobian).
///
/// A non-positive `step` is tuned during burn-in toward 0.35 acceptance and
/// then frozen. Every `thin`-th post-burn-in state is kept.
inline SamplerResult mh_posterior_sample(const BinaryArmData& data, std::size_t draws,
                                         std::size_t burn_in, double step,
                                         RngStream& rng, std::size_t thin = 1) {
  if (draws == 0 || burn_in == 0 || thin == 0) {
    throw std::invalid_argument("draws, burn_in and thin must be >= 1");
  }
  detail::check_arm_data(data);

  auto log_target = [&data](double theta) {
    const double pi = 1.0 / (1.0 + std::exp(-theta));
    if (!(pi > 0.0 && pi < 1.0)) return -std::numeric_limits<double>::infinity();
    return log_marginal_likelihood(pi, data) + std::log(pi) + std::log1p(-pi);
  };

  double events = 0.0;
  double subjects = 0.0;
  for (const auto& c : data.clusters) {
    events += static_cast<double>(c.events);
    subjects += static_cast<double>(c.size);
  }
  const double start = (events + 1.0) / (subjects + 2.0);
  double theta = std::log(start / (1.0 - start));
  double current = log_target(theta);

  const bool adapt = !(step > 0.0);
  double log_step = adapt ? std::log(1.0) : std::log(step);
  constexpr double target_rate = 0.35;

  std::normal_distribution<double> z(0.0, 1.0);
  auto advance = [&]() {
    const double proposal = theta + std::exp(log_step) * z(rng);
    const double next = log_target(proposal);
    const bool accept = std::log(rng.uniform()) < next - current;
    if (accept) {
      theta = proposal;
      current = next;
    }
    return accept;
  };

  for (std::size_t i = 0; i < burn_in; ++i) {
    const bool accepted = advance();
    if (adapt) {
      const double gain = 1.0 / std::sqrt(static_cast<double>(i) + 10.0);
      log_step += gain * ((accepted ? 1.0 : 0.0) - target_rate);
    }
  }

  SamplerResult result;
  result.draws.reserve(draws);
  std::size_t accepted = 0;
  std::size_t iterations = 0;
  while (result.draws.size() < draws) {
    for (std::size_t t = 0; t < thin; ++t) {
      accepted += advance() ? 1 : 0;
      ++iterations;
    }
    result.draws.push_back(1.0 / (1.0 + std::exp(-theta)));
  }
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(iterations);
  result.step = std::exp(log_step);
  result.tuning_warning = result.acceptance_rate < 0.1 || result.acceptance_rate > 0.7;
  return result;
}

}  // namespace acrt
