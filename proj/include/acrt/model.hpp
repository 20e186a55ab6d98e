#pragma once

// Domain types for two-arm adaptive cluster-randomized trials, scenario
// validation and the stage-by-stage enrollment schedule.
//
// Direction conventions are fixed: for continuous outcomes a smaller mean is
// better, so the treatment mean is mu_c - effect and the quantity of interest
// is mu_c - mu_t. For binary outcomes a larger proportion is better, so
// pi_t = pi_c + effect and the quantity of interest is pi_t - pi_c.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace acrt {

enum class OutcomeKind { Continuous, Binary };

/// Design1 enrolls whole clusters stage by stage. Design2 enrolls every
/// cluster at the start and accrues participants within clusters.
enum class DesignKind { Design1, Design2 };

enum class RemainderPolicy { LiteralFloor, FillFinalStage };

enum class UpdateMode { CumulativeFixedPrior, StagewisePosteriorAsPrior };

enum class ProbabilityMode { Exact, MonteCarlo };

struct OutcomeSpec {
  OutcomeKind kind = OutcomeKind::Continuous;
  double mu_c = 0.0;      // continuous only
  double sigma_w2 = 1.0;  // continuous only
  double pi_c = 0.5;      // binary only
  double effect = 0.0;
  double rho = 0.0;

  [[nodiscard]] double control_mean() const {
    return kind == OutcomeKind::Continuous ? mu_c : pi_c;
  }
  [[nodiscard]] double treatment_mean() const {
    return kind == OutcomeKind::Continuous ? mu_c - effect : pi_c + effect;
  }

  static OutcomeSpec continuous(double mu_c, double effect, double sigma_w2,
                                double rho) {
    OutcomeSpec o;
    o.kind = OutcomeKind::Continuous;
    o.mu_c = mu_c;
    o.effect = effect;
    o.sigma_w2 = sigma_w2;
    o.rho = rho;
    return o;
  }

  static OutcomeSpec binary(double pi_c, double effect, double rho) {
    OutcomeSpec o;
    o.kind = OutcomeKind::Binary;
    o.pi_c = pi_c;
    o.effect = effect;
    o.rho = rho;
    return o;
  }

  friend bool operator==(const OutcomeSpec&, const OutcomeSpec&) = default;
};

struct DesignSpec {
  DesignKind design = DesignKind::Design1;
  std::size_t n = 20;  // max clusters per arm
  std::size_t m = 8;   // max cluster size
  std::size_t K = 1;   // interim analyses, excluding the final one
  double U = 0.95;     // decision boundary
  double delta_mid = 0.0;
  RemainderPolicy remainder = RemainderPolicy::LiteralFloor;

  [[nodiscard]] std::size_t analyses() const { return K + 1; }

  friend bool operator==(const DesignSpec&, const DesignSpec&) = default;
};

/// Continuous prior N(mean, variance) on each arm's population mean. The
/// binary model always uses a uniform prior on the population proportion.
struct PriorSpec {
  double mean = 0.0;
  double variance = 100.0;
  UpdateMode update_mode = UpdateMode::CumulativeFixedPrior;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;
};

struct AnalysisOptions {
  ProbabilityMode prob_mode = ProbabilityMode::Exact;
  std::size_t mc_samples = 10000;
  std::size_t grid_points = 2048;

  friend bool operator==(const AnalysisOptions&, const AnalysisOptions&) = default;
};

struct Scenario {
  OutcomeSpec outcome;
  DesignSpec design;
  PriorSpec prior;
  AnalysisOptions analysis;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct StageEnrollment {
  std::size_t cum_clusters = 0;
  std::vector<std::size_t> cluster_sizes;  // one entry per enrolled cluster

  [[nodiscard]] std::size_t participants() const {
    return std::accumulate(cluster_sizes.begin(), cluster_sizes.end(),
                           std::size_t{0});
  }
};

/// Identical for both arms.
struct AnalysisSchedule {
  std::vector<StageEnrollment> stages;
};

inline double sigma_b2_from_icc(double rho, double sigma_w2) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("icc must lie in [0, 1)");
  }
  if (!(sigma_w2 > 0.0)) {
    throw std::invalid_argument("sigma_w2 must be positive");
  }
  return sigma_w2 * rho / (1.0 - rho);
}

/// Beta precision v = alpha + beta matching Var(pi_j) = rho pi (1 - pi).
/// Infinite at rho = 0.
inline double beta_precision_from_icc(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("icc must lie in [0, 1)");
  }
  if (rho == 0.0) return std::numeric_limits<double>::infinity();
  return (1.0 - rho) / rho;
}

inline AnalysisSchedule build_schedule(const DesignSpec& design) {
  const std::size_t looks = design.analyses();
  if (design.n == 0 || design.m == 0) {
    throw std::invalid_argument("n and m must be positive");
  }
  const bool by_cluster = design.design == DesignKind::Design1;
  const std::size_t budget = by_cluster ? design.n : design.m;
  const std::size_t step = budget / looks;
  if (step == 0) {
    throw std::invalid_argument(
        std::string(by_cluster ? "n" : "m") + " = " + std::to_string(budget) +
        " is too small for " + std::to_string(looks) +
        " analyses: some stage would be empty");
  }

  AnalysisSchedule schedule;
  schedule.stages.reserve(looks);
  for (std::size_t k = 1; k <= looks; ++k) {
    std::size_t amount = k * step;
    if (k == looks && design.remainder == RemainderPolicy::FillFinalStage) {
      amount = budget;
    }
    StageEnrollment stage;
    if (by_cluster) {
      stage.cum_clusters = amount;
      stage.cluster_sizes.assign(amount, design.m);
    } else {
      stage.cum_clusters = design.n;
      stage.cluster_sizes.assign(design.n, amount);
    }
    schedule.stages.push_back(std::move(stage));
  }
  return schedule;
}

struct FieldError {
  std::string field;
  std::string message;
};

/// A scenario whose invariants have been verified, with derived quantities.
struct CheckedScenario {
  Scenario scenario;
  double sigma_b2 = 0.0;         // continuous only
  double beta_precision = 0.0;   // binary only, v = (1 - rho) / rho
  AnalysisSchedule schedule;

  [[nodiscard]] const OutcomeSpec& outcome() const { return scenario.outcome; }
  [[nodiscard]] const DesignSpec& design() const { return scenario.design; }
  [[nodiscard]] const PriorSpec& prior() const { return scenario.prior; }
  [[nodiscard]] const AnalysisOptions& analysis() const {
    return scenario.analysis;
  }
};

struct ValidationResult {
  std::optional<CheckedScenario> checked;
  std::vector<FieldError> errors;

  [[nodiscard]] bool ok() const { return checked.has_value(); }
  [[nodiscard]] std::string describe() const {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e.field + ": " + e.message;
    }
    return out;
  }
};

inline ValidationResult validate_scenario(const Scenario& scenario) {
  ValidationResult result;
  auto fail = [&](std::string field, std::string message) {
    result.errors.push_back({std::move(field), std::move(message)});
  };
  auto finite = [](double x) { return std::isfinite(x); };

  const OutcomeSpec& o = scenario.outcome;
  const DesignSpec& d = scenario.design;
  const PriorSpec& p = scenario.prior;
  const AnalysisOptions& a = scenario.analysis;

  if (!finite(o.effect)) fail("outcome.effect", "must be finite");
  if (o.kind == OutcomeKind::Continuous) {
    if (!finite(o.mu_c)) fail("outcome.mu_c", "must be finite");
    if (!(o.sigma_w2 > 0.0) || !finite(o.sigma_w2)) {
      fail("outcome.sigma_w2", "must be positive and finite");
    }
    if (!(o.rho >= 0.0 && o.rho < 1.0)) fail("outcome.icc", "must lie in [0, 1)");
    if (o.effect < 0.0) fail("outcome.effect", "must be >= 0 for continuous outcomes");
  } else {
    if (!(o.pi_c > 0.0 && o.pi_c < 1.0)) fail("outcome.pi_c", "must lie in (0, 1)");
    const double pi_t = o.pi_c + o.effect;
    if (!(pi_t > 0.0 && pi_t < 1.0)) {
      fail("outcome.effect", "pi_t = pi_c + effect = " + std::to_string(pi_t) +
                                 " out of (0,1)");
    }
    // The analysis model needs a finite beta precision.
    if (!(o.rho > 0.0 && o.rho < 1.0)) {
      fail("outcome.icc", "must lie in (0, 1) for binary outcomes");
    }
  }

  if (d.n == 0) fail("design.n_clusters", "must be positive");
  if (d.m == 0) fail("design.cluster_size", "must be positive");
  if (!(d.U > 0.0 && d.U <= 1.0)) fail("design.boundary", "must lie in (0, 1]");
  if (!finite(d.delta_mid)) fail("design.min_important_diff", "must be finite");
  if (d.n > 0 && d.m > 0) {
    const std::size_t looks = d.analyses();
    if (d.design == DesignKind::Design1 && d.n / looks == 0) {
      fail("design.interims", "floor(n / (K + 1)) must be >= 1 for design 1");
    }
    if (d.design == DesignKind::Design2 && d.m / looks == 0) {
      fail("design.interims", "floor(m / (K + 1)) must be >= 1 for design 2");
    }
  }

  if (o.kind == OutcomeKind::Continuous) {
    if (!(p.variance > 0.0) || !finite(p.variance)) {
      fail("prior.variance", "must be positive and finite");
    }
    if (!finite(p.mean)) fail("prior.mean", "must be finite");
    if (a.prob_mode == ProbabilityMode::MonteCarlo && a.mc_samples == 0) {
      fail("analysis.mc_samples", "must be >= 1");
    }
  } else if (a.grid_points < 64) {
    fail("analysis.grid_points", "must be >= 64");
  }

  if (!result.errors.empty()) return result;

  CheckedScenario checked;
  checked.scenario = scenario;
  if (o.kind == OutcomeKind::Continuous) {
    checked.sigma_b2 = sigma_b2_from_icc(o.rho, o.sigma_w2);
  } else {
    checked.beta_precision = beta_precision_from_icc(o.rho);
  }
  checked.schedule = build_schedule(d);
  result.checked = std::move(checked);
  return result;
}

inline ValidationResult validate_scenario(const OutcomeSpec& outcome,
                                          const DesignSpec& design,
                                          const PriorSpec& prior) {
  return validate_scenario(Scenario{outcome, design, prior, AnalysisOptions{}});
}

/// Throwing convenience wrapper around validate_scenario.
inline CheckedScenario check_scenario(const Scenario& scenario) {
  auto result = validate_scenario(scenario);
  if (!result.ok()) {
    throw std::invalid_argument("invalid scenario: " + result.describe());
  }
  return std::move(*result.checked);
}

}  // namespace acrt
