#pragma once

// Decision-boundary search: the smallest U whose simulated false positive
// rate is within target + mc_se. Assumes the false positive rate is
// non-increasing in U (scenarios differing only in U share random streams,
// which makes this hold replication by replication).

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "acrt/oc.hpp"
#include "acrt/scenario_io.hpp"

namespace acrt {

struct CalibrationSearch {
  std::vector<double> candidates;  // when non-empty, evaluated instead of bisection
  double low = 0.5;
  double high = 0.999;
  std::size_t iterations = 6;
};

struct CalibrationPoint {
  double boundary = 0.0;
  double fpr = 0.0;
  double mc_se = 0.0;

  [[nodiscard]] bool meets(double target) const { return fpr <= target + mc_se; }
};

struct CalibrationResult {
  bool attained = false;
  double recommended = 1.0;
  std::vector<CalibrationPoint> curve;  // sorted by boundary
  std::string message;
};

inline CalibrationResult calibrate_boundary(const ScenarioRun& scenario_template,
                                            double target_fpr,
                                            const CalibrationSearch& search,
                                            std::size_t workers) {
  CalibrationResult result;
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
    result.message = "target false positive rate " + format_double(target_fpr) +
                     " must lie in (0, 1); a finite boundary cannot guarantee it";
    return result;
  }

  auto evaluate = [&](double U) {
    ScenarioRun run = scenario_template;
    run.scenario.outcome.effect = 0.0;
    run.scenario.design.U = U;
    const OCEstimate est = estimate_oc(run, workers);
    CalibrationPoint p{U, est.rejection_rate, est.mc_se};
    result.curve.push_back(p);
    return p;
  };
  auto finish = [&](bool attained, double U, std::string message) {
    std::sort(result.curve.begin(), result.curve.end(),
              [](const auto& a, const auto& b) { return a.boundary < b.boundary; });
    result.attained = attained;
    result.recommended = U;
    result.message = std::move(message);
    return result;
  };

  if (!search.candidates.empty()) {
    auto candidates = search.candidates;
    std::sort(candidates.begin(), candidates.end());
    std::optional<double> best;
    for (double U : candidates) {
      if (evaluate(U).meets(target_fpr) && !best) best = U;
    }
    if (!best) {
      return finish(false, 1.0, "no candidate boundary reaches the target");
    }
    return finish(true, *best, "smallest candidate meeting the target");
  }

  if (!(search.low < search.high) || search.low <= 0.0 || search.high > 1.0) {
    return finish(false, 1.0, "invalid search interval");
  }
  if (!evaluate(search.high).meets(target_fpr)) {
    return finish(false, 1.0,
                  "target unattainable: false positive rate at U = " +
                      format_double(search.high) + " still exceeds it");
  }
  if (evaluate(search.low).meets(target_fpr)) {
    return finish(true, search.low, "lower end of the interval already meets the target");
  }
  double lo = search.low;   // fails
  double hi = search.high;  // meets
  for (std::size_t i = 0; i < search.iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (evaluate(mid).meets(target_fpr)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return finish(true, hi, "bisection");
}

}  // namespace acrt
