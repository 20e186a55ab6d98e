#pragma once

// Operating characteristics by replicated simulation.
//
// Replication r of a scenario always uses the streams derived from
// (master seed, stream key, r), whichever worker runs it, and summaries are
// reduced in replication order. Results are therefore identical for any
// worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "acrt/model.hpp"
#include "acrt/scenario_io.hpp"
#include "acrt/trial.hpp"

namespace acrt {

struct ReplicationOutcome {
  bool rejected = false;
  std::size_t stopped_stage = 0;
  std::size_t clusters_per_arm = 0;
  std::size_t participants_per_arm = 0;
};

struct OCEstimate {
  double rejection_rate = 0.0;  // FPR when effect = 0, power otherwise
  double mc_se = 0.0;
  std::vector<std::size_t> stop_stage_histogram;  // index k-1 counts stops at k
  double expected_participants_per_arm = 0.0;
  double expected_clusters_per_arm = 0.0;
  std::size_t R = 0;
  std::uint64_t fingerprint = 0;
  std::size_t rejections = 0;
};

class ReplicationError : public std::runtime_error {
 public:
  ReplicationError(std::size_t replication, const std::string& what)
      : std::runtime_error("replication " + std::to_string(replication) + ": " + what),
        replication_(replication) {}
  [[nodiscard]] std::size_t replication() const { return replication_; }

 private:
  std::size_t replication_;
};

inline std::size_t default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs `task(i)` for i in [0, count) on up to `workers` threads. The first
/// failing index (smallest) is rethrown as ReplicationError.
template <typename Task>
void parallel_for(std::size_t count, std::size_t workers, Task&& task) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t failed_index = count;
  std::string failure;

  auto body = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        task(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = e.what();
        }
      }
    }
  };

  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (failed_index < count) throw ReplicationError(failed_index, failure);
}

inline std::vector<ReplicationOutcome> simulate_replications(
    const CheckedScenario& scenario, std::size_t reps, std::uint64_t master_seed,
    std::uint64_t key, std::size_t workers) {
  if (reps == 0) throw std::invalid_argument("need at least one replication");
  const TrialCache cache = TrialCache::for_scenario(scenario);
  std::vector<ReplicationOutcome> outcomes(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    const TrialResult trial = run_trial(scenario, {master_seed, key, r}, &cache);
    const StageRecord& last = trial.final_stage();
    outcomes[r] = {trial.efficacy_declared, trial.stopped_stage, last.clusters_per_arm,
                   last.participants_per_arm};
  });
  return outcomes;
}

inline OCEstimate summarize(const std::vector<ReplicationOutcome>& outcomes,
                            std::size_t stages) {
  OCEstimate est;
  est.R = outcomes.size();
  est.stop_stage_histogram.assign(stages, 0);
  double clusters = 0.0;
  double participants = 0.0;
  for (const auto& o : outcomes) {
    if (o.rejected) ++est.rejections;
    ++est.stop_stage_histogram.at(o.stopped_stage - 1);
    clusters += static_cast<double>(o.clusters_per_arm);
    participants += static_cast<double>(o.participants_per_arm);
  }
  const double R = static_cast<double>(est.R);
  est.rejection_rate = static_cast<double>(est.rejections) / R;
  est.mc_se = std::sqrt(est.rejection_rate * (1.0 - est.rejection_rate) / R);
  est.expected_clusters_per_arm = clusters / R;
  est.expected_participants_per_arm = participants / R;
  return est;
}

inline OCEstimate estimate_oc(const ScenarioRun& run, std::size_t workers) {
  const CheckedScenario checked = check_scenario(run.scenario);
  const auto outcomes = simulate_replications(checked, run.run.reps, run.run.seed,
                                              stream_key(run.scenario), workers);
  OCEstimate est = summarize(outcomes, checked.schedule.stages.size());
  est.fingerprint = fingerprint(run);
  return est;
}

struct DesignComparison {
  OCEstimate first;
  OCEstimate second;
  double difference = 0.0;  // second.rejection_rate - first.rejection_rate
  double se = 0.0;          // paired standard error of the difference
};

/// Runs two scenarios that differ at most in the design kind on common random
/// numbers (their stream keys coincide) and reports the paired difference.
inline DesignComparison compare_designs(const ScenarioRun& first, const ScenarioRun& second,
                                        std::size_t workers) {
  Scenario a = first.scenario;
  a.design.design = second.scenario.design.design;
  if (!(a == second.scenario) || first.run.reps != second.run.reps ||
      first.run.seed != second.run.seed) {
    throw std::invalid_argument("scenarios differ in more than the design kind");
  }
  const CheckedScenario ca = check_scenario(first.scenario);
  const CheckedScenario cb = check_scenario(second.scenario);
  const std::uint64_t key = stream_key(first.scenario);
  const auto oa = simulate_replications(ca, first.run.reps, first.run.seed, key, workers);
  const auto ob = simulate_replications(cb, second.run.reps, second.run.seed, key, workers);

  DesignComparison cmp;
  cmp.first = summarize(oa, ca.schedule.stages.size());
  cmp.first.fingerprint = fingerprint(first);
  cmp.second = summarize(ob, cb.schedule.stages.size());
  cmp.second.fingerprint = fingerprint(second);
  cmp.difference = cmp.second.rejection_rate - cmp.first.rejection_rate;

  const double R = static_cast<double>(oa.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < oa.size(); ++i) {
    const double d = (ob[i].rejected ? 1.0 : 0.0) - (oa[i].rejected ? 1.0 : 0.0);
    ss += (d - cmp.difference) * (d - cmp.difference);
  }
  cmp.se = oa.size() > 1 ? std::sqrt(ss / (R - 1.0) / R) : 0.0;
  return cmp;
}

}  // namespace acrt
