#pragma once

// Single simulated trial under either enrollment design.
//
// At every analysis both arms are analyzed on their cumulative data and the
// trial stops for efficacy as soon as P(theta > delta | data) > U.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "acrt/datagen.hpp"
#include "acrt/model.hpp"
#include "acrt/posterior_binary.hpp"
#include "acrt/posterior_continuous.hpp"
#include "acrt/rng.hpp"

namespace acrt {

/// Everything needed to re-derive every stream a trial used.
struct TrialStreamKey {
  std::uint64_t master_seed = 0;
  std::uint64_t scenario_key = 0;
  std::uint64_t replication = 0;

  [[nodiscard]] StreamId id(Arm arm, StreamPurpose purpose, std::uint64_t index = 0) const {
    return {scenario_key, replication, arm, purpose, index};
  }
  [[nodiscard]] RngStream stream(Arm arm, StreamPurpose purpose,
                                 std::uint64_t index = 0) const {
    return RngStream(master_seed, id(arm, purpose, index));
  }
};

struct ContinuousSnapshot {
  ArmHistory control;
  ArmHistory treatment;
};

struct BinarySnapshot {
  BinaryArmData control;
  BinaryArmData treatment;
};

using Snapshot = std::variant<ContinuousSnapshot, BinarySnapshot>;

struct AnalysisConfig {
  OutcomeKind kind = OutcomeKind::Continuous;
  double delta = 0.0;
  NormalPosterior prior{0.0, 100.0};
  UpdateMode update_mode = UpdateMode::CumulativeFixedPrior;
  ProbabilityMode prob_mode = ProbabilityMode::Exact;
  std::size_t mc_samples = 10000;
  std::size_t grid_points = 2048;
  double sigma_w2 = 1.0;
  double sigma_b2 = 0.0;

  static AnalysisConfig from(const CheckedScenario& s) {
    AnalysisConfig c;
    c.kind = s.outcome().kind;
    c.delta = s.design().delta_mid;
    c.prior = {s.prior().mean, s.prior().variance};
    c.update_mode = s.prior().update_mode;
    c.prob_mode = s.analysis().prob_mode;
    c.mc_samples = s.analysis().mc_samples;
    c.grid_points = s.analysis().grid_points;
    c.sigma_w2 = s.outcome().sigma_w2;
    c.sigma_b2 = s.sigma_b2;
    return c;
  }
};

/// Posterior mean and variance per arm at one analysis.
struct ArmMoments {
  double control_mean = 0.0;
  double control_variance = 0.0;
  double treatment_mean = 0.0;
  double treatment_variance = 0.0;
};

struct SnapshotAnalysis {
  double probability = 0.0;
  ArmMoments moments;
  std::optional<NormalPosterior> control_normal, treatment_normal;
  std::optional<GridPosterior> control_grid, treatment_grid;
};

/// Stopping statistic and per-arm posteriors for one analysis.
///
/// `mc_rng` is required only for continuous outcomes in Monte-Carlo mode;
/// `kernel` optionally supplies a precomputed binary grid kernel.
inline SnapshotAnalysis analyze_snapshot(const Snapshot& snapshot,
                                         const AnalysisConfig& config,
                                         RngStream* mc_rng = nullptr,
                                         const GridKernel* kernel = nullptr) {
  SnapshotAnalysis out;
  if (const auto* cont = std::get_if<ContinuousSnapshot>(&snapshot)) {
    auto empty = [](const ArmHistory& h) {
      for (const auto& stage : h) {
        if (!stage.empty()) return false;
      }
      return true;
    };
    if (empty(cont->control) || empty(cont->treatment)) {
      throw std::invalid_argument("each arm needs at least one cluster");
    }
    const auto ctrl = posterior_from_history(config.prior, cont->control, config.sigma_w2,
                                             config.sigma_b2, config.update_mode);
    const auto trt = posterior_from_history(config.prior, cont->treatment, config.sigma_w2,
                                            config.sigma_b2, config.update_mode);
    if (config.prob_mode == ProbabilityMode::Exact) {
      out.probability = prob_superiority_exact(ctrl, trt, config.delta);
    } else {
      if (mc_rng == nullptr) throw std::invalid_argument("Monte-Carlo mode needs a stream");
      out.probability = prob_superiority_mc(ctrl, trt, config.delta, config.mc_samples, *mc_rng);
    }
    out.moments = {ctrl.mean, ctrl.variance, trt.mean, trt.variance};
    out.control_normal = ctrl;
    out.treatment_normal = trt;
    return out;
  }

  const auto& bin = std::get<BinarySnapshot>(snapshot);
  if (bin.control.clusters.empty() || bin.treatment.clusters.empty()) {
    throw std::invalid_argument("each arm needs at least one cluster");
  }
  GridPosterior ctrl, trt;
  if (kernel != nullptr) {
    ctrl = posterior_grid(bin.control, *kernel);
    trt = posterior_grid(bin.treatment, *kernel);
  } else {
    ctrl = posterior_grid(bin.control, config.grid_points);
    trt = posterior_grid(bin.treatment, config.grid_points);
  }
  out.probability = prob_risk_diff_exceeds(trt, ctrl, config.delta);
  out.moments = {ctrl.mean(), ctrl.variance(), trt.mean(), trt.variance()};
  out.control_grid = std::move(ctrl);
  out.treatment_grid = std::move(trt);
  return out;
}

struct StageRecord {
  std::size_t clusters_per_arm = 0;
  std::size_t participants_per_arm = 0;
  double probability = 0.0;
  ArmMoments moments;
};

struct TrialResult {
  std::size_t stopped_stage = 0;  // 1-based
  bool efficacy_declared = false;
  std::vector<StageRecord> stages;  // one per analysis actually run
  TrialStreamKey streams;

  [[nodiscard]] std::vector<double> probabilities() const {
    std::vector<double> p;
    p.reserve(stages.size());
    for (const auto& s : stages) p.push_back(s.probability);
    return p;
  }
  [[nodiscard]] const StageRecord& final_stage() const { return stages.back(); }
};

/// Per-scenario precomputation shared by all replications.
struct TrialCache {
  std::shared_ptr<const GridKernel> kernel;

  static TrialCache for_scenario(const CheckedScenario& s) {
    TrialCache cache;
    if (s.outcome().kind == OutcomeKind::Binary) {
      cache.kernel = std::make_shared<const GridKernel>(
          s.beta_precision, s.analysis().grid_points, s.design().m);
    }
    return cache;
  }
};

/// Observer for generated data; called after each stage's enrollment.
struct TrialObserver {
  virtual ~TrialObserver() = default;
  virtual void on_stage(std::size_t /*stage*/, Arm /*arm*/,
                        const std::vector<ClusterStateContinuous>& /*clusters*/) {}
  virtual void on_stage(std::size_t /*stage*/, Arm /*arm*/,
                        const std::vector<ClusterStateBinary>& /*clusters*/) {}
};

namespace detail {

template <typename Cluster>
struct ArmState {
  Arm arm;
  RngStream latent;
  std::vector<RngStream> observation;  // one per enrolled cluster
  std::vector<Cluster> clusters;
};

}  // namespace detail

/// Runs one trial. `stop_early = false` evaluates every analysis regardless
/// of the boundary; the reported decision is unchanged.
inline TrialResult run_trial(const CheckedScenario& scenario, const TrialStreamKey& key,
                             const TrialCache* cache = nullptr,
                             TrialObserver* observer = nullptr, bool stop_early = true) {
  const OutcomeSpec& outcome = scenario.outcome();
  const DesignSpec& design = scenario.design();
  const AnalysisConfig config = AnalysisConfig::from(scenario);
  const GridKernel* kernel = cache != nullptr ? cache->kernel.get() : nullptr;

  TrialResult result;
  result.streams = key;

  auto record = [&](std::size_t stage_index, const StageEnrollment& stage,
                    const SnapshotAnalysis& analysis) {
    result.stages.push_back(
        {stage.cum_clusters, stage.participants(), analysis.probability, analysis.moments});
    if (analysis.probability > design.U && !result.efficacy_declared) {
      result.efficacy_declared = true;
      result.stopped_stage = stage_index + 1;
    }
  };

  const auto& stages = scenario.schedule.stages;

  if (outcome.kind == OutcomeKind::Continuous) {
    using State = detail::ArmState<ClusterStateContinuous>;
    State arms[2] = {
        {Arm::Control, key.stream(Arm::Control, StreamPurpose::Latent), {}, {}},
        {Arm::Treatment, key.stream(Arm::Treatment, StreamPurpose::Latent), {}, {}}};
    const double means[2] = {outcome.control_mean(), outcome.treatment_mean()};
    ContinuousSnapshot snapshot;

    for (std::size_t k = 0; k < stages.size(); ++k) {
      const auto& stage = stages[k];
      for (int a = 0; a < 2; ++a) {
        State& st = arms[a];
        std::vector<StageIncrement> increments;
        const std::size_t before = st.clusters.size();
        if (stage.cum_clusters > before) {
          auto fresh = draw_continuous_latents(stage.cum_clusters - before, means[a],
                                               scenario.sigma_b2, st.latent);
          for (auto& c : fresh) {
            st.clusters.push_back(std::move(c));
            st.observation.push_back(key.stream(st.arm, StreamPurpose::Observation,
                                                st.clusters.size() - 1));
          }
        }
        for (std::size_t j = 0; j < st.clusters.size(); ++j) {
          auto& cluster = st.clusters[j];
          const std::size_t target = stage.cluster_sizes[j];
          if (target <= cluster.size()) continue;
          const std::size_t old = cluster.size();
          extend_continuous_in_place(cluster, target - old, outcome.sigma_w2,
                                     st.observation[j]);
          double added = 0.0;
          for (std::size_t i = old; i < target; ++i) added += cluster.observations[i];
          increments.push_back({j, target - old, added});
        }
        (a == 0 ? snapshot.control : snapshot.treatment).push_back(std::move(increments));
        if (observer != nullptr) observer->on_stage(k + 1, st.arm, st.clusters);
      }

      RngStream mc_rng = key.stream(Arm::Both, StreamPurpose::PosteriorMC, k);
      record(k, stage, analyze_snapshot(snapshot, config, &mc_rng, kernel));
      if (stop_early && result.efficacy_declared) break;
    }
  } else {
    using State = detail::ArmState<ClusterStateBinary>;
    State arms[2] = {
        {Arm::Control, key.stream(Arm::Control, StreamPurpose::Latent), {}, {}},
        {Arm::Treatment, key.stream(Arm::Treatment, StreamPurpose::Latent), {}, {}}};
    const double props[2] = {outcome.control_mean(), outcome.treatment_mean()};
    BinarySnapshot snapshot;
    snapshot.control.v = scenario.beta_precision;
    snapshot.treatment.v = scenario.beta_precision;

    for (std::size_t k = 0; k < stages.size(); ++k) {
      const auto& stage = stages[k];
      for (int a = 0; a < 2; ++a) {
        State& st = arms[a];
        const std::size_t before = st.clusters.size();
        if (stage.cum_clusters > before) {
          auto fresh = draw_binary_latents(stage.cum_clusters - before, props[a],
                                           outcome.rho, st.latent);
          for (auto& c : fresh) {
            st.clusters.push_back(c);
            st.observation.push_back(key.stream(st.arm, StreamPurpose::Observation,
                                                st.clusters.size() - 1));
          }
        }
        for (std::size_t j = 0; j < st.clusters.size(); ++j) {
          auto& cluster = st.clusters[j];
          const std::size_t target = stage.cluster_sizes[j];
          if (target > cluster.size) {
            extend_binary_in_place(cluster, target - cluster.size, st.observation[j]);
          }
        }
        auto& data = a == 0 ? snapshot.control : snapshot.treatment;
        data.clusters.clear();
        for (const auto& c : st.clusters) data.clusters.push_back({c.events, c.size});
        if (observer != nullptr) observer->on_stage(k + 1, st.arm, st.clusters);
      }

      record(k, stage, analyze_snapshot(snapshot, config, nullptr, kernel));
      if (stop_early && result.efficacy_declared) break;
    }
  }

  if (!result.efficacy_declared) result.stopped_stage = stages.size();
  return result;
}

/// Columnar trace: stage,clusters_per_arm,participants_per_arm,probability,
/// control_mean,control_variance,treatment_mean,treatment_variance
inline void write_trace(std::ostream& out, const TrialResult& trial) {
  out << "stage,clusters_per_arm,participants_per_arm,probability,control_mean,"
         "control_variance,treatment_mean,treatment_variance\n";
  out.precision(17);
  for (std::size_t k = 0; k < trial.stages.size(); ++k) {
    const auto& s = trial.stages[k];
    out << k + 1 << ',' << s.clusters_per_arm << ',' << s.participants_per_arm << ','
        << s.probability << ',' << s.moments.control_mean << ','
        << s.moments.control_variance << ',' << s.moments.treatment_mean << ','
        << s.moments.treatment_variance << '\n';
  }
}

}  // namespace acrt
