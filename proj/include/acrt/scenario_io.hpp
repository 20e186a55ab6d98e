#pragma once

// Canonical text form of scenarios: field names, value formatting, parsing,
// fingerprints and random-stream keys.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "acrt/model.hpp"
#include "acrt/rng.hpp"

namespace acrt {

/// Replications and master seed; part of a scenario's identity in results.
struct RunSettings {
  std::size_t reps = 500;
  std::uint64_t seed = 20240101;
};

struct ScenarioRun {
  Scenario scenario;
  RunSettings run;

  friend bool operator==(const ScenarioRun& a, const ScenarioRun& b) {
    return a.scenario == b.scenario && a.run.reps == b.run.reps && a.run.seed == b.run.seed;
  }
};

/// Resets fields that do not apply to the outcome kind to their defaults, so
/// two runs that serialize identically also compare equal.
inline ScenarioRun normalized(ScenarioRun sr) {
  const Scenario defaults;
  Scenario& s = sr.scenario;
  if (s.outcome.kind == OutcomeKind::Continuous) {
    s.outcome.pi_c = defaults.outcome.pi_c;
    s.analysis.grid_points = defaults.analysis.grid_points;
  } else {
    s.outcome.mu_c = defaults.outcome.mu_c;
    s.outcome.sigma_w2 = defaults.outcome.sigma_w2;
    s.prior = defaults.prior;
    s.analysis.prob_mode = defaults.analysis.prob_mode;
    s.analysis.mc_samples = defaults.analysis.mc_samples;
  }
  return sr;
}

// Shortest text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

inline std::optional<double> parse_double(std::string_view text) {
  double x = 0.0;
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return x;
}

inline std::optional<std::uint64_t> parse_unsigned(std::string_view text) {
  std::uint64_t x = 0;
  if (text.empty()) return std::nullopt;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || end != text.data() + text.size()) return std::nullopt;
  return x;
}

inline std::string to_string(OutcomeKind k) {
  return k == OutcomeKind::Continuous ? "continuous" : "binary";
}
inline std::string to_string(DesignKind d) { return d == DesignKind::Design1 ? "1" : "2"; }
inline std::string to_string(UpdateMode u) {
  return u == UpdateMode::CumulativeFixedPrior ? "cumulative" : "stagewise";
}
inline std::string to_string(RemainderPolicy r) {
  return r == RemainderPolicy::LiteralFloor ? "floor" : "fill";
}
inline std::string to_string(ProbabilityMode p) {
  return p == ProbabilityMode::Exact ? "exact" : "mc";
}

inline std::optional<OutcomeKind> parse_outcome(std::string_view s) {
  if (s == "continuous") return OutcomeKind::Continuous;
  if (s == "binary") return OutcomeKind::Binary;
  return std::nullopt;
}
inline std::optional<DesignKind> parse_design(std::string_view s) {
  if (s == "1" || s == "design1") return DesignKind::Design1;
  if (s == "2" || s == "design2") return DesignKind::Design2;
  return std::nullopt;
}
inline std::optional<UpdateMode> parse_update_mode(std::string_view s) {
  if (s == "cumulative") return UpdateMode::CumulativeFixedPrior;
  if (s == "stagewise") return UpdateMode::StagewisePosteriorAsPrior;
  return std::nullopt;
}
inline std::optional<RemainderPolicy> parse_remainder(std::string_view s) {
  if (s == "floor") return RemainderPolicy::LiteralFloor;
  if (s == "fill") return RemainderPolicy::FillFinalStage;
  return std::nullopt;
}
inline std::optional<ProbabilityMode> parse_prob_mode(std::string_view s) {
  if (s == "exact") return ProbabilityMode::Exact;
  if (s == "mc") return ProbabilityMode::MonteCarlo;
  return std::nullopt;
}

/// Scenario columns of the results table, in order.
inline const std::vector<std::string>& scenario_field_names() {
  static const std::vector<std::string> names = {
      "outcome",      "design",    "mu_c",     "pi_c",
      "sigma_w2",     "effect",    "n_clusters", "cluster_size",
      "interims",     "boundary",  "icc",      "min_important_diff",
      "prior_mean",   "prior_var", "reps",     "seed",
      "update_mode",  "remainder_policy", "prob_mode", "mc_samples",
      "grid_points"};
  return names;
}

/// Field values in scenario_field_names() order. Fields that do not apply to
/// the outcome kind are empty.
inline std::vector<std::string> scenario_fields(const ScenarioRun& sr) {
  const Scenario& s = sr.scenario;
  const bool cont = s.outcome.kind == OutcomeKind::Continuous;
  auto only = [](bool applies, std::string value) {
    return applies ? std::move(value) : std::string();
  };
  return {to_string(s.outcome.kind),
          to_string(s.design.design),
          only(cont, format_double(s.outcome.mu_c)),
          only(!cont, format_double(s.outcome.pi_c)),
          only(cont, format_double(s.outcome.sigma_w2)),
          format_double(s.outcome.effect),
          std::to_string(s.design.n),
          std::to_string(s.design.m),
          std::to_string(s.design.K),
          format_double(s.design.U),
          format_double(s.outcome.rho),
          format_double(s.design.delta_mid),
          only(cont, format_double(s.prior.mean)),
          only(cont, format_double(s.prior.variance)),
          std::to_string(sr.run.reps),
          std::to_string(sr.run.seed),
          only(cont, to_string(s.prior.update_mode)),
          to_string(s.design.remainder),
          only(cont, to_string(s.analysis.prob_mode)),
          only(cont, std::to_string(s.analysis.mc_samples)),
          only(!cont, std::to_string(s.analysis.grid_points))};
}

/// Inverse of scenario_fields. Throws std::invalid_argument naming the field.
inline ScenarioRun parse_scenario_fields(const std::vector<std::string>& values) {
  const auto& names = scenario_field_names();
  if (values.size() != names.size()) {
    throw std::invalid_argument("expected " + std::to_string(names.size()) +
                                " scenario fields, got " + std::to_string(values.size()));
  }
  std::map<std::string, std::string> f;
  for (std::size_t i = 0; i < names.size(); ++i) f[names[i]] = values[i];

  auto bad = [](const std::string& key, const std::string& value) {
    return std::invalid_argument("field '" + key + "': cannot parse '" + value + "'");
  };
  auto num = [&](const std::string& key) {
    auto v = parse_double(f[key]);
    if (!v) throw bad(key, f[key]);
    return *v;
  };
  auto count = [&](const std::string& key) {
    auto v = parse_unsigned(f[key]);
    if (!v) throw bad(key, f[key]);
    return *v;
  };
  ScenarioRun sr;
  Scenario& s = sr.scenario;
  auto kind = parse_outcome(f["outcome"]);
  if (!kind) throw bad("outcome", f["outcome"]);
  s.outcome.kind = *kind;
  const bool cont = *kind == OutcomeKind::Continuous;
  auto design = parse_design(f["design"]);
  if (!design) throw bad("design", f["design"]);
  s.design.design = *design;
  if (cont) {
    s.outcome.mu_c = num("mu_c");
    s.outcome.sigma_w2 = num("sigma_w2");
    s.prior.mean = num("prior_mean");
    s.prior.variance = num("prior_var");
    auto um = parse_update_mode(f["update_mode"]);
    if (!um) throw bad("update_mode", f["update_mode"]);
    s.prior.update_mode = *um;
    auto pm = parse_prob_mode(f["prob_mode"]);
    if (!pm) throw bad("prob_mode", f["prob_mode"]);
    s.analysis.prob_mode = *pm;
    s.analysis.mc_samples = count("mc_samples");
  } else {
    s.outcome.pi_c = num("pi_c");
    s.analysis.grid_points = count("grid_points");
  }
  s.outcome.effect = num("effect");
  s.design.n = count("n_clusters");
  s.design.m = count("cluster_size");
  s.design.K = count("interims");
  s.design.U = num("boundary");
  s.outcome.rho = num("icc");
  s.design.delta_mid = num("min_important_diff");
  sr.run.reps = count("reps");
  sr.run.seed = count("seed");
  auto rp = parse_remainder(f["remainder_policy"]);
  if (!rp) throw bad("remainder_policy", f["remainder_policy"]);
  s.design.remainder = *rp;
  return sr;
}

/// Stable identity of a scenario run; independent of field ordering.
inline std::uint64_t fingerprint(const ScenarioRun& sr) {
  const auto& names = scenario_field_names();
  const auto values = scenario_fields(sr);
  std::map<std::string, std::string> sorted;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!values[i].empty()) sorted[names[i]] = values[i];
  }
  std::string canonical;
  for (const auto& [k, v] : sorted) canonical += k + '=' + v + ';';
  return fnv1a64(canonical);
}

inline std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

/// Key for the random streams of a scenario. Only the data-generating
/// population parameters enter, so scenarios that differ in design, effect,
/// budget, looks or boundary share cluster-level random numbers.
inline std::uint64_t stream_key(const Scenario& s) {
  std::string text = "outcome=" + to_string(s.outcome.kind) + ";icc=" +
                     format_double(s.outcome.rho) + ';';
  if (s.outcome.kind == OutcomeKind::Continuous) {
    text += "mu_c=" + format_double(s.outcome.mu_c) +
            ";sigma_w2=" + format_double(s.outcome.sigma_w2) + ';';
  } else {
    text += "pi_c=" + format_double(s.outcome.pi_c) + ';';
  }
  return fnv1a64(text);
}

}  // namespace acrt
