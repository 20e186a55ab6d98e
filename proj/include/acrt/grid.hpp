#pragma once

// Scenario grids: a flat `key = value, value, ...` config file expanded into
// the Cartesian product of its lists.
//
//   # continuous, single interim
//   outcome      = continuous
//   design       = 1, 2
//   effect       = 0:0.1:0.9      # start:step:stop, inclusive
//   n_clusters   = 20, 40, 60
//   ...
//
// Expansion order is lexicographic over: design, mu_c | pi_c, sigma_w2,
// effect, n_clusters, cluster_size, interims, boundary, icc (first field
// varies slowest).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acrt/model.hpp"
#include "acrt/scenario_io.hpp"

namespace acrt {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& key, const std::string& message)
      : std::runtime_error(format(line, key, message)), line_(line), key_(key) {}
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  static std::string format(std::size_t line, const std::string& key,
                            const std::string& message) {
    std::string out = "config";
    if (line > 0) out += " line " + std::to_string(line);
    if (!key.empty()) out += " key '" + key + "'";
    return out + ": " + message;
  }
  std::size_t line_;
  std::string key_;
};

struct ScenarioGrid {
  OutcomeKind outcome = OutcomeKind::Continuous;
  std::vector<DesignKind> designs{DesignKind::Design1, DesignKind::Design2};
  std::vector<double> mu_c{0.0};
  std::vector<double> pi_c;
  std::vector<double> sigma_w2{1.0};
  std::vector<double> effect;
  std::vector<std::size_t> n_clusters;
  std::vector<std::size_t> cluster_size;
  std::vector<std::size_t> interims;
  std::vector<double> boundary;
  std::vector<double> icc;

  double min_important_diff = 0.0;
  double prior_mean = 0.0;
  double prior_var = 100.0;
  RunSettings run;
  UpdateMode update_mode = UpdateMode::CumulativeFixedPrior;
  RemainderPolicy remainder_policy = RemainderPolicy::LiteralFloor;
  ProbabilityMode prob_mode = ProbabilityMode::Exact;
  std::size_t mc_samples = 10000;
  std::size_t grid_points = 2048;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Numbers, with `start:step:stop` ranges expanded inclusively. Range points
/// are rounded to 12 decimals so 0:0.1:0.9 yields 0.3, not 0.30000000000000004.
inline std::vector<double> parse_number_list(const std::string& text, std::size_t line,
                                             const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) throw ConfigError(line, key, "empty list element");
    if (item.find(':') != std::string::npos) {
      const auto parts = split(item, ':');
      if (parts.size() != 3) {
        throw ConfigError(line, key, "range must be start:step:stop, got '" + item + "'");
      }
      const auto a = parse_double(parts[0]);
      const auto step = parse_double(parts[1]);
      const auto b = parse_double(parts[2]);
      if (!a || !step || !b || !(*step > 0.0) || *b < *a) {
        throw ConfigError(line, key, "bad range '" + item + "'");
      }
      const auto count = static_cast<std::size_t>(std::floor((*b - *a) / *step + 1e-9));
      for (std::size_t i = 0; i <= count; ++i) {
        const double x = *a + static_cast<double>(i) * *step;
        out.push_back(std::round(x * 1e12) / 1e12);
      }
      continue;
    }
    const auto x = parse_double(item);
    if (!x) throw ConfigError(line, key, "not a number: '" + item + "'");
    out.push_back(*x);
  }
  return out;
}

inline std::vector<std::size_t> parse_count_list(const std::string& text, std::size_t line,
                                                 const std::string& key) {
  std::vector<std::size_t> out;
  for (double x : parse_number_list(text, line, key)) {
    if (!(x >= 0.0) || x != std::floor(x)) {
      throw ConfigError(line, key, "expected a non-negative integer, got " + format_double(x));
    }
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "outcome",     "design",        "mu_c",           "pi_c",
      "sigma_w2",    "effect",        "n_clusters",     "cluster_size",
      "interims",    "boundary",      "icc",            "reps",
      "seed",        "update_mode",   "remainder_policy", "prob_mode",
      "mc_samples",  "grid_points",   "min_important_diff", "prior_mean",
      "prior_var"};
  return keys;
}

inline ScenarioGrid parse_config(std::istream& in) {
  std::map<std::string, std::pair<std::size_t, std::string>> entries;
  const std::set<std::string> known(config_keys().begin(), config_keys().end());
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!known.count(key)) throw ConfigError(line_no, key, "unknown key");
    if (value.empty()) throw ConfigError(line_no, key, "missing value");
    if (!entries.emplace(key, std::make_pair(line_no, value)).second) {
      throw ConfigError(line_no, key, "duplicate key (first set on line " +
                                          std::to_string(entries[key].first) + ")");
    }
  }

  ScenarioGrid grid;
  auto has = [&](const std::string& k) { return entries.count(k) > 0; };
  auto require = [&](const std::string& k) {
    if (!has(k)) throw ConfigError(0, k, "required key missing");
  };
  auto numbers = [&](const std::string& k) {
    const auto& [line, value] = entries.at(k);
    return detail::parse_number_list(value, line, k);
  };
  auto counts = [&](const std::string& k) {
    const auto& [line, value] = entries.at(k);
    return detail::parse_count_list(value, line, k);
  };
  auto scalar_number = [&](const std::string& k) {
    auto v = numbers(k);
    if (v.size() != 1) throw ConfigError(entries.at(k).first, k, "expected a single value");
    return v.front();
  };
  auto scalar_count = [&](const std::string& k) {
    auto v = counts(k);
    if (v.size() != 1) throw ConfigError(entries.at(k).first, k, "expected a single value");
    return v.front();
  };
  auto word = [&](const std::string& k, auto parser, const char* allowed) {
    const auto& [line, value] = entries.at(k);
    auto parsed = parser(value);
    if (!parsed) {
      throw ConfigError(line, k, "expected one of " + std::string(allowed) + ", got '" +
                                     value + "'");
    }
    return *parsed;
  };

  require("outcome");
  grid.outcome = word("outcome", parse_outcome, "continuous|binary");
  const bool cont = grid.outcome == OutcomeKind::Continuous;

  if (has("design")) {
    grid.designs.clear();
    const auto& [line, value] = entries.at("design");
    for (const auto& item : detail::split(value, ',')) {
      auto d = parse_design(item);
      if (!d) throw ConfigError(line, "design", "expected 1 or 2, got '" + item + "'");
      grid.designs.push_back(*d);
    }
  }

  for (const char* k : {"effect", "n_clusters", "cluster_size", "interims", "boundary", "icc"}) {
    require(k);
  }
  if (cont) {
    if (has("pi_c")) throw ConfigError(entries.at("pi_c").first, "pi_c", "not used by continuous outcomes");
    if (has("grid_points")) throw ConfigError(entries.at("grid_points").first, "grid_points", "not used by continuous outcomes");
    if (has("mu_c")) grid.mu_c = numbers("mu_c");
    if (has("sigma_w2")) grid.sigma_w2 = numbers("sigma_w2");
    if (has("prior_mean")) grid.prior_mean = scalar_number("prior_mean");
    if (has("prior_var")) grid.prior_var = scalar_number("prior_var");
    if (has("update_mode")) {
      grid.update_mode = word("update_mode", parse_update_mode, "cumulative|stagewise");
    }
    if (has("prob_mode")) grid.prob_mode = word("prob_mode", parse_prob_mode, "exact|mc");
    if (has("mc_samples")) grid.mc_samples = scalar_count("mc_samples");
  } else {
    for (const char* k : {"mu_c", "sigma_w2", "prior_mean", "prior_var", "update_mode",
                          "prob_mode", "mc_samples"}) {
      if (has(k)) throw ConfigError(entries.at(k).first, k, "not used by binary outcomes");
    }
    require("pi_c");
    grid.pi_c = numbers("pi_c");
    if (has("grid_points")) grid.grid_points = scalar_count("grid_points");
  }

  grid.effect = numbers("effect");
  grid.n_clusters = counts("n_clusters");
  grid.cluster_size = counts("cluster_size");
  grid.interims = counts("interims");
  grid.boundary = numbers("boundary");
  grid.icc = numbers("icc");
  if (has("reps")) grid.run.reps = scalar_count("reps");
  if (has("seed")) grid.run.seed = scalar_count("seed");
  if (has("remainder_policy")) {
    grid.remainder_policy = word("remainder_policy", parse_remainder, "floor|fill");
  }
  if (has("min_important_diff")) grid.min_important_diff = scalar_number("min_important_diff");
  if (grid.run.reps == 0) throw ConfigError(entries.at("reps").first, "reps", "must be >= 1");
  return grid;
}

inline ScenarioGrid load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot open '" + path + "'");
  return parse_config(in);
}

struct GridExpansion {
  std::vector<ScenarioRun> scenarios;
  std::vector<std::string> skipped;  // reasons, one per rejected combination
};

inline GridExpansion expand_grid(const ScenarioGrid& grid) {
  const bool cont = grid.outcome == OutcomeKind::Continuous;
  const std::vector<double>& baseline = cont ? grid.mu_c : grid.pi_c;
  const std::vector<double> no_sigma{1.0};
  const std::vector<double>& sigma = cont ? grid.sigma_w2 : no_sigma;

  auto nonempty = [](const auto& v, const char* name) {
    if (v.empty()) throw ConfigError(0, name, "empty value list");
  };
  nonempty(grid.designs, "design");
  nonempty(baseline, cont ? "mu_c" : "pi_c");
  nonempty(sigma, "sigma_w2");
  nonempty(grid.effect, "effect");
  nonempty(grid.n_clusters, "n_clusters");
  nonempty(grid.cluster_size, "cluster_size");
  nonempty(grid.interims, "interims");
  nonempty(grid.boundary, "boundary");
  nonempty(grid.icc, "icc");

  GridExpansion out;
  for (DesignKind design : grid.designs)
    for (double base : baseline)
      for (double sw2 : sigma)
        for (double effect : grid.effect)
          for (std::size_t n : grid.n_clusters)
            for (std::size_t m : grid.cluster_size)
              for (std::size_t K : grid.interims)
                for (double U : grid.boundary)
                  for (double rho : grid.icc) {
                    ScenarioRun sr;
                    Scenario& s = sr.scenario;
                    s.outcome = cont ? OutcomeSpec::continuous(base, effect, sw2, rho)
                                     : OutcomeSpec::binary(base, effect, rho);
                    s.design = {design, n, m, K, U, grid.min_important_diff,
                                grid.remainder_policy};
                    s.prior = {grid.prior_mean, grid.prior_var, grid.update_mode};
                    s.analysis = {grid.prob_mode, grid.mc_samples, grid.grid_points};
                    sr.run = grid.run;
                    sr = normalized(sr);
                    const auto check = validate_scenario(s);
                    if (!check.ok()) {
                      const auto fields = scenario_fields(sr);
                      std::string label;
                      for (std::size_t i = 0; i < fields.size(); ++i) {
                        if (fields[i].empty()) continue;
                        if (!label.empty()) label += ' ';
                        label += scenario_field_names()[i] + '=' + fields[i];
                      }
                      out.skipped.push_back(label + " -> " + check.describe());
                      continue;
                    }
                    out.scenarios.push_back(std::move(sr));
                  }
  if (out.scenarios.empty()) {
    throw ConfigError(0, "", "grid expands to no valid scenario");
  }
  return out;
}

}  // namespace acrt
