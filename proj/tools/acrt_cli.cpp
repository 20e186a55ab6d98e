// acrt: simulate operating characteristics of Bayesian adaptive cluster
// randomized trials over scenario grids.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "acrt/acrt.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::size_t workers = 0;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "scenario configuration file");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--workers", c.workers,
                  "worker threads (default: $ACRT_WORKERS, else all cores)");
  cmd->add_option("--seed", c.seed, "override the master seed");
}

acrt::ScenarioGrid load_grid(const Common& c) {
  auto grid = acrt::load_config(c.config);
  if (c.seed) grid.run.seed = *c.seed;
  return grid;
}

std::size_t workers_of(const Common& c) {
  return acrt::resolve_workers(c.workers > 0 ? std::optional<std::size_t>(c.workers)
                                             : std::nullopt);
}

int cmd_simulate(const Common& c, bool force) {
  acrt::RunOptions options{c.config, c.out, workers_of(c), force, c.seed};
  const auto summary = acrt::run_command(options, std::cerr);
  std::cout << "scenarios: " << summary.scenarios << ", ran: " << summary.ran
            << ", already present: " << summary.already_done
            << ", skipped invalid: " << summary.skipped_invalid << '\n'
            << "results: " << summary.results.string() << '\n';
  return 0;
}

int cmd_calibrate(const Common& c, double target, const std::vector<double>& u_values,
                  double low, double high, std::size_t iterations) {
  const auto grid = load_grid(c);
  const auto expansion = acrt::expand_grid(grid);
  // One template per distinct scenario with the effect and boundary factored out.
  std::vector<acrt::ScenarioRun> templates;
  std::set<std::uint64_t> seen;
  for (auto sr : expansion.scenarios) {
    sr.scenario.outcome.effect = 0.0;
    sr.scenario.design.U = 1.0;
    if (seen.insert(acrt::fingerprint(sr)).second) templates.push_back(sr);
  }
  acrt::CalibrationSearch search{u_values, low, high, iterations};
  fs::create_directories(c.out);
  const fs::path path = fs::path(c.out) / "calibration.csv";
  std::ofstream out(path);
  std::vector<std::string> fields = acrt::scenario_field_names();
  for (const auto& f : fields) out << f << ',';
  out << "attained,recommended,curve\n";

  const std::size_t workers = workers_of(c);
  int status = 0;
  for (const auto& t : templates) {
    const auto result = acrt::calibrate_boundary(t, target, search, workers);
    for (const auto& f : acrt::scenario_fields(t)) out << f << ',';
    out << (result.attained ? "yes" : "no") << ','
        << (result.attained ? acrt::format_double(result.recommended) : "") << ',';
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
      if (i > 0) out << '|';
      out << acrt::format_double(result.curve[i].boundary) << ':'
          << acrt::format_double(result.curve[i].fpr);
    }
    out << '\n';
    std::cout << acrt::fingerprint_hex(acrt::fingerprint(t)) << ' '
              << (result.attained ? "U=" + acrt::format_double(result.recommended)
                                  : std::string("unattained"))
              << " (" << result.message << ")\n";
    if (!result.attained) status = 2;
  }
  std::cout << "calibration: " << path.string() << '\n';
  return status;
}

int cmd_plot_data(const Common& c, const std::string& results, const std::string& figure,
                  std::optional<double> reference, const std::vector<std::string>& filters) {
  const fs::path results_file =
      results.empty() ? acrt::results_path(c.out) : fs::path(results);
  if (!fs::exists(results_file)) {
    std::cerr << "no results file at " << results_file.string() << '\n';
    return 1;
  }
  const auto rows = acrt::ResultsFile(results_file).rows();
  if (rows.empty()) {
    std::cerr << results_file.string() << " has no rows\n";
    return 1;
  }
  auto spec = acrt::figure_preset(figure, rows.front().run.scenario.outcome.kind);
  if (reference) spec.reference = *reference;
  for (const auto& f : filters) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) {
      std::cerr << "filter '" << f << "' must look like field=value\n";
      return 1;
    }
    spec.filters.emplace_back(f.substr(0, eq), f.substr(eq + 1));
  }
  const auto files = acrt::emit_plot_data(rows, spec, fs::path(c.out) / "plots");
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

acrt::ScenarioRun first_scenario(const Common& c) {
  return acrt::expand_grid(load_grid(c)).scenarios.front();
}

int cmd_inspect(const Common& c, const std::string& data, std::optional<std::size_t> rep) {
  const auto sr = first_scenario(c);
  const auto checked = acrt::check_scenario(sr.scenario);
  std::ifstream in(data);
  if (!in) {
    std::cerr << "cannot read " << data << '\n';
    return 1;
  }
  const auto snapshot =
      acrt::read_dataset(in, checked.outcome().kind, checked.beta_precision, rep);
  const auto config = acrt::AnalysisConfig::from(checked);
  acrt::RngStream mc(sr.run.seed);
  const auto a = acrt::analyze_snapshot(snapshot, config, &mc);
  std::cout.precision(10);
  std::cout << "outcome: " << acrt::to_string(config.kind) << '\n'
            << "control posterior: mean " << a.moments.control_mean << ", variance "
            << a.moments.control_variance << '\n'
            << "treatment posterior: mean " << a.moments.treatment_mean << ", variance "
            << a.moments.treatment_variance << '\n'
            << "P(superiority > " << config.delta << "): " << a.probability << '\n';
  return 0;
}

int cmd_dump(const Common& c, std::size_t rep) {
  const auto sr = first_scenario(c);
  const auto checked = acrt::check_scenario(sr.scenario);
  const acrt::TrialStreamKey key{sr.run.seed, acrt::stream_key(sr.scenario), rep};
  acrt::DatasetRecorder recorder;
  const auto trial = acrt::run_trial(checked, key, nullptr, &recorder, false);
  fs::create_directories(c.out);
  const fs::path data = fs::path(c.out) / ("dataset_rep" + std::to_string(rep) + ".csv");
  const fs::path trace = fs::path(c.out) / ("trace_rep" + std::to_string(rep) + ".csv");
  {
    std::ofstream out(data);
    recorder.write(out, rep, checked.outcome().kind);
  }
  {
    std::ofstream out(trace);
    acrt::write_trace(out, trial);
  }
  std::cout << data.string() << '\n' << trace.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operating characteristics of Bayesian adaptive cluster randomized trials"};
  app.require_subcommand(1);

  Common sim_c, cal_c, plot_c, insp_c, dump_c;
  bool force = false;
  double target = 0.05, low = 0.5, high = 0.999;
  std::size_t iterations = 6;
  std::vector<double> u_values;
  std::string results, figure, data;
  std::optional<double> reference;
  std::vector<std::string> filters;
  std::optional<std::size_t> insp_rep;
  std::size_t dump_rep = 0;

  auto* sim = app.add_subcommand("simulate", "run a scenario grid into <out>/results.csv");
  add_common(sim, sim_c, true);
  sim->add_flag("--force", force, "recompute scenarios already in the results file");

  auto* cal = app.add_subcommand("calibrate", "search the decision boundary for a target FPR");
  add_common(cal, cal_c, true);
  cal->add_option("--target", target, "target false positive rate")->capture_default_str();
  cal->add_option("--u-values", u_values, "candidate boundaries (default: bisection)");
  cal->add_option("--low", low, "bisection lower end")->capture_default_str();
  cal->add_option("--high", high, "bisection upper end")->capture_default_str();
  cal->add_option("--iterations", iterations, "bisection steps")->capture_default_str();

  auto* plot = app.add_subcommand("plot-data", "write per-panel plot tables");
  add_common(plot, plot_c, false);
  plot->add_option("--results", results, "results file (default: <out>/results.csv)");
  plot->add_option("--figure", figure, "figure preset")
      ->required()
      ->check(CLI::IsMember(acrt::figure_presets()));
  plot->add_option("--reference", reference, "reference line value");
  plot->add_option("--filter", filters, "field=value row filter (repeatable)");

  auto* insp = app.add_subcommand("inspect-posterior", "posterior summary for one dataset");
  add_common(insp, insp_c, true);
  insp->add_option("--data", data, "dataset csv (replication,arm,cluster,subject,value)")
      ->required()
      ->check(CLI::ExistingFile);
  insp->add_option("--rep", insp_rep, "replication to read (default: first in file)");

  auto* dump = app.add_subcommand("dump-data",
                                  "write the data and stage trace of one replication");
  add_common(dump, dump_c, true);
  dump->add_option("--rep", dump_rep, "replication index")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_c, force);
    if (*cal) return cmd_calibrate(cal_c, target, u_values, low, high, iterations);
    if (*plot) return cmd_plot_data(plot_c, results, figure, reference, filters);
    if (*insp) return cmd_inspect(insp_c, data, insp_rep);
    if (*dump) return cmd_dump(dump_c, dump_rep);
  } catch (const acrt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
