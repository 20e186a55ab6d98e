#pragma once

// Orchestration for the command-line tool: grid runs into a resumable results
// table, and reading dataset dumps back for posterior inspection.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "acrt/grid.hpp"
#include "acrt/oc.hpp"
#include "acrt/results.hpp"
#include "acrt/trial.hpp"

namespace acrt {

inline constexpr const char* kWorkersEnv = "ACRT_WORKERS";

/// Flag value if given, else $ACRT_WORKERS, else hardware concurrency.
inline std::size_t resolve_workers(std::optional<std::size_t> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv(kWorkersEnv)) {
    if (auto v = parse_unsigned(env); v && *v > 0) return *v;
  }
  return default_workers();
}

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir;
  std::size_t workers = 1;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

struct RunSummary {
  std::size_t scenarios = 0;
  std::size_t ran = 0;
  std::size_t already_done = 0;
  std::size_t skipped_invalid = 0;
  std::filesystem::path results;
};

inline std::filesystem::path results_path(const std::filesystem::path& out_dir) {
  return out_dir / "results.csv";
}

inline RunSummary run_command(const RunOptions& options, std::ostream& log) {
  ScenarioGrid grid = load_config(options.config.string());
  if (options.seed) grid.run.seed = *options.seed;
  const GridExpansion expansion = expand_grid(grid);
  for (const auto& reason : expansion.skipped) log << "skip: " << reason << '\n';

  RunSummary summary;
  summary.scenarios = expansion.scenarios.size();
  summary.skipped_invalid = expansion.skipped.size();
  summary.results = results_path(options.out_dir);

  ResultsFile results(summary.results);
  if (options.force) {
    std::set<std::uint64_t> fps;
    for (const auto& sr : expansion.scenarios) fps.insert(fingerprint(sr));
    results.remove(fps);
  }

  std::size_t index = 0;
  for (const auto& sr : expansion.scenarios) {
    ++index;
    const std::uint64_t fp = fingerprint(sr);
    if (results.contains(fp)) {
      ++summary.already_done;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    ResultRow row{sr, estimate_oc(sr, options.workers), 0.0};
    row.wall_time_ms = static_cast<double>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start)
            .count());
    results.append(row);
    ++summary.ran;
    log << '[' << index << '/' << summary.scenarios << "] " << fingerprint_hex(fp)
        << " rate=" << format_double(row.estimate.rejection_rate) << '\n';
  }
  return summary;
}

/// Reads a dataset dump (replication,arm,cluster,subject,value) for one
/// replication into per-arm snapshots. Continuous data become a single-stage
/// history; binary values must be 0 or 1.
inline Snapshot read_dataset(std::istream& in, OutcomeKind kind, double v,
                             std::optional<std::size_t> replication = std::nullopt) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "replication,arm,cluster,subject,value") {
    throw std::invalid_argument("dataset: expected header replication,arm,cluster,subject,value");
  }
  std::map<std::size_t, ClusterBlock> cont[2];
  std::map<std::size_t, BinaryCluster> bin[2];
  std::optional<std::size_t> rep = replication;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    auto fail = [&](const std::string& what) {
      return std::invalid_argument("dataset line " + std::to_string(line_no) + ": " + what);
    };
    if (cells.size() != 5) throw fail("expected 5 columns");
    const auto r = parse_unsigned(cells[0]);
    const auto cluster = parse_unsigned(cells[2]);
    const auto value = parse_double(cells[4]);
    if (!r || !cluster || !value) throw fail("malformed row");
    if (!rep) rep = *r;
    if (*r != *rep) continue;
    int arm = -1;
    if (cells[1] == "control") arm = 0;
    if (cells[1] == "treatment") arm = 1;
    if (arm < 0) throw fail("arm must be control or treatment");
    if (kind == OutcomeKind::Continuous) {
      auto& b = cont[arm][*cluster];
      b.size += 1;
      b.sum += *value;
    } else {
      if (*value != 0.0 && *value != 1.0) throw fail("binary value must be 0 or 1");
      auto& c = bin[arm][*cluster];
      c.size += 1;
      c.events += *value == 1.0 ? 1 : 0;
    }
  }
  if (kind == OutcomeKind::Continuous) {
    ContinuousSnapshot snap;
    for (int a = 0; a < 2; ++a) {
      std::vector<StageIncrement> stage;
      for (const auto& [id, b] : cont[a]) stage.push_back({id, b.size, b.sum});
      (a == 0 ? snap.control : snap.treatment).push_back(std::move(stage));
    }
    return snap;
  }
  BinarySnapshot snap;
  snap.control.v = v;
  snap.treatment.v = v;
  for (int a = 0; a < 2; ++a) {
    auto& data = a == 0 ? snap.control : snap.treatment;
    for (const auto& [id, c] : bin[a]) data.clusters.push_back(c);
  }
  return snap;
}

/// Records the final-stage cluster states of a trial for dumping.
struct DatasetRecorder : TrialObserver {
  std::vector<ClusterStateContinuous> continuous[2];
  std::vector<ClusterStateBinary> binary[2];

  void on_stage(std::size_t, Arm arm, const std::vector<ClusterStateContinuous>& c) override {
    continuous[static_cast<int>(arm)] = c;
  }
  void on_stage(std::size_t, Arm arm, const std::vector<ClusterStateBinary>& c) override {
    binary[static_cast<int>(arm)] = c;
  }

  void write(std::ostream& out, std::size_t replication, OutcomeKind kind) const {
    DatasetWriter writer(out);
    for (Arm arm : {Arm::Control, Arm::Treatment}) {
      const int a = static_cast<int>(arm);
      if (kind == OutcomeKind::Continuous) {
        writer.write(replication, arm, continuous[a]);
      } else {
        writer.write(replication, arm, binary[a]);
      }
    }
  }
};

}  // namespace acrt
