#pragma once

// Append-only results table.
//
// One comma-separated row per scenario run:
//   fingerprint, <scenario fields>, rejection_rate, mc_se, expected_clusters,
//   expected_participants, stop_stage_counts, wall_time_ms
// stop_stage_counts is pipe-separated, one count per analysis.
//
// Each row reaches the file in a single write(2) on an O_APPEND descriptor.
// A trailing fragment without a newline (a run killed mid-write) is cut off
// when the file is opened.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "acrt/grid.hpp"
#include "acrt/oc.hpp"
#include "acrt/scenario_io.hpp"

namespace acrt {

struct ResultRow {
  ScenarioRun run;
  OCEstimate estimate;
  double wall_time_ms = 0.0;
};

inline std::vector<std::string> results_columns() {
  std::vector<std::string> cols{"fingerprint"};
  for (const auto& f : scenario_field_names()) cols.push_back(f);
  for (const char* c : {"rejection_rate", "mc_se", "expected_clusters",
                        "expected_participants", "stop_stage_counts", "wall_time_ms"}) {
    cols.emplace_back(c);
  }
  return cols;
}

inline std::string results_header() {
  std::string out;
  for (const auto& c : results_columns()) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

/// Row text without the trailing newline.
inline std::string format_row(const ResultRow& row) {
  std::string out = fingerprint_hex(row.estimate.fingerprint);
  for (const auto& f : scenario_fields(row.run)) out += ',' + f;
  const OCEstimate& e = row.estimate;
  out += ',' + format_double(e.rejection_rate);
  out += ',' + format_double(e.mc_se);
  out += ',' + format_double(e.expected_clusters_per_arm);
  out += ',' + format_double(e.expected_participants_per_arm);
  out += ',';
  for (std::size_t i = 0; i < e.stop_stage_histogram.size(); ++i) {
    if (i > 0) out += '|';
    out += std::to_string(e.stop_stage_histogram[i]);
  }
  out += ',' + format_double(row.wall_time_ms);
  return out;
}

inline ResultRow parse_row(const std::string& line) {
  const auto cells = detail::split(line, ',');
  const std::size_t nf = scenario_field_names().size();
  if (cells.size() != results_columns().size()) {
    throw std::invalid_argument("results row has " + std::to_string(cells.size()) +
                                " columns, expected " +
                                std::to_string(results_columns().size()));
  }
  ResultRow row;
  row.run = parse_scenario_fields({cells.begin() + 1, cells.begin() + 1 + nf});
  auto num = [&](std::size_t i) {
    auto v = parse_double(cells[i]);
    if (!v) throw std::invalid_argument("bad number '" + cells[i] + "' in results row");
    return *v;
  };
  std::size_t i = 1 + nf;
  OCEstimate& e = row.estimate;
  e.fingerprint = std::stoull(cells[0], nullptr, 16);
  e.rejection_rate = num(i++);
  e.mc_se = num(i++);
  e.expected_clusters_per_arm = num(i++);
  e.expected_participants_per_arm = num(i++);
  for (const auto& c : detail::split(cells[i++], '|')) {
    auto v = parse_unsigned(c);
    if (!v) throw std::invalid_argument("bad stop_stage_counts '" + c + "'");
    e.stop_stage_histogram.push_back(*v);
    e.R += *v;
  }
  e.rejections = static_cast<std::size_t>(std::llround(e.rejection_rate * e.R));
  row.wall_time_ms = num(i++);
  return row;
}

/// Drops the scenario-independent tail (wall time) for reproducibility checks.
inline std::string row_without_timing(const std::string& line) {
  return line.substr(0, line.rfind(','));
}

class ResultsFile {
 public:
  explicit ResultsFile(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    repair_and_load();
  }

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] const std::vector<std::string>& lines() const { return lines_; }

  [[nodiscard]] bool contains(std::uint64_t fp) const { return done_.count(fp) > 0; }

  [[nodiscard]] std::vector<ResultRow> rows() const {
    std::vector<ResultRow> out;
    out.reserve(lines_.size());
    for (const auto& l : lines_) out.push_back(parse_row(l));
    return out;
  }

  /// Rewrites the file without the given fingerprints (used by --force).
  void remove(const std::set<std::uint64_t>& fps) {
    std::vector<std::string> kept;
    for (const auto& l : lines_) {
      if (!fps.count(parse_row(l).estimate.fingerprint)) kept.push_back(l);
    }
    const auto tmp = path_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << results_header() << '\n';
      for (const auto& l : kept) out << l << '\n';
      if (!out) throw std::runtime_error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path_);
    lines_ = std::move(kept);
    for (auto fp : fps) done_.erase(fp);
  }

  void append(const ResultRow& row) {
    const std::string line = format_row(row);
    write_all(line + '\n');
    lines_.push_back(line);
    done_.insert(row.estimate.fingerprint);
  }

 private:
  void repair_and_load() {
    std::string content;
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      content = ss.str();
    }
    const auto last_newline = content.rfind('\n');
    const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (keep != content.size()) {
      std::filesystem::resize_file(path_, keep);
      content.resize(keep);
    }
    if (content.empty()) {
      write_all(results_header() + '\n');
      return;
    }
    std::istringstream in(content);
    std::string line;
    std::getline(in, line);
    if (line != results_header()) {
      throw std::runtime_error(path_.string() + ": unexpected results header");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      done_.insert(parse_row(line).estimate.fingerprint);
      lines_.push_back(line);
    }
  }

  void write_all(const std::string& text) {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::system_error(errno, std::generic_category(), path_.string());
    const ssize_t n = ::write(fd, text.data(), text.size());
    const int err = errno;
    ::close(fd);
    if (n != static_cast<ssize_t>(text.size())) {
      throw std::system_error(err, std::generic_category(), "short write to " + path_.string());
    }
  }

  std::filesystem::path path_;
  std::vector<std::string> lines_;
  std::set<std::uint64_t> done_;
};

}  // namespace acrt
