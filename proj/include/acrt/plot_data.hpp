#pragma once

// Plot-ready tables from a results file.
//
// A figure picks an x field, a metric (false positive rate: effect = 0;
// power: effect > 0) and the fields that distinguish series. Every other
// field that varies among the selected rows becomes a panel facet, and each
// panel is written as its own CSV with columns x,series,value,mc_se.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acrt/results.hpp"

namespace acrt {

enum class Metric { FalsePositiveRate, Power };

struct FigureSpec {
  std::string name;
  std::string x;
  Metric metric = Metric::FalsePositiveRate;
  std::vector<std::string> series;
  std::vector<std::pair<std::string, std::string>> filters;  // field == value
  double reference = 0.05;  // dashed target line
};

inline std::vector<std::string> figure_presets() {
  return {"fpr-vs-icc", "power-vs-effect", "fpr-vs-looks", "power-vs-looks",
          "fpr-vs-baseline"};
}

inline FigureSpec figure_preset(const std::string& name, OutcomeKind outcome) {
  const bool cont = outcome == OutcomeKind::Continuous;
  FigureSpec f;
  f.name = name;
  if (name == "fpr-vs-icc") {
    f.x = "icc";
    f.series = {"design", "n_clusters"};
  } else if (name == "power-vs-effect") {
    f.x = "effect";
    f.metric = Metric::Power;
    f.series = cont ? std::vector<std::string>{"design", "n_clusters", "icc"}
                    : std::vector<std::string>{"design", "n_clusters", "pi_c"};
    f.reference = cont ? 0.8 : 0.85;
  } else if (name == "fpr-vs-looks") {
    f.x = "interims";
    f.series = cont ? std::vector<std::string>{"design", "n_clusters", "icc"}
                    : std::vector<std::string>{"design", "n_clusters", "pi_c"};
  } else if (name == "power-vs-looks") {
    f.x = "interims";
    f.metric = Metric::Power;
    f.series = cont ? std::vector<std::string>{"design", "n_clusters", "effect"}
                    : std::vector<std::string>{"design", "n_clusters", "pi_c"};
    f.reference = cont ? 0.8 : 0.85;
  } else if (name == "fpr-vs-baseline") {
    f.x = "pi_c";
    f.series = {"design", "n_clusters", "icc"};
  } else {
    throw std::invalid_argument("unknown figure '" + name + "'");
  }
  return f;
}

struct PlotPoint {
  std::string x;
  std::string series;
  double value = 0.0;
  double mc_se = 0.0;
};

struct PlotPanel {
  std::string key;  // "field=value|field=value", empty for a single panel
  std::vector<PlotPoint> points;
};

/// Groups rows into panels and series. Throws when nothing matches or when a
/// series lacks an x value that other series in its panel have.
inline std::vector<PlotPanel> build_panels(const std::vector<ResultRow>& rows,
                                           const FigureSpec& spec) {
  if (spec.name.empty() || spec.x.empty()) throw std::invalid_argument("empty figure spec");
  const auto& names = scenario_field_names();
  auto index_of = [&](const std::string& field) {
    const auto it = std::find(names.begin(), names.end(), field);
    if (it == names.end()) throw std::invalid_argument("unknown field '" + field + "'");
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t x_index = index_of(spec.x);
  std::vector<std::size_t> series_index;
  for (const auto& s : spec.series) series_index.push_back(index_of(s));
  const std::size_t effect_index = index_of("effect");

  std::vector<std::pair<std::vector<std::string>, const ResultRow*>> selected;
  for (const auto& row : rows) {
    auto fields = scenario_fields(row.run);
    const bool null_effect = row.run.scenario.outcome.effect == 0.0;
    if ((spec.metric == Metric::FalsePositiveRate) != null_effect) continue;
    bool keep = true;
    for (const auto& [field, value] : spec.filters) {
      if (fields[index_of(field)] != value) keep = false;
    }
    if (keep) selected.emplace_back(std::move(fields), &row);
  }
  if (selected.empty()) {
    throw std::invalid_argument("figure '" + spec.name + "': no result rows match");
  }

  // Facet fields: everything that varies, except x, series, effect under FPR
  // and per-run bookkeeping.
  std::vector<std::size_t> panel_index;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i == x_index || names[i] == "reps" || names[i] == "seed") continue;
    if (std::find(series_index.begin(), series_index.end(), i) != series_index.end()) continue;
    if (i == effect_index && spec.metric == Metric::FalsePositiveRate) continue;
    std::set<std::string> values;
    for (const auto& [fields, row] : selected) values.insert(fields[i]);
    if (values.size() > 1) panel_index.push_back(i);
  }

  auto label = [&](const std::vector<std::string>& fields,
                   const std::vector<std::size_t>& which) {
    std::string out;
    for (std::size_t i : which) {
      if (!out.empty()) out += '|';
      out += names[i] + '=' + fields[i];
    }
    return out;
  };

  std::map<std::string, std::map<std::string, std::map<double, PlotPoint>>> grouped;
  for (const auto& [fields, row] : selected) {
    PlotPoint p{fields[x_index], label(fields, series_index), row->estimate.rejection_rate,
                row->estimate.mc_se};
    const double xv = parse_double(p.x).value_or(0.0);
    grouped[label(fields, panel_index)][p.series][xv] = p;  // later rows win
  }

  std::vector<PlotPanel> panels;
  std::vector<std::string> missing;
  for (auto& [panel_key, series] : grouped) {
    std::set<double> xs;
    for (const auto& [s, pts] : series) {
      for (const auto& [x, p] : pts) xs.insert(x);
    }
    PlotPanel panel{panel_key, {}};
    for (auto& [s, pts] : series) {
      for (double x : xs) {
        if (!pts.count(x)) {
          missing.push_back("panel '" + panel_key + "' series '" + s + "' x=" +
                            format_double(x));
        }
      }
      for (auto& [x, p] : pts) panel.points.push_back(p);
    }
    panels.push_back(std::move(panel));
  }
  if (!missing.empty()) {
    std::string msg = "figure '" + spec.name + "': missing facets:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::invalid_argument(msg);
  }
  return panels;
}

inline std::string sanitize_file_part(std::string s) {
  for (char& c : s) {
    if (c == '|') c = '_';
    else if (c == '=') c = '-';
    else if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'))
      c = '_';
  }
  return s;
}

/// Writes one CSV per panel plus `<name>__index.csv` (file, panel, reference).
/// Returns the panel files written.
inline std::vector<std::filesystem::path> emit_plot_data(const std::vector<ResultRow>& rows,
                                                         const FigureSpec& spec,
                                                         const std::filesystem::path& dir) {
  const auto panels = build_panels(rows, spec);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  std::ofstream index(dir / (spec.name + "__index.csv"));
  index << "file,panel,reference\n";
  for (const auto& panel : panels) {
    const std::string stem =
        spec.name + (panel.key.empty() ? "" : "__" + sanitize_file_part(panel.key));
    const auto path = dir / (stem + ".csv");
    std::ofstream out(path);
    out << "x,series,value,mc_se\n";
    for (const auto& p : panel.points) {
      out << p.x << ',' << p.series << ',' << format_double(p.value) << ','
          << format_double(p.mc_se) << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
    index << path.filename().string() << ',' << panel.key << ','
          << format_double(spec.reference) << '\n';
    files.push_back(path);
  }
  return files;
}

}  // namespace acrt
