#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "rampmeter/analysis.hpp"
#include "rampmeter/network.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/trace.hpp"

namespace rampmeter {

/// Shortest round-trip decimal text for a double; "nan" for NaN.
std::string format_number(double value);

// CSV writers. Every writer emits a header row.

/// step,ramp_id,queue_len for every recorded step and ramp.
void write_queue_csv(std::ostream& out, const Network& network, const RunResult& run);
void write_vehicle_csv(std::ostream& out, const Network& network, const RunResult& run);
/// probe,segment,cell,crossings,rate
void write_probe_csv(std::ostream& out, const Network& network, const std::vector<Probe>& probes, const RunResult& run);
/// lambda,verdict,seed,slope with one row per (lambda, seed) in evaluation order.
void write_boundary_csv(std::ostream& out, const BoundaryEstimate& estimate);
/// run,seed,step,v,v_next,queue_max,above
void write_drift_csv(std::ostream& out, const std::vector<RunResult>& runs, const std::vector<Multiset>& families,
                     int stride, double threshold);
void write_trajectory_csv(std::ostream& out, const Network& network, const RunResult& run);
/// time_s,xf1,xf2,g,theta
void write_xf_csv(std::ostream& out, const RunResult& run);

/// First column x, then one column per series. Shorter series leave blanks.
void write_columns_csv(std::ostream& out, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

nlohmann::json rational_json(const Rational& r);
nlohmann::json bounds_json(const Rational& inner, const Rational& outer);
/// Ramp ids instead of indices; levels as arrays of arrays.
nlohmann::json ufamily_json(const Network& network, const UFamily& family);

// Plots

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Standalone SVG line chart: axes with ticks and labels, one polyline per series.
std::string svg_line_plot(const PlotSpec& spec);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// Comma-separated, no quoting. Throws ValidationError on ragged rows.
CsvTable read_csv(std::istream& in);

enum class PlotKind { queue, ttt, boundary, xf, generic };

/// Builds the plot for a CSV written by one of the writers above. `generic`
/// uses the first column as x and every other numeric column as a series.
PlotSpec plot_from_csv(const CsvTable& table, PlotKind kind);

/// Writes text to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace rampmeter
