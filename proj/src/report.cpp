#include "rampmeter/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "rampmeter/errors.hpp"

namespace rampmeter {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::string ramp_name(const Network& net, RampIndex i) { return i == kNone ? "" : net.ramp(i).id; }

double to_number(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nan("");
  return v;
}

}  // namespace

void write_queue_csv(std::ostream& out, const Network& net, const RunResult& run) {
  out << "step,ramp_id,queue_len\n";
  if (run.queue_lengths.empty()) return;
  for (std::int64_t step = 1; step <= run.horizon; ++step) {
    for (RampIndex i = 0; i < run.ramps; ++i) out << step << ',' << net.ramp(i).id << ',' << run.queue_at(step, i) << '\n';
  }
}

void write_vehicle_csv(std::ostream& out, const Network& net, const RunResult& run) {
  out << "id,ramp_id,route_id,arrival_step,release_step,exit_step,arrival_s,release_s,exit_s\n";
  for (const auto& v : run.vehicles) {
    out << v.id << ',' << ramp_name(net, v.ramp) << ',' << (v.route == kNone ? "" : net.route(v.route).id) << ','
        << v.arrival_step << ',' << v.release_step << ',' << v.exit_step << ',' << format_number(v.arrival_s) << ','
        << format_number(v.release_s) << ',' << format_number(v.exit_s) << '\n';
  }
}

void write_probe_csv(std::ostream& out, const Network& net, const std::vector<Probe>& probes, const RunResult& run) {
  out << "probe,segment,cell,crossings,rate\n";
  for (std::size_t p = 0; p < probes.size() && p < run.probe_counts.size(); ++p) {
    out << p << ',' << net.edge(probes[p].segment).id << ',' << probes[p].cell << ',' << run.probe_counts[p] << ','
        << format_number(crossing_rate(run, p)) << '\n';
  }
}

void write_boundary_csv(std::ostream& out, const BoundaryEstimate& estimate) {
  out << "lambda,verdict,seed,slope\n";
  for (const auto& e : estimate.evaluations) {
    for (std::size_t k = 0; k < e.slopes.size(); ++k) {
      out << format_number(e.lambda) << ',' << (e.stable ? "stable" : "saturated") << ',' << e.seeds[k] << ','
          << format_number(e.slopes[k]) << '\n';
    }
  }
}

void write_drift_csv(std::ostream& out, const std::vector<RunResult>& runs, const std::vector<Multiset>& families,
                     int stride, double threshold) {
  out << "run,seed,step,v,v_next,queue_max,above\n";
  if (stride < 1) stride = 1;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    const auto v = lyapunov_series(run, families, stride);
    for (std::size_t n = 0; n + 1 < v.size(); ++n) {
      const auto snap = n * static_cast<std::size_t>(stride);
      const auto step = run.degree_steps[snap];
      std::int32_t qmax = 0;
      if (!run.queue_lengths.empty() && step >= 1) {
        for (RampIndex i = 0; i < run.ramps; ++i) qmax = std::max(qmax, run.queue_at(step, i));
      }
      out << r << ',' << run.seed << ',' << step << ',' << format_number(v[n]) << ',' << format_number(v[n + 1]) << ','
          << qmax << ',' << (v[n] > threshold ? 1 : 0) << '\n';
    }
  }
}

void write_trajectory_csv(std::ostream& out, const Network& net, const RunResult& run) {
  out << "time_s,vehicle,edge,position_m,speed,accel,safety_mode\n";
  for (const auto& t : run.trajectory) {
    out << format_number(t.time_s) << ',' << t.vehicle << ',' << net.edge(t.edge).id << ','
        << format_number(t.position_m) << ',' << format_number(t.speed) << ',' << format_number(t.accel) << ','
        << (t.safety_mode ? 1 : 0) << '\n';
  }
}

void write_xf_csv(std::ostream& out, const RunResult& run) {
  out << "time_s,xf1,xf2,g,theta\n";
  for (std::size_t k = 0; k < run.xf_times.size(); ++k) {
    out << format_number(run.xf_times[k]) << ',' << format_number(run.xf1[k]) << ',' << format_number(run.xf2[k])
        << ',' << format_number(run.gap_g[k]) << ',' << format_number(run.gap_theta[k]) << '\n';
  }
}

void write_columns_csv(std::ostream& out, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  std::size_t rows = 0;
  for (const auto& col : columns) rows = std::max(rows, col.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ',';
      if (r < columns[c].size()) out << format_number(columns[c][r]);
    }
    out << '\n';
  }
}

nlohmann::json rational_json(const Rational& r) { return {{"num", r.numerator()}, {"den", r.denominator()}}; }

nlohmann::json bounds_json(const Rational& inner, const Rational& outer) {
  return {{"inner", rational_json(inner)}, {"outer", rational_json(outer)}};
}

nlohmann::json ufamily_json(const Network& net, const UFamily& family) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& level : family.levels) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& m : level) {
      nlohmann::json ids = nlohmann::json::array();
      for (auto j : m) ids.push_back(net.ramp(j).id);
      sets.push_back(std::move(ids));
    }
    levels.push_back(std::move(sets));
  }
  return {{"ramp", net.ramp(family.ramp).id}, {"levels", std::move(levels)}};
}

// ---------------------------------------------------------------------------

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Roughly five round ticks covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

std::string short_number(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string svg_line_plot(const PlotSpec& spec) {
  const double width = 720, height = 440, left = 80, right = 160, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : spec.series) {
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 <= 0) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 <= 0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape_xml(spec.title)
    << "</text>\n";
  o << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw
    << "\" y2=\"" << top + ph << "\"/><line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
    << top + ph << "\"/></g>\n";
  o << "<g>\n";
  for (double t : ticks(x0, x1)) {
    o << "<line x1=\"" << px(t) << "\" y1=\"" << top + ph << "\" x2=\"" << px(t) << "\" y2=\"" << top + ph + 5
      << "\" stroke=\"black\"/><text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">"
      << short_number(t) << "</text>\n";
  }
  for (double t : ticks(y0, y1)) {
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << left << "\" y2=\"" << py(t)
      << "\" stroke=\"black\"/><text x=\"" << left - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
      << short_number(t) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 16 << "\" text-anchor=\"middle\">"
    << escape_xml(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(20," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape_xml(spec.y_label) << "</text>\n";

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const auto& series = spec.series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < series.x.size() && k < series.y.size(); ++k) {
      if (!std::isfinite(series.x[k]) || !std::isfinite(series.y[k])) continue;
      o << (first ? "" : " ") << short_number(px(series.x[k])) << ',' << short_number(py(series.y[k]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(s);
    o << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">"
      << escape_xml(series.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

int CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(l);
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw ValidationError("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ValidationError("line " + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                            " fields, got " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

namespace {

int require_column(const CsvTable& t, const std::string& name) {
  const int c = t.column(name);
  if (c < 0) throw ValidationError("CSV has no column '" + name + "'");
  return c;
}

}  // namespace

PlotSpec plot_from_csv(const CsvTable& t, PlotKind kind) {
  PlotSpec spec;
  switch (kind) {
    case PlotKind::queue: {
      const int cs = require_column(t, "step"), cr = require_column(t, "ramp_id"), cq = require_column(t, "queue_len");
      std::map<std::string, std::size_t> index;
      for (const auto& row : t.rows) {
        auto [it, fresh] = index.emplace(row[static_cast<std::size_t>(cr)], spec.series.size());
        if (fresh) spec.series.push_back({row[static_cast<std::size_t>(cr)], {}, {}});
        auto& s = spec.series[it->second];
        s.x.push_back(to_number(row[static_cast<std::size_t>(cs)]));
        s.y.push_back(to_number(row[static_cast<std::size_t>(cq)]));
      }
      spec.title = "On-ramp queues";
      spec.x_label = "step";
      spec.y_label = "queue length [veh]";
      return spec;
    }
    case PlotKind::boundary: {
      const int cl = require_column(t, "lambda"), cs = require_column(t, "slope");
      std::map<double, std::pair<double, int>> mean;
      for (const auto& row : t.rows) {
        auto& m = mean[to_number(row[static_cast<std::size_t>(cl)])];
        m.first += to_number(row[static_cast<std::size_t>(cs)]);
        m.second += 1;
      }
      Series s{"mean trailing slope", {}, {}};
      for (const auto& [lambda, acc] : mean) {
        s.x.push_back(lambda);
        s.y.push_back(acc.first / acc.second);
      }
      spec.series.push_back(std::move(s));
      spec.title = "Stability sweep";
      spec.x_label = "lambda [veh/step per ramp]";
      spec.y_label = "queue slope [veh/step]";
      return spec;
    }
    case PlotKind::ttt:
      spec.title = "Average total travel time";
      spec.x_label = "n (completed trips)";
      spec.y_label = "TTT_n [s]";
      break;
    case PlotKind::xf:
      spec.title = "Distance to free flow";
      spec.x_label = "time [s]";
      spec.y_label = "value";
      break;
    case PlotKind::generic:
      break;
  }
  if (t.header.size() < 2) throw ValidationError("CSV needs at least two columns to plot");
  if (spec.x_label.empty()) spec.x_label = t.header[0];
  if (spec.y_label.empty()) spec.y_label = t.header.size() == 2 ? t.header[1] : "value";
  if (spec.title.empty()) spec.title = t.header.size() == 2 ? t.header[1] + " vs " + t.header[0] : "";
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    Series s{t.header[c], {}, {}};
    for (const auto& row : t.rows) {
      const double y = to_number(row[c]);
      if (std::isnan(y)) continue;
      s.x.push_back(to_number(row[0]));
      s.y.push_back(y);
    }
    if (!s.x.empty()) spec.series.push_back(std::move(s));
  }
  return spec;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace rampmeter
