#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "rampmeter/analysis.hpp"
#include "rampmeter/batch.hpp"
#include "rampmeter/errors.hpp"
#include "rampmeter/kinematic.hpp"
#include "rampmeter/report.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/schedule.hpp"

#ifndef RAMPSIM_VERSION
#define RAMPSIM_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace rampmeter;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsage = 2;

// Usage and parse problems map to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("RAMPSIM_OUT"); env && *env) return env;
  return "rampsim-out";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const auto probe = dir / ".rampsim-write-test";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

template <class Writer>
void write_csv(const fs::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_text_file(path, buf.str());
}

std::optional<PolicyKind> parse_policy(const std::string& text) {
  if (text.empty()) return std::nullopt;
  for (auto k : {PolicyKind::drra, PolicyKind::drra_nonreactive, PolicyKind::safe_alinea}) {
    if (to_string(k) == text) return k;
  }
  throw UsageError("unknown policy '" + text + "' (drra, drra_nonreactive, safe_alinea)");
}

Scenario load(const std::string& path, const std::string& policy = "") {
  auto result = load_scenario_file(path);
  if (!result.scenario) {
    const auto& first = result.report.issues.front();
    throw ValidationError(first.where + ": " + first.message);
  }
  if (auto k = parse_policy(policy)) return with_policy(*result.scenario, *k);
  return std::move(*result.scenario);
}

json manifest(const std::string& command, const std::string& path, const Scenario& s) {
  return {{"command", command},
          {"scenario", path},
          {"name", s.name},
          {"config_hash", s.config_hash},
          {"backend", s.experiment.backend == Backend::slot ? "slot" : "kinematic"},
          {"policy", std::string(to_string(s.policy.kind))},
          {"version", RAMPSIM_VERSION}};
}

RampIndex resolve_ramp(const Network& net, const std::string& text) {
  if (auto r = net.find_ramp(text)) return *r;
  try {
    std::size_t used = 0;
    const int k = std::stoi(text, &used);
    if (used == text.size() && k >= 1 && k <= net.ramp_count()) return k - 1;
  } catch (const std::exception&) {
  }
  throw ValidationError("no on-ramp '" + text + "' (give an on-ramp id or a 1-based index)");
}

json event_json(const Network& net, const ReleaseEvent& e) {
  return {{"ramp", net.ramp(e.ramp).id},
          {"offset", e.offset},
          {"route", net.route(e.route).id},
          {"steps", e.steps},
          {"via", net.edge(e.via).id}};
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path) {
  const auto result = load_scenario_file(path);
  if (result.scenario) {
    std::cout << path << ": ok\n";
    return kOk;
  }
  for (const auto& issue : result.report.issues) {
    std::cout << path << ": " << (issue.where.empty() ? "/" : issue.where) << ": " << issue.message << "\n";
  }
  return kDomainFailure;
}

struct RunArgs {
  std::string path;
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  std::string out;
  std::string policy;
  double lambda = -1.0;
  int trajectory_every = 0;
  bool plot = true;
};

int cmd_run(const RunArgs& a) {
  auto s = load(a.path, a.policy);
  if (a.lambda >= 0.0) s = with_uniform_lambda(s, a.lambda);
  const auto seed = a.seed ? a.seed : s.experiment.base_seed;
  const auto horizon = a.horizon > 0 ? a.horizon : s.experiment.horizon;
  const auto dir = output_dir(a.out);
  ensure_dir(dir);

  RunOptions options;
  options.trajectory_every = a.trajectory_every;
  const auto run = run_scenario(s, horizon, seed, options);

  write_csv(dir / "queues.csv", [&](std::ostream& o) { write_queue_csv(o, s.network, run); });
  write_csv(dir / "vehicles.csv", [&](std::ostream& o) { write_vehicle_csv(o, s.network, run); });
  write_csv(dir / "probes.csv", [&](std::ostream& o) { write_probe_csv(o, s.network, s.experiment.probes, run); });
  if (s.experiment.backend == Backend::kinematic) {
    write_csv(dir / "xf.csv", [&](std::ostream& o) { write_xf_csv(o, run); });
    if (a.trajectory_every > 0) {
      write_csv(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, s.network, run); });
    }
  }
  if (a.plot) {
    PlotSpec spec{"On-ramp queues", "step", "queue length [veh]", {}};
    for (RampIndex i = 0; i < run.ramps; ++i) {
      Series series{s.network.ramp(i).id, {}, {}};
      const std::int64_t stride = std::max<std::int64_t>(1, horizon / 2000);
      for (std::int64_t step = 1; step <= horizon; step += stride) {
        series.x.push_back(static_cast<double>(step));
        series.y.push_back(run.queue_at(step, i));
      }
      spec.series.push_back(std::move(series));
    }
    write_text_file(dir / "queues.svg", svg_line_plot(spec));
  }

  auto m = manifest("run", a.path, s);
  m["seed"] = seed;
  m["horizon"] = horizon;
  m["lambda"] = s.demand.lambda;
  m["arrived"] = run.arrived;
  m["released"] = run.released;
  m["exited"] = run.exited;
  m["final_total_queue"] = run.total_queue.empty() ? 0 : run.total_queue.back();
  if (s.experiment.backend == Backend::kinematic) m["min_gap_m"] = run.min_gap_m;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  std::cout << "seed " << seed << ", " << horizon << " steps: arrived " << run.arrived << ", released "
            << run.released << ", exited " << run.exited << ", queued at end " << m["final_total_queue"] << "\n"
            << "wrote " << dir.string() << "\n";
  return kOk;
}

struct BoundaryArgs {
  std::string path;
  double lo = 0.3;
  double hi = 0.7;
  int seeds = 0;
  double resolution = 0.01;
  std::int64_t horizon = 0;
  double tolerance = kDefaultSlopeTolerance;
  std::string policy;
  std::string out;
};

int cmd_boundary(const BoundaryArgs& a) {
  const auto s = load(a.path, a.policy);
  const int seeds = a.seeds > 0 ? a.seeds : s.experiment.seeds;
  const auto horizon = a.horizon > 0 ? a.horizon : s.experiment.horizon;
  const auto dir = output_dir(a.out);
  ensure_dir(dir);
  const auto estimate = estimate_boundary(stability_probe(s, horizon, seeds, a.tolerance), a.lo, a.hi, a.resolution);

  std::ostringstream csv;
  write_boundary_csv(csv, estimate);
  write_text_file(dir / "boundary.csv", csv.str());
  std::istringstream back(csv.str());
  write_text_file(dir / "boundary.svg", svg_line_plot(plot_from_csv(read_csv(back), PlotKind::boundary)));

  auto m = manifest("boundary", a.path, s);
  m["seeds"] = seed_range(s.experiment.base_seed, seeds);
  m["horizon"] = horizon;
  m["resolution"] = a.resolution;
  m["slope_tolerance"] = a.tolerance;
  m["lambda_star"] = estimate.lambda_star;
  m["bracket"] = {estimate.lo, estimate.hi};
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  for (const auto& e : estimate.evaluations) {
    std::cout << "lambda " << format_number(e.lambda) << ": " << (e.stable ? "stable" : "saturated") << "\n";
  }
  std::cout << "lambda* = " << format_number(estimate.lambda_star) << " (stable up to " << format_number(estimate.lo)
            << ", saturated from " << format_number(estimate.hi) << ")\n";
  return kOk;
}

int cmd_bounds(const std::string& path, const std::string& out) {
  const auto s = load(path);
  const auto inner = inner_bound(s.network, s.demand.routing, s.policy.schedule);
  const auto outer = outer_bound(s.network, s.demand.routing);
  const auto j = bounds_json(inner, outer);
  if (!out.empty() || std::getenv("RAMPSIM_OUT")) {
    const auto dir = output_dir(out);
    ensure_dir(dir);
    write_text_file(dir / "bounds.json", j.dump(2) + "\n");
  }
  std::cout << "inner " << to_string(inner) << "\nouter " << to_string(outer) << "\n";
  return kOk;
}

int cmd_ufamily(const std::string& path, const std::string& ramp, int k_max, const std::string& out) {
  const auto s = load(path);
  const auto family = enumerate_U(s.network, resolve_ramp(s.network, ramp), k_max);
  const auto j = ufamily_json(s.network, family);
  if (!out.empty() || std::getenv("RAMPSIM_OUT")) {
    const auto dir = output_dir(out);
    ensure_dir(dir);
    write_text_file(dir / "ufamily.json", j.dump(2) + "\n");
  }
  for (std::size_t k = 0; k < family.levels.size(); ++k) {
    std::cout << "U^" << k << " = {";
    for (std::size_t m = 0; m < family.levels[k].size(); ++m) {
      std::cout << (m ? ", " : "") << "{";
      for (std::size_t x = 0; x < family.levels[k][m].size(); ++x) {
        std::cout << (x ? "," : "") << s.network.ramp(family.levels[k][m][x]).id;
      }
      std::cout << "}";
    }
    std::cout << "}\n";
  }
  return kOk;
}

struct DriftArgs {
  std::string path;
  double lambda = -1.0;
  int seeds = 0;
  std::int64_t horizon = 0;
  int delta = 0;
  double quantile = 0.9;
  std::string out;
};

int cmd_drift(const DriftArgs& a) {
  auto s = load(a.path);
  if (a.lambda >= 0.0) s = with_uniform_lambda(s, a.lambda);
  const int seeds = a.seeds > 0 ? a.seeds : s.experiment.seeds;
  const auto horizon = a.horizon > 0 ? a.horizon : s.experiment.horizon;
  const int delta = a.delta > 0 ? a.delta : s.policy.cycle_steps;
  if (delta % s.policy.cycle_steps != 0) throw ValidationError("--delta must be a multiple of the cycle length");
  const auto families = all_families(s.network);
  RunOptions options;
  options.record_vehicles = false;
  options.degree_every = delta;
  const auto runs = run_batch(s, horizon, seed_range(s.experiment.base_seed, seeds), options);
  std::vector<std::vector<double>> series;
  for (const auto& r : runs) series.push_back(lyapunov_series(r, families));
  const auto stats = lyapunov_drift(series, std::nullopt, a.quantile);

  const auto dir = output_dir(a.out);
  ensure_dir(dir);
  write_csv(dir / "drift.csv", [&](std::ostream& o) { write_drift_csv(o, runs, families, 1, stats.threshold); });
  auto m = manifest("drift", a.path, s);
  m["lambda"] = s.demand.lambda;
  m["seeds"] = seed_range(s.experiment.base_seed, seeds);
  m["horizon"] = horizon;
  m["delta"] = delta;
  m["threshold"] = stats.threshold;
  m["samples"] = stats.samples;
  m["mean_drift"] = stats.mean;
  m["ci95"] = {stats.ci_low, stats.ci_high};
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  if (stats.empty()) {
    std::cout << "no samples above L = " << format_number(stats.threshold) << "\n";
    return kOk;
  }
  std::cout << "L = " << format_number(stats.threshold) << ", " << stats.samples << " samples\n"
            << "mean drift " << format_number(stats.mean) << ", 95% CI [" << format_number(stats.ci_low) << ", "
            << format_number(stats.ci_high) << "]\n";
  return kOk;
}

struct TttArgs {
  std::string path;
  std::size_t n = 0;
  int seeds = 0;
  std::int64_t horizon = 0;
  std::string policy;
  std::string compare;
  std::string out;
};

int cmd_ttt(const TttArgs& a) {
  std::vector<std::string> names;
  std::vector<Scenario> scenarios;
  scenarios.push_back(load(a.path, a.policy));
  names.emplace_back(to_string(scenarios.back().policy.kind));
  if (!a.compare.empty()) {
    scenarios.push_back(with_policy(scenarios.front(), *parse_policy(a.compare)));
    names.emplace_back(to_string(scenarios.back().policy.kind));
  }
  const auto& base = scenarios.front();
  const int seeds = a.seeds > 0 ? a.seeds : base.experiment.seeds;
  const auto horizon = a.horizon > 0 ? a.horizon : base.experiment.horizon;
  const auto dir = output_dir(a.out);
  ensure_dir(dir);

  RunOptions options;
  options.record_queues = false;
  std::vector<std::vector<double>> columns(1);
  for (const auto& s : scenarios) {
    const auto runs = run_batch(s, horizon, seed_range(s.experiment.base_seed, seeds), options);
    columns.push_back(mean_ttt_curve(runs));
  }
  std::size_t n = columns[1].size();
  for (std::size_t c = 2; c < columns.size(); ++c) n = std::min(n, columns[c].size());
  for (std::size_t c = 1; c < columns.size(); ++c) columns[c].resize(n);
  for (std::size_t k = 1; k <= n; ++k) columns[0].push_back(static_cast<double>(k));
  std::vector<std::string> header{"n"};
  header.insert(header.end(), names.begin(), names.end());

  std::ostringstream csv;
  write_columns_csv(csv, header, columns);
  write_text_file(dir / "ttt.csv", csv.str());
  std::istringstream back(csv.str());
  write_text_file(dir / "ttt.svg", svg_line_plot(plot_from_csv(read_csv(back), PlotKind::ttt)));
  auto m = manifest("ttt", a.path, base);
  m["policies"] = names;
  m["seeds"] = seed_range(base.experiment.base_seed, seeds);
  m["horizon"] = horizon;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");

  if (n == 0) throw ValidationError("no trip completed in every run");
  const std::size_t at = a.n ? a.n : n;
  if (at > n) {
    throw ValidationError("only " + std::to_string(n) + " trips completed in every run, TTT_" + std::to_string(at) +
                          " needs " + std::to_string(at));
  }
  for (std::size_t c = 1; c < columns.size(); ++c) {
    std::cout << names[c - 1] << ": TTT_" << at << " = " << format_number(columns[c][at - 1]) << " s\n";
  }
  return kOk;
}

int cmd_plot(const std::string& csv_path, const std::string& kind_text, const std::string& out) {
  static const std::map<std::string, PlotKind> kinds{{"queue", PlotKind::queue}, {"ttt", PlotKind::ttt},
                                                     {"boundary", PlotKind::boundary}, {"xf", PlotKind::xf},
                                                     {"generic", PlotKind::generic}};
  const auto it = kinds.find(kind_text);
  if (it == kinds.end()) throw UsageError("unknown plot kind '" + kind_text + "'");
  std::ifstream in(csv_path);
  if (!in) throw UsageError("cannot open " + csv_path);
  const auto svg = svg_line_plot(plot_from_csv(read_csv(in), it->second));
  fs::path target = out.empty() ? fs::path(csv_path).replace_extension(".svg") : fs::path(out);
  write_text_file(target, svg);
  std::cout << "wrote " << target.string() << "\n";
  return kOk;
}

int cmd_schedule_check(const std::string& path, bool strict) {
  const auto result = load_scenario_file(path, false);
  if (!result.scenario) {
    for (const auto& issue : result.report.issues) std::cout << path << ": " << issue.where << ": " << issue.message << "\n";
    return kDomainFailure;
  }
  const auto& s = *result.scenario;
  const auto mode = strict || s.experiment.strict_conflicts ? ConflictMode::strict : ConflictMode::standard;
  json j{{"mode", mode == ConflictMode::strict ? "strict" : "standard"}, {"hyperperiod", hyperperiod(s.policy.schedule)}};
  const auto witness = verify_conflict_free(s.network, s.policy.schedule, mode);
  j["conflict_free"] = !witness.has_value();
  if (witness) {
    j["witness"] = {{"node", s.network.node(witness->node).id},
                    {"first", event_json(s.network, witness->first)},
                    {"second", event_json(s.network, witness->second)},
                    {"residue", witness->residue},
                    {"first_step", witness->first_step}};
  }
  std::cout << j.dump(2) << "\n";
  return witness ? kDomainFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ramp-metering simulator and analysis tools"};
  app.set_version_flag("--version", RAMPSIM_VERSION);
  app.require_subcommand(1);

  std::string path;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("scenario", path, "Scenario JSON")->required();

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Simulate one seed and write traces");
  run_cmd->add_option("scenario", run.path, "Scenario JSON")->required();
  run_cmd->add_option("--seed", run.seed, "Seed (default: scenario base seed)");
  run_cmd->add_option("--horizon", run.horizon, "Steps (default: scenario horizon)");
  run_cmd->add_option("--out", run.out, "Output directory (default: $RAMPSIM_OUT or ./rampsim-out)");
  run_cmd->add_option("--policy", run.policy, "Override the policy type");
  run_cmd->add_option("--lambda", run.lambda, "Scale demand to this rate along the scenario's direction");
  run_cmd->add_option("--trajectory-every", run.trajectory_every, "Kinematic: sample trajectories every N steps");
  run_cmd->add_flag("!--no-plot", run.plot, "Skip queues.svg");

  BoundaryArgs bnd;
  auto* boundary = app.add_subcommand("boundary", "Bisect for the under-saturation boundary");
  boundary->add_option("scenario", bnd.path, "Scenario JSON")->required();
  boundary->add_option("--lo", bnd.lo, "Lower bracket (must be stable)");
  boundary->add_option("--hi", bnd.hi, "Upper bracket (must be saturated)");
  boundary->add_option("--seeds", bnd.seeds, "Seeds per lambda (default: scenario)");
  boundary->add_option("--resolution", bnd.resolution, "Bracket width to stop at");
  boundary->add_option("--horizon", bnd.horizon, "Steps per run (default: scenario)");
  boundary->add_option("--slope-tolerance", bnd.tolerance, "Trailing queue slope counted as flat [veh/step]");
  boundary->add_option("--policy", bnd.policy, "Override the policy type");
  boundary->add_option("--out", bnd.out, "Output directory");

  std::string out;
  auto* bounds = app.add_subcommand("bounds", "Analytical inner and outer bounds on lambda");
  bounds->add_option("scenario", path, "Scenario JSON")->required();
  bounds->add_option("--out", out, "Also write bounds.json here");

  std::string ramp;
  int k_max = 64;
  auto* ufamily = app.add_subcommand("ufamily", "Predecessor families of one on-ramp");
  ufamily->add_option("scenario", path, "Scenario JSON")->required();
  ufamily->add_option("ramp", ramp, "On-ramp id or 1-based index")->required();
  ufamily->add_option("--k-max", k_max, "Deepest level");
  ufamily->add_option("--out", out, "Also write ufamily.json here");

  DriftArgs drift;
  auto* drift_cmd = app.add_subcommand("drift", "Conditional drift of V = D^2");
  drift_cmd->add_option("scenario", drift.path, "Scenario JSON")->required();
  drift_cmd->add_option("--lambda", drift.lambda, "Demand rate");
  drift_cmd->add_option("--seeds", drift.seeds, "Seeds");
  drift_cmd->add_option("--horizon", drift.horizon, "Steps per run");
  drift_cmd->add_option("--delta", drift.delta, "Sampling period in steps (default: cycle length)");
  drift_cmd->add_option("--quantile", drift.quantile, "Conditioning threshold as a quantile of V");
  drift_cmd->add_option("--out", drift.out, "Output directory");

  TttArgs ttt_args;
  auto* ttt_cmd = app.add_subcommand("ttt", "Average total travel time of the first n trips");
  ttt_cmd->add_option("scenario", ttt_args.path, "Scenario JSON")->required();
  ttt_cmd->add_option("--n", ttt_args.n, "Report TTT_n (default: largest available)");
  ttt_cmd->add_option("--seeds", ttt_args.seeds, "Seeds to average over");
  ttt_cmd->add_option("--horizon", ttt_args.horizon, "Steps per run");
  ttt_cmd->add_option("--policy", ttt_args.policy, "Override the policy type");
  ttt_cmd->add_option("--compare", ttt_args.compare, "Second policy for the same scenario");
  ttt_cmd->add_option("--out", ttt_args.out, "Output directory");

  std::string csv, kind = "generic";
  auto* plot = app.add_subcommand("plot", "Render a CSV as an SVG line chart");
  plot->add_option("csv", csv, "CSV file")->required();
  plot->add_option("--kind", kind, "queue, ttt, boundary, xf or generic");
  plot->add_option("--out", out, "SVG path (default: next to the CSV)");

  bool strict = false;
  auto* schedule = app.add_subcommand("schedule", "Release schedule tools");
  schedule->require_subcommand(1);
  auto* check = schedule->add_subcommand("check", "Verify conflict-freeness; prints a JSON witness");
  check->add_option("scenario", path, "Scenario JSON")->required();
  check->add_flag("--strict", strict, "Also report coincidences at a ramp's own node");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(path);
    if (*run_cmd) return cmd_run(run);
    if (*boundary) return cmd_boundary(bnd);
    if (*bounds) return cmd_bounds(path, out);
    if (*ufamily) return cmd_ufamily(path, ramp, k_max, out);
    if (*drift_cmd) return cmd_drift(drift);
    if (*ttt_cmd) return cmd_ttt(ttt_args);
    if (*plot) return cmd_plot(csv, kind, out);
    if (*check) return cmd_schedule_check(path, strict);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CollisionError& e) {
    std::cerr << "collision: " << e.what() << "\n";
    return kDomainFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainFailure;
  }
  return kUsage;
}
