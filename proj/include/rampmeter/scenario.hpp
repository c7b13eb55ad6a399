#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rampmeter/constants.hpp"
#include "rampmeter/demand.hpp"
#include "rampmeter/network.hpp"
#include "rampmeter/policy.hpp"
#include "rampmeter/schedule.hpp"

namespace rampmeter {

enum class Backend { slot, kinematic };
enum class InitialKind { empty, slot_preload, uniform_mainline };
enum class XfNorm { euclidean, max };

struct InitialCondition {
  InitialKind kind = InitialKind::empty;
  double occupancy = 0.0;  // slot_preload: probability a slot starts occupied
  int count = 0;           // uniform_mainline: vehicles spread evenly over the mainline
  double speed = 0.0;      // uniform_mainline: initial speed [m/s]
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::drra;
  int cycle_steps = 1;  // T
  int gap_period_steps = 2;  // T_per in steps
  GapParams gap{};
  bool per_ramp_gap = false;
  bool quota_includes_boundary_arrivals = false;
  ReleaseSchedule schedule;
  AlineaParams alinea{};
};

struct Probe {
  EdgeIndex segment = kNone;
  int cell = 0;
};

struct ExperimentConfig {
  Backend backend = Backend::slot;
  std::int64_t horizon = 10'000;
  int seeds = 8;
  std::uint64_t base_seed = 1;
  InitialCondition initial{};
  std::vector<Probe> probes;
  bool strict_conflicts = false;
  int substeps = 20;            // kinematic dt = tau / substeps
  XfNorm xf_norm = XfNorm::euclidean;
  double merge_zone_m = 100.0;  // prediction zone upstream of joining nodes
  double lookahead_m = 250.0;   // leader search distance
};

/// A fully parsed and validated experiment description.
struct Scenario {
  std::string name;
  SimConstants constants;
  Network network;
  DemandSpec demand;
  PolicyConfig policy;
  ExperimentConfig experiment;
  std::vector<double> lambda_direction;  // demand ray used by scalar sweeps
  std::string config_hash;  // FNV-1a of the canonical JSON dump, hex
};

/// Malformed JSON text (exit code 2 in the CLI).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadResult {
  std::optional<Scenario> scenario;
  ValidationReport report;  // empty iff scenario is set
};

/// Parses JSON text and runs every validator (network, demand, schedule,
/// conflict-freeness for DRRA unless `check_conflicts` is off). Throws
/// ParseError for malformed JSON or an unreadable file.
LoadResult load_scenario_text(const std::string& text, bool check_conflicts = true);
LoadResult load_scenario_file(const std::filesystem::path& path, bool check_conflicts = true);

/// Policy-level checks run after parsing: conflict-freeness of the DRRA
/// schedule, and backend support for the selected policy.
ValidationReport check_policy(const Scenario& scenario, bool check_conflicts = true);

/// Copy with another policy kind. Throws ValidationError if it does not fit.
Scenario with_policy(const Scenario& scenario, PolicyKind kind);

/// Like load_scenario_file but throws ValidationError carrying the first issue.
Scenario load_scenario_or_throw(const std::filesystem::path& path);

/// Copy of `scenario` with every ramp's arrival rate set to lambda * direction_i.
Scenario with_uniform_lambda(const Scenario& scenario, double lambda);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace rampmeter
