#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "paths.hpp"
#include "support.hpp"

#include "rampmeter/errors.hpp"
#include "rampmeter/report.hpp"
#include "rampmeter/scenario.hpp"
#include "rampmeter/slot_sim.hpp"

#ifndef RAMPSIM_BINARY
#define RAMPSIM_BINARY "rampsim"
#endif

using namespace rampmeter;
using testing::scenario_path;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rampsim-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int rampsim(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = std::string(RAMPSIM_BINARY) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_elements(const boost::property_tree::ptree& node, const std::string& tag) {
  std::size_t n = 0;
  for (const auto& [name, child] : node) {
    if (name == tag) ++n;
    n += count_elements(child, tag);
  }
  return n;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(std::nan("")) == "nan");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng);
    CHECK(std::stod(format_number(x)) == x);
  }
}

TEST_CASE("svg plots are well-formed") {
  PlotSpec spec{"queues", "step", "vehicles", {{"a", {0, 1, 2}, {0, 3, 1}}, {"b & c", {0, 2}, {1, 1}}}};
  const auto svg = svg_line_plot(spec);
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  REQUIRE_NOTHROW(boost::property_tree::read_xml(in, tree));
  CHECK(tree.count("svg") == 1);
  CHECK(count_elements(tree, "polyline") == 2);

  PlotSpec empty{"nothing", "x", "y", {}};
  std::istringstream in2(svg_line_plot(empty));
  REQUIRE_NOTHROW(boost::property_tree::read_xml(in2, tree));
}

TEST_CASE("csv round trip and plots from csv") {
  const auto s = load_scenario_or_throw(scenario_path("fig3a"));
  const auto run = run_slot(s, 500, 2);
  std::stringstream out;
  write_queue_csv(out, s.network, run);
  const auto table = read_csv(out);
  REQUIRE(table.header == std::vector<std::string>{"step", "ramp_id", "queue_len"});
  REQUIRE(table.rows.size() == 500 * 3);
  const int q = table.column("queue_len");
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto step = static_cast<std::int64_t>(k / 3 + 1);
    const auto ramp = static_cast<RampIndex>(k % 3);
    CHECK(table.rows[k][1] == s.network.ramp(ramp).id);
    CHECK(std::stoi(table.rows[k][static_cast<std::size_t>(q)]) == run.queue_at(step, ramp));
  }
  CHECK(table.column("missing") == -1);
  const auto plot = plot_from_csv(table, PlotKind::queue);
  CHECK(plot.series.size() == 3);

  std::stringstream veh;
  write_vehicle_csv(veh, s.network, run);
  const auto vt = read_csv(veh);
  CHECK(vt.rows.size() == run.vehicles.size());

  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(ragged), ValidationError);
}

TEST_CASE("json summaries") {
  CHECK(rational_json(Rational(5, 9)) == nlohmann::json{{"num", 5}, {"den", 9}});
  const auto s = load_scenario_or_throw(scenario_path("fig1"));
  const auto j = ufamily_json(s.network, enumerate_U(s.network, *s.network.find_ramp("on4")));
  CHECK(j.dump().find("\"on2\"") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("codes");
  CHECK(rampsim("validate " + scenario_path("fig1")) == 0);
  CHECK(rampsim("--version") == 0);
  CHECK(rampsim("bogus") == 2);
  CHECK(rampsim("run") == 2);

  const auto text = slurp(scenario_path("fig1"));
  std::ofstream(dir / "cut.json") << text.substr(0, text.size() / 2);
  CHECK(rampsim("validate " + (dir / "cut.json").string()) == 2);
  CHECK(rampsim("validate " + (dir / "missing.json").string()) == 2);

  auto j = nlohmann::json::parse(text);
  j["demand"]["routing"]["on2"] = {{j["demand"]["routing"]["on2"].begin().key(), 0.9}};
  std::ofstream(dir / "rows.json") << j.dump();
  const auto log = dir / "rows.log";
  CHECK(rampsim("validate " + (dir / "rows.json").string(), log) == 1);
  CHECK(slurp(log).find("on2") != std::string::npos);

  CHECK(rampsim("ufamily " + scenario_path("fig3b") + " 1") == 1);
  CHECK(rampsim("boundary " + scenario_path("fig3a") + " --lo 0.3 --hi 0 --horizon 100 --out " + dir.string()) == 1);
  CHECK(rampsim("schedule check " + scenario_path("fig3a")) == 0);
  CHECK(rampsim("schedule check " + scenario_path("fig3a") + " --strict") == 1);
}

TEST_CASE("cli run output is deterministic") {
  const auto a = scratch("run-a"), b = scratch("run-b");
  const std::string args = "run " + scenario_path("fig3a") + " --horizon 2000 --seed 5 --out ";
  REQUIRE(rampsim(args + a.string()) == 0);
  REQUIRE(rampsim(args + b.string()) == 0);
  for (const auto* f : {"queues.csv", "vehicles.csv", "probes.csv", "queues.svg", "manifest.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest.contains("config_hash"));

  const auto z = scratch("run-zero");
  REQUIRE(rampsim("run " + scenario_path("fig3a") + " --horizon 300 --lambda 0 --no-plot --out " + z.string()) == 0);
  std::ifstream in(z / "queues.csv");
  const auto t = read_csv(in);
  CHECK(t.rows.size() == 900);
  for (const auto& row : t.rows) CHECK(row[2] == "0");
  CHECK_FALSE(fs::exists(z / "queues.svg"));
}

TEST_CASE("cli analysis commands write their artefacts") {
  const auto dir = scratch("analysis");
  REQUIRE(rampsim("bounds " + scenario_path("fig3a") + " --out " + dir.string()) == 0);
  const auto bounds = nlohmann::json::parse(slurp(dir / "bounds.json"));
  CHECK(bounds.dump().find("\"den\":9") != std::string::npos);

  REQUIRE(rampsim("ufamily " + scenario_path("fig1") + " on4 --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "ufamily.json"));

  REQUIRE(rampsim("plot " + (dir / "missing.csv").string()) != 0);
  std::ofstream(dir / "series.csv") << "x,y\n0,1\n1,3\n2,2\n";
  REQUIRE(rampsim("plot " + (dir / "series.csv").string() + " --out " + (dir / "series.svg").string()) == 0);
  std::ifstream svg(dir / "series.svg");
  boost::property_tree::ptree tree;
  CHECK_NOTHROW(boost::property_tree::read_xml(svg, tree));

  const auto env_dir = scratch("env");
  const std::string cmd = "RAMPSIM_OUT='" + env_dir.string() + "' " + RAMPSIM_BINARY + " run " + scenario_path("fig3a") +
                          " --horizon 100 --no-plot > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(env_dir / "queues.csv"));
}
