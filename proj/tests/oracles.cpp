#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "support.hpp"

#include "rampmeter/schedule.hpp"
#include "rampmeter/slot_sim.hpp"

namespace testing {

using namespace rampmeter;

// Step semantics written out directly from the model description: quota
// freeze at cycle start, advance, Bernoulli arrival, release into the free
// tail cell when quota remains.
PairLaw chain_pair_law(double lambda, int cycle, int qmax) {
  std::map<ChainState, std::vector<std::pair<ChainState, double>>> next;
  std::vector<ChainState> frontier{{0, 0, 0, 0}};
  std::map<ChainState, int> seen{{frontier.front(), 0}};
  while (!frontier.empty()) {
    const auto x = frontier.back();
    frontier.pop_back();
    const auto [q, rem, phase, cells] = x;
    for (int a = 0; a <= 1; ++a) {
      const double p = a ? lambda : 1.0 - lambda;
      if (p == 0.0) continue;
      int quota_left = phase == 0 ? q : rem;
      int c = (cells << 1) & 0b111;  // cell k -> k+1, head exits
      int queue = std::min(q + a, qmax);
      if (queue > 0 && quota_left > 0) {
        --queue;
        --quota_left;
        c |= 1;
      }
      const ChainState y{queue, quota_left, (phase + 1) % cycle, c};
      next[x].push_back({y, p});
      if (seen.emplace(y, 0).second) frontier.push_back(y);
    }
  }
  std::map<ChainState, double> pi;
  for (const auto& [x, _] : seen) pi[x] = 1.0 / static_cast<double>(seen.size());
  for (int it = 0; it < 5000; ++it) {
    std::map<ChainState, double> nxt;
    for (const auto& [x, px] : pi) {
      for (const auto& [y, p] : next[x]) nxt[y] += px * p;
    }
    pi = std::move(nxt);
  }
  PairLaw law;
  for (const auto& [x, px] : pi) {
    for (const auto& [y, p] : next[x]) law[{x, y}] += px * p;
  }
  return law;
}

double chain_tv(double lambda, int cycle, std::int64_t steps, std::uint64_t seed) {
  const auto s = load_json(line_json(3, lambda, cycle));
  const auto seg = *s.network.find_edge("seg");
  SlotSimulator sim(s, seed, RunOptions{false, false, 0, 0});
  auto observe = [&] {
    const auto& cells = sim.cells(seg);
    int bits = 0;
    for (int k = 0; k < 3; ++k) bits |= (cells[static_cast<std::size_t>(k)] != -1 ? 1 : 0) << k;
    const auto& st = sim.drra_state();
    return ChainState{static_cast<int>(sim.queue(0).size()), static_cast<int>(st.quota[0] - st.released[0]),
                      static_cast<int>(sim.clock() % cycle), bits};
  };
  PairLaw freq;
  auto prev = observe();
  for (std::int64_t k = 0; k < steps; ++k) {
    sim.step();
    const auto cur = observe();
    freq[{prev, cur}] += 1.0 / static_cast<double>(steps);
    prev = cur;
  }
  const auto law = chain_pair_law(lambda, cycle);
  double tv = 0.0;
  for (const auto& [k, p] : law) {
    auto it = freq.find(k);
    tv += std::abs(p - (it == freq.end() ? 0.0 : it->second));
  }
  for (const auto& [k, f] : freq) {
    if (!law.count(k)) tv += f;
  }
  return 0.5 * tv;
}

std::vector<std::set<Counts>> expand_levels(const Network& net, RampIndex ramp) {
  const auto n = static_cast<std::size_t>(net.ramp_count());
  std::vector<std::set<Counts>> levels;
  Counts self(n, 0);
  self[static_cast<std::size_t>(ramp)] = 1;
  levels.push_back({self});
  Counts first(n, 0);
  for (auto p : net.predecessors(ramp)) ++first[static_cast<std::size_t>(p)];
  levels.push_back({first});
  while (true) {
    std::set<Counts> next;
    for (const auto& base : levels.back()) {
      Counts replace(n, 0);
      while (true) {
        Counts c(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
          c[j] += base[j] - replace[j];
          for (auto p : net.predecessors(static_cast<RampIndex>(j))) c[static_cast<std::size_t>(p)] += replace[j];
        }
        if (std::any_of(c.begin(), c.end(), [](int x) { return x > 0; })) next.insert(c);
        std::size_t j = 0;
        while (j < n && replace[j] == base[j]) replace[j++] = 0;
        if (j == n) break;
        ++replace[j];
      }
    }
    for (const auto& prev : levels.back()) next.erase(prev);
    if (next.empty()) break;
    levels.push_back(std::move(next));
  }
  return levels;
}

Counts to_counts(const Multiset& m, std::size_t n) {
  Counts c(n, 0);
  for (auto r : m) ++c[static_cast<std::size_t>(r)];
  return c;
}

UOracleReport check_u_families(std::uint64_t seed, int networks, int max_ramps) {
  std::mt19937_64 rng(seed);
  UOracleReport report;
  for (int k = 0; k < networks; ++k) {
    const auto s = load_json(random_scenario_json(rng, {1, max_ramps, 3, 3, true}), false);
    const auto& net = s.network;
    const auto n = static_cast<std::size_t>(net.ramp_count());
    for (RampIndex i = 0; i < net.ramp_count(); ++i) {
      const auto u = enumerate_U(net, i);
      const auto oracle = expand_levels(net, i);
      bool same = u.levels.size() == oracle.size();
      for (std::size_t lv = 0; same && lv < oracle.size(); ++lv) {
        std::set<Counts> got;
        for (const auto& m : u.levels[lv]) got.insert(to_counts(m, n));
        same = got.size() == u.levels[lv].size() && got == oracle[lv];
      }
      ++report.ramps_checked;
      if (oracle.size() > 3) ++report.deep;
      if (!same) ++report.mismatches;
    }
  }
  return report;
}

ScheduleOracleReport check_schedule_verifier(std::uint64_t seed, int networks) {
  std::mt19937_64 rng(seed);
  ScheduleOracleReport report;
  for (int k = 0; k < networks; ++k) {
    const auto s = load_json(random_scenario_json(rng), false);
    for (auto mode : {ConflictMode::standard, ConflictMode::strict}) {
      const bool fast = verify_conflict_free(s.network, s.policy.schedule, mode).has_value();
      const bool slow = ghost_conflict(s.network, s.policy.schedule, mode);
      ++report.comparisons;
      if (fast) ++report.conflicts;
      if (fast != slow) ++report.disagreements;
    }
  }
  return report;
}

}  // namespace testing
