#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rampmeter/network.hpp"
#include "rampmeter/rational.hpp"

namespace rampmeter {

/// Arrival probabilities per ramp and the routing matrix R[ramp][route].
struct DemandSpec {
  std::vector<double> lambda;
  std::vector<std::vector<double>> routing;
};

/// Row sums, ranges and route/ramp compatibility. `where` prefixes come
/// from the scenario's JSON pointer for the demand block.
ValidationReport validate_demand(const Network& network, const DemandSpec& demand,
                                 const std::string& pointer = "/demand");

enum class StreamPurpose : std::uint64_t { arrival = 1, route = 2, init = 3 };

/// Counter-based random stream (SplitMix64 over key + counter).
///
/// A stream is a value: copying it forks an identical sequence. Streams for
/// different (ramp, purpose) pairs are derived from the base seed through a
/// stable hash, so adding a ramp never perturbs another ramp's draws.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream derive(std::uint64_t base_seed, std::uint64_t ramp, StreamPurpose purpose);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// 1 with probability lambda_i. Throws ValidationError if lambda is outside [0, 1].
int sample_arrival(RngStream& stream, double lambda_i);

/// Draws a route index with probability row[p]. Throws ValidationError if the
/// row is not a probability vector.
RouteIndex sample_route(RngStream& stream, std::span<const double> row);

/// Induced load on every non-source/sink node.
struct LoadReport {
  std::vector<double> rho;  // indexed by node; 0 for sources and sinks
  double rho_max = 0.0;
  NodeIndex argmax = kNone;
};

LoadReport induced_load(const Network& network, std::span<const double> lambda,
                        const std::vector<std::vector<double>>& routing);

/// Exact per-node load coefficients c_n for equal arrival rates, so that
/// rho_n(lambda) = c_n * lambda. Routing probabilities are converted to
/// rationals first.
std::vector<Rational> load_coefficients(const Network& network, const std::vector<std::vector<double>>& routing);

}  // namespace rampmeter
