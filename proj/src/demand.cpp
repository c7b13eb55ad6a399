#include "rampmeter/demand.hpp"

#include <cmath>
#include <string>

#include "rampmeter/errors.hpp"

namespace rampmeter {

namespace {

constexpr double kRowTolerance = 1e-12;

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream RngStream::derive(std::uint64_t base_seed, std::uint64_t ramp, StreamPurpose purpose) {
  std::uint64_t key = splitmix(base_seed);
  key = splitmix(key ^ (ramp * 0xd6e8feb86659fd93ULL));
  key = splitmix(key ^ (static_cast<std::uint64_t>(purpose) * 0xa0761d6478bd642fULL));
  return RngStream(key);
}

std::uint64_t RngStream::next_u64() {
  return splitmix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

int sample_arrival(RngStream& stream, double lambda_i) {
  if (!(lambda_i >= 0.0 && lambda_i <= 1.0)) {
    throw ValidationError("arrival probability " + std::to_string(lambda_i) + " is outside [0, 1]");
  }
  return stream.uniform() < lambda_i ? 1 : 0;
}

RouteIndex sample_route(RngStream& stream, std::span<const double> row) {
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("routing probability outside [0, 1]");
    total += p;
  }
  if (std::fabs(total - 1.0) > kRowTolerance) {
    throw ValidationError("routing row sums to " + std::to_string(total) + ", expected 1");
  }
  const double u = stream.uniform();
  double cumulative = 0.0;
  RouteIndex last_positive = kNone;
  for (std::size_t p = 0; p < row.size(); ++p) {
    if (row[p] <= 0.0) continue;
    last_positive = static_cast<RouteIndex>(p);
    cumulative += row[p];
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

ValidationReport validate_demand(const Network& net, const DemandSpec& demand, const std::string& pointer) {
  ValidationReport report;
  const auto n_ramps = static_cast<std::size_t>(net.ramp_count());
  if (demand.lambda.size() != n_ramps) {
    report.add(pointer + "/lambda", "expected " + std::to_string(n_ramps) + " arrival rates");
  }
  for (std::size_t i = 0; i < demand.lambda.size(); ++i) {
    const double l = demand.lambda[i];
    if (!(l >= 0.0 && l <= 1.0)) {
      report.add(pointer + "/lambda/" + std::to_string(i), "arrival probability must lie in [0, 1]");
    }
  }
  if (demand.routing.size() != n_ramps) {
    report.add(pointer + "/routing", "expected one routing row per ramp");
    return report;
  }
  for (std::size_t i = 0; i < n_ramps; ++i) {
    const auto& row = demand.routing[i];
    const std::string where = pointer + "/routing/" + net.ramp(static_cast<int>(i)).id;
    if (row.size() != static_cast<std::size_t>(net.route_count())) {
      report.add(where, "row has wrong length");
      continue;
    }
    double total = 0.0;
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (!(row[p] >= 0.0 && row[p] <= 1.0)) {
        report.add(where + "/" + net.route(static_cast<int>(p)).id, "probability must lie in [0, 1]");
      }
      if (row[p] > 0.0 && net.route(static_cast<int>(p)).ramp != static_cast<int>(i)) {
        report.add(where + "/" + net.route(static_cast<int>(p)).id, "route does not start at this ramp");
      }
      total += row[p];
    }
    if (std::fabs(total - 1.0) > kRowTolerance) {
      report.add(where, "routing row sums to " + std::to_string(total) + ", expected 1");
    }
  }
  return report;
}

LoadReport induced_load(const Network& net, std::span<const double> lambda,
                        const std::vector<std::vector<double>>& routing) {
  LoadReport out;
  out.rho.assign(net.nodes().size(), 0.0);
  for (std::size_t j = 0; j < routing.size() && j < lambda.size(); ++j) {
    for (std::size_t p = 0; p < routing[j].size(); ++p) {
      const double w = lambda[j] * routing[j][p];
      if (w == 0.0) continue;
      for (const auto& visit : net.route(static_cast<int>(p)).visits) {
        out.rho[static_cast<std::size_t>(visit.node)] += w;
      }
    }
  }
  for (std::size_t n = 0; n < out.rho.size(); ++n) {
    if (out.argmax == kNone || out.rho[n] > out.rho_max) {
      out.rho_max = out.rho[n];
      out.argmax = static_cast<NodeIndex>(n);
    }
  }
  return out;
}

std::vector<Rational> load_coefficients(const Network& net, const std::vector<std::vector<double>>& routing) {
  std::vector<Rational> c(net.nodes().size(), Rational(0));
  for (const auto& row : routing) {
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (row[p] == 0.0) continue;
      const Rational w = to_rational(row[p]);
      for (const auto& visit : net.route(static_cast<int>(p)).visits) {
        c[static_cast<std::size_t>(visit.node)] += w;
      }
    }
  }
  return c;
}

}  // namespace rampmeter
