#pragma once

#include <cstdint>
#include <vector>

#include "boundtail/map_model.hpp"
#include "boundtail/noise.hpp"
#include "boundtail/ulam.hpp"

namespace boundtail {

struct SimulationPlan {
  double x0 = 0.0;
  long long burn_in = 1000;
  /// Samples recorded per chain.
  long long n_samples = 1'000'000;
  int n_chains = 1;
  std::uint64_t seed = 0;
};

/// Histogram of visited states over a grid.
struct EmpiricalMeasure {
  Grid grid;
  std::vector<long long> counts;
  long long total = 0;
  double min_seen = 0.0;
  double max_seen = 0.0;
  /// Every recorded state, sorted ascending; kept for exact tail fractions.
  std::vector<double> sorted_samples;
};

/// Runs n_chains independent chains x_{n+1} = h(x_n, w_n); chain c draws from
/// stream c. Throws EscapeError if an iterate leaves X.
EmpiricalMeasure simulate(const RandomMap& map, const NoiseModel& noise, const SimulationPlan& plan,
                          const Grid& grid, bool keep_samples = false);

/// Fraction of recorded states >= x.
double empirical_tail(const EmpiricalMeasure& measure, double x);

/// sum_j |count_j / total - phi_j width_j| on the common grid.
double l1_distance(const EmpiricalMeasure& measure, const StationaryDensity& density);

}  // namespace boundtail
