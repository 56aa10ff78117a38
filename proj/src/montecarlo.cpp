#include "boundtail/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "boundtail/errors.hpp"
#include "boundtail/parallel.hpp"
#include "boundtail/rng.hpp"

namespace boundtail {

namespace {

struct ChainResult {
  std::vector<long long> counts;
  double min_seen = std::numeric_limits<double>::infinity();
  double max_seen = -std::numeric_limits<double>::infinity();
  std::vector<double> samples;
};

}  // namespace

EmpiricalMeasure simulate(const RandomMap& map, const NoiseModel& noise, const SimulationPlan& plan,
                          const Grid& grid, bool keep_samples) {
  if (plan.burn_in < 0 || plan.n_samples < 1 || plan.n_chains < 1) {
    throw ConfigError("simulation plan needs burn_in >= 0, n_samples >= 1, n_chains >= 1");
  }
  const Interval& dom = map.domain();
  if (!dom.contains(plan.x0)) throw DomainError("initial state outside the map domain");

  std::vector<ChainResult> chains(static_cast<std::size_t>(plan.n_chains));
  parallel_for(chains.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      ChainResult& out = chains[c];
      out.counts.assign(grid.size(), 0);
      if (keep_samples) out.samples.reserve(static_cast<std::size_t>(plan.n_samples));
      CounterRng rng(plan.seed, c);
      double x = plan.x0;
      const long long steps = plan.burn_in + plan.n_samples;
      for (long long n = 0; n < steps; ++n) {
        x = map.raw(x, noise.sample(rng));
        if (!dom.contains(x)) {
          throw EscapeError("chain " + std::to_string(c) + " left the domain at step " + std::to_string(n + 1));
        }
        if (n < plan.burn_in) continue;
        out.min_seen = std::min(out.min_seen, x);
        out.max_seen = std::max(out.max_seen, x);
        if (x >= grid.lo() && x <= grid.hi()) ++out.counts[grid.locate(x)];
        if (keep_samples) out.samples.push_back(x);
      }
    }
  });

  EmpiricalMeasure m{grid, std::vector<long long>(grid.size(), 0), 0,
                     std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), {}};
  for (const auto& chain : chains) {
    for (std::size_t j = 0; j < grid.size(); ++j) m.counts[j] += chain.counts[j];
    m.min_seen = std::min(m.min_seen, chain.min_seen);
    m.max_seen = std::max(m.max_seen, chain.max_seen);
    m.sorted_samples.insert(m.sorted_samples.end(), chain.samples.begin(), chain.samples.end());
  }
  for (long long c : m.counts) m.total += c;
  std::sort(m.sorted_samples.begin(), m.sorted_samples.end());
  return m;
}

double empirical_tail(const EmpiricalMeasure& measure, double x) {
  if (measure.total == 0) return 0.0;
  if (x <= measure.min_seen) return 1.0;
  if (x > measure.max_seen) return 0.0;
  if (!measure.sorted_samples.empty()) {
    const auto it = std::lower_bound(measure.sorted_samples.begin(), measure.sorted_samples.end(), x);
    const auto above = static_cast<double>(measure.sorted_samples.end() - it);
    return above / static_cast<double>(measure.sorted_samples.size());
  }
  // Histogram only: whole cells above x plus a linear share of the cell containing it.
  const Grid& g = measure.grid;
  const std::size_t j = g.locate(std::clamp(x, g.lo(), g.hi()));
  double above = 0.0;
  for (std::size_t i = j + 1; i < g.size(); ++i) above += static_cast<double>(measure.counts[i]);
  above += static_cast<double>(measure.counts[j]) * (g.edges()[j + 1] - x) / g.width(j);
  return above / static_cast<double>(measure.total);
}

double l1_distance(const EmpiricalMeasure& measure, const StationaryDensity& density) {
  const Grid& a = measure.grid;
  const Grid& b = density.grid;
  const double tol = 1e-12 * std::max({1.0, std::abs(a.lo()), std::abs(a.hi())});
  if (std::abs(a.lo() - b.lo()) > tol || std::abs(a.hi() - b.hi()) > tol) {
    throw GridMismatchError("histogram and density grids span different intervals");
  }
  if (measure.total == 0) throw ConfigError("empty histogram");

  // Density mass per histogram cell, integrating phi over the common refinement.
  std::vector<double> mass(a.size(), 0.0);
  const auto& ea = a.edges();
  const auto& eb = b.edges();
  std::size_t i = 0;
  std::size_t j = 0;
  double x = ea.front();
  while (i < a.size() && j < b.size()) {
    const double next = std::min(ea[i + 1], eb[j + 1]);
    if (next > x) mass[i] += density.phi[j] * (next - x);
    x = next;
    if (ea[i + 1] <= x) ++i;
    if (eb[j + 1] <= x) ++j;
  }

  double total = 0.0;
  const auto n = static_cast<double>(measure.total);
  for (std::size_t k = 0; k < a.size(); ++k) {
    total += std::abs(static_cast<double>(measure.counts[k]) / n - mass[k]);
  }
  return total;
}

}  // namespace boundtail
