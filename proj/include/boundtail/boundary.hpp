#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "boundtail/map_model.hpp"

namespace boundtail {

enum class Stability { attracting, repelling, neutral };

struct BoundaryTolerances {
  /// |lambda - 1| below this counts as a neutral (nonhyperbolic) fixed point.
  double neutral = 1e-6;
  /// Tangency acceptance on |h(x) - x| for fold points invisible to sign scans.
  double tangency = 1e-10;
  /// Smallest |h+^(r)(x+)| accepted as the leading nonlinear term.
  double derivative = 1e-7;
  int scan_points = 2000;
};

struct FixedPoint {
  double x_star;
  Extremal which;
  double multiplier;
  Stability stability;
  /// Sign of h(x) - x just below x_star: +1 if orbits from the left move up into it.
  int left_sign;
};

struct MinimalInvariantInterval {
  double lo;
  double hi;
  bool verified;
  /// More than one lower fixed point could close this interval; the greedy pairing chose one.
  bool ambiguous = false;

  Interval as_interval() const noexcept { return {lo, hi}; }
};

struct Hyperbolic {
  double lambda;
};

struct Nonhyperbolic {
  int r;
  double alpha;
};

struct BoundaryClassification {
  std::variant<Hyperbolic, Nonhyperbolic> kind;
  /// d_w h(x+, 1); reported only.
  double gamma;

  bool hyperbolic() const noexcept { return std::holds_alternative<Hyperbolic>(kind); }
};

/// All fixed points of h+ or h- in the search interval, ascending.
std::vector<FixedPoint> find_fixed_points(const RandomMap& map, Extremal which, Interval search,
                                          const BoundaryTolerances& tol = {});

/// Supports of stationary densities: minimal F-invariant intervals, ascending and disjoint.
std::vector<MinimalInvariantInterval> minimal_invariant_intervals(const RandomMap& map,
                                                                  const BoundaryTolerances& tol = {});

/// Hyperbolic(lambda) or Nonhyperbolic(r, alpha) with h+(x) = x + alpha (x+ - x)^r + ...
BoundaryClassification classify_boundary(const RandomMap& map, double x_plus,
                                         const BoundaryTolerances& tol = {});

struct BifurcationPoint {
  double sigma_star;
  double x_plus;
};

/// Noise amplitude at which T(x) + sigma becomes tangent to the identity on x < 0,
/// for T(x) = b tanh(x/2). Requires b > 2.
BifurcationPoint bifurcation_parameter(double b);

/// Closed form b (b-2+s)/(b+s) - ln(b-1+s), s = sqrt((b-1)^2 - 1).
double sigma_star_closed_form(double b);

/// Default domain for TanhAffine maps: contains every minimal invariant interval.
Interval tanh_affine_domain(double b, double sigma);

struct BifurcationRow {
  double sigma;
  std::vector<MinimalInvariantInterval> intervals;
};

/// Minimal invariant intervals of TanhAffine(b, sigma) along an ascending sigma grid.
std::vector<BifurcationRow> bifurcation_scan(double b, const std::vector<double>& sigma_grid,
                                             const BoundaryTolerances& tol = {});

/// Same, for an Affine(lambda, sigma) family.
std::vector<BifurcationRow> bifurcation_scan_affine(double lambda, const std::vector<double>& sigma_grid,
                                                    const BoundaryTolerances& tol = {});

std::string to_string(Stability s);

}  // namespace boundtail
