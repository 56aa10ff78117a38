#include "boundtail/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "boundtail/errors.hpp"
#include "boundtail/parallel.hpp"

namespace boundtail {

namespace {

constexpr double kInvariantSlack = 1e-10;
constexpr int kInvariantGrid = 1000;

double omega_of(Extremal which) { return which == Extremal::upper ? 1.0 : -1.0; }

double scale(double x) { return std::max(1.0, std::abs(x)); }

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Root of g in [lo, hi] given a strict sign change.
double bisect(const auto& g, double lo, double hi) {
  double glo = g(lo);
  for (int it = 0; it < 200; ++it) {
    if (hi - lo <= 1e-13 * scale(lo)) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    if ((gm > 0.0) == (glo > 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Minimiser of f on [lo, hi] by golden section.
double golden_min(const auto& f, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-15 * scale(a); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

Stability classify_multiplier(double m, double neutral) {
  if (m < 1.0 - neutral) return Stability::attracting;
  if (m > 1.0 + neutral) return Stability::repelling;
  return Stability::neutral;
}

bool is_invariant(const RandomMap& map, double lo, double hi) {
  for (int i = 0; i < kInvariantGrid; ++i) {
    const double x = lo + (hi - lo) * i / (kInvariantGrid - 1);
    if (map.raw(x, 1.0) > hi + kInvariantSlack * scale(hi)) return false;
    if (map.raw(x, -1.0) < lo - kInvariantSlack * scale(lo)) return false;
  }
  return true;
}

// No invariant proper subinterval: h+ pushes every point of [lo, hi) up and h-
// pushes every point of (lo, hi] down.
bool is_minimal(const RandomMap& map, double lo, double hi, const std::vector<FixedPoint>& uppers,
                const std::vector<FixedPoint>& lowers) {
  for (const auto& fp : uppers) {
    if (fp.x_star >= lo && fp.x_star < hi - 1e-9 * scale(hi)) return false;
  }
  for (const auto& fp : lowers) {
    if (fp.x_star > lo + 1e-9 * scale(lo) && fp.x_star <= hi) return false;
  }
  for (int i = 1; i + 1 < kInvariantGrid; ++i) {
    const double x = lo + (hi - lo) * i / (kInvariantGrid - 1);
    if (!(map.raw(x, 1.0) > x) || !(map.raw(x, -1.0) < x)) return false;
  }
  return true;
}

}  // namespace

std::string to_string(Stability s) {
  switch (s) {
    case Stability::attracting:
      return "attracting";
    case Stability::repelling:
      return "repelling";
    case Stability::neutral:
      return "neutral";
  }
  return "?";
}

std::vector<FixedPoint> find_fixed_points(const RandomMap& map, Extremal which, Interval search,
                                          const BoundaryTolerances& tol) {
  const Interval& dom = map.domain();
  if (!(search.lo < search.hi) || search.lo < dom.lo || search.hi > dom.hi) {
    throw DomainError("fixed-point search interval must be a nondegenerate subinterval of X");
  }
  const double w = omega_of(which);
  const auto g = [&](double x) { return map.raw(x, w) - x; };

  const int n = std::max(3, tol.scan_points);
  std::vector<double> xs(static_cast<std::size_t>(n));
  std::vector<double> gs(xs.size());
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = search.lo + search.length() * i / (n - 1);
    gs[static_cast<std::size_t>(i)] = g(xs[static_cast<std::size_t>(i)]);
  }

  std::vector<double> roots;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (gs[i] == 0.0) {
      roots.push_back(xs[i]);
      continue;
    }
    if (i + 1 < xs.size() && gs[i + 1] != 0.0 && (gs[i] > 0.0) != (gs[i + 1] > 0.0)) {
      roots.push_back(bisect(g, xs[i], xs[i + 1]));
    }
  }
  // Tangencies: interior minima of |g| without a sign change around them.
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    const double a = std::abs(gs[i - 1]);
    const double b = std::abs(gs[i]);
    const double c = std::abs(gs[i + 1]);
    if (!(b <= a && b <= c)) continue;
    if (sign_of(gs[i - 1]) != sign_of(gs[i]) || sign_of(gs[i]) != sign_of(gs[i + 1])) continue;
    const double x = golden_min([&](double t) { return std::abs(g(t)); }, xs[i - 1], xs[i + 1]);
    if (std::abs(g(x)) < tol.tangency) roots.push_back(x);
  }

  std::sort(roots.begin(), roots.end());
  std::vector<double> merged;
  for (double r : roots) {
    if (!merged.empty() && r - merged.back() <= 1e-7 * scale(r)) {
      merged.back() = 0.5 * (merged.back() + r);
    } else {
      merged.push_back(r);
    }
  }
  if (merged.empty()) throw NoFixedPointError("no fixed point of the extremal map in the search interval");

  std::vector<FixedPoint> out;
  out.reserve(merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double x = merged[i];
    double delta = 1e-4 * scale(x);
    if (i > 0) delta = std::min(delta, 0.5 * (x - merged[i - 1]));
    const double m = map.dx_raw(x, w);
    out.push_back({x, which, m, classify_multiplier(m, tol.neutral), sign_of(g(x - delta))});
  }
  return out;
}

std::vector<MinimalInvariantInterval> minimal_invariant_intervals(const RandomMap& map,
                                                                  const BoundaryTolerances& tol) {
  auto collect = [&](Extremal which) {
    try {
      return find_fixed_points(map, which, map.domain(), tol);
    } catch (const NoFixedPointError&) {
      return std::vector<FixedPoint>{};
    }
  };
  const auto uppers = collect(Extremal::upper);
  const auto lowers = collect(Extremal::lower);
  const auto w_lower = [&](double x) { return map.raw(x, -1.0) - x; };

  // Lower boundary candidates attract from the right: h-(x) < x just above them.
  std::vector<double> lower_candidates;
  for (std::size_t i = 0; i < lowers.size(); ++i) {
    const double x = lowers[i].x_star;
    double delta = 1e-4 * scale(x);
    if (i + 1 < lowers.size()) delta = std::min(delta, 0.5 * (lowers[i + 1].x_star - x));
    if (w_lower(x + delta) < 0.0) lower_candidates.push_back(x);
  }

  std::vector<MinimalInvariantInterval> out;
  double previous_hi = -std::numeric_limits<double>::infinity();
  for (const auto& up : uppers) {
    if (up.left_sign <= 0) continue;
    std::vector<double> options;
    for (double lo : lower_candidates) {
      if (lo > previous_hi && lo < up.x_star) options.push_back(lo);
    }
    if (options.empty()) continue;
    const double lo = options.back();
    const double hi = up.x_star;
    const bool verified = is_invariant(map, lo, hi) && is_minimal(map, lo, hi, uppers, lowers);
    out.push_back({lo, hi, verified, options.size() > 1});
    previous_hi = hi;
  }
  return out;
}

BoundaryClassification classify_boundary(const RandomMap& map, double x_plus,
                                         const BoundaryTolerances& tol) {
  const double residual = map.raw(x_plus, 1.0) - x_plus;
  if (!(std::abs(residual) <= 1e-9 * scale(x_plus))) {
    throw NotFixedPointError("x+ is not a fixed point of h+ (residual " + std::to_string(residual) + ")");
  }
  const double lambda = map.upper_derivative(1, x_plus);
  const double gamma = map.domega_raw(x_plus, 1.0);
  if (lambda <= 1.0 - tol.neutral) {
    if (!(lambda > 0.0)) throw DegenerateError("boundary multiplier must be positive");
    return {Hyperbolic{lambda}, gamma};
  }
  if (lambda >= 1.0 + tol.neutral) {
    throw DegenerateError("x+ is repelling for h+ and cannot bound a stationary support");
  }
  double factorial = 1.0;
  for (int r = 2; r <= 6; ++r) {
    factorial *= r;
    const double d = map.upper_derivative(r, x_plus);
    if (std::abs(d) > tol.derivative) {
      // h+(x) = x + alpha (x+ - x)^r: the r-th derivative is (-1)^r r! alpha.
      const double alpha = ((r % 2 == 0) ? d : -d) / factorial;
      if (!(alpha > 0.0)) {
        throw DegenerateError("leading nonlinear term pushes orbits away from x+ from the left");
      }
      return {Nonhyperbolic{r, alpha}, gamma};
    }
  }
  throw DegenerateError("no derivative of order r <= 6 separates h+ from the identity at x+");
}

double sigma_star_closed_form(double b) {
  if (!(b > 2.0)) throw DomainError("the bifurcation exists only for b > 2");
  const double s = std::sqrt((b - 1.0) * (b - 1.0) - 1.0);
  return b * ((b - 2.0 + s) / (b + s)) - std::log(b - 1.0 + s);
}

BifurcationPoint bifurcation_parameter(double b) {
  if (!(b > 2.0)) throw DomainError("the bifurcation exists only for b > 2, got b = " + std::to_string(b));
  // T'(x) = (b/2) sech^2(x/2) increases from 0 to b/2 > 1 on x < 0.
  const auto slope_gap = [b](double x) {
    const double c = std::cosh(0.5 * x);
    return 0.5 * b / (c * c) - 1.0;
  };
  double lo = -1.0;
  while (slope_gap(lo) >= 0.0) lo *= 2.0;
  double hi = 0.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (slope_gap(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double x = std::abs(slope_gap(lo)) < std::abs(slope_gap(hi)) ? lo : hi;
  return {x - b * std::tanh(0.5 * x), x};
}

Interval tanh_affine_domain(double b, double sigma) {
  const double reach = std::abs(b) + std::abs(sigma) + 1.0;
  return {-reach, reach};
}

std::vector<BifurcationRow> bifurcation_scan(double b, const std::vector<double>& sigma_grid,
                                             const BoundaryTolerances& tol) {
  if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end())) {
    throw ConfigError("sigma grid must be ascending");
  }
  std::vector<BifurcationRow> rows(sigma_grid.size());
  parallel_for(sigma_grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double sigma = sigma_grid[i];
      const RandomMap map(TanhAffine{b, sigma}, tanh_affine_domain(b, sigma));
      rows[i] = {sigma, minimal_invariant_intervals(map, tol)};
    }
  });
  return rows;
}

std::vector<BifurcationRow> bifurcation_scan_affine(double lambda, const std::vector<double>& sigma_grid,
                                                    const BoundaryTolerances& tol) {
  if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end())) {
    throw ConfigError("sigma grid must be ascending");
  }
  std::vector<BifurcationRow> rows(sigma_grid.size());
  parallel_for(sigma_grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double sigma = sigma_grid[i];
      const double reach = sigma / (1.0 - lambda) + 1.0;
      const RandomMap map(Affine{lambda, sigma}, {-reach, reach});
      rows[i] = {sigma, minimal_invariant_intervals(map, tol)};
    }
  });
  return rows;
}

}  // namespace boundtail
