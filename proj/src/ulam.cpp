#include "boundtail/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "boundtail/errors.hpp"
#include "boundtail/parallel.hpp"

namespace boundtail {

// ---------------------------------------------------------------------------
// Quadrature

GaussLegendre gauss_legendre(int points) {
  if (points < 1 || points > 64) throw ConfigError("Gauss-Legendre order must be in [1, 64]");
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(points));
  rule.weights.resize(static_cast<std::size_t>(points));
  const int n = points;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    if (n == 1) dp = 1.0;
    const double w = (n == 1) ? 2.0 : 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -z;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n == 1) rule.nodes[0] = 0.0;
  return rule;
}

// ---------------------------------------------------------------------------
// Grid

namespace {

// Distances from the anchor of the n+1 edges of a geometrically graded side of
// length L: D_k = L rho^k (1 - rho^(n-k)) / (1 - rho^n), D_0 = L, D_n = 0.
std::vector<double> graded_distances(double length, std::size_t n, double rho) {
  const double lr = std::log(rho);
  const double denom = -std::expm1(static_cast<double>(n) * lr);
  std::vector<double> d(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    d[k] = length * std::exp(static_cast<double>(k) * lr) *
           (-std::expm1(static_cast<double>(n - k) * lr)) / denom;
  }
  d.front() = length;
  d.back() = 0.0;
  return d;
}

double smallest_width(double length, std::size_t n, double rho) {
  const auto d = graded_distances(length, n, rho);
  return d[n - 1];
}

// Ratio in [requested, 1) whose smallest cell is at least `floor`.
double relaxed_ratio(double length, std::size_t n, double requested, double floor) {
  if (n == 1) return requested;
  if (smallest_width(length, n, requested) >= floor) return requested;
  if (length / static_cast<double>(n) <= floor) {
    throw ConfigError("grid too fine: cells would be narrower than the minimum width");
  }
  double lo = requested;
  double hi = 1.0 - 1e-15;
  if (smallest_width(length, n, hi) < floor) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (smallest_width(length, n, mid) < floor) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace

Grid::Grid(std::vector<double> edges, GridSpec spec, double effective_ratio)
    : edges_(std::move(edges)), spec_(spec), effective_ratio_(effective_ratio) {
  if (edges_.size() < 2) throw ConfigError("grid needs at least one cell");
  for (std::size_t j = 0; j + 1 < edges_.size(); ++j) {
    if (!(edges_[j + 1] > edges_[j])) throw ConfigError("grid edges must be strictly increasing");
  }
}

std::size_t Grid::locate(double x) const {
  if (!(x >= lo() && x <= hi())) throw DomainError("point outside the grid span");
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  const auto j = static_cast<std::size_t>(it - edges_.begin());
  return std::min(j == 0 ? 0 : j - 1, size() - 1);
}

Grid build_grid(Interval interval, std::size_t cells, const GridSpec& spec) {
  if (!(interval.lo < interval.hi) || !std::isfinite(interval.lo) || !std::isfinite(interval.hi)) {
    throw ConfigError("grid interval must be finite with lo < hi");
  }
  if (cells < 1) throw ConfigError("grid needs at least one cell");
  const double length = interval.length();
  std::vector<double> edges(cells + 1);

  if (spec.grading == Grading::uniform) {
    for (std::size_t j = 0; j <= cells; ++j) {
      edges[j] = interval.lo + length * static_cast<double>(j) / static_cast<double>(cells);
    }
    edges.back() = interval.hi;
    return Grid(std::move(edges), spec, 1.0);
  }

  if (!(spec.ratio > 0.0 && spec.ratio < 1.0)) throw ConfigError("geometric ratio must lie in (0, 1)");
  if (!(spec.anchor >= interval.lo && spec.anchor <= interval.hi)) {
    throw ConfigError("refinement anchor must lie inside the grid interval");
  }
  const double magnitude = std::max(std::abs(interval.lo), std::abs(interval.hi));
  const double floor = std::max(spec.min_width, 16.0 * magnitude * std::numeric_limits<double>::epsilon());

  const double left_len = spec.anchor - interval.lo;
  const double right_len = interval.hi - spec.anchor;
  std::size_t n_left = 0;
  if (right_len <= 0.0) {
    n_left = cells;
  } else if (left_len <= 0.0) {
    n_left = 0;
  } else {
    if (cells < 2) throw ConfigError("an interior anchor needs at least two cells");
    const auto share = static_cast<std::size_t>(std::llround(static_cast<double>(cells) * left_len / length));
    n_left = std::clamp<std::size_t>(share, 1, cells - 1);
  }
  const std::size_t n_right = cells - n_left;

  double effective = spec.ratio;
  if (n_left > 0) {
    const double rho = relaxed_ratio(left_len, n_left, spec.ratio, floor);
    effective = std::max(effective, rho);
    const auto d = graded_distances(left_len, n_left, rho);
    for (std::size_t k = 0; k <= n_left; ++k) edges[k] = spec.anchor - d[k];
    edges.front() = interval.lo;
  }
  if (n_right > 0) {
    const double rho = relaxed_ratio(right_len, n_right, spec.ratio, floor);
    effective = std::max(effective, rho);
    const auto d = graded_distances(right_len, n_right, rho);
    for (std::size_t k = 0; k <= n_right; ++k) edges[cells - k] = spec.anchor + d[k];
    edges.back() = interval.hi;
  }
  edges[n_left] = spec.anchor;
  return Grid(std::move(edges), spec, effective);
}

// ---------------------------------------------------------------------------
// TransitionMatrix

TransitionMatrix::TransitionMatrix(Grid grid, std::vector<std::size_t> row_ptr,
                                   std::vector<std::uint32_t> cols, std::vector<double> vals,
                                   int quadrature_points, double max_row_defect)
    : grid_(std::move(grid)),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      vals_(std::move(vals)),
      quadrature_points_(quadrature_points),
      max_row_defect_(max_row_defect) {
  build_transpose();
}

std::span<const std::uint32_t> TransitionMatrix::row_cols(std::size_t i) const noexcept {
  return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

std::span<const double> TransitionMatrix::row_vals(std::size_t i) const noexcept {
  return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
}

double TransitionMatrix::at(std::size_t i, std::size_t j) const noexcept {
  const auto c = row_cols(i);
  const auto it = std::lower_bound(c.begin(), c.end(), static_cast<std::uint32_t>(j));
  if (it == c.end() || *it != j) return 0.0;
  return row_vals(i)[static_cast<std::size_t>(it - c.begin())];
}

double TransitionMatrix::row_sum(std::size_t i) const noexcept {
  double s = 0.0;
  for (double v : row_vals(i)) s += v;
  return s;
}

void TransitionMatrix::build_transpose() const {
  const std::size_t n = size();
  col_ptr_.assign(n + 1, 0);
  for (auto c : cols_) ++col_ptr_[c + 1];
  for (std::size_t j = 0; j < n; ++j) col_ptr_[j + 1] += col_ptr_[j];
  rows_.resize(cols_.size());
  tvals_.resize(vals_.size());
  std::vector<std::size_t> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const std::size_t slot = cursor[cols_[k]]++;
      rows_[slot] = static_cast<std::uint32_t>(i);
      tvals_[slot] = vals_[k];
    }
  }
}

void TransitionMatrix::left_multiply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = size();
  if (in.size() != n || out.size() != n) throw ConfigError("vector length does not match the matrix");
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      double acc = 0.0;
      for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) acc += tvals_[k] * in[rows_[k]];
      out[j] = acc;
    }
  });
}

void TransitionMatrix::write_coordinate(std::ostream& os) const {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < size(); ++i) {
    const auto c = row_cols(i);
    const auto v = row_vals(i);
    for (std::size_t k = 0; k < c.size(); ++k) os << i << ' ' << c[k] << ' ' << v[k] << '\n';
  }
  os.precision(old);
}

namespace {

struct RowBlock {
  std::vector<std::size_t> lengths;
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  double max_defect = 0.0;
};

}  // namespace

TransitionMatrix assemble(const RandomMap& map, const NoiseModel& noise, const Grid& grid,
                          int quadrature_points) {
  if (quadrature_points < 1) throw ConfigError("need at least one quadrature point per cell");
  const Interval& dom = map.domain();
  if (grid.lo() < dom.lo || grid.hi() > dom.hi) throw ConfigError("grid must lie inside the map domain");
  const std::size_t n = grid.size();
  if (n > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("grid too large");
  const auto rule = gauss_legendre(quadrature_points);
  const auto& edges = grid.edges();

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(thread_count(), n));
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<RowBlock> blocks((n + chunk - 1) / chunk);

  parallel_for(blocks.size(), [&](std::size_t bbegin, std::size_t bend) {
    std::vector<double> acc;
    std::vector<double> xq(rule.nodes.size());
    std::vector<double> lo_y(rule.nodes.size());
    std::vector<double> hi_y(rule.nodes.size());
    for (std::size_t b = bbegin; b < bend; ++b) {
      RowBlock& block = blocks[b];
      const std::size_t row_begin = b * chunk;
      const std::size_t row_end = std::min(n, row_begin + chunk);
      for (std::size_t i = row_begin; i < row_end; ++i) {
        const double a = edges[i];
        const double w = edges[i + 1] - a;
        std::size_t jmin = n;
        std::size_t jmax = 0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          xq[q] = a + 0.5 * w * (rule.nodes[q] + 1.0);
          lo_y[q] = map.raw(xq[q], -1.0);
          hi_y[q] = map.raw(xq[q], 1.0);
          if (hi_y[q] <= edges.front() || lo_y[q] >= edges.back()) continue;
          const auto first = std::upper_bound(edges.begin(), edges.end(), lo_y[q]) - edges.begin();
          const auto last = std::lower_bound(edges.begin(), edges.end(), hi_y[q]) - edges.begin();
          jmin = std::min(jmin, static_cast<std::size_t>(std::max<std::ptrdiff_t>(first - 1, 0)));
          jmax = std::max(jmax, std::min(n - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(last - 1, 0))));
        }
        if (jmin > jmax) throw Error("row " + std::to_string(i) + " maps entirely outside the grid");
        acc.assign(jmax - jmin + 1, 0.0);

        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double weight = 0.5 * rule.weights[q];
          const double x = xq[q];
          const auto form = map.additive_form(x);
          const auto omega = [&](double y) {
            if (form) return std::clamp((y - form->shift) / form->scale, -1.0, 1.0);
            return map.section_inverse(x, y);
          };
          for (std::size_t j = jmin; j <= jmax; ++j) {
            const double ya = std::max(edges[j], lo_y[q]);
            const double yb = std::min(edges[j + 1], hi_y[q]);
            if (!(yb > ya)) continue;
            const double wa = (ya == lo_y[q]) ? -1.0 : omega(ya);
            const double wb = (yb == hi_y[q]) ? 1.0 : omega(yb);
            // Survival differences keep relative accuracy for the small masses near w = 1.
            const double m = (wa >= 0.0) ? noise.survival_clamped(wa) - noise.survival_clamped(wb)
                                         : noise.cdf_clamped(wb) - noise.cdf_clamped(wa);
            if (m > 0.0) acc[j - jmin] += weight * m;
          }
        }

        double sum = 0.0;
        for (double v : acc) sum += v;
        if (!(sum > 0.0)) throw Error("row " + std::to_string(i) + " carries no mass");
        block.max_defect = std::max(block.max_defect, std::abs(sum - 1.0));
        std::size_t count = 0;
        for (std::size_t k = 0; k < acc.size(); ++k) {
          if (acc[k] > 0.0) {
            block.cols.push_back(static_cast<std::uint32_t>(jmin + k));
            block.vals.push_back(acc[k] / sum);
            ++count;
          }
        }
        block.lengths.push_back(count);
      }
    }
  });

  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::size_t nnz = 0;
  double defect = 0.0;
  for (const auto& block : blocks) {
    nnz += block.vals.size();
    defect = std::max(defect, block.max_defect);
  }
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(nnz);
  vals.reserve(nnz);
  std::size_t row = 0;
  for (auto& block : blocks) {
    for (std::size_t len : block.lengths) {
      row_ptr[row + 1] = row_ptr[row] + len;
      ++row;
    }
    cols.insert(cols.end(), block.cols.begin(), block.cols.end());
    vals.insert(vals.end(), block.vals.begin(), block.vals.end());
    block = RowBlock{};
  }
  return TransitionMatrix(grid, std::move(row_ptr), std::move(cols), std::move(vals), quadrature_points,
                          defect);
}

std::vector<double> n_step_density(const TransitionMatrix& matrix, long long n, std::size_t i,
                                   long long max_iter) {
  if (n < 1) throw ConfigError("n-step density needs n >= 1");
  if (n > max_iter) throw OverflowError("requested power exceeds the iteration budget");
  if (i >= matrix.size()) throw DomainError("cell index out of range");
  std::vector<double> v(matrix.size(), 0.0);
  std::vector<double> next(matrix.size());
  v[i] = 1.0;
  for (long long step = 0; step < n; ++step) {
    matrix.left_multiply(v, next);
    double s = 0.0;
    for (double x : next) s += x;
    for (std::size_t j = 0; j < next.size(); ++j) v[j] = next[j] / s;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Stationary densities

StationaryDensity stationary(const TransitionMatrix& matrix, const StationaryOptions& options) {
  const Grid& grid = matrix.grid();
  const std::size_t n = grid.size();
  std::vector<char> active(n, 1);
  if (options.restrict_to) {
    const Interval r = *options.restrict_to;
    for (std::size_t j = 0; j < n; ++j) {
      active[j] = (grid.edges()[j + 1] > r.lo && grid.edges()[j] < r.hi) ? 1 : 0;
    }
  }
  std::vector<double> pi(n, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (active[j]) {
      pi[j] = grid.width(j);
      total += pi[j];
    }
  }
  if (!(total > 0.0)) throw ConfigError("restriction interval does not meet the grid");
  for (double& v : pi) v /= total;

  std::vector<double> next(n);
  double rel = std::numeric_limits<double>::infinity();
  auto step = [&]() {
    matrix.left_multiply(pi, next);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j]) next[j] = 0.0;
      s += next[j];
    }
    double diff = 0.0;
    rel = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= s;
      const double dj = std::abs(next[j] - pi[j]);
      diff += dj;
      if (next[j] > options.relative_floor) rel = std::max(rel, dj / next[j]);
    }
    return diff;
  };

  const bool use_rel = options.relative_tol > 0.0;
  long long it = 0;
  double diff = std::numeric_limits<double>::infinity();
  auto done = [&] { return diff < options.tol && (!use_rel || rel < options.relative_tol); };
  while (it < options.max_iter) {
    diff = step();
    pi.swap(next);
    ++it;
    if (done()) break;
  }
  if (!done()) {
    throw NoConvergenceError("power iteration did not reach tolerance", pi, diff);
  }

  // Residual of the returned vector without renormalisation.
  matrix.left_multiply(pi, next);
  double residual = 0.0;
  for (std::size_t j = 0; j < n; ++j) residual += std::abs((active[j] ? next[j] : 0.0) - pi[j]);

  StationaryDensity out{grid, std::vector<double>(n), pi, {}, residual, it};
  for (std::size_t j = 0; j < n; ++j) out.phi[j] = pi[j] / grid.width(j);
  if (options.support) {
    out.support = *options.support;
  } else if (options.restrict_to) {
    out.support = {options.restrict_to->lo, options.restrict_to->hi, false};
  } else {
    std::size_t first = n;
    std::size_t last = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (pi[j] > 0.0) {
        first = std::min(first, j);
        last = j;
      }
    }
    out.support = {grid.edges()[first], grid.edges()[last + 1], false};
  }
  return out;
}

StationaryDensity apply_transfer(const StationaryDensity& density, const RandomMap& map,
                                 const NoiseModel& noise, int quadrature_points) {
  const Grid& grid = density.grid;
  const std::size_t n = grid.size();
  const auto rule = gauss_legendre(quadrature_points);
  const auto& edges = grid.edges();

  // Conservative image of each source cell: F(cell) = [h-(lo), h+(hi)] by monotonicity.
  std::vector<double> reach_lo(n);
  std::vector<double> reach_hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    reach_lo[i] = map.raw(edges[i], -1.0);
    reach_hi[i] = map.raw(edges[i + 1], 1.0);
  }

  StationaryDensity out{grid, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), density.support, 0.0, 0};
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const double x = grid.mid(j);
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (density.phi[i] == 0.0 || x < reach_lo[i] || x > reach_hi[i]) continue;
        const double a = edges[i];
        const double w = edges[i + 1] - a;
        double cell = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
          const double y = a + 0.5 * w * (rule.nodes[q] + 1.0);
          cell += 0.5 * rule.weights[q] * map.transition_density(noise, y, x);
        }
        acc += density.phi[i] * w * cell;
      }
      out.phi[j] = acc;
    }
  });
  double residual = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out.mass[j] = out.phi[j] * grid.width(j);
    residual += std::abs(out.phi[j] - density.phi[j]) * grid.width(j);
  }
  out.residual = residual;
  return out;
}

double density_at(const StationaryDensity& density, double x) {
  const std::size_t j = density.grid.locate(x);
  if (x < density.support.lo || x > density.support.hi) return 0.0;
  return density.phi[j];
}

double tail_mass(const StationaryDensity& density, double x) {
  const Grid& grid = density.grid;
  if (x >= grid.hi()) return 0.0;
  if (x <= grid.lo()) x = grid.lo();
  const std::size_t j = grid.locate(x);
  double tail = 0.0;
  for (std::size_t i = grid.size(); i-- > j + 1;) tail += density.mass[i];
  return tail + density.mass[j] * (grid.edges()[j + 1] - x) / grid.width(j);
}

double l1_distance(const StationaryDensity& a, const StationaryDensity& b) {
  const Grid& ga = a.grid;
  const Grid& gb = b.grid;
  const double tol = 1e-12 * std::max({1.0, std::abs(ga.lo()), std::abs(ga.hi())});
  if (std::abs(ga.lo() - gb.lo()) > tol || std::abs(ga.hi() - gb.hi()) > tol) {
    throw GridMismatchError("densities live on grids with different spans");
  }
  const auto& ea = ga.edges();
  const auto& eb = gb.edges();
  std::size_t i = 0;
  std::size_t j = 0;
  double x = std::min(ea.front(), eb.front());
  double total = 0.0;
  while (i < ga.size() && j < gb.size()) {
    const double next = std::min(ea[i + 1], eb[j + 1]);
    if (next > x) total += std::abs(a.phi[i] - b.phi[j]) * (next - x);
    x = next;
    if (ea[i + 1] <= x) ++i;
    if (eb[j + 1] <= x) ++j;
  }
  return total;
}

std::vector<double> project_cdf(const Grid& grid, const std::function<double(double)>& cdf) {
  std::vector<double> m(grid.size());
  double prev = cdf(grid.edges().front());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double next = cdf(grid.edges()[j + 1]);
    m[j] = next - prev;
    prev = next;
  }
  return m;
}

}  // namespace boundtail
