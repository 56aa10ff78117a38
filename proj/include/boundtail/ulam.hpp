#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "boundtail/boundary.hpp"
#include "boundtail/map_model.hpp"
#include "boundtail/noise.hpp"

namespace boundtail {

// ---------------------------------------------------------------------------
// Quadrature

/// Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendre gauss_legendre(int points);

// ---------------------------------------------------------------------------
// Grid

enum class Grading { uniform, geometric };

struct GridSpec {
  Grading grading = Grading::uniform;
  /// Width ratio between neighbouring cells, in (0, 1), cells shrinking toward the anchor.
  double ratio = 0.995;
  /// Refinement point (typically x+). Must lie in the interval.
  double anchor = 0.0;
  /// Cells never get narrower than this. If the requested ratio would go below it,
  /// the ratio is relaxed toward 1 until the smallest cell has exactly this width.
  double min_width = 1e-14;
};

class Grid {
 public:
  Grid(std::vector<double> edges, GridSpec spec, double effective_ratio);

  std::size_t size() const noexcept { return edges_.size() - 1; }
  const std::vector<double>& edges() const noexcept { return edges_; }
  double lo() const noexcept { return edges_.front(); }
  double hi() const noexcept { return edges_.back(); }
  double width(std::size_t j) const noexcept { return edges_[j + 1] - edges_[j]; }
  double mid(std::size_t j) const noexcept { return 0.5 * (edges_[j] + edges_[j + 1]); }
  const GridSpec& spec() const noexcept { return spec_; }
  /// Ratio actually used after the min-width relaxation (1 for uniform grids).
  double effective_ratio() const noexcept { return effective_ratio_; }
  /// Cell containing x; the right edge belongs to the last cell. Throws DomainError outside.
  std::size_t locate(double x) const;

 private:
  std::vector<double> edges_;
  GridSpec spec_;
  double effective_ratio_;
};

Grid build_grid(Interval interval, std::size_t cells, const GridSpec& spec = {});

// ---------------------------------------------------------------------------
// Transition matrix

/// Row-stochastic Ulam matrix in compressed sparse row form.
class TransitionMatrix {
 public:
  TransitionMatrix(Grid grid, std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> cols,
                   std::vector<double> vals, int quadrature_points, double max_row_defect);

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  std::size_t nonzeros() const noexcept { return vals_.size(); }
  int quadrature_points() const noexcept { return quadrature_points_; }
  /// Largest |row sum - 1| before renormalisation (mass lost outside the grid).
  double max_row_defect() const noexcept { return max_row_defect_; }

  std::span<const std::uint32_t> row_cols(std::size_t i) const noexcept;
  std::span<const double> row_vals(std::size_t i) const noexcept;
  double at(std::size_t i, std::size_t j) const noexcept;
  double row_sum(std::size_t i) const noexcept;

  /// out = in * P, summed in a fixed order for every output entry.
  void left_multiply(std::span<const double> in, std::span<double> out) const;

  /// Coordinate text dump: "row col value" per line.
  void write_coordinate(std::ostream& os) const;

 private:
  void build_transpose() const;

  Grid grid_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
  int quadrature_points_;
  double max_row_defect_;
  // Column-major copy for the gather form of in * P; built on first use.
  mutable std::vector<std::size_t> col_ptr_;
  mutable std::vector<std::uint32_t> rows_;
  mutable std::vector<double> tvals_;
};

/// P_ij = sum_q w_q [G_q(min(e_{j+1}, h+(x_q))) - G_q(max(e_j, h-(x_q)))]_+ with
/// G_q(y) the noise CDF of the section inverse at the Gauss-Legendre node x_q of
/// source cell i. Rows are renormalised to sum 1.
TransitionMatrix assemble(const RandomMap& map, const NoiseModel& noise, const Grid& grid,
                          int quadrature_points = 4);

/// Row i of P^n (n >= 1) as cell masses, renormalised.
std::vector<double> n_step_density(const TransitionMatrix& matrix, long long n, std::size_t i,
                                   long long max_iter = 1'000'000);

// ---------------------------------------------------------------------------
// Stationary densities

struct StationaryDensity {
  Grid grid;
  /// Density per cell (mass / width).
  std::vector<double> phi;
  /// Mass per cell; kept alongside phi so tail sums do not re-multiply widths.
  std::vector<double> mass;
  MinimalInvariantInterval support;
  /// ||pi P - pi||_1 at exit (or ||L phi - phi||_1 for apply_transfer).
  double residual = 0.0;
  long long iterations = 0;
};

struct StationaryOptions {
  double tol = 1e-13;
  long long max_iter = 1'000'000;
  /// When positive, also require max_j |pi_j' - pi_j| / pi_j' below this over cells with
  /// pi_j' > relative_floor. Deep tail cells converge in relative terms much later than
  /// in L1, so tail fits need this.
  double relative_tol = 0.0;
  double relative_floor = 1e-300;
  /// Mask every cell that does not meet this interval.
  std::optional<Interval> restrict_to;
  /// Reported support; defaults to restrict_to or the hull of charged cells.
  std::optional<MinimalInvariantInterval> support;
};

/// Left fixed vector pi P = pi by power iteration from the uniform density.
StationaryDensity stationary(const TransitionMatrix& matrix, const StationaryOptions& options = {});

/// Quadrature evaluation of (L g)(x) = int k(y, x) g(y) dy at cell midpoints.
StationaryDensity apply_transfer(const StationaryDensity& density, const RandomMap& map,
                                 const NoiseModel& noise, int quadrature_points = 4);

/// Piecewise-constant lookup; zero outside the support, DomainError outside the grid.
double density_at(const StationaryDensity& density, double x);

/// mu([x, support.hi]) from cumulative cell masses, linear inside the cell containing x.
double tail_mass(const StationaryDensity& density, double x);

/// L1 distance between two piecewise-constant densities over the common refinement
/// of their grids. Throws GridMismatchError unless the spans agree.
double l1_distance(const StationaryDensity& a, const StationaryDensity& b);

/// Cell masses of the projection of a density with CDF `cdf` onto `grid`.
std::vector<double> project_cdf(const Grid& grid, const std::function<double(double)>& cdf);

}  // namespace boundtail
