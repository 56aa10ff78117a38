#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "boundtail/boundary.hpp"
#include "boundtail/montecarlo.hpp"
#include "boundtail/ulam.hpp"

namespace boundtail {

enum class ScalingMode {
  hyperbolic_density,
  nonhyperbolic_density,
  hyperbolic_tail,
  nonhyperbolic_tail,
  hitting_hyperbolic,
  hitting_nonhyperbolic,
};

std::string to_string(ScalingMode mode);

struct FitDetails {
  double slope;
  double intercept;
  /// sup |data - fitted model| over the usable window.
  double residual;
  /// sup |data - model with the theoretical constant| over the usable window.
  double theory_residual;
};

struct ScalingReport {
  ScalingMode mode;
  /// Distances d = x+ - x, strictly decreasing; only the points actually used.
  std::vector<double> window;
  std::vector<double> raw_values;
  double estimate = 0.0;
  double theory = 0.0;
  double rel_error = 0.0;
  std::optional<FitDetails> fit;
  /// Raw values are monotone over the final half of the window.
  bool converged = true;
  std::vector<std::string> warnings;
};

/// `points` log-spaced distances from d_max down to d_min.
std::vector<double> log_window(double d_min, double d_max, int points);

/// (k+1) / (2 ln lambda): limit of ln phi / ln^2 d at a hyperbolic boundary.
double hyperbolic_constant(int k, double lambda);
/// r (k+1) / (alpha (r-1)): limit of d^(r-1) ln phi / ln d at a nonhyperbolic boundary.
double nonhyperbolic_constant(int k, int r, double alpha);
/// Limit of the hitting-time statistic: 1 / ln lambda or 1 / (alpha (r-1)).
double hitting_constant(const BoundaryClassification& c);

/// Upper extremal map in coordinates where the boundary fixed point is 0.
using ShiftedMap = std::function<double(double)>;

ShiftedMap shifted_upper_map(const RandomMap& map, double x_plus);

/// min { n >= 0 : h+^n(x0) in (x, 0] } for x0 < 0, x < 0.
long long hitting_time(const ShiftedMap& h_plus, double x0, double x,
                       long long cap = 1'000'000'000LL);

/// Statistic n / ln|x| (hyperbolic) or |x|^(r-1) n (nonhyperbolic) along the window;
/// the estimate is the value at the smallest distance.
ScalingReport hitting_scaling(const ShiftedMap& h_plus, const BoundaryClassification& classification,
                              double x0, const std::vector<double>& window);

/// ln phi / ln^2 d (hyperbolic) or d^(r-1) ln phi / ln d (nonhyperbolic) along the
/// window, extrapolated to d -> 0 by a linear fit against 1 / ln(1/d).
ScalingReport density_tail_exponent(const StationaryDensity& density, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window);

/// Same estimator for the tail T(x) = mu([x, x+]).
ScalingReport measure_tail_exponent(const std::function<double(double)>& tail, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window);
ScalingReport measure_tail_exponent(const StationaryDensity& density, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window);
ScalingReport measure_tail_exponent(const EmpiricalMeasure& measure, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window);

/// Log-log straight-line diagnostics.
///  hyperbolic:    ln ln(1/phi) = intercept + slope ln ln(1/d), theory slope 2, intercept ln|c1|
///  nonhyperbolic: ln ln(1/phi) - (r-1) u - ln u = intercept, u = ln(1/d), theory ln c2
struct LogLogFit {
  FitDetails details;
  /// Abscissa actually used: ln ln(1/d) (hyperbolic) or u = ln(1/d) (nonhyperbolic).
  std::vector<double> abscissa;
  std::vector<double> ordinate;
  std::vector<double> window;
  double theory_intercept;
};

LogLogFit loglog_fit(const std::function<double(double)>& phi, double x_plus,
                     const BoundaryClassification& classification, int noise_k,
                     const std::vector<double>& window);
LogLogFit loglog_fit(const StationaryDensity& density, double x_plus,
                     const BoundaryClassification& classification, int noise_k,
                     const std::vector<double>& window);

/// Shared estimator behind the density and tail reports, on any positive function of x.
ScalingReport tail_exponent(const std::function<double(double)>& value, ScalingMode mode, double x_plus,
                            const BoundaryClassification& classification, int noise_k,
                            const std::vector<double>& window);

}  // namespace boundtail
