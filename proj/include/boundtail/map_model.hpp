#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "boundtail/noise.hpp"

namespace boundtail {

struct Interval {
  double lo;
  double hi;

  double length() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

/// The noise interval. Extremal maps are h(., -1) and h(., +1).
inline constexpr Interval kNoiseInterval{-1.0, 1.0};

/// h(x, w) = b tanh(x/2) + sigma w, i.e. b (1 - e^-x)/(1 + e^-x) + sigma w.
struct TanhAffine {
  double b;
  double sigma;
};

/// h(x, w) = lambda x + sigma w. lambda = 0 gives the memoryless chain h = sigma w.
struct Affine {
  double lambda;
  double sigma;
};

/// h(x, w) = x + alpha |x|^r + sigma (w - 1) on a left neighbourhood of 0, so the
/// upper extremal map x + alpha |x|^r has a neutral fixed point at 0.
struct PowerNonhyp {
  double alpha;
  int r;
  double sigma;
};

/// Black-box map. Derivatives and section inverses are computed numerically.
struct UserTabulated {
  std::function<double(double, double)> h;
  std::string label;
};

using MapFamily = std::variant<TanhAffine, Affine, PowerNonhyp, UserTabulated>;

enum class Extremal { lower, upper };

struct DerivativeBundle {
  double dx;
  double domega;
  /// x-derivatives of the upper extremal map, higher[m] = h+^(m)(x); empty unless requested.
  std::vector<double> higher;
};

/// h(x, w) = shift + scale * w for fixed x. All builtin families are of this form.
struct AdditiveForm {
  double shift;
  double scale;
};

/// Monotone cubic Hermite interpolant (Fritsch-Butland slopes) through strictly
/// increasing data; linear extrapolation outside the knots.
class MonotoneSpline {
 public:
  MonotoneSpline(std::vector<double> knots, std::vector<double> values);

  double operator()(double x) const noexcept;
  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

/// UserTabulated map h(x, w) = S(x) + sigma w with S a monotone spline.
UserTabulated tabulated_additive(const MonotoneSpline& drift, double sigma);

/// Sampling density for the monotonicity check done at construction.
struct MonotonicityCheck {
  int nx = 256;
  int nomega = 256;
};

class RandomMap {
 public:
  RandomMap(MapFamily family, Interval domain, MonotonicityCheck check = {});

  const MapFamily& family() const noexcept { return family_; }
  const Interval& domain() const noexcept { return domain_; }
  std::string name() const;

  /// h(x, w) with domain checks. Results outside X are returned as is.
  double eval(double x, double omega) const;
  /// h(x, +1) or h(x, -1).
  double extremal(Extremal which, double x) const;
  double upper(double x) const { return extremal(Extremal::upper, x); }
  double lower(double x) const { return extremal(Extremal::lower, x); }

  /// Partial derivatives at (x, w); throws NonMonotoneError if either is <= 0.
  /// higher_order > 0 also fills h+^(m)(x) for m = 0..higher_order.
  DerivativeBundle partials(double x, double omega, int higher_order = 0) const;

  /// m-th derivative of the upper extremal map (m >= 1). Analytic for builtin
  /// families, Richardson-extrapolated central differences otherwise.
  double upper_derivative(int order, double x) const;

  /// The w with h(x, w) = y. Throws OutOfRangeError unless y lies in [h-(x), h+(x)].
  double section_inverse(double x, double y) const;

  /// One-step transition density k(x, y) = p(w) / d_w h(x, w), w = section_inverse(x, y);
  /// zero outside F(x).
  double transition_density(const NoiseModel& noise, double x, double y) const;

  /// Closed additive form at x when the family has one.
  std::optional<AdditiveForm> additive_form(double x) const noexcept;

  /// Unchecked evaluation; also used outside X when a caller needs it.
  double raw(double x, double omega) const;

  /// Samples the monotonicity hypothesis; throws NonMonotoneError on failure.
  void check_monotone(MonotonicityCheck check) const;

  // Partial derivatives without domain or sign checks.
  double dx_raw(double x, double omega) const;
  double domega_raw(double x, double omega) const;

 private:
  double solve_section(double x, double y) const;

  MapFamily family_;
  Interval domain_;
};

}  // namespace boundtail
