#include "boundtail/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "boundtail/errors.hpp"

namespace boundtail {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const double kFdStep = std::cbrt(std::numeric_limits<double>::epsilon());

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binomial(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Coefficients of P_m with d^m/du^m tanh(u) = P_m(tanh u), via P_{m+1} = (1 - t^2) P_m'.
std::vector<double> tanh_derivative_poly(int m) {
  std::vector<double> p{0.0, 1.0};
  for (int step = 0; step < m; ++step) {
    std::vector<double> dp(p.size() > 1 ? p.size() - 1 : 1, 0.0);
    for (std::size_t i = 1; i < p.size(); ++i) dp[i - 1] = static_cast<double>(i) * p[i];
    std::vector<double> next(dp.size() + 2, 0.0);
    for (std::size_t i = 0; i < dp.size(); ++i) {
      next[i] += dp[i];
      next[i + 2] -= dp[i];
    }
    p = std::move(next);
  }
  return p;
}

double horner(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

// d^m/dx^m of alpha |x|^r, one-sided from the left at x = 0.
double power_term_derivative(double alpha, int r, int m, double x) {
  if (m > r) return 0.0;
  const double falling = factorial(r) / factorial(r - m);
  if (x <= 0.0) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    return alpha * sign * falling * std::pow(-x, r - m);
  }
  return alpha * falling * std::pow(x, r - m);
}

// Second-order central difference of order m, Richardson-extrapolated once.
double fd_derivative(const std::function<double(double)>& f, int m, double x) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double base = 2.0 * std::pow(eps, 1.0 / (m + 2)) * std::max(1.0, std::abs(x));
  auto stencil = [&](double h) {
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      acc += sign * binomial(m, k) * f(x + (0.5 * m - k) * h);
    }
    return acc / std::pow(h, m);
  };
  const double coarse = stencil(base);
  const double fine = stencil(0.5 * base);
  return (4.0 * fine - coarse) / 3.0;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// MonotoneSpline

MonotoneSpline::MonotoneSpline(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  const std::size_t n = knots_.size();
  if (n < 2 || values_.size() != n) throw ConfigError("spline needs >= 2 knots with matching values");
  std::vector<double> secant(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dx = knots_[i + 1] - knots_[i];
    const double dy = values_[i + 1] - values_[i];
    if (!(dx > 0.0)) throw ConfigError("spline knots must be strictly increasing");
    if (!(dy > 0.0)) throw ConfigError("spline values must be strictly increasing");
    secant[i] = dy / dx;
  }
  slopes_.resize(n);
  slopes_.front() = secant.front();
  slopes_.back() = secant.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    slopes_[i] = 2.0 / (1.0 / secant[i - 1] + 1.0 / secant[i]);
  }
}

double MonotoneSpline::operator()(double x) const noexcept {
  if (x <= knots_.front()) return values_.front() + slopes_.front() * (x - knots_.front());
  if (x >= knots_.back()) return values_.back() + slopes_.back() * (x - knots_.back());
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double h = knots_[i + 1] - knots_[i];
  const double t = (x - knots_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * values_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
         (-2 * t3 + 3 * t2) * values_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
}

UserTabulated tabulated_additive(const MonotoneSpline& drift, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  return {[drift, sigma](double x, double w) { return drift(x) + sigma * w; },
          "tabulated_additive"};
}

// ---------------------------------------------------------------------------
// RandomMap

RandomMap::RandomMap(MapFamily family, Interval domain, MonotonicityCheck check)
    : family_(std::move(family)), domain_(domain) {
  if (!(domain_.lo < domain_.hi)) throw ConfigError("map domain must satisfy lo < hi");
  std::visit(overloaded{
                 [](const TanhAffine& m) {
                   if (!(m.b > 0.0)) throw ConfigError("TanhAffine requires b > 0");
                   if (!(m.sigma > 0.0)) throw ConfigError("TanhAffine requires sigma > 0");
                 },
                 [](const Affine& m) {
                   if (!(m.lambda >= 0.0 && m.lambda < 1.0)) {
                     throw ConfigError("Affine requires lambda in [0, 1)");
                   }
                   if (!(m.sigma > 0.0)) throw ConfigError("Affine requires sigma > 0");
                 },
                 [this](const PowerNonhyp& m) {
                   if (!(m.alpha > 0.0)) throw ConfigError("PowerNonhyp requires alpha > 0");
                   if (m.r < 2) throw ConfigError("PowerNonhyp requires r >= 2");
                   if (!(m.sigma > 0.0)) throw ConfigError("PowerNonhyp requires sigma > 0");
                   if (domain_.hi > 0.0) {
                     throw ConfigError("PowerNonhyp is defined on a left neighbourhood of 0");
                   }
                 },
                 [](const UserTabulated& m) {
                   if (!m.h) throw ConfigError("UserTabulated map has no callback");
                 },
             },
             family_);
  check_monotone(check);
}

std::string RandomMap::name() const {
  return std::visit(overloaded{
                        [](const TanhAffine& m) {
                          return "TanhAffine(b=" + fmt(m.b) + ", sigma=" + fmt(m.sigma) + ")";
                        },
                        [](const Affine& m) {
                          return "Affine(lambda=" + fmt(m.lambda) + ", sigma=" + fmt(m.sigma) + ")";
                        },
                        [](const PowerNonhyp& m) {
                          return "PowerNonhyp(alpha=" + fmt(m.alpha) + ", r=" + std::to_string(m.r) +
                                 ", sigma=" + fmt(m.sigma) + ")";
                        },
                        [](const UserTabulated& m) { return "UserTabulated(" + m.label + ")"; },
                    },
                    family_);
}

double RandomMap::raw(double x, double omega) const {
  return std::visit(overloaded{
                        [&](const TanhAffine& m) { return m.b * std::tanh(0.5 * x) + m.sigma * omega; },
                        [&](const Affine& m) { return m.lambda * x + m.sigma * omega; },
                        [&](const PowerNonhyp& m) {
                          return x + m.alpha * std::pow(std::abs(x), m.r) + m.sigma * (omega - 1.0);
                        },
                        [&](const UserTabulated& m) { return m.h(x, omega); },
                    },
                    family_);
}

std::optional<AdditiveForm> RandomMap::additive_form(double x) const noexcept {
  return std::visit(
      overloaded{
          [&](const TanhAffine& m) -> std::optional<AdditiveForm> {
            return AdditiveForm{m.b * std::tanh(0.5 * x), m.sigma};
          },
          [&](const Affine& m) -> std::optional<AdditiveForm> {
            return AdditiveForm{m.lambda * x, m.sigma};
          },
          [&](const PowerNonhyp& m) -> std::optional<AdditiveForm> {
            return AdditiveForm{x + m.alpha * std::pow(std::abs(x), m.r) - m.sigma, m.sigma};
          },
          [](const UserTabulated&) -> std::optional<AdditiveForm> { return std::nullopt; },
      },
      family_);
}

double RandomMap::eval(double x, double omega) const {
  if (!domain_.contains(x)) {
    throw DomainError("x = " + fmt(x) + " outside domain [" + fmt(domain_.lo) + ", " +
                      fmt(domain_.hi) + "]");
  }
  if (!kNoiseInterval.contains(omega)) throw DomainError("omega = " + fmt(omega) + " outside [-1, 1]");
  return raw(x, omega);
}

double RandomMap::extremal(Extremal which, double x) const {
  return eval(x, which == Extremal::upper ? 1.0 : -1.0);
}

double RandomMap::dx_raw(double x, double omega) const {
  return std::visit(overloaded{
                        [&](const TanhAffine& m) {
                          const double c = std::cosh(0.5 * x);
                          return 0.5 * m.b / (c * c);
                        },
                        [](const Affine& m) { return m.lambda; },
                        [&](const PowerNonhyp& m) { return 1.0 + power_term_derivative(m.alpha, m.r, 1, x); },
                        [&](const UserTabulated& m) {
                          const double h = kFdStep * std::max(1.0, std::abs(x));
                          return (m.h(x + h, omega) - m.h(x - h, omega)) / (2.0 * h);
                        },
                    },
                    family_);
}

double RandomMap::domega_raw(double x, double omega) const {
  return std::visit(overloaded{
                        [](const TanhAffine& m) { return m.sigma; },
                        [](const Affine& m) { return m.sigma; },
                        [](const PowerNonhyp& m) { return m.sigma; },
                        [&](const UserTabulated& m) {
                          const double h = kFdStep * std::max(1.0, std::abs(omega));
                          return (m.h(x, omega + h) - m.h(x, omega - h)) / (2.0 * h);
                        },
                    },
                    family_);
}

DerivativeBundle RandomMap::partials(double x, double omega, int higher_order) const {
  eval(x, omega);  // domain checks
  DerivativeBundle d{dx_raw(x, omega), domega_raw(x, omega), {}};
  if (!(d.dx > 0.0) || !(d.domega > 0.0)) {
    throw NonMonotoneError("monotonicity violated at (x, omega) = (" + fmt(x) + ", " + fmt(omega) +
                           "): dx = " + fmt(d.dx) + ", domega = " + fmt(d.domega));
  }
  if (higher_order > 0) {
    d.higher.resize(static_cast<std::size_t>(higher_order) + 1);
    d.higher[0] = raw(x, 1.0);
    for (int m = 1; m <= higher_order; ++m) d.higher[static_cast<std::size_t>(m)] = upper_derivative(m, x);
  }
  return d;
}

double RandomMap::upper_derivative(int order, double x) const {
  if (order < 1) throw ConfigError("derivative order must be >= 1");
  if (order == 1) return dx_raw(x, 1.0);
  return std::visit(overloaded{
                        [&](const TanhAffine& m) {
                          return m.b * std::ldexp(1.0, -order) *
                                 horner(tanh_derivative_poly(order), std::tanh(0.5 * x));
                        },
                        [](const Affine&) { return 0.0; },
                        [&](const PowerNonhyp& m) { return power_term_derivative(m.alpha, m.r, order, x); },
                        [&](const UserTabulated& m) {
                          return fd_derivative([&](double t) { return m.h(t, 1.0); }, order, x);
                        },
                    },
                    family_);
}

double RandomMap::solve_section(double x, double y) const {
  double lo = -1.0;
  double hi = 1.0;
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (raw(x, mid) < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double w = 0.5 * (lo + hi);
  const double slope = domega_raw(x, w);
  if (slope > 0.0) {
    const double polished = w - (raw(x, w) - y) / slope;
    if (polished >= lo && polished <= hi) w = polished;
  }
  return w;
}

double RandomMap::section_inverse(double x, double y) const {
  const double top = extremal(Extremal::upper, x);
  const double bottom = extremal(Extremal::lower, x);
  const double slack = 1e-12 * std::max(1.0, std::abs(y));
  if (y > top + slack || y < bottom - slack) {
    throw OutOfRangeError("y = " + fmt(y) + " outside F(x) = [" + fmt(bottom) + ", " + fmt(top) + "]");
  }
  if (y >= top) return 1.0;
  if (y <= bottom) return -1.0;
  if (const auto form = additive_form(x)) {
    return std::clamp((y - form->shift) / form->scale, -1.0, 1.0);
  }
  return solve_section(x, y);
}

double RandomMap::transition_density(const NoiseModel& noise, double x, double y) const {
  const double top = extremal(Extremal::upper, x);
  const double bottom = extremal(Extremal::lower, x);
  if (y < bottom || y > top) return 0.0;
  const double w = section_inverse(x, y);
  return noise.pdf(w) / domega_raw(x, w);
}

void RandomMap::check_monotone(MonotonicityCheck check) const {
  if (check.nx < 2 || check.nomega < 2) return;
  // The memoryless chain h = sigma w has d_x h = 0 and is accepted as a limit case.
  const auto* affine = std::get_if<Affine>(&family_);
  const bool skip_dx = affine != nullptr && affine->lambda == 0.0;
  for (int i = 0; i < check.nx; ++i) {
    const double x = domain_.lo + domain_.length() * i / (check.nx - 1);
    for (int j = 0; j < check.nomega; ++j) {
      const double w = -1.0 + 2.0 * j / (check.nomega - 1);
      const double dx = dx_raw(x, w);
      const double dw = domega_raw(x, w);
      if ((!skip_dx && !(dx > 0.0)) || !(dw > 0.0)) {
        throw NonMonotoneError("monotonicity violated at sampled (x, omega) = (" + fmt(x) + ", " +
                               fmt(w) + "): dx = " + fmt(dx) + ", domega = " + fmt(dw));
      }
    }
  }
}

}  // namespace boundtail
