#include "boundtail/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "boundtail/errors.hpp"

namespace boundtail {

namespace {

constexpr std::size_t kMinWindowPoints = 5;

std::vector<double> descending(std::vector<double> window) {
  window.erase(std::remove_if(window.begin(), window.end(), [](double d) { return !(d > 0.0); }),
               window.end());
  std::sort(window.begin(), window.end(), std::greater<>());
  window.erase(std::unique(window.begin(), window.end()), window.end());
  return window;
}

struct LineFit {
  double slope;
  double intercept;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

// Monotone (either direction) over the second half of the sequence.
bool monotone_tail(const std::vector<double>& v) {
  if (v.size() < 3) return true;
  const std::size_t start = v.size() / 2;
  bool up = true;
  bool down = true;
  for (std::size_t i = start + 1; i < v.size(); ++i) {
    const double eps = 1e-12 * std::max(std::abs(v[i]), std::abs(v[i - 1]));
    if (v[i] < v[i - 1] - eps) up = false;
    if (v[i] > v[i - 1] + eps) down = false;
  }
  return up || down;
}

std::string dropped(double d, const char* why) {
  std::ostringstream os;
  os.precision(6);
  os << "dropped d = " << d << ": " << why;
  return os.str();
}

bool is_tail_mode(ScalingMode mode) {
  return mode == ScalingMode::hyperbolic_tail || mode == ScalingMode::nonhyperbolic_tail;
}

ScalingMode pick_mode(const BoundaryClassification& c, bool tail) {
  if (c.hyperbolic()) return tail ? ScalingMode::hyperbolic_tail : ScalingMode::hyperbolic_density;
  return tail ? ScalingMode::nonhyperbolic_tail : ScalingMode::nonhyperbolic_density;
}

double theory_for(const BoundaryClassification& c, int k) {
  if (const auto* h = std::get_if<Hyperbolic>(&c.kind)) return hyperbolic_constant(k, h->lambda);
  const auto& nh = std::get<Nonhyperbolic>(c.kind);
  return nonhyperbolic_constant(k, nh.r, nh.alpha);
}

}  // namespace

std::string to_string(ScalingMode mode) {
  switch (mode) {
    case ScalingMode::hyperbolic_density:
      return "hyperbolic_density";
    case ScalingMode::nonhyperbolic_density:
      return "nonhyperbolic_density";
    case ScalingMode::hyperbolic_tail:
      return "hyperbolic_tail";
    case ScalingMode::nonhyperbolic_tail:
      return "nonhyperbolic_tail";
    case ScalingMode::hitting_hyperbolic:
      return "hitting_hyperbolic";
    case ScalingMode::hitting_nonhyperbolic:
      return "hitting_nonhyperbolic";
  }
  return "?";
}

std::vector<double> log_window(double d_min, double d_max, int points) {
  if (!(d_min > 0.0 && d_max > d_min) || points < 2) {
    throw ConfigError("window needs 0 < d_min < d_max and at least two points");
  }
  std::vector<double> w(static_cast<std::size_t>(points));
  const double a = std::log(d_max);
  const double b = std::log(d_min);
  for (int i = 0; i < points; ++i) w[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  w.front() = d_max;
  w.back() = d_min;
  return w;
}

double hyperbolic_constant(int k, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("hyperbolic constant needs lambda in (0, 1)");
  return (k + 1) / (2.0 * std::log(lambda));
}

double nonhyperbolic_constant(int k, int r, double alpha) {
  if (r < 2 || !(alpha > 0.0)) throw DomainError("nonhyperbolic constant needs r >= 2 and alpha > 0");
  return r * (k + 1.0) / (alpha * (r - 1));
}

double hitting_constant(const BoundaryClassification& c) {
  if (const auto* h = std::get_if<Hyperbolic>(&c.kind)) return 1.0 / std::log(h->lambda);
  const auto& nh = std::get<Nonhyperbolic>(c.kind);
  return 1.0 / (nh.alpha * (nh.r - 1));
}

ShiftedMap shifted_upper_map(const RandomMap& map, double x_plus) {
  return [&map, x_plus](double y) { return map.raw(x_plus + y, 1.0) - x_plus; };
}

long long hitting_time(const ShiftedMap& h_plus, double x0, double x, long long cap) {
  if (!(x < 0.0)) throw DomainError("hitting target x must be negative");
  if (!(x0 <= 0.0)) throw DomainError("hitting start x0 must be <= 0");
  double y = x0;
  long long n = 0;
  while (!(y > x && y <= 0.0)) {
    const double next = h_plus(y);
    if (!(next > y) || next > 0.0) {
      throw DivergenceError("h+ orbit stopped increasing toward the boundary after " + std::to_string(n) +
                            " steps");
    }
    y = next;
    if (++n > cap) throw IterationCapError("hitting time exceeds the iteration cap");
  }
  return n;
}

ScalingReport hitting_scaling(const ShiftedMap& h_plus, const BoundaryClassification& classification,
                              double x0, const std::vector<double>& window) {
  ScalingReport report;
  report.window = descending(window);
  if (report.window.empty()) throw WindowError("empty hitting-time window");
  const auto* hyp = std::get_if<Hyperbolic>(&classification.kind);
  report.mode = hyp ? ScalingMode::hitting_hyperbolic : ScalingMode::hitting_nonhyperbolic;
  for (double d : report.window) {
    const auto n = static_cast<double>(hitting_time(h_plus, x0, -d));
    if (hyp) {
      report.raw_values.push_back(n / std::log(d));
    } else {
      const int r = std::get<Nonhyperbolic>(classification.kind).r;
      report.raw_values.push_back(std::pow(d, r - 1) * n);
    }
  }
  report.estimate = report.raw_values.back();
  report.theory = hitting_constant(classification);
  report.rel_error = std::abs(report.estimate - report.theory) / std::abs(report.theory);
  report.converged = monotone_tail(report.raw_values);
  return report;
}

ScalingReport tail_exponent(const std::function<double(double)>& value, ScalingMode mode, double x_plus,
                            const BoundaryClassification& classification, int noise_k,
                            const std::vector<double>& window) {
  if (mode == ScalingMode::hitting_hyperbolic || mode == ScalingMode::hitting_nonhyperbolic ||
      pick_mode(classification, is_tail_mode(mode)) != mode) {
    throw ConfigError("scaling mode " + to_string(mode) + " does not match the boundary classification");
  }
  ScalingReport report;
  report.mode = mode;
  const int r = classification.hyperbolic() ? 0 : std::get<Nonhyperbolic>(classification.kind).r;
  std::vector<double> inv_log;
  for (double d : descending(window)) {
    double v = 0.0;
    try {
      v = value(x_plus - d);
    } catch (const DomainError&) {
      report.warnings.push_back(dropped(d, "outside the grid"));
      continue;
    }
    if (!(v >= std::numeric_limits<double>::min()) || !std::isfinite(v)) {
      report.warnings.push_back(dropped(d, "value underflowed to zero"));
      continue;
    }
    const double ld = std::log(d);
    const double raw = classification.hyperbolic() ? std::log(v) / (ld * ld)
                                                   : std::pow(d, r - 1) * std::log(v) / ld;
    report.window.push_back(d);
    report.raw_values.push_back(raw);
    inv_log.push_back(-1.0 / ld);
  }
  if (report.window.size() < kMinWindowPoints) {
    throw WindowError("only " + std::to_string(report.window.size()) +
                      " usable window points; need at least 5");
  }
  const LineFit line = least_squares(inv_log, report.raw_values);
  report.estimate = line.intercept;
  report.theory = theory_for(classification, noise_k);
  report.rel_error = std::abs(report.estimate - report.theory) / std::abs(report.theory);
  double residual = 0.0;
  double theory_residual = 0.0;
  for (std::size_t i = 0; i < inv_log.size(); ++i) {
    residual = std::max(residual, std::abs(report.raw_values[i] - (line.intercept + line.slope * inv_log[i])));
    theory_residual = std::max(theory_residual, std::abs(report.raw_values[i] - report.theory));
  }
  report.fit = FitDetails{line.slope, line.intercept, residual, theory_residual};
  report.converged = monotone_tail(report.raw_values);
  if (!report.converged) report.warnings.emplace_back("raw values not monotone over the final half of the window");
  return report;
}

ScalingReport density_tail_exponent(const StationaryDensity& density, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window) {
  return tail_exponent([&](double x) { return density_at(density, x); }, pick_mode(classification, false),
                       x_plus, classification, noise_k, window);
}

ScalingReport measure_tail_exponent(const std::function<double(double)>& tail, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window) {
  return tail_exponent(tail, pick_mode(classification, true), x_plus, classification, noise_k, window);
}

ScalingReport measure_tail_exponent(const StationaryDensity& density, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window) {
  return measure_tail_exponent([&](double x) { return tail_mass(density, x); }, x_plus, classification,
                               noise_k, window);
}

ScalingReport measure_tail_exponent(const EmpiricalMeasure& measure, double x_plus,
                                    const BoundaryClassification& classification, int noise_k,
                                    const std::vector<double>& window) {
  return measure_tail_exponent([&](double x) { return empirical_tail(measure, x); }, x_plus,
                               classification, noise_k, window);
}

LogLogFit loglog_fit(const std::function<double(double)>& phi, double x_plus,
                     const BoundaryClassification& classification, int noise_k,
                     const std::vector<double>& window) {
  LogLogFit fit{};
  const double theory = theory_for(classification, noise_k);
  const bool hyp = classification.hyperbolic();
  const int r = hyp ? 0 : std::get<Nonhyperbolic>(classification.kind).r;
  fit.theory_intercept = std::log(std::abs(theory));
  for (double d : descending(window)) {
    if (!(d < 1.0)) continue;
    double v = 0.0;
    try {
      v = phi(x_plus - d);
    } catch (const DomainError&) {
      continue;
    }
    // ln ln(1/phi) needs 0 < phi < 1; subnormals carry too few digits.
    if (!(v >= std::numeric_limits<double>::min() && v < 1.0)) continue;
    const double u = -std::log(d);
    const double y = std::log(-std::log(v));
    fit.window.push_back(d);
    if (hyp) {
      fit.abscissa.push_back(std::log(u));
      fit.ordinate.push_back(y);
    } else {
      fit.abscissa.push_back(u);
      fit.ordinate.push_back(y);
    }
  }
  if (fit.window.size() < kMinWindowPoints) {
    throw WindowError("only " + std::to_string(fit.window.size()) + " usable points for the log-log fit");
  }
  double residual = 0.0;
  double theory_residual = 0.0;
  if (hyp) {
    const LineFit line = least_squares(fit.abscissa, fit.ordinate);
    for (std::size_t i = 0; i < fit.abscissa.size(); ++i) {
      residual = std::max(residual, std::abs(fit.ordinate[i] - (line.intercept + line.slope * fit.abscissa[i])));
      theory_residual =
          std::max(theory_residual, std::abs(fit.ordinate[i] - (fit.theory_intercept + 2.0 * fit.abscissa[i])));
    }
    fit.details = {line.slope, line.intercept, residual, theory_residual};
  } else {
    std::vector<double> z(fit.abscissa.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double u = fit.abscissa[i];
      z[i] = fit.ordinate[i] - (r - 1) * u - std::log(u);
      mean += z[i];
    }
    mean /= static_cast<double>(z.size());
    for (double zi : z) {
      residual = std::max(residual, std::abs(zi - mean));
      theory_residual = std::max(theory_residual, std::abs(zi - fit.theory_intercept));
    }
    fit.details = {static_cast<double>(r - 1), mean, residual, theory_residual};
  }
  return fit;
}

LogLogFit loglog_fit(const StationaryDensity& density, double x_plus,
                     const BoundaryClassification& classification, int noise_k,
                     const std::vector<double>& window) {
  return loglog_fit([&](double x) { return density_at(density, x); }, x_plus, classification, noise_k, window);
}

}  // namespace boundtail
