#include "boundtail/noise.hpp"

#include <algorithm>
#include <cmath>

#include "boundtail/errors.hpp"

namespace boundtail {

namespace {

constexpr int kMaxOrder = 60;

double binomial(int n, int j) {
  double c = 1.0;
  for (int i = 1; i <= j; ++i) c = c * (n - j + i) / i;
  return c;
}

// Sum_{j=lo}^{hi} C(n,j) t^j (1-t)^(n-j); every term is nonnegative.
double binomial_tail(int n, int lo, int hi, double t) {
  const double s = 1.0 - t;
  double total = 0.0;
  for (int j = lo; j <= hi; ++j) total += binomial(n, j) * std::pow(t, j) * std::pow(s, n - j);
  return total;
}

void check_order(int k) {
  if (k < 0) throw ConfigError("noise flatness order k must be >= 0");
  if (k > kMaxOrder) throw UnsupportedError("noise flatness order k > 60 is not supported");
}

void check_omega(double omega) {
  if (!(omega >= -1.0 && omega <= 1.0)) {
    throw DomainError("noise value " + std::to_string(omega) + " outside [-1, 1]");
  }
}

}  // namespace

NoiseModel NoiseModel::uniform() { return {NoiseKind::uniform, 0, 0.5, 0.5}; }

NoiseModel NoiseModel::poly_upper(int k) {
  check_order(k);
  const double c = (k + 1) / std::ldexp(1.0, k + 1);
  return {NoiseKind::poly_upper, k, c, c};
}

NoiseModel NoiseModel::poly_symmetric(int k) {
  check_order(k);
  // C_k = (2k+1)! / (2^(2k+1) (k!)^2) = (2k+1) C(2k, k) / 2^(2k+1)
  const double c = (2 * k + 1) * binomial(2 * k, k) / std::ldexp(1.0, 2 * k + 1);
  return {NoiseKind::poly_symmetric, k, c, c * std::ldexp(1.0, k)};
}

NoiseModel NoiseModel::from_kind(NoiseKind kind, double k) {
  if (!(k >= 0.0) || std::floor(k) != k) {
    throw UnsupportedError("only integer flatness orders k >= 0 are supported, got " +
                           std::to_string(k));
  }
  const int order = static_cast<int>(k);
  switch (kind) {
    case NoiseKind::uniform:
      if (order != 0) throw ConfigError("uniform noise has k = 0");
      return uniform();
    case NoiseKind::poly_upper:
      return poly_upper(order);
    case NoiseKind::poly_symmetric:
      return poly_symmetric(order);
  }
  throw ConfigError("unknown noise kind");
}

std::string NoiseModel::name() const {
  switch (kind_) {
    case NoiseKind::uniform:
      return "uniform";
    case NoiseKind::poly_upper:
      return "poly_upper";
    case NoiseKind::poly_symmetric:
      return "poly_symmetric";
  }
  return "?";
}

double NoiseModel::pdf(double omega) const {
  check_omega(omega);
  switch (kind_) {
    case NoiseKind::uniform:
      return 0.5;
    case NoiseKind::poly_upper:
      return norm_ * std::pow(1.0 - omega, k_);
    case NoiseKind::poly_symmetric:
      return norm_ * std::pow((1.0 - omega) * (1.0 + omega), k_);
  }
  return 0.0;
}

double NoiseModel::cdf(double omega) const {
  check_omega(omega);
  return cdf_clamped(omega);
}

double NoiseModel::survival(double omega) const {
  check_omega(omega);
  return survival_clamped(omega);
}

double NoiseModel::cdf_clamped(double omega) const noexcept {
  omega = std::clamp(omega, -1.0, 1.0);
  switch (kind_) {
    case NoiseKind::uniform:
      return 0.5 * (1.0 + omega);
    case NoiseKind::poly_upper:
      return 1.0 - std::pow(0.5 * (1.0 - omega), k_ + 1);
    case NoiseKind::poly_symmetric: {
      const int n = 2 * k_ + 1;
      return binomial_tail(n, k_ + 1, n, 0.5 * (1.0 + omega));
    }
  }
  return 0.0;
}

double NoiseModel::survival_clamped(double omega) const noexcept {
  omega = std::clamp(omega, -1.0, 1.0);
  switch (kind_) {
    case NoiseKind::uniform:
      return 0.5 * (1.0 - omega);
    case NoiseKind::poly_upper:
      return std::pow(0.5 * (1.0 - omega), k_ + 1);
    case NoiseKind::poly_symmetric:
      return binomial_tail(2 * k_ + 1, 0, k_, 0.5 * (1.0 + omega));
  }
  return 0.0;
}

double NoiseModel::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile argument must lie in (0, 1)");
  switch (kind_) {
    case NoiseKind::uniform:
      return 2.0 * u - 1.0;
    case NoiseKind::poly_upper:
      return 1.0 - 2.0 * std::pow(1.0 - u, 1.0 / (k_ + 1));
    case NoiseKind::poly_symmetric:
      break;
  }
  // Symmetric polynomial: bisection on the monotone CDF.
  double lo = -1.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf_clamped(mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace boundtail
