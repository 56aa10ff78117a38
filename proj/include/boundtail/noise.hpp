#pragma once

#include <string>

#include "boundtail/rng.hpp"

namespace boundtail {

enum class NoiseKind { uniform, poly_upper, poly_symmetric };

/// Leading behaviour p(w) ~ beta (1 - w)^k of the noise density at w = 1.
struct BoundaryCoeffs {
  int k;
  double beta;
};

/// Absolutely continuous noise law on [-1, 1], positive in the interior.
///
///   uniform            p = 1/2                              (k = 0)
///   poly_upper(k)      p = (k+1)/2^(k+1) (1 - w)^k
///   poly_symmetric(k)  p = C_k (1 - w^2)^k, C_k normalising
class NoiseModel {
 public:
  static NoiseModel uniform();
  static NoiseModel poly_upper(int k);
  static NoiseModel poly_symmetric(int k);
  /// Accepts a real-valued flatness order; anything non-integral is rejected.
  static NoiseModel from_kind(NoiseKind kind, double k);

  NoiseKind kind() const noexcept { return kind_; }
  int k() const noexcept { return k_; }
  double beta() const noexcept { return beta_; }
  BoundaryCoeffs boundary_coeffs() const noexcept { return {k_, beta_}; }
  std::string name() const;

  double pdf(double omega) const;
  double cdf(double omega) const;
  /// 1 - cdf, evaluated without cancellation near w = 1.
  double survival(double omega) const;
  /// Inverse CDF on (0, 1).
  double quantile(double u) const;
  double sample(CounterRng& rng) const { return quantile(rng.uniform()); }

  // Unchecked variants for hot loops; the argument is clamped to [-1, 1].
  double cdf_clamped(double omega) const noexcept;
  double survival_clamped(double omega) const noexcept;

 private:
  NoiseModel(NoiseKind kind, int k, double norm, double beta)
      : kind_(kind), k_(k), norm_(norm), beta_(beta) {}

  NoiseKind kind_;
  int k_;
  double norm_;  // normalising constant of the closed form
  double beta_;
};

}  // namespace boundtail
