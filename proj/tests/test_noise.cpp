#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "boundtail/errors.hpp"
#include "boundtail/noise.hpp"

using namespace boundtail;
using boost::math::quadrature::gauss_kronrod;

namespace {

std::vector<NoiseModel> all_models() {
  std::vector<NoiseModel> m{NoiseModel::uniform()};
  for (int k : {1, 2, 3, 5, 8}) {
    m.push_back(NoiseModel::poly_upper(k));
    m.push_back(NoiseModel::poly_symmetric(k));
  }
  return m;
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace

TEST_CASE("cdf matches the integral of the pdf") {
  for (const auto& n : all_models()) {
    CAPTURE(n.name());
    CHECK(integrate([&](double w) { return n.pdf(w); }, -1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double w : {-0.9, -0.5, 0.0, 0.3, 0.77, 0.99}) {
      const double exact = integrate([&](double v) { return n.pdf(v); }, -1.0, w);
      CHECK(std::abs(n.cdf(w) - exact) < 1e-12);
      CHECK(std::abs(n.survival(w) - (1.0 - exact)) < 1e-12);
    }
    CHECK(n.cdf(-1.0) == 0.0);
    CHECK(n.cdf(1.0) == 1.0);
  }
}

TEST_CASE("survival keeps relative accuracy next to w = 1") {
  // poly_upper closed form: S(w) = ((1 - w)/2)^(k+1).
  for (int k : {0, 1, 4}) {
    const auto n = k == 0 ? NoiseModel::uniform() : NoiseModel::poly_upper(k);
    for (double eps : {1e-6, 1e-10, 1e-14}) {
      const double exact = std::pow(eps / 2.0, k + 1);
      CHECK(n.survival(1.0 - eps) == doctest::Approx(exact).epsilon(1e-6));
    }
  }
  // poly_symmetric: S(1 - e) ~ beta e^(k+1) / (k+1).
  const auto s = NoiseModel::poly_symmetric(2);
  const double e = 1e-9;
  CHECK(s.survival(1.0 - e) == doctest::Approx(s.beta() * std::pow(e, 3) / 3.0).epsilon(1e-6));
}

TEST_CASE("boundary coefficients") {
  CHECK(NoiseModel::uniform().boundary_coeffs().k == 0);
  CHECK(NoiseModel::uniform().beta() == doctest::Approx(0.5));
  for (int k = 1; k <= 6; ++k) {
    CAPTURE(k);
    CHECK(NoiseModel::poly_upper(k).beta() == doctest::Approx((k + 1) / std::pow(2.0, k + 1)).epsilon(1e-14));
    // 1 / int (1 - w^2)^k dw = Gamma(k + 3/2) / (sqrt(pi) Gamma(k + 1)), times 2^k at w -> 1.
    const double ck = std::tgamma(k + 1.5) / (std::sqrt(M_PI) * std::tgamma(k + 1.0));
    const auto s = NoiseModel::poly_symmetric(k);
    CHECK(s.beta() == doctest::Approx(ck * std::pow(2.0, k)).epsilon(1e-13));
    CHECK(s.k() == k);
    // p(w) / (beta (1-w)^k) -> 1 as w -> 1.
    for (int m = 2; m <= 6; ++m) {
      const double w = 1.0 - std::pow(10.0, -m);
      const double ratio = s.pdf(w) / (s.beta() * std::pow(1.0 - w, k));
      if (m == 6) CHECK(std::abs(ratio - 1.0) < 0.05);
      CHECK(std::abs(ratio - 1.0) < 2.0 * k * std::pow(10.0, -m) + 1e-12);
    }
  }
}

TEST_CASE("quantile inverts the cdf") {
  for (const auto& n : all_models()) {
    CAPTURE(n.name());
    for (int i = 1; i < 200; ++i) {
      const double w = -1.0 + 2.0 * i / 200.0;
      const double u = n.cdf(w);
      if (!(u > 0.0 && u < 1.0)) continue;
      // u carries ~1e-16 absolute error, worth 1e-16 / p(w) in w.
      CHECK(std::abs(n.quantile(u) - w) < 1e-10 + 1e-15 / n.pdf(w));
    }
    for (double u : {1e-12, 1e-3, 0.25, 0.5, 0.999, 1.0 - 1e-12}) {
      CHECK(n.cdf(n.quantile(u)) == doctest::Approx(u).epsilon(1e-9));
    }
  }
}

TEST_CASE("cdf is monotone and pdf nonnegative") {
  for (const auto& n : all_models()) {
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double w = -1.0 + 2.0 * i / 1000.0;
      const double c = n.cdf(w);
      CHECK(c >= prev);
      CHECK(n.pdf(w) >= 0.0);
      prev = c;
    }
  }
}

TEST_CASE("samples follow the law") {
  const auto n = NoiseModel::poly_upper(2);
  CounterRng rng(11, 0);
  const int count = 100000;
  std::vector<int> below(5, 0);
  const double cuts[] = {-0.8, -0.4, 0.0, 0.4, 0.8};
  for (int i = 0; i < count; ++i) {
    const double w = n.sample(rng);
    REQUIRE(w >= -1.0);
    REQUIRE(w <= 1.0);
    for (int c = 0; c < 5; ++c) below[static_cast<std::size_t>(c)] += w <= cuts[c];
  }
  for (int c = 0; c < 5; ++c) {
    const double p = n.cdf(cuts[c]);
    const double sd = std::sqrt(p * (1 - p) / count);
    CHECK(std::abs(below[static_cast<std::size_t>(c)] / double(count) - p) < 5 * sd + 1e-9);
  }
}

TEST_CASE("invalid arguments") {
  const auto n = NoiseModel::uniform();
  CHECK_THROWS_AS(n.pdf(1.5), DomainError);
  CHECK_THROWS_AS(n.cdf(-1.01), DomainError);
  CHECK_THROWS_AS(n.quantile(0.0), DomainError);
  CHECK_THROWS_AS(n.quantile(1.0), DomainError);
  CHECK_THROWS_AS(NoiseModel::from_kind(NoiseKind::poly_upper, 1.5), UnsupportedError);
  CHECK_THROWS_AS(NoiseModel::poly_upper(-1), ConfigError);
  CHECK(NoiseModel::from_kind(NoiseKind::poly_symmetric, 3.0).k() == 3);
}
