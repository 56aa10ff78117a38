#include <doctest.h>

#include <cmath>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "boundtail/boundary.hpp"
#include "boundtail/errors.hpp"

using namespace boundtail;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

// T'(x) = 1 on x < 0 gives tanh(x/2) = -sqrt(1 - 2/b); sigma* = x - T(x).
struct Tangency {
  double x;
  double sigma;
};

Tangency tangency_oracle(double b) {
  const Big bb(b);
  const Big t = -sqrt(1 - 2 / bb);
  const Big x = 2 * atanh(t);
  const Big sigma = x - bb * t;
  return {x.convert_to<double>(), sigma.convert_to<double>()};
}

// Root of h(x) - x on [lo, hi] by plain bisection.
double bisect_root(const std::function<double(double)>& g, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((g(lo) < 0) == (g(mid) < 0) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RandomMap tanh_map(double b, double sigma) { return RandomMap(TanhAffine{b, sigma}, tanh_affine_domain(b, sigma)); }

}  // namespace

TEST_CASE("bifurcation parameter against a high-precision tangency") {
  for (double b : {2.5, 3.0, 5.0, 10.0}) {
    CAPTURE(b);
    const auto exact = tangency_oracle(b);
    const auto bp = bifurcation_parameter(b);
    CHECK(std::abs(bp.sigma_star - exact.sigma) <= 1e-12 * exact.sigma);
    CHECK(std::abs(sigma_star_closed_form(b) - exact.sigma) <= 1e-12 * exact.sigma);
    CHECK(bp.x_plus == doctest::Approx(exact.x).epsilon(1e-10));
    const double t = std::tanh(bp.x_plus / 2);
    CHECK(std::abs(b * (1 - t * t) / 2 - 1.0) < 1e-10);
  }
  CHECK(bifurcation_parameter(3.0).sigma_star == doctest::Approx(0.415).epsilon(1e-3));
  CHECK_THROWS_AS(bifurcation_parameter(2.0), DomainError);
  CHECK_THROWS_AS(sigma_star_closed_form(1.5), DomainError);
}

TEST_CASE("fixed points of affine extremal maps") {
  const RandomMap m(Affine{0.5, 1.0}, {-4.0, 4.0});
  const auto up = find_fixed_points(m, Extremal::upper, m.domain());
  REQUIRE(up.size() == 1);
  CHECK(up[0].x_star == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(up[0].multiplier == doctest::Approx(0.5));
  CHECK(up[0].stability == Stability::attracting);
  const auto lo = find_fixed_points(m, Extremal::lower, m.domain());
  REQUIRE(lo.size() == 1);
  CHECK(lo[0].x_star == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(find_fixed_points(m, Extremal::upper, {-1.0, 1.0}), NoFixedPointError);
}

TEST_CASE("fixed points of the tanh map satisfy their invariants") {
  const auto m = tanh_map(3.0, 0.2);
  for (auto which : {Extremal::upper, Extremal::lower}) {
    const auto pts = find_fixed_points(m, which, m.domain());
    CHECK(pts.size() == 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      CHECK(std::abs(m.extremal(which, p.x_star) - p.x_star) <= 1e-11 * std::max(1.0, std::abs(p.x_star)));
      CHECK((p.multiplier < 1.0 - 1e-6) == (p.stability == Stability::attracting));
      if (i > 0) CHECK(p.x_star > pts[i - 1].x_star);
    }
  }
}

TEST_CASE("minimal invariant intervals") {
  SUBCASE("affine: one interval [-s/(1-l), s/(1-l)]") {
    const RandomMap m(Affine{0.5, 1.0}, {-4.0, 4.0});
    const auto ivs = minimal_invariant_intervals(m);
    REQUIRE(ivs.size() == 1);
    CHECK(ivs[0].lo == doctest::Approx(-2.0));
    CHECK(ivs[0].hi == doctest::Approx(2.0));
    CHECK(ivs[0].verified);
  }
  SUBCASE("tanh b = 3 below the bifurcation: upper end of the left interval") {
    const double sigma = bifurcation_parameter(3.0).sigma_star / 2;
    const auto m = tanh_map(3.0, sigma);
    const auto ivs = minimal_invariant_intervals(m);
    REQUIRE(ivs.size() == 2);
    const double x_plus = bisect_root([&](double x) { return 3.0 * std::tanh(x / 2) + sigma - x; }, -4.0, -1.4);
    const double x_minus = bisect_root([&](double x) { return 3.0 * std::tanh(x / 2) - sigma - x; }, -4.0, -1.4);
    CHECK(ivs[0].hi == doctest::Approx(x_plus).epsilon(1e-11));
    CHECK(ivs[0].lo == doctest::Approx(x_minus).epsilon(1e-11));
    CHECK(ivs[0].verified);
    CHECK(ivs[1].lo == doctest::Approx(-ivs[0].hi).epsilon(1e-10));
  }
  SUBCASE("topological bifurcation for b = 5") {
    const double s = bifurcation_parameter(5.0).sigma_star;
    CHECK(minimal_invariant_intervals(tanh_map(5.0, s / 4)).size() == 2);
    CHECK(minimal_invariant_intervals(tanh_map(5.0, s)).size() == 2);
    CHECK(minimal_invariant_intervals(tanh_map(5.0, 2 * s)).size() == 1);
  }
}

TEST_CASE("intervals are forward invariant under F") {
  for (double frac : {0.3, 0.9, 1.5}) {
    const auto m = tanh_map(4.0, frac * bifurcation_parameter(4.0).sigma_star);
    for (const auto& iv : minimal_invariant_intervals(m)) {
      for (int i = 0; i <= 500; ++i) {
        const double x = iv.lo + (iv.hi - iv.lo) * i / 500.0;
        CHECK(m.upper(x) <= iv.hi + 1e-10);
        CHECK(m.lower(x) >= iv.lo - 1e-10);
      }
    }
  }
}

TEST_CASE("boundary classification") {
  SUBCASE("affine is hyperbolic with lambda") {
    const RandomMap m(Affine{0.3, 1.0}, {-3.0, 3.0});
    const auto c = classify_boundary(m, 1.0 / 0.7);
    REQUIRE(c.hyperbolic());
    CHECK(std::get<Hyperbolic>(c.kind).lambda == doctest::Approx(0.3));
    CHECK(c.gamma == doctest::Approx(1.0));
  }
  SUBCASE("tanh at sigma* is nonhyperbolic, r = 2, alpha = T''/2") {
    const auto bp = bifurcation_parameter(3.0);
    const auto m = tanh_map(3.0, bp.sigma_star);
    const auto c = classify_boundary(m, bp.x_plus);
    REQUIRE_FALSE(c.hyperbolic());
    const auto nh = std::get<Nonhyperbolic>(c.kind);
    const double t = std::tanh(bp.x_plus / 2);
    const double t2 = -3.0 * t * (1 - t * t) / 2;
    CHECK(nh.r == 2);
    CHECK(nh.alpha == doctest::Approx(t2 / 2).epsilon(1e-7));
    CHECK(t2 == doctest::Approx(0.577).epsilon(1e-3));
  }
  SUBCASE("power normal form x + alpha |x|^r") {
    for (auto [alpha, r] : {std::pair{1.0, 2}, std::pair{2.0, 3}}) {
      const RandomMap m(PowerNonhyp{alpha, r, 0.1}, {-0.2, 0.0});
      const auto c = classify_boundary(m, 0.0);
      REQUIRE_FALSE(c.hyperbolic());
      CHECK(std::get<Nonhyperbolic>(c.kind).r == r);
      CHECK(std::get<Nonhyperbolic>(c.kind).alpha == doctest::Approx(alpha).epsilon(1e-9));
    }
  }
  SUBCASE("errors") {
    const RandomMap m(Affine{0.3, 1.0}, {-3.0, 3.0});
    CHECK_THROWS_AS(classify_boundary(m, 0.0), NotFixedPointError);
    const auto t = tanh_map(3.0, 0.2);
    const auto up = find_fixed_points(t, Extremal::upper, t.domain());
    CHECK_THROWS_AS(classify_boundary(t, up[1].x_star), DegenerateError);
  }
}

TEST_CASE("bifurcation scans") {
  const double s = bifurcation_parameter(5.0).sigma_star;
  const auto rows = bifurcation_scan(5.0, {s / 4, s, 2 * s});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].intervals.size() == 2);
  CHECK(rows[1].intervals.size() == 2);
  CHECK(rows[2].intervals.size() == 1);
  CHECK_THROWS_AS(bifurcation_scan(5.0, {s, s / 2}), ConfigError);
  const auto aff = bifurcation_scan_affine(0.5, {0.5, 1.0});
  CHECK(aff[1].intervals.size() == 1);
  CHECK(aff[1].intervals[0].hi == doctest::Approx(2.0));
}
