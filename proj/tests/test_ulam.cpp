#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "boundtail/boundary.hpp"
#include "boundtail/errors.hpp"
#include "boundtail/parallel.hpp"
#include "boundtail/ulam.hpp"

using namespace boundtail;

namespace {

RandomMap tanh_map(double frac) {
  const double sigma = frac * bifurcation_parameter(3.0).sigma_star;
  return RandomMap(TanhAffine{3.0, sigma}, tanh_affine_domain(3.0, sigma));
}

StationaryDensity solve_on(const RandomMap& m, const NoiseModel& n, const MinimalInvariantInterval& iv,
                           std::size_t cells, Grading g = Grading::uniform) {
  const Grid grid = build_grid(iv.as_interval(), cells, GridSpec{g, 0.995, iv.hi});
  StationaryOptions opt;
  opt.support = iv;
  return stationary(assemble(m, n, grid), opt);
}

// sum_j |Lphi_j - phi_j| width_j
double transfer_residual(const StationaryDensity& s, const RandomMap& m, const NoiseModel& n) {
  const auto l = apply_transfer(s, m, n, 8);
  double r = 0.0;
  for (std::size_t j = 0; j < s.grid.size(); ++j) r += std::abs(l.phi[j] - s.phi[j]) * s.grid.width(j);
  return r;
}

}  // namespace

TEST_CASE("Gauss-Legendre rules") {
  const auto r4 = gauss_legendre(4);
  CHECK(r4.nodes[3] == doctest::Approx(0.8611363115940526).epsilon(1e-15));
  CHECK(r4.nodes[2] == doctest::Approx(0.3399810435848563).epsilon(1e-15));
  CHECK(r4.weights[3] == doctest::Approx(0.3478548451374538).epsilon(1e-15));
  CHECK(r4.weights[2] == doctest::Approx(0.6521451548625461).epsilon(1e-15));
  for (int n : {1, 2, 5, 16, 64}) {
    const auto r = gauss_legendre(n);
    // Exact for monomials up to degree 2n - 1.
    for (int p = 0; p <= 2 * n - 1; p += (n > 8 ? 7 : 1)) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[static_cast<std::size_t>(i)] * std::pow(r.nodes[static_cast<std::size_t>(i)], p);
      CHECK(s == doctest::Approx(p % 2 ? 0.0 : 2.0 / (p + 1)).epsilon(1e-13).scale(1.0));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), ConfigError);
}

TEST_CASE("uniform and graded grids") {
  const Grid u = build_grid({-1.0, 1.0}, 4);
  CHECK(u.edges() == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  CHECK(u.locate(1.0) == 3);
  CHECK(u.locate(-0.5) == 1);
  CHECK_THROWS_AS(u.locate(1.1), DomainError);

  const Grid g = build_grid({-3.0, -2.0}, 200, GridSpec{Grading::geometric, 0.98, -2.0});
  CHECK(g.lo() == -3.0);
  CHECK(g.hi() == -2.0);
  CHECK(g.effective_ratio() == 0.98);
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(g.width(j) / g.width(j - 1) == doctest::Approx(0.98).epsilon(1e-9));

  // Interior anchor: cells shrink toward it from both sides.
  const Grid c = build_grid({-1.0, 1.0}, 100, GridSpec{Grading::geometric, 0.95, 0.25});
  const auto at = c.locate(0.25);
  CHECK(c.edges()[at] == 0.25);
  CHECK(c.width(at) < c.width(0));
  CHECK(c.width(at - 1) < c.width(c.size() - 1) * 10);

  // Too steep a ratio is relaxed so the smallest cell keeps the minimum width.
  const Grid r = build_grid({-2.9, -2.2}, 8000, GridSpec{Grading::geometric, 0.995, -2.2, 1e-14});
  CHECK(r.effective_ratio() > 0.995);
  CHECK(r.width(r.size() - 1) >= 1e-14 * (1 - 1e-9));
  CHECK(r.width(r.size() - 1) < 2e-14);
  for (std::size_t j = 1; j < r.size(); ++j) REQUIRE(r.edges()[j] > r.edges()[j - 1]);
}

TEST_CASE("pure-noise chain reproduces the projection of p exactly") {
  const RandomMap iid(Affine{0.0, 1.0}, {-1.5, 1.5});
  const MinimalInvariantInterval iv{-1.0, 1.0, true};
  for (int k : {0, 2, 5}) {
    const auto noise = k == 0 ? NoiseModel::uniform() : NoiseModel::poly_upper(k);
    for (auto grading : {Grading::uniform, Grading::geometric}) {
      const auto s = solve_on(iid, noise, iv, 800, grading);
      const auto& e = s.grid.edges();
      double worst = 0.0;
      for (std::size_t j = 0; j < s.grid.size(); ++j) {
        const auto cdf = [&](double w) { return 1.0 - std::pow((1.0 - w) / 2.0, k + 1); };
        worst = std::max(worst, std::abs(s.mass[j] - (cdf(e[j + 1]) - cdf(e[j]))));
      }
      CHECK(worst <= 1e-12);
    }
  }
  const auto flat = solve_on(iid, NoiseModel::uniform(), iv, 2000);
  for (double v : flat.phi) REQUIRE(std::abs(v - 0.5) <= 1e-10);
}

TEST_CASE("transition matrices are row-stochastic") {
  for (double frac : {0.5, 1.0, 2.0}) {
    const auto m = tanh_map(frac);
    const auto iv = minimal_invariant_intervals(m).front();
    const Grid g = build_grid(iv.as_interval(), 800, GridSpec{Grading::geometric, 0.99, iv.hi});
    const auto p = assemble(m, NoiseModel::poly_symmetric(2), g);
    CHECK(p.max_row_defect() <= 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) {
      REQUIRE(std::abs(p.row_sum(i) - 1.0) <= 1e-12);
      for (double v : p.row_vals(i)) REQUIRE(v >= 0.0);
    }
    std::ostringstream os;
    p.write_coordinate(os);
    const std::string dump = os.str();
    const auto lines = std::count(dump.begin(), dump.end(), '\n');
    CHECK(static_cast<std::size_t>(lines) == p.nonzeros());
  }
  const RandomMap m(Affine{0.5, 1.0}, {-3.0, 3.0});
  CHECK_THROWS_AS(assemble(m, NoiseModel::uniform(), build_grid({-4.0, 2.0}, 10)), ConfigError);
}

TEST_CASE("stationary density is a fixed point of the transfer operator") {
  const auto m = tanh_map(0.5);
  const auto noise = NoiseModel::uniform();
  const auto iv = minimal_invariant_intervals(m).front();
  const auto coarse = solve_on(m, noise, iv, 500);
  const auto fine = solve_on(m, noise, iv, 2000);
  const double rc = transfer_residual(coarse, m, noise);
  const double rf = transfer_residual(fine, m, noise);
  CHECK(coarse.residual <= 1e-13);
  CHECK(rc < 1e-2);
  CHECK(rf < rc / 2);
  double mass = 0.0;
  for (std::size_t j = 0; j < fine.grid.size(); ++j) mass += fine.phi[j] * fine.grid.width(j);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("grid refinement consistency") {
  const auto m = tanh_map(0.5);
  const auto iv = minimal_invariant_intervals(m).front();
  const auto a = solve_on(m, NoiseModel::uniform(), iv, 1000);
  const auto b = solve_on(m, NoiseModel::uniform(), iv, 4000);
  CHECK(l1_distance(a, b) <= 0.02);
  CHECK(l1_distance(a, a) == 0.0);
  const auto other = solve_on(m, NoiseModel::uniform(), {iv.lo, iv.hi - 0.1, false}, 100);
  CHECK_THROWS_AS(l1_distance(a, other), GridMismatchError);
}

TEST_CASE("results do not depend on the thread count") {
  const auto m = tanh_map(0.5);
  const auto iv = minimal_invariant_intervals(m).front();
  set_thread_count(1);
  const auto one = solve_on(m, NoiseModel::poly_upper(1), iv, 1500, Grading::geometric);
  set_thread_count(4);
  const auto four = solve_on(m, NoiseModel::poly_upper(1), iv, 1500, Grading::geometric);
  set_thread_count(0);
  CHECK(one.phi == four.phi);
  CHECK(one.iterations == four.iterations);
}

TEST_CASE("restricting to one of two coexisting supports") {
  const auto m = tanh_map(0.5);
  const auto ivs = minimal_invariant_intervals(m);
  REQUIRE(ivs.size() == 2);
  const Grid g = build_grid(m.domain(), 1200);
  const auto p = assemble(m, NoiseModel::uniform(), g);
  for (const auto& iv : ivs) {
    StationaryOptions opt;
    opt.restrict_to = iv.as_interval();
    const auto s = stationary(p, opt);
    double inside = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g.edges()[j + 1] <= iv.lo || g.edges()[j] >= iv.hi) {
        CHECK(s.mass[j] == 0.0);
        if (g.edges()[j + 1] < iv.lo || g.edges()[j] > iv.hi) CHECK(density_at(s, g.mid(j)) == 0.0);
      } else {
        inside += s.mass[j];
      }
    }
    CHECK(inside == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("power iteration failure carries the best iterate") {
  const auto m = tanh_map(0.5);
  const auto iv = minimal_invariant_intervals(m).front();
  const auto p = assemble(m, NoiseModel::uniform(), build_grid(iv.as_interval(), 300));
  StationaryOptions opt;
  opt.max_iter = 2;
  try {
    stationary(p, opt);
    FAIL("expected NoConvergenceError");
  } catch (const NoConvergenceError& e) {
    CHECK(e.best_iterate.size() == 300);
    CHECK(e.best_residual > opt.tol);
  }
}

TEST_CASE("relative stopping rule converges the deep tail") {
  // At the tangency the tail falls off like exp(c ln d / d); with only the L1 rule
  // the start vector's transient still dominates there.
  const auto m = tanh_map(1.0);
  const auto iv = minimal_invariant_intervals(m).front();
  const auto p = assemble(m, NoiseModel::uniform(),
                          build_grid(iv.as_interval(), 1000, GridSpec{Grading::geometric, 0.99, iv.hi}));
  StationaryOptions l1_only;
  StationaryOptions rel;
  rel.relative_tol = 1e-8;
  const auto a = stationary(p, l1_only);
  const auto b = stationary(p, rel);
  CHECK(b.iterations > a.iterations);
  std::vector<double> next(p.size());
  p.left_multiply(b.mass, next);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (b.mass[j] > 1e-300) REQUIRE(std::abs(next[j] - b.mass[j]) <= 1e-7 * b.mass[j]);
  }
  const double x = iv.hi - 0.05;
  CHECK(density_at(b, x) < 1e-3 * density_at(a, x));
}

TEST_CASE("n-step densities") {
  const auto m = tanh_map(0.5);
  const auto iv = minimal_invariant_intervals(m).front();
  const auto p = assemble(m, NoiseModel::uniform(), build_grid(iv.as_interval(), 200));
  const auto one = n_step_density(p, 1, 17);
  for (std::size_t j = 0; j < p.size(); ++j) CHECK(one[j] == doctest::Approx(p.at(17, j)).epsilon(1e-14));
  const auto s = stationary(p);
  const auto far = n_step_density(p, 200, 0);
  double l1 = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) l1 += std::abs(far[j] - s.mass[j]);
  CHECK(l1 < 1e-10);
  CHECK_THROWS_AS(n_step_density(p, 10, 0, 5), OverflowError);
}

TEST_CASE("tail mass and lookups") {
  const auto m = tanh_map(0.5);
  const auto iv = minimal_invariant_intervals(m).front();
  const auto s = solve_on(m, NoiseModel::uniform(), iv, 400, Grading::geometric);
  CHECK(tail_mass(s, iv.lo) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tail_mass(s, iv.hi) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  double prev = 1.0;
  for (int i = 0; i <= 300; ++i) {
    const double t = tail_mass(s, iv.lo + (iv.hi - iv.lo) * i / 300.0);
    CHECK(t <= prev + 1e-15);
    prev = t;
  }
  CHECK_THROWS_AS(density_at(s, iv.hi + 0.5), DomainError);
  CHECK(density_at(s, s.grid.mid(7)) == s.phi[7]);
  const auto proj = project_cdf(s.grid, [](double x) { return x; });
  CHECK(std::accumulate(proj.begin(), proj.end(), 0.0) == doctest::Approx(iv.hi - iv.lo));
}
