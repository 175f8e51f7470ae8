#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "wishart/resolvent.hpp"

using wishart::Complex;
using wishart::ResolventQuery;

namespace {

Complex eval_cubic(const std::array<Complex, 4>& c, Complex g) {
  return ((c[3] * g + c[2]) * g + c[1]) * g + c[0];
}

// Marchenko-Pastur density for the a = 0, r = 1 start (variance tau).
double rho_mp(double lambda, double tau) {
  if (lambda <= 0.0 || lambda >= 4.0 * tau) return 0.0;
  return std::sqrt((4.0 * tau - lambda) / lambda) / (2.0 * wishart::kPi * tau);
}

}  // namespace

TEST_CASE("cubic coefficients match the implicit equation") {
  ResolventQuery q{Complex(2.0, 1.0), 0.7, 0.5, 1.3};
  auto c = wishart::cubic_coefficients(q);
  double rt = q.r * q.tau;
  REQUIRE(std::abs(c[0] - Complex(-1.0, 0.0)) == 0.0);
  REQUIRE(std::abs(c[1] - (q.z + 2.0 * rt - q.tau - q.a * q.a)) <= 1e-15);
  REQUIRE(std::abs(c[2] - (Complex(rt * (q.tau - rt), 0.0) - 2.0 * rt * q.z)) <= 1e-15);
  REQUIRE(std::abs(c[3] - rt * rt * q.z) <= 1e-15);

  // the returned branch solves both the cubic and the defining equation
  for (Complex z : {Complex(2.0, 1.0), Complex(0.4, 0.2), Complex(5.0, 0.01)}) {
    ResolventQuery qq{z, 0.7, 0.5, 1.3};
    auto [g, cert] = wishart::solve_G(qq);
    auto cc = wishart::cubic_coefficients(qq);
    REQUIRE(std::abs(eval_cubic(cc, g)) <= 1e-9 * (1.0 + std::norm(g) * std::abs(g)));
    REQUIRE(cert.residual <= 1e-9 * (1.0 + std::abs(z)));
  }
}

TEST_CASE("resolvent reduces to the initial condition at tau = 0") {
  ResolventQuery q{Complex(2.5, 0.4), 0.0, 1.0, 1.2};
  auto [g, cert] = wishart::solve_G(q);
  Complex expect = 1.0 / (q.z - 1.44);
  REQUIRE(std::abs(g - expect) <= 1e-15 * std::abs(expect));
  REQUIRE(cert.criterion == wishart::BranchCriterion::asymptotic_inverse_z);
}

TEST_CASE("resolvent is asymptotically 1/z") {
  ResolventQuery q{Complex(0.0, 1e8), 1.0, 1.0, 1.0};
  auto g = wishart::solve_G(q).first;
  REQUIRE(std::abs(g * q.z - 1.0) <= 1e-6);
}

TEST_CASE("resolvent matches the a = 0 quadratic closed form") {
  const double tau = 1.0;
  for (Complex z : {Complex(2.0, 0.5), Complex(1.0, 1.0), Complex(5.5, 0.1)}) {
    ResolventQuery q{z, tau, 1.0, 0.0};
    Complex g = wishart::solve_G(q).first;
    // tau z G^2 - z G + 1 = 0
    Complex disc = std::sqrt(z * z - 4.0 * tau * z);
    Complex r1 = (z + disc) / (2.0 * tau * z);
    Complex r2 = (z - disc) / (2.0 * tau * z);
    double d = std::min(std::abs(g - r1), std::abs(g - r2));
    REQUIRE(d <= 1e-12 * (1.0 + std::abs(g)));
    REQUIRE(g.imag() <= 1e-12);
  }
}

TEST_CASE("resolvent respects conjugation symmetry") {
  ResolventQuery q{Complex(1.0, 0.3), 0.5, 1.0, 1.0};
  ResolventQuery qc{std::conj(q.z), 0.5, 1.0, 1.0};
  Complex g = wishart::solve_G(q).first;
  Complex gc = wishart::solve_G(qc).first;
  REQUIRE(std::abs(gc - std::conj(g)) <= 1e-13 * (1.0 + std::abs(g)));
}

TEST_CASE("boundary values have nonpositive imaginary part") {
  for (double tau : {0.5, 1.0, 2.0}) {
    for (double lam : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      for (double ep : {1e-9, 1e-6}) {
        ResolventQuery q{Complex(lam, ep), tau, 1.0, 1.0};
        Complex g = wishart::solve_G(q).first;
        REQUIRE(g.imag() <= 1e-12);
      }
    }
  }
}

TEST_CASE("branch certificates record genuine roots") {
  ResolventQuery q{Complex(1.8, 0.4), 0.9, 1.0, 1.1};
  auto [g, cert] = wishart::solve_G(q);
  auto c = wishart::cubic_coefficients(q);
  int real_roots = 0;
  for (Complex root : cert.all_roots) {
    if (std::isnan(root.real())) continue;
    ++real_roots;
    double scale = 1.0 + std::abs(root) * std::abs(root) * std::abs(root);
    REQUIRE(std::abs(eval_cubic(c, root)) <= 1e-6 * scale);
  }
  REQUIRE(real_roots == 3);
  REQUIRE(cert.chosen_index >= 0);
  REQUIRE(cert.chosen_index < 3);
  REQUIRE(std::abs(cert.all_roots[cert.chosen_index] - g) <= 1e-9 * (1.0 + std::abs(g)));
}

TEST_CASE("warm continuation agrees with the tracked solve") {
  ResolventQuery seed_q{Complex(2.0, 0.011), 0.8, 1.0, 1.0};
  Complex seed = wishart::solve_G(seed_q).first;
  ResolventQuery q{Complex(2.0, 0.01), 0.8, 1.0, 1.0};
  Complex cold = wishart::solve_G(q).first;
  Complex warm = wishart::detail::solve_warm(q, seed, true).first;
  REQUIRE(std::abs(warm - cold) <= 1e-10 * (1.0 + std::abs(cold)));
}

TEST_CASE("shock front reproduces frozen edge positions") {
  SECTION("critical point tau = 1, a = 1") {
    auto sf = wishart::shock_positions(1.0, 1.0);
    REQUIRE(sf.critical);
    REQUIRE(std::fabs(sf.edges[0] - 0.0) <= 1e-12);
    REQUIRE(std::fabs(sf.edges[1] - 6.75) <= 1e-12);
    REQUIRE(std::fabs(sf.preimages[0] + 1.0) <= 1e-7);
    REQUIRE(std::fabs(sf.preimages[1] + 1.0) <= 1e-7);
    REQUIRE(std::fabs(sf.preimages[2] - 2.0) <= 1e-9);
  }
  SECTION("pre-critical tau = 0.5, a = 1") {
    auto sf = wishart::shock_positions(0.5, 1.0);
    REQUIRE_FALSE(sf.critical);
    REQUIRE(std::fabs(sf.edges[0] - 0.028350136) <= 2e-9);
    REQUIRE(std::fabs(sf.edges[1] - 4.4091499) <= 2e-7);
  }
  SECTION("post-critical tau = 2, a = 1") {
    auto sf = wishart::shock_positions(2.0, 1.0);
    REQUIRE(sf.critical);
    REQUIRE(std::fabs(sf.edges[0] - 0.0) <= 1e-12);
    REQUIRE(std::fabs(sf.edges[1] - 11.090169943749475) <= 1e-12);
  }
  SECTION("small tau support brackets the initial eigenvalue") {
    auto sf = wishart::shock_positions(0.1, 1.0);
    REQUIRE(std::fabs(sf.edges[0] - 0.3375) <= 1e-12);
    REQUIRE(std::fabs(sf.edges[1] - 2.16) <= 1e-12);
  }
  SECTION("tau = 0 collapses to the point spectrum") {
    auto sf = wishart::shock_positions(0.0, 1.5);
    REQUIRE(sf.edges[0] == 2.25);
    REQUIRE(sf.edges[1] == 2.25);
  }
  SECTION("every edge is the image of a shock preimage") {
    for (double tau : {0.3, 1.0, 1.7}) {
      auto sf = wishart::shock_positions(tau, 1.0);
      for (double edge : sf.edges) {
        double best = 1e300;
        for (double x : sf.preimages) {
          if (std::fabs(x) < 1e-12) continue;
          double img = wishart::characteristic_map(Complex(x, 0.0), tau, 1.0, 1.0).real();
          best = std::min(best, std::fabs(std::max(img, 0.0) - edge));
        }
        REQUIRE(best <= 1e-9 * (1.0 + edge));
      }
    }
  }
}

TEST_CASE("the lower edge reaches the wall at tau = a squared") {
  double lo = 0.5, hi = 2.0;  // a = 1
  auto detached = [](double tau) {
    return wishart::shock_positions(tau, 1.0).edges[0] > 0.0;
  };
  REQUIRE(detached(lo));
  REQUIRE_FALSE(detached(hi));
  for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
    double mid = 0.5 * (lo + hi);
    (detached(mid) ? lo : hi) = mid;
  }
  REQUIRE(std::fabs(0.5 * (lo + hi) - 1.0) <= 1e-6);
}

TEST_CASE("characteristic map special values and preconditions") {
  Complex img = wishart::characteristic_map(Complex(0.0, 1.0), 1.0, 1.0, 1.0);
  REQUIRE(std::abs(img - Complex(2.0, -2.0)) <= 1e-14);
  REQUIRE_THROWS_AS(wishart::characteristic_map(Complex(0.0, 0.0), 1.0, 1.0, 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::characteristic_map(Complex(1.0, 0.0), -0.5, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("support edges match Marchenko-Pastur for a = 0") {
  SECTION("square case r = 1") {
    auto [lo, hi] = wishart::support_edges(1.0, 0.0, 1.0);
    REQUIRE(std::fabs(lo - 0.0) <= 1e-10);
    REQUIRE(std::fabs(hi - 4.0) <= 1e-10);
  }
  SECTION("rectangular case r = 1/2") {
    const double tau = 0.8, r = 0.5;
    auto [lo, hi] = wishart::support_edges(tau, 0.0, r);
    double sq = std::sqrt(r);
    REQUIRE(std::fabs(lo - tau * (1.0 - sq) * (1.0 - sq)) <= 1e-6);
    REQUIRE(std::fabs(hi - tau * (1.0 + sq) * (1.0 + sq)) <= 1e-6);
  }
}

TEST_CASE("density reproduces the a = 0 closed form") {
  std::vector<double> grid{0.5, 1.0, 2.0, 3.0, 3.8};
  auto curve = wishart::density(1.0, 0.0, 1.0, grid, 1e-6);
  for (std::size_t i = 0; i < grid.size(); ++i)
    REQUIRE(std::fabs(curve.rho[i] - rho_mp(grid[i], 1.0)) <= 1e-8);
  REQUIRE(curve.normalization_defect <= 1e-6);
  REQUIRE(curve.tau == 1.0);
}

TEST_CASE("density at rectangular ratio normalizes and localizes") {
  const double tau = 0.7, a = 1.0, r = 0.5;
  auto [lo, hi] = wishart::support_edges(tau, a, r);
  REQUIRE(lo > 0.0);
  REQUIRE(hi > lo);
  std::vector<double> grid{std::max(lo - 0.05, 1e-3), 0.5 * (lo + hi), hi + 0.05};
  auto curve = wishart::density(tau, a, r, grid, 1e-6);
  REQUIRE(curve.rho[0] <= 1e-9);
  REQUIRE(curve.rho[1] > 0.05);
  REQUIRE(curve.rho[2] <= 1e-9);
  REQUIRE(curve.normalization_defect <= 1e-6);
}

TEST_CASE("density vanishes outside the support at small tau") {
  std::vector<double> grid{0.2, 0.5, 1.0, 2.3};
  auto curve = wishart::density(0.1, 1.0, 1.0, grid, 1e-6);
  REQUIRE(curve.rho[0] <= 1e-9);   // below the lower edge 0.3375
  REQUIRE(curve.rho[1] > 0.05);    // inside
  REQUIRE(curve.rho[2] > 0.05);    // inside
  REQUIRE(curve.rho[3] <= 1e-9);   // above the upper edge 2.16
  REQUIRE(std::fabs(curve.rho[1] - wishart::characteristics_density(0.1, 1.0, 0.5)) <= 1e-7);
}

TEST_CASE("characteristics reconstruction agrees with the branch-tracked density") {
  SECTION("pre-critical ensemble") {
    std::vector<double> grid{0.3, 1.0, 1.7, 2.5, 3.3, 4.2};
    auto curve = wishart::density(0.5, 1.0, 1.0, grid, 1e-6);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double rc = wishart::characteristics_density(0.5, 1.0, grid[i]);
      REQUIRE(std::fabs(rc - curve.rho[i]) <= 1e-7);
    }
    REQUIRE(std::fabs(wishart::characteristics_density(0.5, 1.0, 1.7) - 0.246334737694) <=
            1e-9);
  }
  SECTION("post-critical ensemble") {
    std::vector<double> grid{0.5, 3.0, 8.0};
    auto curve = wishart::density(2.0, 1.0, 1.0, grid, 1e-6);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double rc = wishart::characteristics_density(2.0, 1.0, grid[i]);
      REQUIRE(std::fabs(rc - curve.rho[i]) <= 1e-7);
    }
  }
  SECTION("free case lands on Marchenko-Pastur") {
    for (double lam : {0.5, 2.0, 3.5}) {
      double rc = wishart::characteristics_density(1.0, 0.0, lam);
      REQUIRE(std::fabs(rc - rho_mp(lam, 1.0)) <= 1e-9);
    }
  }
  SECTION("vanishes outside the support") {
    REQUIRE(wishart::characteristics_density(0.5, 1.0, 7.0) == 0.0);
    REQUIRE(wishart::characteristics_density(0.5, 1.0, 0.01) == 0.0);
  }
}

TEST_CASE("critical exponent probe recovers the wall exponent") {
  double slope = wishart::critical_exponent_probe(1.0, 12);
  REQUIRE(std::fabs(slope + 1.0 / 3.0) <= 0.02);
}

TEST_CASE("resolvent preconditions are enforced") {
  REQUIRE_THROWS_AS(wishart::solve_G({Complex(1.0, 0.0), -1.0, 1.0, 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::solve_G({Complex(1.0, 0.0), 1.0, 0.0, 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::solve_G({Complex(1.0, 0.0), 1.0, 1.5, 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::solve_G({Complex(1.0, 0.0), 1.0, 1.0, -0.1}),
                    std::invalid_argument);
  double nan = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(wishart::solve_G({Complex(nan, 0.0), 1.0, 1.0, 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::density(1.0, 1.0, 1.0, {1.0}, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::density(0.0, 1.0, 1.0, {1.0}, 1e-6), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::critical_exponent_probe(0.0, 12), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::critical_exponent_probe(1.0, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::support_edges(0.0, 1.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::characteristics_density(0.0, 1.0, 1.0),
                    std::invalid_argument);
}
