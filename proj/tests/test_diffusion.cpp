#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "wishart/diffusion.hpp"
#include "wishart/specfun.hpp"

using wishart::Complex;
using wishart::EnsembleParams;

namespace {

double rho_mp(double lambda, double tau) {
  if (lambda <= 0.0 || lambda >= 4.0 * tau) return 0.0;
  return std::sqrt((4.0 * tau - lambda) / lambda) / (2.0 * wishart::kPi * tau);
}

}  // namespace

TEST_CASE("macroscopic time maps to raw diffusion time") {
  EnsembleParams p;
  p.N = 50;
  p.M = 100;
  REQUIRE(wishart::macro_to_raw_time(1.0, p) == 0.01);
  REQUIRE(wishart::macro_to_raw_time(0.0, p) == 0.0);
  p.N = 400;
  p.M = 400;
  REQUIRE(wishart::macro_to_raw_time(1.0, p) == 0.0025);
}

TEST_CASE("initial sample is the degenerate spectrum") {
  EnsembleParams p;
  p.N = 3;
  p.M = 5;
  p.a = 2.0;
  auto s = wishart::init_sample(p);
  REQUIRE(s.K.rows() == 5);
  REQUIRE(s.K.cols() == 3);
  REQUIRE(s.K(0, 0) == Complex(2.0, 0.0));
  REQUIRE(s.K(2, 2) == Complex(2.0, 0.0));
  REQUIRE(s.K(3, 0) == Complex(0.0, 0.0));
  Eigen::MatrixXcd expect = 4.0 * Eigen::MatrixXcd::Identity(3, 3);
  REQUIRE((s.L - expect).cwiseAbs().maxCoeff() == 0.0);
  for (double ev : s.eigenvalues) REQUIRE(ev == 4.0);

  p.a = 0.0;
  auto z = wishart::init_sample(p);
  for (double ev : z.eigenvalues) REQUIRE(ev == 0.0);

  EnsembleParams sq;
  sq.N = 2;
  sq.M = 2;
  sq.a = 1.0;
  auto id = wishart::init_sample(sq);
  REQUIRE(id.eigenvalues == std::vector<double>{1.0, 1.0});
}

TEST_CASE("evolution is deterministic per stream") {
  EnsembleParams p;
  p.N = 3;
  p.M = 4;
  p.a = 1.0;
  auto base = wishart::init_sample(p);
  wishart::RngStream r1(42, 7), r2(42, 7), r3(42, 8);
  auto s1 = wishart::evolve(base, 0.1, 2, r1);
  auto s2 = wishart::evolve(base, 0.1, 2, r2);
  auto s3 = wishart::evolve(base, 0.1, 2, r3);
  REQUIRE((s1.K - s2.K).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s1.eigenvalues == s2.eigenvalues);
  REQUIRE((s1.K - s3.K).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("scalar evolution has the Brownian mean") {
  EnsembleParams p;
  p.N = 1;
  p.M = 1;
  p.a = 0.0;
  const double raw_dt = 0.37;
  const int n = 4000;
  auto base = wishart::init_sample(p);
  std::vector<double> vals(n);
  for (int t = 0; t < n; ++t) {
    wishart::RngStream rng(2024, static_cast<std::uint64_t>(t));
    vals[static_cast<std::size_t>(t)] =
        wishart::evolve(base, raw_dt, 1, rng).eigenvalues[0];
  }
  double mean = wishart::detail::pairwise_sum(vals) / n;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  double stderr_m = std::sqrt(ss / (static_cast<double>(n) * (n - 1.0)));
  REQUIRE(std::fabs(mean - raw_dt) <= 3.0 * stderr_m);
}

TEST_CASE("trace growth matches the Ito oracle") {
  EnsembleParams p;
  p.N = 2;
  p.M = 4;
  p.a = 1.0;
  p.tau = 1.0;
  const double raw_dt = wishart::macro_to_raw_time(p.tau, p);
  const int n = 1500;
  auto base = wishart::init_sample(p);
  std::vector<double> traces(n);
  for (int t = 0; t < n; ++t) {
    wishart::RngStream rng(515151, static_cast<std::uint64_t>(t));
    traces[static_cast<std::size_t>(t)] =
        wishart::evolve(base, raw_dt, 1, rng).L.trace().real();
  }
  double mean = wishart::detail::pairwise_sum(traces) / n;
  double ss = 0.0;
  for (double v : traces) ss += (v - mean) * (v - mean);
  double stderr_m = std::sqrt(ss / (static_cast<double>(n) * (n - 1.0)));
  double expect = p.N * p.a * p.a + p.N * p.M * raw_dt;
  REQUIRE(std::fabs(mean - expect) <= 4.0 * stderr_m);
}

TEST_CASE("acp at tau zero is the exact initial polynomial") {
  EnsembleParams p;
  p.N = 3;
  p.M = 5;
  p.a = 1.5;
  p.tau = 0.0;
  p.seed = 9;
  std::vector<Complex> grid{Complex(2.0, 0.0), Complex(0.5, 0.5)};
  auto stats = wishart::estimate_acp(p, grid, 16);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Complex z = grid[k];
    Complex expect = std::pow(z - 2.25, 3.0);
    REQUIRE(std::abs(stats.acp_mean[k] - expect) <= 1e-12 * (1.0 + std::abs(expect)));
    REQUIRE(stats.acp_stderr[k] == Complex(0.0, 0.0));
  }
  REQUIRE(stats.trace_mean == 3 * 2.25);
}

TEST_CASE("acp matches the degree-one closed form") {
  EnsembleParams p;
  p.N = 1;
  p.M = 3;
  p.a = 1.0;
  p.tau = 0.5;
  p.seed = 30303;
  std::vector<Complex> grid{Complex(2.0, 0.0), Complex(0.3, 1.0)};
  auto stats = wishart::estimate_acp(p, grid, 4000);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Complex expect = grid[k] - 1.0 - 0.5;
    REQUIRE(std::fabs(stats.acp_mean[k].real() - expect.real()) <=
            3.0 * stats.acp_stderr[k].real() + 1e-12);
    REQUIRE(std::fabs(stats.acp_mean[k].imag() - expect.imag()) <=
            3.0 * stats.acp_stderr[k].imag() + 1e-12);
  }
}

TEST_CASE("acp is real on the real axis") {
  EnsembleParams p;
  p.N = 2;
  p.M = 2;
  p.a = 1.0;
  p.tau = 0.8;
  p.seed = 777;
  auto stats = wishart::estimate_acp(p, {Complex(3.0, 0.0)}, 2000);
  REQUIRE(std::fabs(stats.acp_mean[0].imag()) <=
          3.0 * stats.acp_stderr[0].imag() + 1e-12);
}

TEST_CASE("statistics are bit-identical across runs and thread counts") {
  EnsembleParams p;
  p.N = 2;
  p.M = 3;
  p.a = 1.0;
  p.tau = 0.7;
  p.seed = 99;
  std::vector<Complex> grid{Complex(1.5, 0.0), Complex(2.0, 0.25)};
  auto one = wishart::estimate_acp(p, grid, 200);
  auto two = wishart::estimate_acp(p, grid, 200);
  REQUIRE(one.acp_mean == two.acp_mean);
  REQUIRE(one.acp_stderr == two.acp_stderr);
  REQUIRE(one.eigenvalue_pool == two.eigenvalue_pool);
  REQUIRE(one.trace_mean == two.trace_mean);

  setenv("WISHART_LAB_THREADS", "3", 1);
  auto threaded = wishart::estimate_acp(p, grid, 200);
  unsetenv("WISHART_LAB_THREADS");
  REQUIRE(one.acp_mean == threaded.acp_mean);
  REQUIRE(one.acp_stderr == threaded.acp_stderr);
  REQUIRE(one.eigenvalue_pool == threaded.eigenvalue_pool);
  REQUIRE(one.trace_mean == threaded.trace_mean);
}

TEST_CASE("eigenvalues stay nonnegative ordered and trace-consistent") {
  EnsembleParams p;
  p.N = 10;
  p.M = 12;
  p.a = 1.0;
  wishart::RngStream rng(5, 0);
  auto s = wishart::evolve(wishart::init_sample(p), 0.1, 1, rng);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
    REQUIRE(s.eigenvalues[i] >= 0.0);
    if (i > 0) REQUIRE(s.eigenvalues[i] >= s.eigenvalues[i - 1]);
    sum += s.eigenvalues[i];
  }
  REQUIRE(std::fabs(sum - s.L.trace().real()) <= 1e-10 * std::max(1.0, s.L.norm()));
  REQUIRE((s.L - s.L.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("histogram estimator normalizes and reports outside mass") {
  wishart::TrialStatistics stats;
  stats.n_trials = 1;
  stats.eigenvalue_pool = {2.0, 2.0, 2.0};
  auto curve = wishart::estimate_density(stats, 4, {0.0, 4.0});
  REQUIRE(curve.rho[2] == 1.0);  // bin [2,3), width 1, all mass
  REQUIRE(curve.rho[0] == 0.0);
  REQUIRE(curve.outside_mass == 0.0);
  REQUIRE(curve.normalization_defect <= 1e-15);
  REQUIRE(curve.lambda[2] == 2.5);

  stats.eigenvalue_pool = {-1.0, 0.5, 9.0};
  auto partial = wishart::estimate_density(stats, 2, {0.0, 1.0});
  REQUIRE(std::fabs(partial.outside_mass - 2.0 / 3.0) <= 1e-15);
}

TEST_CASE("empirical spectrum approaches the free closed form") {
  EnsembleParams p;
  p.N = 60;
  p.M = 60;
  p.a = 0.0;
  p.tau = 1.0;
  p.seed = 4242;
  auto stats = wishart::estimate_acp(p, {}, 50);
  const int bins = 20;
  auto curve = wishart::estimate_density(stats, bins, {0.0, 4.0});
  double l1 = 0.0;
  const double width = 4.0 / bins;
  for (int b = 0; b < bins; ++b) {
    double lo = b * width, hi = lo + width;
    double mass = wishart::integrate_tanh_sinh(
        [&](double lam) { return rho_mp(lam, 1.0); }, lo, hi, 1e-9, 10);
    l1 += std::fabs(curve.rho[static_cast<std::size_t>(b)] * width - mass);
  }
  l1 += curve.outside_mass;
  REQUIRE(l1 < 0.15);
}

TEST_CASE("smallest eigenvalue shrinks with the spacing exponent") {
  auto fit = wishart::smallest_eigenvalue_fit(1.0, {32, 64, 128}, 100, 8181);
  REQUIRE(fit.mean_smallest[0] > fit.mean_smallest[1]);
  REQUIRE(fit.mean_smallest[1] > fit.mean_smallest[2]);
  REQUIRE(fit.exponent <= -1.2);
  REQUIRE(fit.exponent >= -1.8);
}

TEST_CASE("diffusion preconditions are enforced") {
  EnsembleParams bad;
  bad.N = 0;
  REQUIRE_THROWS_AS(wishart::init_sample(bad), std::invalid_argument);
  bad.N = 3;
  bad.M = 2;
  REQUIRE_THROWS_AS(wishart::init_sample(bad), std::invalid_argument);

  EnsembleParams p;
  p.N = 1;
  p.M = 1;
  auto s = wishart::init_sample(p);
  wishart::RngStream rng(1, 0);
  REQUIRE_THROWS_AS(wishart::evolve(s, 0.0, 1, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::evolve(s, 0.1, 0, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::estimate_acp(p, {Complex(1.0, 0.0)}, 1),
                    std::invalid_argument);

  wishart::TrialStatistics empty;
  REQUIRE_THROWS_AS(wishart::estimate_density(empty, 4, {0.0, 1.0}),
                    std::invalid_argument);
  wishart::TrialStatistics ok;
  ok.eigenvalue_pool = {1.0};
  REQUIRE_THROWS_AS(wishart::estimate_density(ok, 0, {0.0, 1.0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::estimate_density(ok, 4, {1.0, 1.0}),
                    std::invalid_argument);

  REQUIRE_THROWS_AS(wishart::smallest_eigenvalue_fit(0.0, {8, 16}, 10, 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::smallest_eigenvalue_fit(1.0, {8}, 10, 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(wishart::smallest_eigenvalue_fit(1.0, {8, 16}, 1, 1),
                    std::invalid_argument);
}
