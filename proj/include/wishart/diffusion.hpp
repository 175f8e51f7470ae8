#pragma once

// Monte Carlo simulation of the diffusing complex Wishart ensemble: matrix
// Brownian motion K(tau), the induced L = K^dagger K, and empirical
// estimators for eigenvalue densities, traces, and the averaged
// characteristic polynomial <det(z - L)>.

#include <cstdint>
#include <cstdlib>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wishart/common.hpp"

namespace wishart {

struct EnsembleParams {
  int N = 1;             // columns of K; L is N x N
  int M = 1;             // rows of K; M >= N, nu = M - N
  double a = 0.0;        // initial spectrum is the N-fold eigenvalue a^2
  double tau = 0.0;      // macroscopic (rescaled) time
  std::uint64_t seed = 0;
};

struct WishartSample {
  Eigen::MatrixXcd K;
  Eigen::MatrixXcd L;                // K^dagger K, assembled exactly Hermitian
  std::vector<double> eigenvalues;   // ascending, clamped to >= 0
  long clamp_count = 0;              // negative-eigenvalue clamps applied
};

struct TrialStatistics {
  std::size_t n_trials = 0;
  std::vector<double> eigenvalue_pool;  // all sampled eigenvalues, trial order
  std::vector<Complex> z_grid;
  std::vector<Complex> acp_mean;        // sample mean of det(z - L) per grid point
  std::vector<Complex> acp_stderr;      // componentwise (re, im) standard errors
  double trace_mean = 0.0;
};

struct SmallestEigenvalueFit {
  std::vector<int> N_values;
  std::vector<double> mean_smallest;
  double exponent = 0.0;  // fitted log-log slope of mean smallest eigenvalue vs N
};

// Counter-based splittable RNG: per-stream state is a splitmix64-mixed
// function of (seed, stream), so trial streams are reproducible regardless
// of scheduling. Gaussians via Box-Muller with a cached spare.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : state_(detail::mix64(seed ^ detail::mix64(0x9E3779B97F4A7C15ULL * (stream + 1)))) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  // uniform on (0, 1]: never 0, so log() below is safe
  double uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // standard normal
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {

inline void validate(const EnsembleParams& p) {
  if (p.N < 1) throw std::invalid_argument("EnsembleParams: N >= 1");
  if (p.M < p.N) throw std::invalid_argument("EnsembleParams: M >= N");
  if (!(p.a >= 0.0)) throw std::invalid_argument("EnsembleParams: a >= 0");
  if (!(p.tau >= 0.0)) throw std::invalid_argument("EnsembleParams: tau >= 0");
}

inline int thread_count() {
  if (const char* env = std::getenv("WISHART_LAB_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1 && v <= 256) return v;
  }
  return 1;
}

}  // namespace detail

// Macroscopic time tau corresponds to raw diffusion time tau * r / N = tau / M.
inline double macro_to_raw_time(double tau, const EnsembleParams& params) {
  detail::validate(params);
  if (!(tau >= 0.0)) throw std::invalid_argument("macro_to_raw_time: tau >= 0");
  return tau / static_cast<double>(params.M);
}

namespace detail {

// L = K^dagger K symmetrized entry-exactly, eigenvalues ascending, tiny
// negatives clamped. The positivity contract (>= -1e-10 ||L||) is enforced
// before clamping.
inline void refresh_spectrum(WishartSample& s) {
  Eigen::MatrixXcd p = s.K.adjoint() * s.K;
  s.L = 0.5 * (p + p.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
  es.compute(s.L, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw ContractViolation("refresh_spectrum: eigensolver did not converge");
  const double scale = s.L.norm();
  s.eigenvalues.resize(static_cast<std::size_t>(s.L.rows()));
  for (Eigen::Index i = 0; i < s.L.rows(); ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-10 * std::max(scale, 1e-300))
      throw ContractViolation("refresh_spectrum: eigenvalue below positivity tolerance");
    if (ev < 0.0) {
      ev = 0.0;
      ++s.clamp_count;
    }
    s.eigenvalues[static_cast<std::size_t>(i)] = ev;
  }
}

}  // namespace detail

// Deterministic start: K(0) carries a on the diagonal of its top N x N block,
// so L(0) = a^2 Id exactly.
inline WishartSample init_sample(const EnsembleParams& params) {
  detail::validate(params);
  WishartSample s;
  s.K = Eigen::MatrixXcd::Zero(params.M, params.N);
  for (int i = 0; i < params.N; ++i) s.K(i, i) = params.a;
  s.L = Eigen::MatrixXcd::Identity(params.N, params.N) * (params.a * params.a);
  s.eigenvalues.assign(static_cast<std::size_t>(params.N), params.a * params.a);
  return s;
}

// Each step adds independent dx + i dy with dx, dy ~ Normal(0, raw_dt/2) to
// every entry of K (so <|dK_ij|^2> = raw_dt per step). The increments are
// exact Gaussians: `steps` exists to emit intermediate-time snapshots, not to
// control discretization error. Draw order is fixed (column-major) so results
// are reproducible.
inline WishartSample evolve(const WishartSample& sample, double raw_dt, int steps,
                            RngStream& rng) {
  if (!(raw_dt > 0.0)) throw std::invalid_argument("evolve: raw_dt > 0");
  if (steps < 1) throw std::invalid_argument("evolve: steps >= 1");
  WishartSample s = sample;
  const double sd = std::sqrt(0.5 * raw_dt);
  for (int step = 0; step < steps; ++step)
    for (Eigen::Index j = 0; j < s.K.cols(); ++j)
      for (Eigen::Index i = 0; i < s.K.rows(); ++i) {
        double dx = sd * rng.normal();
        double dy = sd * rng.normal();
        s.K(i, j) += Complex(dx, dy);
      }
  detail::refresh_spectrum(s);
  return s;
}

// Sample mean and componentwise standard error of det(z - L) over n_trials
// independent trajectories, plus the pooled eigenvalues and mean trace.
// Trials run on the per-trial RNG stream (seed, trial index); the reduction
// is a pairwise sum in trial order, so the result is bit-identical for any
// thread count.
inline TrialStatistics estimate_acp(const EnsembleParams& params,
                                    const std::vector<Complex>& z_grid, int n_trials) {
  detail::validate(params);
  if (n_trials < 2) throw std::invalid_argument("estimate_acp: n_trials >= 2");
  const std::size_t nz = z_grid.size();
  const std::size_t nt = static_cast<std::size_t>(n_trials);
  const std::size_t n_ev = static_cast<std::size_t>(params.N);
  std::vector<Complex> dets(nt * nz);
  std::vector<double> traces(nt);
  std::vector<double> pool(nt * n_ev);

  auto run_trial = [&](std::size_t t) {
    RngStream rng(params.seed, t);
    WishartSample s = init_sample(params);
    if (params.tau > 0.0)
      s = evolve(s, macro_to_raw_time(params.tau, params), 1, rng);
    traces[t] = s.L.trace().real();
    for (std::size_t i = 0; i < n_ev; ++i) pool[t * n_ev + i] = s.eigenvalues[i];
    for (std::size_t k = 0; k < nz; ++k) {
      Eigen::MatrixXcd A = -s.L;
      A.diagonal().array() += z_grid[k];
      dets[t * nz + k] = A.partialPivLu().determinant();
    }
  };

  int workers = std::min<int>(detail::thread_count(), n_trials);
  if (workers <= 1) {
    for (std::size_t t = 0; t < nt; ++t) run_trial(t);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        for (std::size_t t = static_cast<std::size_t>(w); t < nt;
             t += static_cast<std::size_t>(workers))
          run_trial(t);
      });
    for (auto& th : threads) th.join();
  }

  TrialStatistics stats;
  stats.n_trials = nt;
  stats.z_grid = z_grid;
  stats.eigenvalue_pool = std::move(pool);
  stats.trace_mean = detail::pairwise_sum(traces) / static_cast<double>(nt);
  stats.acp_mean.resize(nz);
  stats.acp_stderr.resize(nz);
  std::vector<Complex> column(nt);
  std::vector<double> dev_re(nt), dev_im(nt);
  for (std::size_t k = 0; k < nz; ++k) {
    for (std::size_t t = 0; t < nt; ++t) column[t] = dets[t * nz + k];
    Complex mean = detail::pairwise_sum(column) / static_cast<double>(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      Complex d = column[t] - mean;
      dev_re[t] = d.real() * d.real();
      dev_im[t] = d.imag() * d.imag();
    }
    double denom = static_cast<double>(nt) * static_cast<double>(nt - 1);
    stats.acp_mean[k] = mean;
    stats.acp_stderr[k] = Complex(std::sqrt(detail::pairwise_sum(dev_re) / denom),
                                  std::sqrt(detail::pairwise_sum(dev_im) / denom));
  }
  return stats;
}

// Normalized histogram of the pooled eigenvalues. The curve integrates to 1
// over the whole real line; mass falling outside `range` is reported in
// outside_mass rather than redistributed.
inline DensityCurve estimate_density(const TrialStatistics& stats, int bins,
                                     std::pair<double, double> range) {
  if (stats.eigenvalue_pool.empty())
    throw std::invalid_argument("estimate_density: eigenvalue pool is empty");
  if (bins < 1) throw std::invalid_argument("estimate_density: bins >= 1");
  if (!(range.first < range.second))
    throw std::invalid_argument("estimate_density: range must be nonempty");
  const double lo = range.first, hi = range.second;
  const double width = (hi - lo) / bins;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  double outside = 0.0;
  for (double ev : stats.eigenvalue_pool) {
    if (ev < lo || ev >= hi) {
      outside += 1.0;
      continue;
    }
    auto b = static_cast<std::size_t>((ev - lo) / width);
    if (b >= counts.size()) b = counts.size() - 1;
    counts[b] += 1.0;
  }
  const double total = static_cast<double>(stats.eigenvalue_pool.size());
  DensityCurve curve;
  curve.lambda.resize(counts.size());
  curve.rho.resize(counts.size());
  double mass_inside = 0.0;
  for (std::size_t b = 0; b < counts.size(); ++b) {
    curve.lambda[b] = lo + (b + 0.5) * width;
    curve.rho[b] = counts[b] / (total * width);
    mass_inside += curve.rho[b] * width;
  }
  curve.outside_mass = outside / total;
  curve.normalization_defect = std::fabs(mass_inside + curve.outside_mass - 1.0);
  return curve;
}

// Mean smallest eigenvalue at the critical time tau = a^2 across a ladder of
// matrix sizes (r = 1), with the fitted log-log slope. The hard-wall spacing
// law predicts slope -3/2.
inline SmallestEigenvalueFit smallest_eigenvalue_fit(double a,
                                                     const std::vector<int>& N_values,
                                                     int trials, std::uint64_t seed) {
  if (!(a > 0.0)) throw std::invalid_argument("smallest_eigenvalue_fit: a > 0");
  if (N_values.size() < 2)
    throw std::invalid_argument("smallest_eigenvalue_fit: need at least two sizes");
  if (trials < 2) throw std::invalid_argument("smallest_eigenvalue_fit: trials >= 2");
  SmallestEigenvalueFit fit;
  fit.N_values = N_values;
  fit.mean_smallest.resize(N_values.size());
  for (std::size_t idx = 0; idx < N_values.size(); ++idx) {
    const int n = N_values[idx];
    if (n < 1) throw std::invalid_argument("smallest_eigenvalue_fit: N >= 1");
    EnsembleParams p;
    p.N = n;
    p.M = n;
    p.a = a;
    p.tau = a * a;
    p.seed = detail::mix64(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(n)));
    const double raw_dt = macro_to_raw_time(p.tau, p);
    std::vector<double> smallest(static_cast<std::size_t>(trials));

    auto run_trial = [&](std::size_t t) {
      RngStream rng(p.seed, t);
      WishartSample s = evolve(init_sample(p), raw_dt, 1, rng);
      smallest[t] = s.eigenvalues.front();
    };
    int workers = std::min<int>(detail::thread_count(), trials);
    if (workers <= 1) {
      for (std::size_t t = 0; t < smallest.size(); ++t) run_trial(t);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(workers));
      for (int w = 0; w < workers; ++w)
        threads.emplace_back([&, w] {
          for (std::size_t t = static_cast<std::size_t>(w); t < smallest.size();
               t += static_cast<std::size_t>(workers))
            run_trial(t);
        });
      for (auto& th : threads) th.join();
    }
    fit.mean_smallest[idx] =
        detail::pairwise_sum(smallest) / static_cast<double>(trials);
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(N_values.size());
  for (std::size_t i = 0; i < N_values.size(); ++i) {
    double x = std::log(static_cast<double>(N_values[i]));
    double y = std::log(fit.mean_smallest[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

}  // namespace wishart
