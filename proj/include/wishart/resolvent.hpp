#pragma once

// Large-N spectral machinery: the implicit cubic for the resolvent G(z, tau),
// branch-tracked density, shock/edge dynamics of the characteristic map, the
// critical-exponent probe at the wall, and the complex-characteristics
// density reconstruction.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "wishart/common.hpp"
#include "wishart/specfun.hpp"

namespace wishart {

struct ResolventQuery {
  Complex z;
  double tau = 0.0;
  double r = 1.0;  // rectangularity N/M
  double a = 0.0;  // initial eigenvalue is a^2
};

enum class BranchCriterion { asymptotic_inverse_z, continuity, upper_half_plane_sign };

// Records every root of the governing polynomial at the query point and how
// the physical one was selected. Slots beyond the actual root count (tau = 0
// degenerates to a single root) are NaN.
struct BranchCertificate {
  std::array<Complex, 3> all_roots;
  int chosen_index = 0;
  BranchCriterion criterion = BranchCriterion::continuity;
  double residual = 0.0;
};

struct ShockFront {
  double tau = 0.0;
  std::vector<double> preimages;  // real roots z0c of the shock cubic, ascending
  std::vector<double> edges;      // physical spectral edges {lower, upper}
  bool critical = false;          // an edge lies at the wall
};

// Ascending coefficients {c0, c1, c2, c3} of the cubic in G implied by
// z = 1/G + tau/(1 - r tau G) + a^2/(1 - r tau G)^2.
inline std::array<Complex, 4> cubic_coefficients(const ResolventQuery& q) {
  const double rt = q.r * q.tau;
  return {Complex(-1.0, 0.0),
          q.z + 2.0 * rt - q.tau - q.a * q.a,
          Complex(rt * (q.tau - rt), 0.0) - 2.0 * rt * q.z,
          rt * rt * q.z};
}

// Characteristic curve z(z0): the image of the initial point z0 after time
// tau. Shocks (spectral edges) sit where dz/dz0 = 0.
inline Complex characteristic_map(Complex z0, double tau, double r, double a) {
  if (z0 == Complex(0.0, 0.0))
    throw std::invalid_argument("characteristic_map: z0 must be nonzero");
  if (!(tau >= 0.0)) throw std::invalid_argument("characteristic_map: tau >= 0");
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("characteristic_map: r in (0,1]");
  const double rt = r * tau;
  return (z0 + rt) * (1.0 + tau / z0 + a * a * (rt + z0) / (z0 * z0));
}

namespace detail {

// Durand-Kerner root finder for small dense polynomials (ascending complex
// coefficients), followed by Newton polishing on the original coefficients.
inline std::vector<Complex> durand_kerner(const std::vector<Complex>& coeffs) {
  int n = static_cast<int>(coeffs.size()) - 1;
  while (n > 0 && std::abs(coeffs[n]) == 0.0) --n;
  if (n <= 0) return {};
  std::vector<Complex> b(n + 1);
  for (int k = 0; k <= n; ++k) b[k] = coeffs[k] / coeffs[n];
  double radius = 1.0;
  for (int k = 0; k < n; ++k) radius = std::max(radius, std::abs(b[k]));
  radius = 1.0 + radius;
  std::vector<Complex> x(n);
  for (int k = 0; k < n; ++k) {
    double th = 2.0 * kPi * k / n + 0.5;
    x[k] = radius * Complex(std::cos(th), std::sin(th));
  }
  auto eval_monic = [&](Complex t) {
    Complex v(1.0, 0.0);
    for (int k = n - 1; k >= 0; --k) v = v * t + b[k];
    return v;
  };
  for (int it = 0; it < 200; ++it) {
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
      Complex denom(1.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != k) denom *= x[k] - x[j];
      if (denom == Complex(0.0, 0.0)) denom = Complex(1e-16, 0.0);
      Complex step = eval_monic(x[k]) / denom;
      x[k] -= step;
      worst = std::max(worst, std::abs(step) / (1.0 + std::abs(x[k])));
    }
    if (worst < 1e-14) break;
  }
  // Newton polish against the original (unnormalized) coefficients.
  for (int k = 0; k < n; ++k) {
    for (int it = 0; it < 3; ++it) {
      Complex p(0.0, 0.0), dp(0.0, 0.0);
      for (int j = n; j >= 0; --j) {
        dp = dp * x[k] + p;
        p = p * x[k] + coeffs[j];
      }
      if (dp == Complex(0.0, 0.0)) break;
      Complex step = p / dp;
      if (!(std::abs(step) < 1.0 + std::abs(x[k]))) break;
      x[k] -= step;
    }
  }
  return x;
}

// Candidate physical roots of the governing equation at (z; tau, r, a). The
// a = 0 cubic factors as (r tau G - 1)(r tau z G^2 + (tau(1-r) - z)G + 1);
// the first factor's root 1/(r tau) is a spurious constant solution, so only
// the quadratic's roots are candidates there.
inline std::vector<Complex> branch_candidates(const ResolventQuery& q, Complex z) {
  if (q.tau == 0.0) return {1.0 / (z - q.a * q.a)};
  if (q.a == 0.0) {
    Complex A = q.r * q.tau * z;
    Complex B = Complex(q.tau * (1.0 - q.r), 0.0) - z;
    Complex C(1.0, 0.0);
    if (std::abs(A) <= 1e-300 * (std::abs(B) + 1.0)) return {-C / B};
    Complex sq = std::sqrt(B * B - 4.0 * A * C);
    if (std::real(std::conj(B) * sq) < 0.0) sq = -sq;
    Complex Q = -0.5 * (B + sq);
    if (Q == Complex(0.0, 0.0)) return {-B / A};
    return {Q / A, C / Q};
  }
  ResolventQuery qq = q;
  qq.z = z;
  auto c = cubic_coefficients(qq);
  double lead = std::abs(c[3]);
  double rest = std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]);
  if (lead <= 1e-4 * rest) {
    // near-degenerate leading coefficient (|z| tiny): solve the reversed
    // polynomial in H = 1/G, whose leading coefficient is -1
    auto h_roots = durand_kerner({c[3], c[2], c[1], c[0]});
    std::vector<Complex> out;
    for (Complex h : h_roots)
      if (std::abs(h) > 1e-150) out.push_back(1.0 / h);
    if (!out.empty()) return out;
  }
  return durand_kerner({c[0], c[1], c[2], c[3]});
}

// All roots of the full cubic at z (certificate payload); for a = 0 this
// includes the spurious 1/(r tau) factor root.
inline std::array<Complex, 3> certificate_roots(const ResolventQuery& q, Complex z) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::array<Complex, 3> out{Complex(nan, nan), Complex(nan, nan), Complex(nan, nan)};
  std::vector<Complex> roots = branch_candidates(q, z);
  if (q.tau > 0.0 && q.a == 0.0) roots.push_back(Complex(1.0 / (q.r * q.tau), 0.0));
  for (std::size_t i = 0; i < roots.size() && i < 3; ++i) out[i] = roots[i];
  return out;
}

struct Nearest {
  int index = -1;
  double d1 = 0.0;
  double d2 = std::numeric_limits<double>::infinity();
};

inline Nearest nearest_root(const std::vector<Complex>& roots, Complex g) {
  Nearest n;
  n.d1 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
    double d = std::abs(roots[i] - g);
    if (d < n.d1) {
      n.d2 = n.d1;
      n.d1 = d;
      n.index = i;
    } else {
      n.d2 = std::min(n.d2, d);
    }
  }
  return n;
}

// Back-substitution defect of Eq z = 1/G + tau/(1-r tau G) + a^2/(1-r tau G)^2.
inline double implicit_residual(const ResolventQuery& q, Complex g) {
  Complex one_minus = 1.0 - q.r * q.tau * g;
  Complex rhs = 1.0 / g + q.tau / one_minus + q.a * q.a / (one_minus * one_minus);
  return std::abs(q.z - rhs);
}

inline Complex newton_polish_cubic(const ResolventQuery& q, Complex g) {
  auto c = cubic_coefficients(q);
  for (int it = 0; it < 3; ++it) {
    Complex p = ((c[3] * g + c[2]) * g + c[1]) * g + c[0];
    Complex dp = (3.0 * c[3] * g + 2.0 * c[2]) * g + c[1];
    if (dp == Complex(0.0, 0.0)) break;
    Complex step = p / dp;
    if (!(std::abs(step) < 0.5 * (1.0 + std::abs(g)))) break;
    g -= step;
  }
  return g;
}

}  // namespace detail

// Physical branch of the implicit cubic: anchored at G ~ 1/z high above the
// real axis and tracked down a vertical path to z by nearest-root
// continuation, with geometric step refinement whenever the nearest root is
// not clearly separated from the second-nearest.
inline std::pair<Complex, BranchCertificate> solve_G(const ResolventQuery& q) {
  if (!(q.tau >= 0.0)) throw std::invalid_argument("solve_G: tau >= 0");
  if (!(q.r > 0.0 && q.r <= 1.0)) throw std::invalid_argument("solve_G: r in (0,1]");
  if (!(q.a >= 0.0)) throw std::invalid_argument("solve_G: a >= 0");
  if (!std::isfinite(q.z.real()) || !std::isfinite(q.z.imag()))
    throw std::invalid_argument("solve_G: non-finite z");

  if (q.tau == 0.0) {
    Complex g = 1.0 / (q.z - q.a * q.a);
    BranchCertificate cert;
    cert.all_roots = detail::certificate_roots(q, q.z);
    cert.chosen_index = 0;
    cert.criterion = BranchCriterion::asymptotic_inverse_z;
    cert.residual = 0.0;
    return {g, cert};
  }

  if (q.z.imag() < 0.0) {
    ResolventQuery qc = q;
    qc.z = std::conj(q.z);
    auto [g, cert] = solve_G(qc);
    for (auto& root : cert.all_roots) root = std::conj(root);
    return {std::conj(g), cert};
  }

  const double y_target = q.z.imag();
  double R = 100.0 * std::max({1.0, std::abs(q.z), q.a * q.a + q.tau});
  Complex g;
  bool anchored = false;
  for (int attempt = 0; attempt < 3 && !anchored; ++attempt) {
    Complex zA(q.z.real(), R);
    auto roots = detail::branch_candidates(q, zA);
    auto near = detail::nearest_root(roots, 1.0 / zA);
    if (near.index >= 0 && near.d1 <= 0.3 * std::abs(1.0 / zA)) {
      g = roots[near.index];
      anchored = true;
    } else {
      R *= 10.0;
    }
  }
  if (!anchored) throw ContractViolation("solve_G: no asymptotic anchor found");

  BranchCriterion criterion =
      (y_target >= R) ? BranchCriterion::asymptotic_inverse_z : BranchCriterion::continuity;
  double y = R;
  const double zero_floor = 1e-13 * std::max(1.0, std::abs(q.z));
  bool fallback = false;
  int stalls = 0;
  while (y > y_target) {
    double y_next = std::max(0.75 * y, y_target);
    if (y_target == 0.0 && y_next <= zero_floor) y_next = 0.0;
    Complex zp(q.z.real(), y_next);
    auto roots = detail::branch_candidates(q, zp);
    auto near = detail::nearest_root(roots, g);
    bool ok = near.index >= 0 &&
              (roots.size() < 2 || near.d1 <= 0.45 * near.d2 || near.d1 == 0.0);
    if (ok) {
      g = roots[near.index];
      y = y_next;
      stalls = 0;
    } else {
      // ambiguity: halve the descent geometrically
      double mid = std::sqrt(y * std::max(y_next, zero_floor * 1e-3));
      if (!(mid < y) || ++stalls > 60) {
        fallback = true;
        break;
      }
      double retry = std::max(mid, y_target);
      zp = Complex(q.z.real(), retry);
      roots = detail::branch_candidates(q, zp);
      near = detail::nearest_root(roots, g);
      if (near.index >= 0 &&
          (roots.size() < 2 || near.d1 <= 0.45 * near.d2 || near.d1 == 0.0)) {
        g = roots[near.index];
        y = retry;
        stalls = 0;
      }
    }
  }

  if (fallback) {
    // Could not disambiguate by continuity; at the target choose the root on
    // the physical side (Im G <= 0 in the upper half-plane), nearest to the
    // last tracked value among those.
    criterion = BranchCriterion::upper_half_plane_sign;
    auto roots = detail::branch_candidates(q, q.z);
    int best = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(roots.size()); ++i) {
      if (roots[i].imag() <= 1e-9 * (1.0 + std::abs(roots[i]))) {
        double d = std::abs(roots[i] - g);
        if (d < bestd) {
          bestd = d;
          best = i;
        }
      }
    }
    if (best < 0) throw ContractViolation("solve_G: branch tracking failed");
    g = roots[best];
  }

  if (q.a != 0.0) g = detail::newton_polish_cubic(q, g);

  double res = detail::implicit_residual(q, g);
  if (!(res <= 1e-9 * (1.0 + std::abs(q.z))))
    throw ContractViolation("solve_G: back-substitution residual exceeds tolerance");
  if (q.z.imag() > 1e-14 && g.imag() > 1e-8 * (1.0 + std::abs(g)))
    throw ContractViolation("solve_G: physical branch has Im G > 0 in upper half-plane");

  BranchCertificate cert;
  cert.all_roots = detail::certificate_roots(q, q.z);
  auto near = detail::nearest_root(
      std::vector<Complex>(cert.all_roots.begin(), cert.all_roots.end()), g);
  cert.chosen_index = std::max(near.index, 0);
  cert.criterion = criterion;
  cert.residual = res;
  return {g, cert};
}

namespace detail {

// Nearest-root continuation from a seed (one polynomial solve); falls back to
// the full tracked solve when the seed does not cleanly select a root.
inline std::pair<Complex, BranchCertificate> solve_warm(const ResolventQuery& q,
                                                        Complex seed, bool have_seed) {
  if (have_seed && q.tau > 0.0) {
    ResolventQuery qq = q;
    if (q.z.imag() < 0.0) {
      qq.z = std::conj(q.z);
      seed = std::conj(seed);
    }
    auto roots = branch_candidates(qq, qq.z);
    auto near = nearest_root(roots, seed);
    if (near.index >= 0 && (roots.size() < 2 || near.d1 <= 0.45 * near.d2)) {
      Complex g = roots[near.index];
      if (qq.a != 0.0) g = newton_polish_cubic(qq, g);
      double res = implicit_residual(qq, g);
      bool physical =
          !(qq.z.imag() > 1e-14) || g.imag() <= 1e-8 * (1.0 + std::abs(g));
      if (res <= 1e-9 * (1.0 + std::abs(qq.z)) && physical) {
        BranchCertificate cert;
        cert.all_roots = certificate_roots(qq, qq.z);
        auto cnear = nearest_root(
            std::vector<Complex>(cert.all_roots.begin(), cert.all_roots.end()), g);
        cert.chosen_index = std::max(cnear.index, 0);
        cert.criterion = BranchCriterion::continuity;
        cert.residual = res;
        if (q.z.imag() < 0.0) {
          for (auto& root : cert.all_roots) root = std::conj(root);
          return {std::conj(g), cert};
        }
        return {g, cert};
      }
    }
  }
  return solve_G(q);
}

// Point density by Sochocki-Plemelj with two-point Richardson extrapolation
// in the regularization height.
inline double rho_point(double tau, double a, double r, double lambda, double eps,
                        Complex* seed_io) {
  double ep = std::min(eps, std::max(1e-12, 1e-3 * std::max(lambda, 0.0) + 1e-13));
  ResolventQuery q1{Complex(lambda, ep), tau, r, a};
  Complex g1 = solve_warm(q1, seed_io ? *seed_io : Complex(), seed_io != nullptr).first;
  ResolventQuery q2{Complex(lambda, 0.5 * ep), tau, r, a};
  Complex g2 = solve_warm(q2, g1, true).first;
  if (seed_io) *seed_io = g1;
  Complex gx = 2.0 * g2 - g1;
  return std::max(0.0, -gx.imag() / kPi);
}

}  // namespace detail

inline ShockFront shock_positions(double tau, double a) {
  if (!(tau >= 0.0)) throw std::invalid_argument("shock_positions: tau >= 0");
  if (!(a >= 0.0)) throw std::invalid_argument("shock_positions: a >= 0");
  ShockFront sf;
  sf.tau = tau;
  if (tau == 0.0) {
    sf.preimages = {0.0, 0.0, 0.0};
    sf.edges = {a * a, a * a};
    sf.critical = (a == 0.0);
    return sf;
  }
  // x^3 - tau(2a^2+tau) x - 2 a^2 tau^2 factors exactly as
  // (x + tau)(x^2 - tau x - 2 a^2 tau): three real roots in closed form.
  const double p = -tau * (2.0 * a * a + tau);
  const double q = -2.0 * a * a * tau * tau;
  const double s = std::sqrt(tau * tau + 8.0 * a * a * tau);
  const double x_minus = 0.5 * (tau - s);  // <= 0, zero only at a = 0
  const double x_plus = 0.5 * (tau + s);
  sf.preimages = {-tau, x_minus, x_plus};
  std::sort(sf.preimages.begin(), sf.preimages.end());
  const double scale = std::max({1.0, std::fabs(p), std::fabs(q)});
  for (double x : sf.preimages) {
    double res = std::fabs((x * x + p) * x + q);
    if (!(res <= 1e-10 * scale * std::max(1.0, std::fabs(x))))
      throw ContractViolation("shock_positions: root residual exceeds tolerance");
  }
  double upper = characteristic_map(Complex(x_plus, 0.0), tau, 1.0, a).real();
  double lower_raw = 0.0;
  if (std::fabs(x_minus) > 1e-12 * std::max(1.0, tau))
    lower_raw = characteristic_map(Complex(x_minus, 0.0), tau, 1.0, a).real();
  // lower_raw crosses zero with a cubic tangency at tau = a^2; its sign is
  // reliable far closer to the transition than any magnitude threshold
  sf.edges = {std::max(0.0, lower_raw), upper};
  sf.critical = lower_raw <= 0.0;
  return sf;
}

namespace detail {

inline std::vector<double> poly_mul(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  std::vector<double> out(x.size() + y.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) out[i + j] += x[i] * y[j];
  return out;
}

inline void poly_axpy(std::vector<double>& acc, double s, const std::vector<double>& x) {
  if (acc.size() < x.size()) acc.resize(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) acc[i] += s * x[i];
}

}  // namespace detail

// Support interval [lower, upper] of the spectral density. r = 1 uses the
// shock geometry; r < 1 finds the real caustics as roots of the cubic's
// discriminant (a quartic in z) and classifies the bands between them.
inline std::pair<double, double> support_edges(double tau, double a, double r) {
  if (!(tau > 0.0)) throw std::invalid_argument("support_edges: tau > 0");
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("support_edges: r in (0,1]");
  if (std::fabs(r - 1.0) <= 1e-12) {
    ShockFront sf = shock_positions(tau, a);
    return {sf.edges[0], sf.edges[1]};
  }
  const double rt = r * tau;
  std::vector<double> A{0.0, rt * rt};                    // c3(z)
  std::vector<double> B{rt * (tau - rt), -2.0 * rt};      // c2(z)
  std::vector<double> C{2.0 * rt - tau - a * a, 1.0};     // c1(z)
  std::vector<double> D{-1.0};                            // c0(z)
  // cubic discriminant: 18abcd - 4b^3 d + b^2 c^2 - 4 a c^3 - 27 a^2 d^2
  std::vector<double> disc;
  detail::poly_axpy(disc, 18.0, detail::poly_mul(detail::poly_mul(A, B), detail::poly_mul(C, D)));
  detail::poly_axpy(disc, -4.0, detail::poly_mul(detail::poly_mul(B, B), detail::poly_mul(B, D)));
  detail::poly_axpy(disc, 1.0, detail::poly_mul(detail::poly_mul(B, B), detail::poly_mul(C, C)));
  detail::poly_axpy(disc, -4.0, detail::poly_mul(A, detail::poly_mul(C, detail::poly_mul(C, C))));
  detail::poly_axpy(disc, -27.0, detail::poly_mul(detail::poly_mul(A, A), detail::poly_mul(D, D)));
  std::vector<Complex> cc(disc.begin(), disc.end());
  std::vector<double> cands{0.0};
  for (Complex root : detail::durand_kerner(cc)) {
    if (std::fabs(root.imag()) <= 1e-7 * (1.0 + std::fabs(root.real())) &&
        root.real() > 1e-12)
      cands.push_back(root.real());
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end(),
                          [](double x, double y) {
                            return std::fabs(x - y) <= 1e-9 * (1.0 + std::fabs(x));
                          }),
              cands.end());
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = lo;
  for (std::size_t i = 0; i + 1 < cands.size(); ++i) {
    double mid = 0.5 * (cands[i] + cands[i + 1]);
    double rho = detail::rho_point(tau, a, r, mid, 1e-9, nullptr);
    if (rho > 1e-7) {
      if (std::isnan(lo)) lo = cands[i];
      hi = cands[i + 1];
    }
  }
  if (std::isnan(lo))
    throw ContractViolation("support_edges: no support band located");
  return {lo, hi};
}

// Density on a caller grid by branch-tracked boundary values, with per-point
// regularization eps_pt = min(eps, ~1e-3 lambda) and Richardson
// extrapolation; the normalization defect is measured by a tanh-sinh sweep
// over the support.
inline DensityCurve density(double tau, double a, double r,
                            const std::vector<double>& lambda_grid, double eps) {
  if (!(tau > 0.0)) throw std::invalid_argument("density: tau > 0");
  if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("density: r in (0,1]");
  if (!(a >= 0.0)) throw std::invalid_argument("density: a >= 0");
  if (!(eps > 0.0 && eps <= 1e-3)) throw std::invalid_argument("density: eps in (0, 1e-3]");
  DensityCurve curve;
  curve.tau = tau;
  curve.lambda = lambda_grid;
  curve.rho.resize(lambda_grid.size(), 0.0);
  std::vector<std::size_t> order(lambda_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return lambda_grid[i] < lambda_grid[j]; });
  Complex seed;
  bool have_seed = false;
  for (std::size_t k : order) {
    Complex s = seed;
    curve.rho[k] = detail::rho_point(tau, a, r, lambda_grid[k], eps,
                                     have_seed ? &s : nullptr);
    seed = s;
    if (!have_seed) {
      // first solve re-derives the seed via the tracked path
      ResolventQuery q{Complex(lambda_grid[k], 1e-9), tau, r, a};
      seed = solve_G(q).first;
      have_seed = true;
    }
  }
  auto [lo, hi] = support_edges(tau, a, r);
  double mass = integrate_tanh_sinh(
      [&](double lam) { return detail::rho_point(tau, a, r, lam, eps, nullptr); }, lo,
      hi, 5e-8, 9);
  curve.normalization_defect = std::fabs(mass - 1.0);
  return curve;
}

// Appendix-B reconstruction: solve the characteristic system (the real and
// imaginary parts of map(z0) = lambda) for the complex initial point
// z0 = x + i y with y > 0, then rho = y / (pi ((tau+x)^2 + y^2)). The eta = 0
// locus reduces exactly to psi^2 - (tau^2 + 2 a^2 tau) psi - 2 a^2 tau^2 x = 0
// in psi = x^2 + y^2, which seeds damped Newton iterations on the complex map.
inline double characteristics_density(double tau, double a, double lambda) {
  if (!(tau > 0.0)) throw std::invalid_argument("characteristics_density: tau > 0");
  if (!(a >= 0.0)) throw std::invalid_argument("characteristics_density: a >= 0");
  ShockFront sf = shock_positions(tau, a);
  if (!(lambda > sf.edges[0] && lambda < sf.edges[1])) return 0.0;

  const double T2 = tau * tau + 2.0 * a * a * tau;
  auto lambda_of = [&](double x, double y) {
    return characteristic_map(Complex(x, y), tau, 1.0, a).real();
  };
  auto map_deriv = [&](Complex z0) {
    return 1.0 - tau * tau / (z0 * z0) -
           2.0 * a * a * tau * (z0 + tau) / (z0 * z0 * z0);
  };

  auto polish = [&](double x0, double y0, Complex& out) -> bool {
    Complex z0(x0, y0);
    for (int it = 0; it < 40; ++it) {
      Complex f = characteristic_map(z0, tau, 1.0, a) - lambda;
      if (std::abs(f) <= 1e-12 * (1.0 + std::fabs(lambda))) {
        out = z0;
        return z0.imag() > 1e-12;
      }
      Complex d = map_deriv(z0);
      if (d == Complex(0.0, 0.0)) return false;
      Complex step = f / d;
      double cap = 0.3 * (1.0 + std::abs(z0));
      if (std::abs(step) > cap) step *= cap / std::abs(step);
      Complex next = z0 - step;
      int halvings = 0;
      while (next.imag() <= 0.0 && halvings < 25) {
        step *= 0.5;
        next = z0 - step;
        ++halvings;
      }
      if (next.imag() <= 0.0) return false;
      z0 = next;
    }
    return false;
  };

  std::vector<Complex> found;
  auto scan_branch = [&](int sign, int nx) {
    // psi branch: psi = (T2 + sign*sqrt(T2^2 + 8 a^2 tau^2 x)) / 2
    double x_lo, x_hi;
    if (a == 0.0) {
      if (sign < 0) return;  // single branch psi = tau^2
      x_lo = -tau;
      x_hi = tau;
    } else {
      double xd = -T2 * T2 / (8.0 * a * a * tau * tau);
      x_lo = xd;
      x_hi = (sign > 0)
                 ? std::sqrt(T2) + 2.0 * std::cbrt(a * a * tau * tau) + tau + a + 1.0
                 : 0.0;
    }
    double prev_f = std::numeric_limits<double>::quiet_NaN();
    double prev_x = 0.0, prev_y = 0.0;
    for (int i = 0; i <= nx; ++i) {
      double x = x_lo + (x_hi - x_lo) * i / nx;
      double psi;
      if (a == 0.0) {
        psi = tau * tau;
      } else {
        double rad = T2 * T2 + 8.0 * a * a * tau * tau * x;
        if (rad < 0.0) {
          prev_f = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        psi = 0.5 * (T2 + sign * std::sqrt(rad));
      }
      double y2 = psi - x * x;
      if (!(y2 > 0.0)) {
        prev_f = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double y = std::sqrt(y2);
      double f = lambda_of(x, y) - lambda;
      if (!std::isnan(prev_f) && ((prev_f <= 0.0 && f >= 0.0) || (prev_f >= 0.0 && f <= 0.0))) {
        // bracketed along the branch: bisect, then polish in the complex plane
        double xa = prev_x, xb = x, ya = prev_y, yb = y;
        for (int bi = 0; bi < 50; ++bi) {
          double xm = 0.5 * (xa + xb);
          double psim;
          if (a == 0.0) {
            psim = tau * tau;
          } else {
            double rad = T2 * T2 + 8.0 * a * a * tau * tau * xm;
            psim = 0.5 * (T2 + sign * std::sqrt(std::max(rad, 0.0)));
          }
          double ym2 = psim - xm * xm;
          double ym = std::sqrt(std::max(ym2, 0.0));
          double fm = lambda_of(xm, ym) - lambda;
          if ((fm <= 0.0) == (prev_f <= 0.0)) {
            xa = xm;
            ya = ym;
          } else {
            xb = xm;
            yb = ym;
          }
        }
        Complex sol;
        if (polish(0.5 * (xa + xb), std::max(0.5 * (ya + yb), 1e-12), sol)) {
          bool dup = false;
          for (Complex seen : found)
            if (std::abs(seen - sol) <= 1e-7 * (1.0 + std::abs(sol))) dup = true;
          if (!dup) found.push_back(sol);
        }
      }
      prev_f = f;
      prev_x = x;
      prev_y = y;
    }
  };

  for (int nx : {1600, 6400}) {
    found.clear();
    scan_branch(+1, nx);
    scan_branch(-1, nx);
    if (!found.empty()) break;
  }
  if (found.empty())
    throw ContractViolation(
        "characteristics_density: no complex characteristic found inside support");
  double x = found.front().real(), y = found.front().imag();
  return y / (kPi * ((tau + x) * (tau + x) + y * y));
}

// Log-log slope of rho(lambda, tau = a^2) over lambda in [1e-6, 1e-2] a^2;
// the wall exponent. Returns the fitted slope (-1/3 at criticality).
inline double critical_exponent_probe(double a, int n_points) {
  if (!(a > 0.0)) throw std::invalid_argument("critical_exponent_probe: a > 0");
  if (n_points < 4) throw std::invalid_argument("critical_exponent_probe: n_points >= 4");
  const double tau = a * a;
  std::vector<double> lx, ly;
  for (int j = 0; j < n_points; ++j) {
    double expo = -6.0 + 4.0 * j / (n_points - 1.0);
    double lam = a * a * std::pow(10.0, expo);
    double rho = detail::rho_point(tau, a, 1.0, lam, 1e-10 * a * a, nullptr);
    if (rho > 0.0) {
      lx.push_back(std::log(lam));
      ly.push_back(std::log(rho));
    }
  }
  if (lx.size() < 3)
    throw ContractViolation("critical_exponent_probe: density vanished on the probe grid");
  double n = static_cast<double>(lx.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace wishart
