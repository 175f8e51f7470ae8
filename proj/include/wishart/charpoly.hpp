#pragma once

// Exact finite-N averaged characteristic polynomial Q(z, tau) = <det(z - L)>:
// the semi-infinite integral representation with a Bessel kernel, an
// independent polynomial-coefficient evolution (the PDE acts on monomial
// coefficients as a nilpotent matrix), the diffusion PDE residual check, the
// time-dependent Laguerre special case, and the chiral lift.

#include <algorithm>
#include <cmath>
#include <vector>

#include "wishart/common.hpp"
#include "wishart/diffusion.hpp"
#include "wishart/specfun.hpp"

namespace wishart {

// Monic initial polynomial, represented by its roots with multiplicities.
// Roots must be closed under conjugation so that ensemble averages of
// det(z - L) stay real on the real axis.
struct InitialPolynomial {
  std::vector<std::pair<Complex, int>> roots;

  int degree() const {
    int d = 0;
    for (const auto& [root, mult] : roots) d += mult;
    return d;
  }
};

struct ACPContext {
  EnsembleParams params;
  InitialPolynomial init;
  QuadratureSpec quad;

  double nu() const { return static_cast<double>(params.M - params.N); }
};

namespace detail {

inline void validate_init(const InitialPolynomial& init, int n_expected) {
  if (init.degree() != n_expected)
    throw std::invalid_argument("InitialPolynomial: degree must equal N");
  for (const auto& [root, mult] : init.roots) {
    if (mult < 1) throw std::invalid_argument("InitialPolynomial: multiplicity >= 1");
    if (root.imag() == 0.0) continue;
    bool paired = false;
    for (const auto& [other, omult] : init.roots)
      if (omult == mult && std::abs(other - std::conj(root)) <=
                               1e-12 * (1.0 + std::abs(root)))
        paired = true;
    if (!paired)
      throw std::invalid_argument(
          "InitialPolynomial: complex roots must appear in conjugate pairs");
  }
}

}  // namespace detail

// Context for the fully degenerate start: initial polynomial (z - a^2)^N.
inline ACPContext make_context(const EnsembleParams& params) {
  detail::validate(params);
  ACPContext ctx;
  ctx.params = params;
  ctx.init.roots = {{Complex(params.a * params.a, 0.0), params.N}};
  ctx.quad.rel_tol = 1e-11;
  ctx.quad.abs_tol = 1e-13;
  ctx.quad.max_panels = 4000;
  return ctx;
}

namespace detail {

// Ascending monomial coefficients of the monic polynomial with these roots.
inline std::vector<Complex> init_to_coefficients(const InitialPolynomial& init) {
  std::vector<Complex> c{Complex(1.0, 0.0)};
  for (const auto& [root, mult] : init.roots)
    for (int m = 0; m < mult; ++m) {
      std::vector<Complex> next(c.size() + 1, Complex(0.0, 0.0));
      for (std::size_t k = 0; k < c.size(); ++k) {
        next[k + 1] += c[k];
        next[k] -= root * c[k];
      }
      c = std::move(next);
    }
  return c;
}

inline Complex eval_poly(const std::vector<Complex>& c, Complex z) {
  Complex v(0.0, 0.0);
  for (std::size_t k = c.size(); k-- > 0;) v = v * z + c[k];
  return v;
}

// The diffusion PDE maps monomials as z^k -> -k(k+nu)/M z^{k-1}, a nilpotent
// action on the coefficient vector, so the time-tau propagator is the finite
// series c_k(tau) = sum_j (-tau/M)^j / j! * prod_{i=1..j} (k+i)(k+i+nu) *
// c_{k+j}(0). This is an exact solution, independent of the integral
// representation.
inline std::vector<Complex> evolve_poly_coefficients(const std::vector<Complex>& c0,
                                                     double nu, int m_rows,
                                                     double tau) {
  const std::size_t n = c0.size();
  std::vector<Complex> c(n, Complex(0.0, 0.0));
  const double g = -tau / static_cast<double>(m_rows);
  for (std::size_t k = 0; k < n; ++k) {
    double factor = 1.0;
    Complex acc = c0[k];
    for (std::size_t j = 1; k + j < n; ++j) {
      double kk = static_cast<double>(k) + static_cast<double>(j);
      factor *= g / static_cast<double>(j) * kk * (kk + nu);
      acc += factor * c0[k + j];
    }
    c[k] = acc;
  }
  return c;
}

enum class KernelPath { auto_dispatch, complex_kernel, real_kernel };

// Direct quadrature of the oscillatory kernel extracts the e^{-Mz/tau} decay
// of the integral against the e^{+Mz/tau} prefactor through cancellation, so
// its precision degrades like e^{severity} ulp with
//   severity = (M/tau) (|z| + Re z) / 2.
// Above this threshold the contour is deformed instead (see q_saddle).
inline constexpr double kSaddleSeverity = 12.0;

inline double cancellation_severity(Complex z, double p) {
  return 0.5 * p * (std::abs(z) + z.real());
}

// Steepest-descent evaluation of the same integral. Splitting the kernel into
// the two Hankel pieces, i^{-nu} I_nu(2iMy sqrt(z)/tau) = J_nu(b y) with
// b = 2M sqrt(z)/tau = (H1 + H2)/2, and shifting each piece onto the
// horizontal line through its saddle y = +-i sqrt(z) + s makes the exponent
//   -M y^2/tau + i b y = -M z/tau - M s^2/tau
// on the upper leg (conjugate on the lower), so e^{-Mz/tau} factors out and
// cancels the prefactor analytically; the connecting legs along [0, +-i
// sqrt(z)] cancel each other exactly for any z and any real nu (their
// integrands are equal and opposite under the Hankel-to-Macdonald maps).
// What remains is a Gaussian-weighted integral of scaled Macdonald values
//   Q = p z^{-nu/2} Int_0^inf e^{-p s^2} [g1(s) + g2(s)] ds,   p = M/tau,
//   g1 = -(2i/pi) e^{-i pi nu/2} y1^{nu+1} Khat_nu(2pz - 2ip sqrt(z) s) P(-y1^2),
//   g2 = +(2i/pi) e^{+i pi nu/2} y2^{nu+1} Khat_nu(2pz + 2ip sqrt(z) s) P(-y2^2),
// y1/y2 = +-i sqrt(z) + s, P = Q_init, Khat_nu(w) = K_nu(w) e^w. Every factor
// is polynomially bounded: the evaluation is cancellation-free at any
// severity. Valid while the Macdonald arguments stay large, i.e. severity
// above kSaddleSeverity, which guarantees |w| >= 2 kSaddleSeverity.
// For real z the two legs are conjugate, so the real form integrates
// 2 Re g1, which is manifestly real.
inline Complex q_saddle(const ACPContext& ctx, Complex z, double tau, bool real_form) {
  const double nu = ctx.nu();
  const double p = static_cast<double>(ctx.params.M) / tau;
  const Complex sqrt_z = std::sqrt(z);
  const Complex i_sqrt_z = Complex(-sqrt_z.imag(), sqrt_z.real());
  const Complex zeta0 = 2.0 * p * z;
  const Complex zeta_step = Complex(0.0, 2.0 * p) * sqrt_z;
  const Complex phase1 =
      Complex(0.0, -2.0 / kPi) * std::exp(Complex(0.0, -0.5 * kPi * nu));
  const Complex phase2 =
      Complex(0.0, 2.0 / kPi) * std::exp(Complex(0.0, 0.5 * kPi * nu));

  auto init_at = [&](Complex y) {
    Complex q(1.0, 0.0);
    const Complex w = -y * y;
    for (const auto& [root, mult] : ctx.init.roots)
      for (int m = 0; m < mult; ++m) q *= w - root;
    return q;
  };
  auto leg = [&](Complex y, Complex zeta, Complex phase) {
    return phase * std::pow(y, nu + 1.0) * bessel_k_scaled_asym(nu, zeta) *
           init_at(y);
  };
  auto f = [&](double s) -> Complex {
    double gauss = std::exp(-p * s * s);
    Complex g1 = leg(i_sqrt_z + s, zeta0 - zeta_step * s, phase1);
    if (real_form) return Complex(2.0 * gauss * g1.real(), 0.0);
    Complex g2 = leg(-i_sqrt_z + s, zeta0 + zeta_step * s, phase2);
    return gauss * (g1 + g2);
  };

  const double s_max = std::sqrt(80.0 / p);
  QuadratureResult integral = integrate_interval(f, 0.0, s_max, ctx.quad);
  if (!integral.converged)
    throw ContractViolation("q_integral: quadrature did not converge");
  if (real_form) {
    double pref = p * std::exp(-0.5 * nu * std::log(z.real()));
    return Complex(pref * integral.value.real(), 0.0);
  }
  return p * std::exp(-0.5 * nu * std::log(z)) * integral.value;
}

// Integral representation, evaluated in exponent space. The y-integrand is
// y^{nu+1} e^{M(z-y^2)/tau} I_nu(2iMy sqrt(z)/tau) Q_init(-y^2); its
// log-magnitude envelope is scanned for the peak E*, everything is evaluated
// relative to e^{E*}, and the constant i^{-nu} 2M tau^{-1} z^{-nu/2} e^{Mz/tau}
// is reattached in (mantissa, log_scale) form at the end.
inline ScaledComplex q_integral_impl(const ACPContext& ctx, Complex z, double tau,
                                     KernelPath path) {
  if (!(tau > 0.0)) throw std::invalid_argument("q_integral: tau > 0");
  validate(ctx.params);
  validate_init(ctx.init, ctx.params.N);
  const double nu = ctx.nu();
  const double m_rows = static_cast<double>(ctx.params.M);
  const double mt = m_rows / tau;

  bool real_form = (path == KernelPath::real_kernel);
  if (path == KernelPath::auto_dispatch)
    real_form = (z.imag() == 0.0 && z.real() >= 0.0);
  if (real_form && !(z.imag() == 0.0 && z.real() >= 0.0))
    throw std::invalid_argument("q_integral: real kernel requires real z >= 0");
  // at z = 0 exactly the kernel z^{-nu/2} I_nu(2iMy sqrt(z)/tau) is a 0 * inf
  // limit in either form; both collapse to the same finite limit kernel
  if (z == Complex(0.0, 0.0)) real_form = true;

  if (cancellation_severity(z, mt) > kSaddleSeverity)
    return {q_saddle(ctx, z, tau, real_form), 0.0};

  const Complex sqrt_z = std::sqrt(z);
  const double im_sqrt = std::fabs(sqrt_z.imag());
  const double x_real = (z.imag() == 0.0 && z.real() >= 0.0) ? std::sqrt(z.real()) : 0.0;

  // log-magnitude envelope of the integrand (Bessel factor bounded by
  // e^{|Re x|}; the real-kernel J factor is bounded by 1, except the z = 0
  // limit where z^{-nu/2} J_nu folds to (My/tau)^nu / Gamma(nu+1))
  const bool z_zero = real_form && z.real() == 0.0;
  auto envelope = [&](double y) {
    double k = (nu + 1.0) * std::log(y) - mt * y * y;
    for (const auto& [root, mult] : ctx.init.roots)
      k += mult * std::log(std::abs(Complex(y * y, 0.0) + root));
    if (!real_form) k += 2.0 * mt * y * im_sqrt;
    if (z_zero) k += nu * std::log(mt * y) - std::lgamma(nu + 1.0);
    return k;
  };

  // peak scan: coarse doubling for the decay point, then a uniform scan and
  // golden-section refinement around the best sample
  double y_hi = std::sqrt(tau / m_rows);
  double e_star = envelope(y_hi);
  for (int it = 0; it < 200 && envelope(y_hi) > e_star - 60.0; ++it) {
    y_hi *= 2.0;
    e_star = std::max(e_star, envelope(y_hi));
  }
  const int n_scan = 256;
  double y_peak = y_hi / n_scan;
  e_star = envelope(y_peak);
  for (int i = 1; i <= n_scan; ++i) {
    double y = y_hi * i / n_scan;
    double k = envelope(y);
    if (k > e_star) {
      e_star = k;
      y_peak = y;
    }
  }
  {
    double lo = std::max(y_peak - y_hi / n_scan, y_hi / (8.0 * n_scan));
    double hi = y_peak + y_hi / n_scan;
    const double gr = 0.61803398874989485;
    double p = hi - gr * (hi - lo), q = lo + gr * (hi - lo);
    double fp = envelope(p), fq = envelope(q);
    for (int it = 0; it < 60; ++it) {
      if (fp < fq) {
        lo = p;
        p = q;
        fp = fq;
        q = lo + gr * (hi - lo);
        fq = envelope(q);
      } else {
        hi = q;
        q = p;
        fq = fp;
        p = hi - gr * (hi - lo);
        fp = envelope(p);
      }
    }
    e_star = std::max(e_star, envelope(0.5 * (lo + hi)));
  }
  for (int it = 0; it < 200 && envelope(y_hi) > e_star - 60.0; ++it) y_hi *= 1.5;

  QuadratureResult integral;
  if (!real_form) {
    auto f = [&](double y) -> Complex {
      Complex lg = Complex((nu + 1.0) * std::log(y) - mt * y * y - e_star, 0.0);
      for (const auto& [root, mult] : ctx.init.roots)
        lg += static_cast<double>(mult) * std::log(-Complex(y * y, 0.0) - root);
      ScaledComplex bes = bessel_i_scaled(nu, Complex(0.0, 2.0 * mt * y) * sqrt_z);
      lg += bes.log_scale;
      return std::exp(lg) * bes.mantissa;
    };
    integral = integrate_interval(f, 0.0, y_hi, ctx.quad);
  } else {
    auto f = [&](double y) -> Complex {
      double lg = (nu + 1.0) * std::log(y) - mt * y * y - e_star;
      double sign = 1.0;
      for (const auto& [root, mult] : ctx.init.roots) {
        if (root.imag() != 0.0) {
          // conjugate pair handled once via |y^2 + root|^2; halves show up
          // separately in the loop, so fold the pair as two half-factors
          lg += mult * std::log(std::abs(Complex(y * y, 0.0) + root));
          continue;
        }
        double v = -(y * y + root.real());
        if (v == 0.0) return Complex(0.0, 0.0);
        if (v < 0.0 && (mult & 1)) sign = -sign;
        lg += mult * std::log(std::fabs(v));
      }
      double kern;
      if (z_zero) {
        kern = sign * std::exp(lg + nu * std::log(mt * y) - std::lgamma(nu + 1.0));
      } else {
        kern = sign * std::exp(lg) * bessel_j_real(nu, 2.0 * mt * y * x_real);
      }
      return Complex(kern, 0.0);
    };
    integral = integrate_interval(f, 0.0, y_hi, ctx.quad);
  }
  if (!integral.converged)
    throw ContractViolation("q_integral: quadrature did not converge");

  ScaledComplex out;
  out.log_scale = e_star + mt * z.real() + std::log(2.0 * mt);
  if (real_form) {
    if (!z_zero) out.log_scale -= 0.5 * nu * std::log(z.real());
    out.mantissa = Complex(integral.value.real(), 0.0);
  } else {
    out.log_scale -= 0.5 * nu * std::log(std::abs(z));
    double phase = mt * z.imag() - 0.5 * nu * std::arg(z) - 0.5 * kPi * nu;
    out.mantissa = integral.value * Complex(std::cos(phase), std::sin(phase));
  }
  return out;
}

}  // namespace detail

// Averaged characteristic polynomial in (mantissa, log_scale) form; use when
// N ln(a^2) or M Re z / tau may overflow a plain double.
inline ScaledComplex q_integral_scaled(const ACPContext& ctx, Complex z, double tau) {
  return detail::q_integral_impl(ctx, z, tau, detail::KernelPath::auto_dispatch);
}

// Averaged characteristic polynomial <det(z - L)> at macroscopic time tau.
inline Complex q_integral(const ACPContext& ctx, Complex z, double tau) {
  ScaledComplex s = q_integral_scaled(ctx, z, tau);
  if (s.log_scale > 650.0)
    throw std::overflow_error("q_integral: magnitude exceeds double range; "
                              "use q_integral_scaled");
  return s.value();
}

// |Q(complex kernel) - Q(real kernel)| at real z >= 0; the real path uses
// z^{-nu/2} J_nu(2My sqrt(z)/tau), which makes the integrand manifestly real
// and fixes the z^{-nu/2} branch. Expected <= 1e-9 (1 + |Q|).
inline double real_kernel_identity_check(const ACPContext& ctx, double z, double tau) {
  if (!(z >= 0.0)) throw std::invalid_argument("real_kernel_identity_check: z >= 0");
  ScaledComplex a =
      detail::q_integral_impl(ctx, Complex(z, 0.0), tau, detail::KernelPath::complex_kernel);
  ScaledComplex b =
      detail::q_integral_impl(ctx, Complex(z, 0.0), tau, detail::KernelPath::real_kernel);
  return std::abs(a.value() - b.value());
}

// Monic degree-N solution of the diffusion PDE with the free start
// Q(z, 0) = z^N (time-dependent Laguerre form), via the exact nilpotent
// propagator on monomial coefficients. M is nu + N.
inline Complex laguerre_reference(int n_degree, int nu, Complex z, double tau) {
  if (n_degree < 0) throw std::invalid_argument("laguerre_reference: N >= 0");
  if (nu < 0) throw std::invalid_argument("laguerre_reference: nu >= 0");
  if (!(tau >= 0.0)) throw std::invalid_argument("laguerre_reference: tau >= 0");
  std::vector<Complex> c0(static_cast<std::size_t>(n_degree) + 1, Complex(0.0, 0.0));
  c0.back() = Complex(1.0, 0.0);
  auto c = detail::evolve_poly_coefficients(c0, static_cast<double>(nu),
                                            n_degree + nu, tau);
  return detail::eval_poly(c, z);
}

// Max scaled PDE defect |dQ/dtau + (1/M)(z Qzz + (nu+1) Qz)| / (1 + |Q|) over
// the interior of a uniform (z, tau) product grid, with both derivatives from
// 4th-order central differences of q_integral. Q is a polynomial of degree
// <= N in each variable, so for N <= 4 the stencils are truncation-exact and
// the residual measures quadrature noise only.
inline double pde_residual(const ACPContext& ctx, const std::vector<Complex>& z_grid,
                           const std::vector<double>& tau_grid) {
  if (z_grid.size() < 5 || tau_grid.size() < 5)
    throw std::invalid_argument("pde_residual: grids need >= 5 points");
  const Complex hz = z_grid[1] - z_grid[0];
  for (std::size_t i = 1; i < z_grid.size(); ++i)
    if (std::abs(z_grid[i] - z_grid[i - 1] - hz) > 1e-12 * (1.0 + std::abs(hz)))
      throw std::invalid_argument("pde_residual: z grid must be uniform");
  const double ht = tau_grid[1] - tau_grid[0];
  for (std::size_t j = 1; j < tau_grid.size(); ++j)
    if (std::fabs(tau_grid[j] - tau_grid[j - 1] - ht) > 1e-12 * (1.0 + std::fabs(ht)))
      throw std::invalid_argument("pde_residual: tau grid must be uniform");

  const std::size_t nz = z_grid.size(), nt = tau_grid.size();
  std::vector<Complex> q(nz * nt);
  for (std::size_t i = 0; i < nz; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      q[i * nt + j] = q_integral(ctx, z_grid[i], tau_grid[j]);

  const double inv_m = 1.0 / static_cast<double>(ctx.params.M);
  const double nu1 = ctx.nu() + 1.0;
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < nz; ++i)
    for (std::size_t j = 2; j + 2 < nt; ++j) {
      auto at = [&](std::size_t ii, std::size_t jj) { return q[ii * nt + jj]; };
      Complex dt = (at(i, j - 2) - 8.0 * at(i, j - 1) + 8.0 * at(i, j + 1) -
                    at(i, j + 2)) /
                   (12.0 * ht);
      Complex dz = (at(i - 2, j) - 8.0 * at(i - 1, j) + 8.0 * at(i + 1, j) -
                    at(i + 2, j)) /
                   (12.0 * hz);
      Complex dzz = (-at(i - 2, j) + 16.0 * at(i - 1, j) - 30.0 * at(i, j) +
                     16.0 * at(i + 1, j) - at(i + 2, j)) /
                    (12.0 * hz * hz);
      Complex defect = dt + inv_m * (z_grid[i] * dzz + nu1 * dz);
      worst = std::max(worst, std::abs(defect) / (1.0 + std::abs(at(i, j))));
    }
  return worst;
}

// Chiral block lift: the (M+N)-dimensional chiral ensemble's characteristic
// polynomial is w^nu Q(w^2, tau). tau = 0 evaluates the initial condition
// directly.
inline Complex chiral_lift(Complex w, double tau, const ACPContext& ctx) {
  const int nu = ctx.params.M - ctx.params.N;
  Complex wpow(1.0, 0.0);
  for (int i = 0; i < nu; ++i) wpow *= w;
  if (tau == 0.0) {
    Complex q(1.0, 0.0);
    for (const auto& [root, mult] : ctx.init.roots)
      for (int m = 0; m < mult; ++m) q *= w * w - root;
    return wpow * q;
  }
  return wpow * q_integral(ctx, w * w, tau);
}

}  // namespace wishart
