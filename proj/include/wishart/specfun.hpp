#pragma once

// Special functions and quadrature: modified Bessel I_nu of complex argument,
// the real-axis Bessel J kernel, log-gamma, and the adaptive Gauss-Kronrod /
// tanh-sinh integrators the rest of the library is built on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <vector>

#include "wishart/common.hpp"

namespace wishart {

struct QuadratureSpec {
  double rel_tol = 1e-10;
  double abs_tol = 1e-13;
  int max_panels = 2000;
  // Decay constant c of the exp(-c u^4) tail model; seeds the first
  // truncation point of integrate_semiinfinite.
  double decay_hint = 0.5;
};

struct QuadratureResult {
  Complex value{0.0, 0.0};
  double error_bound = 0.0;
  int panels = 0;
  bool converged = false;
};

namespace detail {

// ---------------------------------------------------------------------------
// Double-double arithmetic. The I_nu power series near |x| = 20 on the
// imaginary axis cancels ~8 digits (largest term ~ e^8.6 against an O(1)
// sum), so plain double cannot reach the 1e-12 relative target; the series is
// therefore accumulated in ~31-digit double-double precision.
// ---------------------------------------------------------------------------

struct DD {
  double hi = 0.0, lo = 0.0;
};

inline DD dd_from(double x) { return {x, 0.0}; }

inline DD two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

inline DD quick_two_sum(double a, double b) {
  double s = a + b;
  return {s, b - (s - a)};
}

inline DD two_prod(double a, double b) {
  double p = a * b;
  return {p, std::fma(a, b, -p)};
}

inline DD dd_neg(DD a) { return {-a.hi, -a.lo}; }

inline DD dd_add(DD a, DD b) {
  DD s = two_sum(a.hi, b.hi);
  return quick_two_sum(s.hi, s.lo + a.lo + b.lo);
}

inline DD dd_mul(DD a, DD b) {
  DD p = two_prod(a.hi, b.hi);
  return quick_two_sum(p.hi, p.lo + a.hi * b.lo + a.lo * b.hi);
}

inline DD dd_mul(DD a, double b) {
  DD p = two_prod(a.hi, b);
  return quick_two_sum(p.hi, p.lo + a.lo * b);
}

inline DD dd_div(DD a, DD b) {
  double q1 = a.hi / b.hi;
  DD r = dd_add(a, dd_neg(dd_mul(b, q1)));
  double q2 = r.hi / b.hi;
  r = dd_add(r, dd_neg(dd_mul(b, q2)));
  double q3 = r.hi / b.hi;
  DD q = quick_two_sum(q1, q2);
  return dd_add(q, dd_from(q3));
}

struct DDComplex {
  DD re, im;
};

inline DDComplex ddc_from(Complex z) { return {dd_from(z.real()), dd_from(z.imag())}; }

inline DDComplex ddc_add(DDComplex a, DDComplex b) {
  return {dd_add(a.re, b.re), dd_add(a.im, b.im)};
}

inline DDComplex ddc_mul(DDComplex a, DDComplex b) {
  return {dd_add(dd_mul(a.re, b.re), dd_neg(dd_mul(a.im, b.im))),
          dd_add(dd_mul(a.re, b.im), dd_mul(a.im, b.re))};
}

inline DDComplex ddc_div(DDComplex a, DD d) {
  return {dd_div(a.re, d), dd_div(a.im, d)};
}

}  // namespace detail

// log Gamma(x) for x > 0: Stirling with Bernoulli tail, argument lifted above
// 12 by the recurrence. Relative accuracy ~1e-14 (absolute near the zeros of
// log Gamma at x = 1, 2).
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
  double shift = 0.0;
  while (x < 12.0) {
    shift -= std::log(x);
    x += 1.0;
  }
  static constexpr double kBern[8] = {
      1.0 / 12.0,     -1.0 / 360.0,      1.0 / 1260.0, -1.0 / 1680.0,
      1.0 / 1188.0,   -691.0 / 360360.0, 1.0 / 156.0,  -3617.0 / 122400.0};
  const double inv = 1.0 / x, inv2 = inv * inv;
  double p = inv, tail = 0.0;
  for (double coeff : kBern) {
    tail += coeff * p;
    p *= inv2;
  }
  return shift + (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * kPi) + tail;
}

namespace detail {

inline constexpr double kBesselSeriesRadius = 20.0;

// Power series sum_k (x/2)^{nu+2k} / (k! Gamma(nu+k+1)), double-double
// accumulated. Valid for any finite x; used for |x| <= 20.
inline Complex bessel_i_series(double nu, Complex x) {
  DDComplex w = ddc_from(0.25 * x * x);
  DDComplex term{dd_from(std::exp(-log_gamma(nu + 1.0))), dd_from(0.0)};
  DDComplex sum = term;
  for (int k = 1; k <= 600; ++k) {
    term = ddc_mul(term, w);
    DD denom = dd_mul(two_sum(nu, static_cast<double>(k)), static_cast<double>(k));
    term = ddc_div(term, denom);
    sum = ddc_add(sum, term);
    double tmag = std::max(std::fabs(term.re.hi), std::fabs(term.im.hi));
    double smag = std::max(std::fabs(sum.re.hi), std::fabs(sum.im.hi));
    if (tmag <= 1e-33 * smag + 1e-320) break;
  }
  Complex s(sum.re.hi + sum.re.lo, sum.im.hi + sum.im.lo);
  Complex pref = (nu == 0.0) ? Complex(1.0, 0.0) : std::exp(nu * std::log(0.5 * x));
  return pref * s;
}

// Compound asymptotic expansion for Re x >= 0, |x| > 20. Both exponential
// terms are kept so accuracy is uniform through arg x = +-pi/2:
//   I_nu(x) ~ e^x/sqrt(2 pi x) * S(-) + e^{-x + i sigma pi (nu+1/2)}/sqrt(2 pi x) * S(+),
// sigma = sign(Im x). Returned with log_scale = Re x.
inline ScaledComplex bessel_i_asymptotic(double nu, Complex x) {
  const double sigma = (x.imag() >= 0.0) ? 1.0 : -1.0;
  const double mu = 4.0 * nu * nu;
  const Complex inv = 1.0 / x;
  Complex s_alt(1.0, 0.0), s_plus(1.0, 0.0);
  double a = 1.0;
  Complex xk(1.0, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    double odd = 2.0 * k - 1.0;
    a *= (mu - odd * odd) / (8.0 * k);
    xk *= inv;
    Complex t = a * xk;
    double tm = std::abs(t);
    if (tm > prev) break;  // divergence onset: stop at the smallest term
    prev = tm;
    s_alt += (k & 1) ? -t : t;
    s_plus += t;
    if (tm < 1e-19) break;
  }
  Complex pre = 1.0 / std::sqrt(2.0 * kPi * x);
  Complex grow = std::exp(Complex(0.0, x.imag()));
  Complex decay = std::exp(Complex(-2.0 * x.real(), -x.imag() + sigma * kPi * (nu + 0.5)));
  return {pre * (s_alt * grow + s_plus * decay), x.real()};
}

// Scaled Macdonald function K_nu(zeta) e^{zeta} by the asymptotic series
//   K_nu(zeta) ~ sqrt(pi/(2 zeta)) e^{-zeta} sum_k a_k(nu) / zeta^k.
// Requires |zeta| >= ~24 and |arg zeta| < pi, where the optimal truncation
// error is below double precision for moderate nu; the smallest-term check
// throws rather than return a silently degraded value.
inline Complex bessel_k_scaled_asym(double nu, Complex zeta) {
  if (std::abs(zeta) < 20.0)
    throw ContractViolation("bessel_k_scaled_asym: argument too small for the series");
  const double mu = 4.0 * nu * nu;
  const Complex inv = 1.0 / zeta;
  Complex sum(1.0, 0.0);
  double a = 1.0;
  Complex zk(1.0, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  bool settled = false;
  for (int k = 1; k <= 60; ++k) {
    double odd = 2.0 * k - 1.0;
    a *= (mu - odd * odd) / (8.0 * k);
    zk *= inv;
    Complex t = a * zk;
    double tm = std::abs(t);
    if (tm > prev) break;
    prev = tm;
    sum += t;
    if (tm <= 1e-17 * std::abs(sum)) {
      settled = true;
      break;
    }
  }
  if (!settled && prev > 1e-15 * std::abs(sum))
    throw ContractViolation("bessel_k_scaled_asym: series did not settle");
  return std::sqrt(0.5 * kPi * inv) * sum;
}

}  // namespace detail

// Modified Bessel I_nu(x), order nu > -1, complex x, mantissa/exponent form.
// value = mantissa * exp(log_scale). Dispatch: double-double power series for
// |x| <= 20; compound two-term asymptotic beyond; Re x < 0 reduced by the
// exact continuation I_nu(x) = e^{i sigma pi nu} I_nu(-x), sigma = sign(Im x).
inline ScaledComplex bessel_i_scaled(double order, Complex x) {
  if (!(order > -1.0)) throw std::domain_error("bessel_i: order must exceed -1");
  if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
    throw std::domain_error("bessel_i: non-finite argument");
  if (x == Complex(0.0, 0.0)) {
    if (order == 0.0) return {Complex(1.0, 0.0), 0.0};
    if (order > 0.0) return {Complex(0.0, 0.0), 0.0};
    throw std::domain_error("bessel_i: x = 0 with negative order");
  }
  if (std::abs(x) <= detail::kBesselSeriesRadius)
    return {detail::bessel_i_series(order, x), 0.0};
  if (x.real() >= 0.0) return detail::bessel_i_asymptotic(order, x);
  const double sigma = (x.imag() >= 0.0) ? 1.0 : -1.0;
  ScaledComplex base = detail::bessel_i_asymptotic(order, -x);
  return {base.mantissa * std::exp(Complex(0.0, sigma * kPi * order)), base.log_scale};
}

// Plain-valued I_nu; valid while |Re x| <= 650 (beyond that the value
// overflows double range and callers must use bessel_i_scaled).
inline Complex bessel_i(double order, Complex x) {
  ScaledComplex s = bessel_i_scaled(order, x);
  if (s.log_scale > 650.0)
    throw std::overflow_error("bessel_i: |Re x| > 650, use bessel_i_scaled");
  return s.value();
}

namespace detail {

// Real-arithmetic Bessel J_nu(x) for x >= 0, nu > -1: the oscillatory kernel
// of the real-axis ACP path. Double-double series below x = 20 (the
// alternating sum cancels as badly as I_nu on the imaginary axis), modulus/
// phase asymptotics above.
inline double bessel_j_series(double nu, double x) {
  double w = -0.25 * x * x;
  DD term = dd_from(std::exp(-log_gamma(nu + 1.0)));
  DD sum = term;
  for (int k = 1; k <= 600; ++k) {
    term = dd_mul(term, w);
    DD denom = dd_mul(two_sum(nu, static_cast<double>(k)), static_cast<double>(k));
    term = dd_div(term, denom);
    sum = dd_add(sum, term);
    if (std::fabs(term.hi) <= 1e-33 * std::fabs(sum.hi) + 1e-320) break;
  }
  double pref = (nu == 0.0) ? 1.0 : std::exp(nu * std::log(0.5 * x));
  return pref * (sum.hi + sum.lo);
}

inline double bessel_j_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0;
  double a = 1.0, xk = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    double odd = 2.0 * k - 1.0;
    a *= (mu - odd * odd) / (8.0 * k);
    xk /= x;
    double t = a * xk;
    if (std::fabs(t) > prev) break;
    prev = std::fabs(t);
    // k odd -> contributes to Q with sign (-1)^((k-1)/2); k even -> to P
    // with sign (-1)^(k/2).
    int half = k / 2;
    double s = (half & 1) ? -t : t;
    if (k & 1)
      q += s;
    else
      p += s;
    if (std::fabs(t) < 1e-19) break;
  }
  double omega = x - nu * 0.5 * kPi - 0.25 * kPi;
  return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(omega) - q * std::sin(omega));
}

}  // namespace detail

inline double bessel_j_real(double order, double x) {
  if (!(order > -1.0)) throw std::domain_error("bessel_j_real: order must exceed -1");
  if (!(x >= 0.0)) throw std::domain_error("bessel_j_real: requires x >= 0");
  if (x == 0.0) {
    if (order == 0.0) return 1.0;
    if (order > 0.0) return 0.0;
    throw std::domain_error("bessel_j_real: x = 0 with negative order");
  }
  if (x <= detail::kBesselSeriesRadius) return detail::bessel_j_series(order, x);
  return detail::bessel_j_asymptotic(order, x);
}

namespace detail {

// Gauss-Kronrod 7-15 nodes (positive half) and weights.
inline constexpr double kGK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double kGK15KronrodW[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kGK15GaussW[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

struct Panel {
  double a, b;
  Complex value;
  double err;
  bool splittable;
};

// One Gauss-Kronrod 7-15 panel with the QUADPACK error model: the raw
// |K - G| difference is collapsed through (200 d / resasc)^{3/2} once the
// Kronrod rule has converged, and floored at 50 eps * integral|f| so
// round-off is never claimed beaten.
template <class F>
Panel gk15_panel(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Complex fc = f(c);
  Complex lov[7], hiv[7];
  Complex kron = kGK15KronrodW[7] * fc;
  Complex gauss = kGK15GaussW[3] * fc;
  double resabs = kGK15KronrodW[7] * std::abs(fc);
  for (int j = 0; j < 7; ++j) {
    double dx = h * kGK15Nodes[j];
    lov[j] = f(c - dx);
    hiv[j] = f(c + dx);
    Complex s = lov[j] + hiv[j];
    kron += kGK15KronrodW[j] * s;
    resabs += kGK15KronrodW[j] * (std::abs(lov[j]) + std::abs(hiv[j]));
    if (j % 2 == 1) gauss += kGK15GaussW[(j - 1) / 2] * s;
  }
  Complex mean = 0.5 * kron;  // Kronrod weights sum to 2 on [-1, 1]
  double resasc = kGK15KronrodW[7] * std::abs(fc - mean);
  for (int j = 0; j < 7; ++j)
    resasc += kGK15KronrodW[j] * (std::abs(lov[j] - mean) + std::abs(hiv[j] - mean));
  double diff = std::abs(kron - gauss) * h;
  resabs *= h;
  resasc *= h;
  double err = diff;
  if (resasc != 0.0 && diff != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * diff / resasc, 1.5));
  err = std::max(err, 50.0 * std::numeric_limits<double>::epsilon() * resabs);
  double mid = 0.5 * (a + b);
  return {a, b, kron * h, err, mid > a && mid < b};
}

}  // namespace detail

// Adaptive Gauss-Kronrod on a finite interval: worst-panel bisection until
// the summed error estimate meets max(abs_tol, rel_tol*|I|) or the panel
// budget runs out (converged=false then).
template <class F>
QuadratureResult integrate_interval(F&& f, double a, double b, const QuadratureSpec& spec) {
  if (!(a < b)) {
    if (a == b) return {Complex(0.0, 0.0), 0.0, 0, true};
    throw std::invalid_argument("integrate_interval: requires a <= b");
  }
  std::vector<detail::Panel> panels;
  panels.push_back(detail::gk15_panel(f, a, b));
  for (;;) {
    Complex total(0.0, 0.0);
    double err = 0.0;
    for (const auto& p : panels) {
      total += p.value;
      err += p.err;
    }
    double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
    if (err <= tol) return {total, err, static_cast<int>(panels.size()), true};
    if (static_cast<int>(panels.size()) >= spec.max_panels)
      return {total, err, static_cast<int>(panels.size()), false};
    std::size_t worst = panels.size();
    double werr = -1.0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      if (panels[i].splittable && panels[i].err > werr) {
        werr = panels[i].err;
        worst = i;
      }
    }
    if (worst == panels.size())
      return {total, err, static_cast<int>(panels.size()), err <= tol};
    detail::Panel w = panels[worst];
    double m = 0.5 * (w.a + w.b);
    panels[worst] = detail::gk15_panel(f, w.a, m);
    panels.push_back(detail::gk15_panel(f, m, w.b));
  }
}

// Semi-infinite [0, inf): an initial truncation from the quartic decay hint
// (|f(U)| ~ e^-46), then geometrically doubled tail blocks until two
// consecutive blocks are negligible against the accumulated value.
template <class F>
QuadratureResult integrate_semiinfinite(F&& f, const QuadratureSpec& spec) {
  const double c = std::max(spec.decay_hint, 1e-12);
  const double u0 = std::clamp(std::pow(46.0 / c, 0.25), 1.0, 64.0);
  QuadratureSpec block = spec;
  block.max_panels = std::max(64, spec.max_panels / 4);
  Complex acc(0.0, 0.0);
  double err = 0.0;
  int panels = 0;
  bool ok = true;
  double lo = 0.0, hi = u0;
  int quiet = 0;
  for (int b = 0; b < 24; ++b) {
    QuadratureResult r = integrate_interval(f, lo, hi, block);
    acc += r.value;
    err += r.error_bound;
    panels += r.panels;
    ok = ok && r.converged;
    double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(acc));
    if (std::abs(r.value) <= 0.125 * tol) {
      if (++quiet >= 2) return {acc, err, panels, ok};
    } else {
      quiet = 0;
    }
    lo = hi;
    hi *= 2.0;
  }
  return {acc, err, panels, false};
}

// tanh-sinh (double-exponential) quadrature on (a, b) for real integrands
// with integrable endpoint singularities. Abscissas near the endpoints are
// formed as exact offsets off = d(1 - tanh u) = 2d e^{-2u}/(1+e^{-2u}) so
// x^{-1/2}-type integrands are fed accurate arguments; endpoints themselves
// are never evaluated.
template <class F>
double integrate_tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-9,
                           int max_level = 10) {
  if (!(a < b)) throw std::invalid_argument("integrate_tanh_sinh: requires a < b");
  const double d = 0.5 * (b - a);
  // x^{-1/2} endpoint singularities need (pi/4) sinh(tmax) >~ 30 before the
  // weighted tail is negligible.
  const double tmax = 4.5;
  auto pair_term = [&](double t) -> double {
    double u = (kPi / 2.0) * std::sinh(t);
    double e2 = std::exp(-2.0 * u);
    double off = 2.0 * d * e2 / (1.0 + e2);
    double w = d * (kPi / 2.0) * std::cosh(t) * 4.0 * e2 / ((1.0 + e2) * (1.0 + e2));
    if (off <= 0.0 || w == 0.0 || !std::isfinite(w)) return 0.0;
    double s = 0.0;
    double xl = a + off;
    if (xl > a && xl < b) {
      double v = f(xl);
      if (std::isfinite(v)) s += v;
    }
    double xr = b - off;
    if (t > 0.0 && xr > a && xr < b) {
      double v = f(xr);
      if (std::isfinite(v)) s += v;
    }
    return w * s;
  };
  double h = 1.0;
  double sum = pair_term(0.0);
  for (double t = h; t <= tmax; t += h) sum += pair_term(t);
  double integral = h * sum;
  for (int lev = 1; lev <= max_level; ++lev) {
    h *= 0.5;
    double add = 0.0;
    for (double t = h; t <= tmax; t += 2.0 * h) add += pair_term(t);
    double next = 0.5 * integral + h * add;
    if (lev >= 4 && std::fabs(next - integral) <= rel_tol * std::fabs(next) + 1e-300)
      return next;
    integral = next;
  }
  return integral;
}

}  // namespace wishart
