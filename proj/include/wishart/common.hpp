#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace wishart {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr const char* kToolVersion = "wishart-lab 0.1.0";

// Thrown when a documented postcondition or runtime contract fails.
// Precondition violations use std::invalid_argument / std::domain_error.
class ContractViolation : public std::runtime_error {
 public:
  explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

// Value represented as mantissa * exp(log_scale). Keeps exponent arithmetic
// explicit where exp(M*Re z/tau) and exp(-M*y^2/tau) must cancel before
// anything is materialized as a plain double.
struct ScaledComplex {
  Complex mantissa{0.0, 0.0};
  double log_scale = 0.0;

  Complex value() const { return mantissa * std::exp(log_scale); }
};

// Spectral density sampled on a grid. `tau` is NaN when the producer has no
// time attached (e.g. histogram estimators fed by pooled statistics).
// normalization_defect = |integral - 1| as measured by the producer;
// outside_mass is only populated by histogram estimators.
struct DensityCurve {
  std::vector<double> lambda;
  std::vector<double> rho;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double normalization_defect = 0.0;
  double outside_mass = 0.0;
};

namespace detail {

// Deterministic pairwise reduction in index order; result is independent of
// chunking/thread count because inputs are gathered first.
template <class T>
T pairwise_sum(const T* data, std::size_t n) {
  if (n == 0) return T{};
  if (n <= 8) {
    T s = data[0];
    for (std::size_t i = 1; i < n; ++i) s += data[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(v.data(), v.size());
}

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

}  // namespace wishart
