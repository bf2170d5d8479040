#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace pcmmap {

// A real number stored as (sign, ln|x|). Sum nodes need log-sum-exp with sign
// bookkeeping because gradient passes evaluate circuits whose leaves hold -1.
struct SignedLog {
  double log_mag = -std::numeric_limits<double>::infinity();
  int sign = 0;  // -1, 0, +1

  static SignedLog zero() { return {}; }

  static SignedLog one() { return {0.0, +1}; }

  static SignedLog from_real(double x) {
    if (x == 0.0) return zero();
    return {std::log(std::abs(x)), x > 0 ? +1 : -1};
  }

  double to_real() const { return sign == 0 ? 0.0 : sign * std::exp(log_mag); }

  bool is_zero() const { return sign == 0; }
};

inline SignedLog operator*(SignedLog a, SignedLog b) {
  if (a.sign == 0 || b.sign == 0) return SignedLog::zero();
  return {a.log_mag + b.log_mag, a.sign * b.sign};
}

// Multiply by a positive constant given as its logarithm.
inline SignedLog scale_log(SignedLog a, double log_w) {
  if (a.sign == 0) return a;
  return {a.log_mag + log_w, a.sign};
}

inline SignedLog operator+(SignedLog a, SignedLog b) {
  if (a.sign == 0) return b;
  if (b.sign == 0) return a;
  if (b.log_mag > a.log_mag) std::swap(a, b);
  // |a| >= |b|; factor out |a| and resolve the signs on the residual.
  double r = std::exp(b.log_mag - a.log_mag);
  double acc = (a.sign == b.sign) ? 1.0 + r : 1.0 - r;
  if (acc == 0.0) return SignedLog::zero();
  return {a.log_mag + std::log(acc), a.sign};
}

inline SignedLog operator/(SignedLog a, SignedLog b) {
  if (a.sign == 0) return a;
  return {a.log_mag - b.log_mag, a.sign * b.sign};
}

}  // namespace pcmmap
