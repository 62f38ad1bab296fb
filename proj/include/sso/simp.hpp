#pragma once

// SIMP material interpolation: E = p^P * E_ref.

#include "sso/core.hpp"

#include <cmath>
#include <string>

namespace sso {

struct SimpConfig {
  double P = 3.0;       ///< penalty exponent, >= 1
  double p_min = 1e-3;  ///< lower density bound, in (0, 1)

  void validate() const {
    if (!(P >= 1.0) || !std::isfinite(P)) throw Error("SIMP: penalty P must be >= 1");
    if (!(p_min > 0.0 && p_min < 1.0)) throw Error("SIMP: p_min must lie in (0, 1)");
  }
};

/// Unchecked interpolation, used where perturbed densities are legitimate.
inline double simp_modulus_raw(double p, double E_ref, double P) { return std::pow(p, P) * E_ref; }

/// dE/dp = P p^(P-1) E_ref.
inline double simp_modulus_derivative(double p, double E_ref, double P) {
  return P * std::pow(p, P - 1.0) * E_ref;
}

inline double simp_modulus(double p, double E_ref, const SimpConfig& cfg) {
  cfg.validate();
  if (!(p >= cfg.p_min && p <= 1.0))
    throw Error("SIMP: density " + std::to_string(p) + " outside [p_min, 1]");
  return simp_modulus_raw(p, E_ref, cfg.P);
}

}  // namespace sso
