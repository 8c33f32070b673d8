#pragma once

#include <vector>

namespace pnr {

/// Diagonal Fock-basis coefficients c_n (n = 0..n_max) of the single-photon
/// POVM element of a tree-modelled PNR detector with efficiency `eta` and
/// depth `k`.
struct PovmElement {
  double eta = 1.0;
  double k = 0.0;
  std::vector<double> coeffs;
  /// True when the coefficients were rescaled to sum to one.
  bool normalized = false;
};

/// c_n = sum_{m=1}^{n} C(n,m) eta^m (1-eta)^(n-m) N^(1-m), N = 2^k: at least
/// one photon survives and every survivor lands on the same output port.
PovmElement pi_one_coefficients(double eta, double k, int n_max = 12);

/// Divides by sum_{n>=1} c_n. Throws InvalidArgument on an all-zero element.
PovmElement normalize_pi_one(const PovmElement& element);

/// Exact sum_{n > n_max} c_n of the unnormalized element.
double pi_one_tail(double eta, double k, int n_max);

/// Single-photon discrimination efficiency of an unnormalized element,
/// 1 - (1/2) [(1 - c_1) + sum_{n>=2} c_n]. The sum is extended past the
/// stored coefficients until the remaining tail is below `tail_tolerance`.
/// Throws DivergenceError for k = 0 (the sum does not converge) and
/// InvalidArgument for a normalized element.
double eta_pnr(const PovmElement& element, double tail_tolerance = 1e-6);

}  // namespace pnr
