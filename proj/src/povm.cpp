#include "pnr/povm.hpp"

#include <cmath>
#include <limits>

#include "pnr/error.hpp"
#include "summation.hpp"

namespace pnr {
namespace {

void check(double eta, double k) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("detector efficiency must lie in [0, 1]");
  if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidArgument("tree depth must be finite and >= 0");
}

double coefficient(int n, double eta, double ports) {
  if (n == 0) return 0.0;
  detail::NeumaierSum sum;
  double binom = 1.0;  // C(n, m)
  for (int m = 1; m <= n; ++m) {
    binom = binom * (n - m + 1) / m;
    sum.add(binom * std::pow(eta, m) * std::pow(1.0 - eta, n - m) * std::pow(ports, 1 - m));
  }
  return sum.value();
}

}  // namespace

PovmElement pi_one_coefficients(double eta, double k, int n_max) {
  check(eta, k);
  if (n_max < 1) throw InvalidArgument("n_max must be at least 1");
  PovmElement element{eta, k, std::vector<double>(static_cast<std::size_t>(n_max) + 1, 0.0), false};
  const double ports = std::exp2(k);
  for (int n = 1; n <= n_max; ++n) element.coeffs[static_cast<std::size_t>(n)] = coefficient(n, eta, ports);
  return element;
}

PovmElement normalize_pi_one(const PovmElement& element) {
  const double total = detail::compensated_sum(element.coeffs);
  if (!(total > 0.0)) throw InvalidArgument("cannot normalize an all-zero POVM element");
  PovmElement out = element;
  for (double& c : out.coeffs) c /= total;
  out.normalized = true;
  return out;
}

double pi_one_tail(double eta, double k, int n_max) {
  check(eta, k);
  // sum_m C(n,m) (eta/N)^m (1-eta)^(n-m) over m >= 1 is q^n - r^n with
  // q = 1 - eta + eta/N, r = 1 - eta; the tails are geometric.
  const double ports = std::exp2(k);
  const double r = 1.0 - eta;
  const double q = r + eta / ports;
  if (q >= 1.0 && eta > 0.0) return std::numeric_limits<double>::infinity();
  const double exponent = n_max + 1.0;
  const double q_tail = eta > 0.0 ? std::pow(q, exponent) / (eta * (1.0 - 1.0 / ports)) : 0.0;
  const double r_tail = eta > 0.0 ? std::pow(r, exponent) / eta : 0.0;
  return ports * (q_tail - r_tail);
}

double eta_pnr(const PovmElement& element, double tail_tolerance) {
  if (element.normalized) {
    throw InvalidArgument("eta_pnr is defined on the unnormalized element");
  }
  check(element.eta, element.k);
  if (element.k == 0.0 && element.eta > 0.0) {
    throw DivergenceError("single-photon discrimination efficiency diverges for a threshold detector (k = 0)");
  }
  const double ports = std::exp2(element.k);
  const int stored = static_cast<int>(element.coeffs.size()) - 1;

  detail::NeumaierSum distance;
  const double c1 = stored >= 1 ? element.coeffs[1] : coefficient(1, element.eta, ports);
  distance.add(1.0 - c1);
  int n = 2;
  for (; n <= stored; ++n) distance.add(element.coeffs[static_cast<std::size_t>(n)]);
  // Past the stored range use c_n = N (q^n - r^n); the tail is geometric.
  const double r = 1.0 - element.eta;
  const double q = r + element.eta / ports;
  constexpr int kMaxTerms = 50'000'000;
  while (pi_one_tail(element.eta, element.k, n - 1) >= tail_tolerance) {
    if (n > kMaxTerms) throw DivergenceError("single-photon discrimination sum converges too slowly");
    distance.add(ports * (std::pow(q, n) - std::pow(r, n)));
    ++n;
  }
  return 1.0 - 0.5 * distance.value();
}

}  // namespace pnr
