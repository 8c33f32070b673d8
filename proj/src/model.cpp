#include "pnr/model.hpp"

#include <fmt/format.h>

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "pnr/error.hpp"
#include "summation.hpp"

namespace pnr {
namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

// Products over Schmidt modes of 1 / (1 + lambda_s mu c), where c is the
// probability that a photon pair is seen by at least one of the detectors
// that are required to stay dark. All products are handled through their
// logarithm F(c) = sum_s log1p(lambda_s mu c). Evaluated in extended
// precision: the threefold is a second difference of these products and
// loses about log10(1/mu) digits.
using Real = long double;
using RealSum = detail::BasicNeumaierSum<Real>;

class ModeProducts {
 public:
  explicit ModeProducts(const ModelParams& p) : lambdas_(p.spectrum.lambdas()), mu_(p.mu) {}

  Real log_inverse(Real c) const {
    RealSum sum;
    for (double l : lambdas_) sum.add(std::log1p(l * mu_ * c));
    return sum.value();
  }

  Real vacuum(Real c) const { return std::exp(-log_inverse(c)); }

  // F(lo + delta) - F(lo) without forming the difference of two sums.
  Real log_gap(Real lo, Real delta) const {
    RealSum sum;
    for (double l : lambdas_) {
      const Real x = l * mu_;
      sum.add(std::log1p(x * delta / (1 + x * lo)));
    }
    return sum.value();
  }

  // vacuum(lo) - vacuum(lo + delta), keeping relative accuracy for small delta.
  Real vacuum_drop(Real lo, Real delta) const { return vacuum(lo + delta) * std::expm1(log_gap(lo, delta)); }

  // 1 - vacuum(c)
  Real any_click(Real c) const { return -std::expm1(-log_inverse(c)); }

 private:
  std::span<const double> lambdas_;
  Real mu_;
};

// N * P(signal-off-set dark, exactly port m of the tree lit): the idler
// factor of every PNR expression. `signal_dark` is the probability that a
// photon pair reaches one of the signal detectors that must stay dark.
Real one_port_term(const ModeProducts& products, const ModelParams& p, Real signal_dark) {
  const Real k = p.k;
  const Real ports = std::exp2(k);
  const Real keep_fraction = -std::expm1(-k * std::numbers::ln2_v<Real>);  // 1 - 1/N
  const Real idler_visible = p.eta.idler * (1 - signal_dark);
  const Real others_dark = signal_dark + idler_visible * keep_fraction;
  const Real one_port = idler_visible / ports;
  return ports * products.vacuum_drop(others_dark, one_port);
}

Real arm_efficiency(const ModelParams& p, Arm arm) {
  return Real(0.5) * (arm == Arm::signal1 ? p.eta.signal1 : p.eta.signal2);
}

}  // namespace

void ModelParams::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be finite and >= 0");
  if (!in_unit_interval(eta.idler) || !in_unit_interval(eta.signal1) || !in_unit_interval(eta.signal2)) {
    throw InvalidArgument("efficiencies must lie in [0, 1]");
  }
  if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidArgument("tree depth k must be finite and >= 0");
  if (k > 1000.0) throw InvalidArgument("tree depth k above 1000 is not representable");
}

ModelParams ModelParams::with_mu(double new_mu) const {
  ModelParams p = *this;
  p.mu = new_mu;
  return p;
}

ModelParams ModelParams::with_k(double new_k) const {
  ModelParams p = *this;
  p.k = new_k;
  return p;
}

double p_idler(const ModelParams& params) {
  params.validate();
  return static_cast<double>(one_port_term(ModeProducts(params), params, 0));
}

double p_idler_threshold(const ModelParams& params) {
  params.validate();
  return static_cast<double>(ModeProducts(params).any_click(params.eta.idler));
}

double p_idler_multibin(const ModelParams& params) {
  return std::max(0.0, p_idler_threshold(params) - p_idler(params));
}

double p_twofold(const ModelParams& params, Arm arm) {
  params.validate();
  const ModeProducts products(params);
  const Real a = arm_efficiency(params, arm);
  return static_cast<double>(one_port_term(products, params, 0) - one_port_term(products, params, a));
}

double p_twofold_threshold(const ModelParams& params, Arm arm) {
  params.validate();
  const ModeProducts products(params);
  const Real a = arm_efficiency(params, arm);
  const Real eta_i = params.eta.idler;
  // P(s on) - P(s on, idler dark)
  return static_cast<double>(products.any_click(a) - products.vacuum_drop(eta_i, a * (1 - eta_i)));
}

double p_threefold(const ModelParams& params) {
  params.validate();
  const ModeProducts products(params);
  const Real a1 = arm_efficiency(params, Arm::signal1);
  const Real a2 = arm_efficiency(params, Arm::signal2);
  RealSum sum;
  sum.add(one_port_term(products, params, 0));
  sum.add(-one_port_term(products, params, a1));
  sum.add(-one_port_term(products, params, a2));
  sum.add(one_port_term(products, params, a1 + a2));
  return static_cast<double>(sum.value());
}

double p_threefold_threshold(const ModelParams& params) {
  params.validate();
  const ModeProducts products(params);
  const Real a1 = arm_efficiency(params, Arm::signal1);
  const Real a2 = arm_efficiency(params, Arm::signal2);
  const Real eta_i = params.eta.idler;
  // P(idler on, signal set a dark) = vacuum(a) - vacuum(a + eta_i (1 - a))
  auto idler_on_signal_dark = [&](Real a) { return products.vacuum_drop(a, eta_i * (1 - a)); };
  RealSum sum;
  sum.add(idler_on_signal_dark(0));
  sum.add(-idler_on_signal_dark(a1));
  sum.add(-idler_on_signal_dark(a2));
  sum.add(idler_on_signal_dark(a1 + a2));
  return static_cast<double>(sum.value());
}

double p_signal(const ModelParams& params, Arm arm) {
  params.validate();
  return static_cast<double>(ModeProducts(params).any_click(arm_efficiency(params, arm)));
}

double p_signal_both(const ModelParams& params) {
  params.validate();
  const ModeProducts products(params);
  const Real a1 = arm_efficiency(params, Arm::signal1);
  const Real a2 = arm_efficiency(params, Arm::signal2);
  // P(s1 on) - P(s1 on, s2 dark)
  return static_cast<double>(products.any_click(a1) - products.vacuum_drop(a2, a1));
}

ProbabilitySet probabilities(const ModelParams& params, DetectionConfig config) {
  if (config == DetectionConfig::threshold) {
    return {p_idler_threshold(params), p_twofold_threshold(params, Arm::signal1),
            p_twofold_threshold(params, Arm::signal2), p_threefold_threshold(params)};
  }
  return {p_idler(params), p_twofold(params, Arm::signal1), p_twofold(params, Arm::signal2), p_threefold(params)};
}

double g2(const ModelParams& params, DetectionConfig config) {
  const ProbabilitySet p = probabilities(params, config);
  if (!(p.p_is1 > 0.0)) throw UndefinedRatioError("P_is1");
  if (!(p.p_is2 > 0.0)) throw UndefinedRatioError("P_is2");
  return p.p_is1s2 * p.p_i / (p.p_is1 * p.p_is2);
}

double mu_for_g2(double target_g2, const ModelParams& params, DetectionConfig config) {
  constexpr double kMuMin = 1e-8;
  constexpr double kMuMax = 1.0;
  if (!(target_g2 > 0.0) || !std::isfinite(target_g2)) throw InvalidArgument("target g2 must be positive");
  auto residual = [&](double log_mu) { return g2(params.with_mu(std::exp(log_mu)), config) - target_g2; };
  const double lo = std::log(kMuMin), hi = std::log(kMuMax);
  const double f_lo = residual(lo), f_hi = residual(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    throw NoRootError(fmt::format("g2 = {} is not reached for mu in [{}, {}] (g2 spans [{}, {}])", target_g2,
                                  kMuMin, kMuMax, f_lo + target_g2, f_hi + target_g2));
  }
  std::uintmax_t iterations = 200;
  // 1e-12 in log(mu) is a 1e-12 relative tolerance in mu.
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
  const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, tol, iterations);
  return std::exp(0.5 * (a + b));
}

double multiplexed_success(double p_single, int modes) {
  if (!in_unit_interval(p_single)) throw InvalidArgument("single-mode probability must lie in [0, 1]");
  if (modes < 1) throw InvalidArgument("number of multiplexed modes must be positive");
  if (p_single == 1.0) return 1.0;
  return -std::expm1(modes * std::log1p(-p_single));
}

OutcomeTable outcome_table(const ModelParams& params) {
  const ProbabilitySet one = probabilities(params, DetectionConfig::pnr);
  const ProbabilitySet any = probabilities(params, DetectionConfig::threshold);
  const double s1 = p_signal(params, Arm::signal1);
  const double s2 = p_signal(params, Arm::signal2);
  const double s12 = p_signal_both(params);

  // Cells of (idler event, s1, s2) from marginal probabilities of the form
  // P(idler event, s1 on), P(idler event, s2 on), P(idler event, both on).
  auto split = [](double total, double with1, double with2, double with12) {
    std::array<std::array<double, 2>, 2> c{};
    c[1][1] = with12;
    c[1][0] = with1 - with12;
    c[0][1] = with2 - with12;
    c[0][0] = total - with1 - with2 + with12;
    return c;
  };
  const auto single = split(one.p_i, one.p_is1, one.p_is2, one.p_is1s2);
  const auto clicked = split(any.p_i, any.p_is1, any.p_is2, any.p_is1s2);
  const auto signal = split(1.0, s1, s2, s12);

  OutcomeTable table;
  for (int b1 = 0; b1 < 2; ++b1) {
    for (int b2 = 0; b2 < 2; ++b2) {
      table.cells[1][b1][b2] = single[b1][b2];
      table.cells[2][b1][b2] = clicked[b1][b2] - single[b1][b2];
      table.cells[0][b1][b2] = signal[b1][b2] - clicked[b1][b2];
    }
  }
  for (auto& plane : table.cells) {
    for (auto& row : plane) {
      for (double& cell : row) {
        if (cell < -1e-12) {
          throw NumericError(fmt::format("effective model yields a negative outcome probability ({})", cell));
        }
        cell = std::max(cell, 0.0);
      }
    }
  }
  return table;
}

}  // namespace pnr
