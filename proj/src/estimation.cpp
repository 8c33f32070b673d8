#include "pnr/estimation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numeric>

#include "pnr/error.hpp"

namespace pnr {
namespace {

Estimate mean_and_error(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

double rate(std::uint64_t count, std::uint64_t pulses) { return static_cast<double>(count) / static_cast<double>(pulses); }

}  // namespace

EfficiencyEstimate estimate_efficiencies(const SettingData& data, std::size_t settings_used) {
  if (settings_used < 1) throw InvalidArgument("at least one setting must be used");
  if (data.size() < settings_used) {
    throw InvalidArgument(fmt::format("efficiency estimation needs {} settings, got {}", settings_used, data.size()));
  }
  std::vector<const CountSummary*> order;
  for (const auto& c : data) {
    if (c.pulses == 0) throw InvalidArgument("setting with zero pulses");
    order.push_back(&c);
  }
  std::stable_sort(order.begin(), order.end(), [](const CountSummary* a, const CountSummary* b) {
    return rate(a->idler_total(), a->pulses) < rate(b->idler_total(), b->pulses);
  });

  std::vector<double> eta_i, eta_s1, eta_s2;
  EfficiencyEstimate out;
  std::vector<double> idler_rates;
  for (std::size_t i = 0; i < settings_used; ++i) {
    const CountSummary& c = *order[i];
    if (c.idler_total() == 0) throw UndefinedRatioError("C_i");
    if (c.signal1 == 0) throw UndefinedRatioError("C_s1");
    if (c.signal2 == 0) throw UndefinedRatioError("C_s2");
    const double ci = static_cast<double>(c.idler_total());
    const double c1 = static_cast<double>(c.threshold.idler_signal1);
    const double c2 = static_cast<double>(c.threshold.idler_signal2);
    eta_s1.push_back(2.0 * c1 / ci);
    eta_s2.push_back(2.0 * c2 / ci);
    eta_i.push_back(0.5 * (c1 / static_cast<double>(c.signal1) + c2 / static_cast<double>(c.signal2)));
    idler_rates.push_back(rate(c.idler_total(), c.pulses));
  }
  out.idler = mean_and_error(eta_i);
  out.signal1 = mean_and_error(eta_s1);
  out.signal2 = mean_and_error(eta_s2);
  if (out.idler.value > 0.0) {
    out.implied_mu_max = *std::max_element(idler_rates.begin(), idler_rates.end()) / out.idler.value;
  }
  out.out_of_regime = out.implied_mu_max > kLowMuLimit;
  return out;
}

double fit_mu(const CountSummary& counts, const Efficiencies& eta, const SchmidtSpectrum& spectrum) {
  if (counts.pulses == 0) throw InvalidArgument("setting with zero pulses");
  const std::uint64_t threefolds = counts.threshold.idler_signal1_signal2;
  if (threefolds == 0) return 0.0;
  const double target = rate(threefolds, counts.pulses);

  const ModelParams base{0.0, eta, 0.0, spectrum};
  auto residual = [&](double log_mu) { return p_threefold_threshold(base.with_mu(std::exp(log_mu))) - target; };
  const double lo = std::log(1e-12), hi = std::log(1e3);
  const double f_lo = residual(lo), f_hi = residual(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0)) {
    throw NoRootError(fmt::format("threefold rate {} is inconsistent with the efficiencies", target));
  }
  std::uintmax_t iterations = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
  const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, tol, iterations);
  return std::exp(0.5 * (a + b));
}

std::vector<double> fit_mu(const SettingData& data, const Efficiencies& eta, const SchmidtSpectrum& spectrum) {
  std::vector<double> mus;
  mus.reserve(data.size());
  for (const auto& c : data) mus.push_back(fit_mu(c, eta, spectrum));
  return mus;
}

TreeDepthFit fit_tree_depth(const SettingData& data, std::span<const double> mus, double eta_idler,
                            const SchmidtSpectrum& spectrum, double k_max) {
  if (data.size() != mus.size()) throw InvalidArgument("one mean pair number per setting is required");
  if (data.empty()) throw InvalidArgument("no settings to fit");
  if (!(k_max > 0.0)) throw InvalidArgument("k_max must be positive");
  bool any_counts = false;
  for (const auto& c : data) {
    if (c.pulses == 0) throw InvalidArgument("setting with zero pulses");
    any_counts = any_counts || c.idler_single() > 0;
  }
  if (!any_counts) throw NumericError("single-photon bin is empty in every setting; k is not identifiable");

  // chi^2 with Poisson variance taken from the observed count (floored at 1).
  auto objective = [&](double k) {
    double chi2 = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double pulses = static_cast<double>(data[j].pulses);
      const double observed = static_cast<double>(data[j].idler_single());
      const double expected = pulses * p_idler(ModelParams{mus[j], {eta_idler, 1.0, 1.0}, k, spectrum});
      chi2 += (observed - expected) * (observed - expected) / std::max(observed, 1.0);
    }
    return chi2;
  };

  constexpr int kScanPoints = 121;
  std::vector<double> grid(kScanPoints), values(kScanPoints);
  for (int i = 0; i < kScanPoints; ++i) {
    grid[static_cast<std::size_t>(i)] = k_max * i / (kScanPoints - 1);
    values[static_cast<std::size_t>(i)] = objective(grid[static_cast<std::size_t>(i)]);
  }
  int local_minima = 0;
  for (int i = 0; i < kScanPoints; ++i) {
    const double v = values[static_cast<std::size_t>(i)];
    const bool left = i == 0 || v < values[static_cast<std::size_t>(i) - 1];
    const bool right = i == kScanPoints - 1 || v <= values[static_cast<std::size_t>(i) + 1];
    if (left && right) ++local_minima;
  }
  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min<std::size_t>(best + 1, kScanPoints - 1)];
  std::uintmax_t iterations = 200;
  const auto [k, chi2] = boost::math::tools::brent_find_minima(objective, lo, hi, 40, iterations);
  TreeDepthFit fit;
  if (chi2 <= values[best]) {
    fit.k = k;
    fit.residual = chi2;
  } else {
    fit.k = grid[best];
    fit.residual = values[best];
  }
  fit.unimodal = local_minima <= 1;
  return fit;
}

SweepFit fit_sweep(const SettingData& data, const SchmidtSpectrum& spectrum) {
  SweepFit fit;
  fit.efficiencies = estimate_efficiencies(data);
  const Efficiencies eta{std::clamp(fit.efficiencies.idler.value, 0.0, 1.0),
                         std::clamp(fit.efficiencies.signal1.value, 0.0, 1.0),
                         std::clamp(fit.efficiencies.signal2.value, 0.0, 1.0)};
  fit.mus = fit_mu(data, eta, spectrum);
  fit.tree = fit_tree_depth(data, fit.mus, eta.idler, spectrum);
  return fit;
}

}  // namespace pnr
