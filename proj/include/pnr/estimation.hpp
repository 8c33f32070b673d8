#pragma once

#include <span>
#include <vector>

#include "pnr/model.hpp"
#include "pnr/spectrum.hpp"
#include "pnr/tagstream.hpp"

namespace pnr {

/// Count summaries of a power sweep, ordered by increasing pump power.
using SettingData = std::vector<CountSummary>;

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

struct EfficiencyEstimate {
  Estimate idler;
  Estimate signal1;
  Estimate signal2;
  /// Largest mean pair number implied by the settings used (C_i / pulses / eta_i).
  double implied_mu_max = 0.0;
  /// Set when implied_mu_max exceeds kLowMuLimit: the heralding ratios are
  /// then biased upward by multi-pair accidentals.
  bool out_of_regime = false;
};

inline constexpr double kLowMuLimit = 0.05;

/// Heralding (Klyshko) estimators from the lowest-rate settings:
/// eta_sj = 2 C_isj / C_i (the 2 undoes the 50:50 split) and
/// eta_i = C_isj / C_sj averaged over both arms. Averaged over settings with
/// the standard error of the mean as sigma.
EfficiencyEstimate estimate_efficiencies(const SettingData& data, std::size_t settings_used = 4);

/// Solves P_is1s2(mu; threshold) = C_is1s2 / pulses for one setting.
/// Returns 0 for zero threefolds; throws NoRootError if the rate is not
/// reachable for mu <= 1000.
double fit_mu(const CountSummary& counts, const Efficiencies& eta, const SchmidtSpectrum& spectrum);
std::vector<double> fit_mu(const SettingData& data, const Efficiencies& eta, const SchmidtSpectrum& spectrum);

struct TreeDepthFit {
  double k = 0.0;
  /// Poisson-weighted sum of squares at the optimum.
  double residual = 0.0;
  /// False if the coarse scan found more than one local minimum.
  bool unimodal = true;
};

/// Poisson-weighted least squares of P_i(mu_j; k) against the single-photon
/// bin rates, minimized over k in [0, k_max]: coarse scan, then Brent.
TreeDepthFit fit_tree_depth(const SettingData& data, std::span<const double> mus, double eta_idler,
                            const SchmidtSpectrum& spectrum, double k_max = 12.0);

/// All three fits chained together the way a power sweep is analysed.
struct SweepFit {
  EfficiencyEstimate efficiencies;
  std::vector<double> mus;
  TreeDepthFit tree;
};

SweepFit fit_sweep(const SettingData& data, const SchmidtSpectrum& spectrum);

}  // namespace pnr
