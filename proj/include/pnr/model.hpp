#pragma once

#include <array>

#include "pnr/spectrum.hpp"

namespace pnr {

/// Path efficiencies, including coupling and detection, each in [0, 1].
struct Efficiencies {
  double idler = 1.0;
  double signal1 = 1.0;
  double signal2 = 1.0;
};

enum class Arm { signal1, signal2 };

/// Parameters of the heralded source and its readout. `mu` is the total mean
/// pair number per pulse, shared over Schmidt modes as mu * lambda_s. `k` is
/// the depth of the binary splitter tree modelling the PNR detector
/// (N = 2^k output ports); real-valued k is an effective model.
struct ModelParams {
  double mu = 0.0;
  Efficiencies eta;
  double k = 0.0;
  SchmidtSpectrum spectrum;

  void validate() const;
  ModelParams with_mu(double new_mu) const;
  ModelParams with_k(double new_k) const;
};

/// Idler, idler-signal twofold, and threefold coincidence probabilities.
struct ProbabilitySet {
  double p_i = 0.0;
  double p_is1 = 0.0;
  double p_is2 = 0.0;
  double p_is1s2 = 0.0;
};

enum class DetectionConfig {
  threshold,  ///< idler counted on any click
  pnr,        ///< idler counted only when exactly one tree port clicks
};

/// Probability that exactly one of the 2^k tree ports clicks.
double p_idler(const ModelParams& params);
/// Probability that the idler detector clicks at all.
double p_idler_threshold(const ModelParams& params);
/// Threshold clicks not classified as single photons.
double p_idler_multibin(const ModelParams& params);

double p_twofold(const ModelParams& params, Arm arm);
double p_twofold_threshold(const ModelParams& params, Arm arm);
double p_threefold(const ModelParams& params);
double p_threefold_threshold(const ModelParams& params);

/// Signal singles and the signal1-signal2 twofold, independent of the idler.
double p_signal(const ModelParams& params, Arm arm);
double p_signal_both(const ModelParams& params);

ProbabilitySet probabilities(const ModelParams& params, DetectionConfig config);

/// g2(0) = P_is1s2 P_i / (P_is1 P_is2). Throws UndefinedRatioError when a
/// twofold probability vanishes.
double g2(const ModelParams& params, DetectionConfig config);

/// Mean pair number in [1e-8, 1] at which g2 equals target_g2. `params.mu`
/// is ignored. Throws NoRootError if the target is outside the bracket.
double mu_for_g2(double target_g2, const ModelParams& params, DetectionConfig config);

/// 1 - (1 - p)^modes for independent multiplexed modes.
double multiplexed_success(double p_single, int modes);

/// Joint per-pulse outcome distribution: idler class x signal1 click x
/// signal2 click. Built from the closed forms, so it also covers real k.
enum class IdlerClass { none = 0, single = 1, multi = 2 };

struct OutcomeTable {
  // cells[idler][s1][s2]
  std::array<std::array<std::array<double, 2>, 2>, 3> cells{};

  double& at(IdlerClass idler, bool s1, bool s2) {
    return cells[static_cast<int>(idler)][s1 ? 1 : 0][s2 ? 1 : 0];
  }
  double at(IdlerClass idler, bool s1, bool s2) const {
    return cells[static_cast<int>(idler)][s1 ? 1 : 0][s2 ? 1 : 0];
  }
};

/// Throws NumericError if the effective model yields a cell below -1e-12.
OutcomeTable outcome_table(const ModelParams& params);

}  // namespace pnr
