#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "pnr/model.hpp"
#include "pnr/spectrum.hpp"

namespace pnr {

/// Per-mode pair-number law of a two-mode squeezed vacuum,
/// P(n) = mean^n / (1 + mean)^(n+1), truncated at n_max with the exact
/// remaining mass in `tail`.
struct PairDistribution {
  std::vector<double> probabilities;
  double tail = 0.0;
};

PairDistribution pair_distribution(double mean, int n_max);

/// How signal photons reach the two arms. Both give the same law (binomial
/// thinning commutes with splitting); the second exists to check that.
enum class SignalRouting {
  combined,         ///< one three-outcome draw per photon: lost, arm 1, arm 2
  split_then_loss,  ///< 50:50 split first, then per-arm loss
};

struct OracleConfig {
  SchmidtSpectrum spectrum;
  double mu = 0.0;
  Efficiencies eta;
  int k = 0;
  int n_max = 30;
  /// Results whose truncation bound exceeds this are flagged.
  double tolerance = 1e-10;
  SignalRouting routing = SignalRouting::combined;

  void validate() const;
};

/// Exact joint law of (number of lit idler ports, signal1 click, signal2 click).
struct OutcomeLattice {
  int ports = 1;
  // cells[j][2*s1 + s2] for j = 0..max_lit
  std::vector<std::array<double, 4>> cells;
  /// Rigorous bound on the probability mass lost to truncation.
  double truncation_bound = 0.0;

  double total() const;
};

OutcomeLattice outcome_lattice(const OracleConfig& config);

struct OracleResult {
  ProbabilitySet pnr;
  ProbabilitySet threshold;
  double truncation_bound = 0.0;
  /// False when truncation_bound > config.tolerance.
  bool within_tolerance = true;
};

/// Exact truncated Fock-space evaluation of the idler, twofold and threefold
/// probabilities for both readout configurations.
OracleResult exact_probabilities(const OracleConfig& config);

/// Probability that exactly one of the 2^k threshold detectors clicks for an
/// n-photon input, by explicit enumeration of every photon's path through
/// the splitter tree.
double povm_click_probability(int n_photons, double eta, int k);

/// Probability, for each port j, that port j is the only one to click.
std::vector<double> port_click_probabilities(int n_photons, double eta, int k);

/// One pulse of the source sampled photon by photon.
struct PulseOutcome {
  int pairs = 0;
  int lit_ports = 0;
  bool signal1 = false;
  bool signal2 = false;
};

/// Monte Carlo sampler of single pulses. Requires integer k <= 30.
class PulseSampler {
 public:
  explicit PulseSampler(const ModelParams& params);

  PulseOutcome operator()(std::mt19937_64& rng) const;

 private:
  int sample_pairs(std::mt19937_64& rng) const;

  ModelParams params_;
  std::uint32_t ports_ = 1;
  // prefix_vacuum_[j] = prod_{s < j} 1 / (1 + lambda_s mu)
  std::vector<double> prefix_vacuum_;
};

struct MonteCarloEstimate {
  ProbabilitySet pnr;
  ProbabilitySet threshold;
  std::uint64_t shots = 0;
};

MonteCarloEstimate monte_carlo_probabilities(const OracleConfig& config, std::uint64_t shots, std::uint64_t seed);

}  // namespace pnr
