#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pnr {

/// Normalized Schmidt eigenvalues of a photon-pair source, in descending
/// order, all strictly positive, summing to one.
class SchmidtSpectrum {
 public:
  /// Single-mode source, lambda = (1).
  SchmidtSpectrum();

  /// Sorts, drops entries <= cutoff * max, and renormalizes. Throws
  /// InvalidArgument for negative or non-finite weights or an all-zero input.
  static SchmidtSpectrum from_weights(std::vector<double> weights, double relative_cutoff = 0.0);

  static SchmidtSpectrum uniform(std::size_t modes);

  std::span<const double> lambdas() const noexcept { return lambdas_; }
  std::size_t size() const noexcept { return lambdas_.size(); }
  double operator[](std::size_t i) const { return lambdas_[i]; }

  /// K = 1 / sum(lambda^2).
  double schmidt_number() const noexcept;

 private:
  explicit SchmidtSpectrum(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {}

  std::vector<double> lambdas_;
};

inline double schmidt_number(const SchmidtSpectrum& spectrum) noexcept {
  return spectrum.schmidt_number();
}

}  // namespace pnr
