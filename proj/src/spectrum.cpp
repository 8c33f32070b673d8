#include "pnr/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "pnr/error.hpp"
#include "summation.hpp"

namespace pnr {

SchmidtSpectrum::SchmidtSpectrum() : lambdas_{1.0} {}

SchmidtSpectrum SchmidtSpectrum::from_weights(std::vector<double> weights, double relative_cutoff) {
  if (!(relative_cutoff >= 0.0 && relative_cutoff < 1.0)) {
    throw InvalidArgument("Schmidt cutoff must lie in [0, 1)");
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("Schmidt weights must be finite and non-negative");
  }
  std::sort(weights.begin(), weights.end(), std::greater<>());
  if (weights.empty() || weights.front() <= 0.0) throw InvalidArgument("Schmidt spectrum is empty or all zero");

  const double floor = relative_cutoff * weights.front();
  std::erase_if(weights, [floor](double w) { return w <= floor || w <= 0.0; });

  const double total = detail::compensated_sum(weights);
  for (double& w : weights) w /= total;
  return SchmidtSpectrum(std::move(weights));
}

SchmidtSpectrum SchmidtSpectrum::uniform(std::size_t modes) {
  if (modes == 0) throw InvalidArgument("uniform spectrum needs at least one mode");
  return from_weights(std::vector<double>(modes, 1.0));
}

double SchmidtSpectrum::schmidt_number() const noexcept {
  detail::NeumaierSum sum;
  for (double l : lambdas_) sum.add(l * l);
  return 1.0 / sum.value();
}

}  // namespace pnr
