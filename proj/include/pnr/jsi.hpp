#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "pnr/spectrum.hpp"

namespace pnr {

/// Joint spectral intensity sampled on a rectilinear wavelength grid.
/// Rows follow the signal axis, columns the idler axis.
struct JsiGrid {
  std::vector<double> signal_nm;
  std::vector<double> idler_nm;
  Eigen::MatrixXd intensity;

  /// Throws InvalidArgument unless both axes are strictly ascending with at
  /// least two points, dimensions agree, and every entry is finite and >= 0.
  void validate() const;

  /// Per-point cell widths (midpoint rule; end cells use the adjacent spacing).
  std::vector<double> signal_widths() const;
  std::vector<double> idler_widths() const;

  /// Sum of intensity times cell area.
  double integral() const;
};

/// Returns a copy scaled so that integral() == 1.
JsiGrid normalized(JsiGrid grid);

struct Band {
  double lo_nm;
  double hi_nm;
  double center() const noexcept { return 0.5 * (lo_nm + hi_nm); }
  double width() const noexcept { return hi_nm - lo_nm; }
};

/// Pump bandwidth (nm FWHM) that gives K = 20.6 with the default filters,
/// 20 nm phase matching and a 128-point grid. Found with
/// calibrate_pump_bandwidth(); see test_jsi.cpp.
inline constexpr double kCalibratedPumpBandwidthNm = 0.1035060729;

/// Gaussian pump envelope over the sum frequency times a Gaussian
/// phase-matching envelope over the difference frequency, cut by rectangular
/// signal/idler filters. Both bandwidths are intensity FWHM in nm, converted
/// to frequency at the pump wavelength. Infinite bandwidth means a flat
/// envelope. Equal bandwidths give an exactly separable JSI.
struct JsiSourceParams {
  double pump_center_nm = 770.0;
  double pump_bandwidth_nm = kCalibratedPumpBandwidthNm;
  double phasematch_bandwidth_nm = 20.0;
  Band signal_band{1523.5, 1536.5};
  Band idler_band{1543.5, 1556.5};
  int grid_size = 128;

  /// Default filters with matched envelopes (pure, K = 1).
  static JsiSourceParams separable();
};

/// Builds a normalized grid spanning the two filter passbands.
/// Throws InvalidArgument for inverted or overlapping bands, non-positive
/// bandwidths, grid_size < 16, or when the filters exclude all support.
JsiGrid synthesize_jsi(const JsiSourceParams& params);

/// Full singular value decomposition of the (cell-area weighted) amplitude
/// sqrt(intensity). Columns of signal_modes / idler_modes pair with
/// singular_values, which are sorted descending.
struct SchmidtModes {
  Eigen::VectorXd singular_values;
  Eigen::MatrixXd signal_modes;
  Eigen::MatrixXd idler_modes;
};

SchmidtModes schmidt_modes(const JsiGrid& jsi);

/// lambda_s = sigma_s^2 / sum sigma^2, dropping modes below cutoff * lambda_max.
SchmidtSpectrum schmidt_decompose(const JsiGrid& jsi, double cutoff = 1e-6);

/// Sweeps the pump bandwidth (all else fixed) until the Schmidt number of
/// the synthesized JSI equals target_k. Returns the bandwidth in nm.
double calibrate_pump_bandwidth(JsiSourceParams base, double target_k);

/// Spectrum of the default calibrated source (K ~ 20.6).
SchmidtSpectrum default_source_spectrum();

// CSV: first row is the idler axis preceded by one label cell, every further
// row is a signal wavelength followed by the intensity row.
void write_jsi_csv(std::ostream& out, const JsiGrid& jsi);
JsiGrid read_jsi_csv(std::istream& in);

// CSV: "# schmidt_number=<K>" comment line, then "mode,lambda" rows.
void write_spectrum_csv(std::ostream& out, const SchmidtSpectrum& spectrum);
SchmidtSpectrum read_spectrum_csv(std::istream& in);

}  // namespace pnr
