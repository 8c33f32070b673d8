#include "pnr/jsi.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "pnr/error.hpp"
#include "text.hpp"

namespace pnr {
namespace {

constexpr double kSpeedOfLightNmThz = 299792.458;  // nm * THz

std::vector<double> cell_widths(const std::vector<double>& axis) {
  const std::size_t n = axis.size();
  std::vector<double> w(n);
  w.front() = axis[1] - axis[0];
  w.back() = axis[n - 1] - axis[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) w[i] = 0.5 * (axis[i + 1] - axis[i - 1]);
  return w;
}

void check_axis(const std::vector<double>& axis, const char* name) {
  if (axis.size() < 2) throw InvalidArgument(fmt::format("{} axis needs at least two points", name));
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i])) throw InvalidArgument(fmt::format("{} axis has a non-finite entry", name));
    if (i > 0 && !(axis[i] > axis[i - 1])) {
      throw InvalidArgument(fmt::format("{} axis is not strictly ascending", name));
    }
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return xs;
}

// Gaussian intensity envelope with the given FWHM; flat when fwhm is infinite.
double gaussian_envelope(double offset, double fwhm) {
  if (std::isinf(fwhm)) return 1.0;
  const double r = offset / fwhm;
  return std::exp(-4.0 * std::numbers::ln2 * r * r);
}

void check_band(const Band& b, const char* name) {
  if (!(std::isfinite(b.lo_nm) && std::isfinite(b.hi_nm) && b.lo_nm > 0.0 && b.hi_nm > b.lo_nm)) {
    throw InvalidArgument(fmt::format("{} band edges are inverted or invalid", name));
  }
}

}  // namespace

void JsiGrid::validate() const {
  check_axis(signal_nm, "signal");
  check_axis(idler_nm, "idler");
  if (intensity.rows() != static_cast<Eigen::Index>(signal_nm.size()) ||
      intensity.cols() != static_cast<Eigen::Index>(idler_nm.size())) {
    throw InvalidArgument("JSI intensity dimensions do not match its axes");
  }
  for (Eigen::Index i = 0; i < intensity.size(); ++i) {
    const double v = intensity.data()[i];
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("JSI intensity must be finite and non-negative");
  }
}

std::vector<double> JsiGrid::signal_widths() const { return cell_widths(signal_nm); }
std::vector<double> JsiGrid::idler_widths() const { return cell_widths(idler_nm); }

double JsiGrid::integral() const {
  const auto ws = signal_widths();
  const auto wi = idler_widths();
  double total = 0.0;
  for (Eigen::Index r = 0; r < intensity.rows(); ++r) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < intensity.cols(); ++c) row += intensity(r, c) * wi[static_cast<std::size_t>(c)];
    total += row * ws[static_cast<std::size_t>(r)];
  }
  return total;
}

JsiGrid normalized(JsiGrid grid) {
  grid.validate();
  const double total = grid.integral();
  if (!(total > 0.0) || !std::isfinite(total)) throw InvalidArgument("JSI has zero total intensity");
  grid.intensity /= total;
  return grid;
}

JsiSourceParams JsiSourceParams::separable() {
  JsiSourceParams p;
  p.pump_bandwidth_nm = p.phasematch_bandwidth_nm;
  return p;
}

JsiGrid synthesize_jsi(const JsiSourceParams& params) {
  check_band(params.signal_band, "signal");
  check_band(params.idler_band, "idler");
  if (params.signal_band.lo_nm < params.idler_band.hi_nm && params.idler_band.lo_nm < params.signal_band.hi_nm) {
    throw InvalidArgument("signal and idler bands overlap");
  }
  if (!(params.pump_center_nm > 0.0) || !std::isfinite(params.pump_center_nm)) {
    throw InvalidArgument("pump center must be a positive wavelength");
  }
  if (!(params.pump_bandwidth_nm > 0.0) || !(params.phasematch_bandwidth_nm > 0.0)) {
    throw InvalidArgument("bandwidths must be positive");
  }
  if (params.grid_size < 16) throw InvalidArgument("grid_size must be at least 16");

  const double pump_thz = kSpeedOfLightNmThz / params.pump_center_nm;
  const double scale = kSpeedOfLightNmThz / (params.pump_center_nm * params.pump_center_nm);
  const double pump_fwhm_thz = params.pump_bandwidth_nm * scale;
  const double pm_fwhm_thz = params.phasematch_bandwidth_nm * scale;

  JsiGrid grid;
  grid.signal_nm = linspace(params.signal_band.lo_nm, params.signal_band.hi_nm, params.grid_size);
  grid.idler_nm = linspace(params.idler_band.lo_nm, params.idler_band.hi_nm, params.grid_size);
  grid.intensity.resize(params.grid_size, params.grid_size);
  for (int r = 0; r < params.grid_size; ++r) {
    const double nu_s = kSpeedOfLightNmThz / grid.signal_nm[static_cast<std::size_t>(r)];
    for (int c = 0; c < params.grid_size; ++c) {
      const double nu_i = kSpeedOfLightNmThz / grid.idler_nm[static_cast<std::size_t>(c)];
      grid.intensity(r, c) =
          gaussian_envelope(nu_s + nu_i - pump_thz, pump_fwhm_thz) * gaussian_envelope(nu_s - nu_i, pm_fwhm_thz);
    }
  }
  if (!(grid.intensity.maxCoeff() > 0.0)) {
    throw InvalidArgument("filters exclude all of the joint spectral support");
  }
  return normalized(std::move(grid));
}

SchmidtModes schmidt_modes(const JsiGrid& jsi) {
  jsi.validate();
  const auto ws = jsi.signal_widths();
  const auto wi = jsi.idler_widths();
  Eigen::MatrixXd amplitude = jsi.intensity.cwiseSqrt();
  for (Eigen::Index r = 0; r < amplitude.rows(); ++r) amplitude.row(r) *= std::sqrt(ws[static_cast<std::size_t>(r)]);
  for (Eigen::Index c = 0; c < amplitude.cols(); ++c) amplitude.col(c) *= std::sqrt(wi[static_cast<std::size_t>(c)]);
  if (!(amplitude.maxCoeff() > 0.0)) throw InvalidArgument("JSI intensity is all zero");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(amplitude, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SchmidtModes{svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

SchmidtSpectrum schmidt_decompose(const JsiGrid& jsi, double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw InvalidArgument("Schmidt cutoff must lie in (0, 1)");
  const SchmidtModes modes = schmidt_modes(jsi);
  std::vector<double> weights(static_cast<std::size_t>(modes.singular_values.size()));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double s = modes.singular_values[static_cast<Eigen::Index>(i)];
    weights[i] = s * s;
  }
  return SchmidtSpectrum::from_weights(std::move(weights), cutoff);
}

double calibrate_pump_bandwidth(JsiSourceParams base, double target_k) {
  if (!(target_k >= 1.0)) throw InvalidArgument("target Schmidt number must be >= 1");
  auto k_minus_target = [&](double log_bw) {
    base.pump_bandwidth_nm = std::exp(log_bw);
    return std::log(schmidt_decompose(synthesize_jsi(base)).schmidt_number() / target_k);
  };
  // Below about one grid cell (in pump-wavelength units) the grid no longer
  // resolves the anticorrelation and K falls again.
  const double cell_nm = std::min(base.signal_band.width(), base.idler_band.width()) / base.grid_size;
  double lo = std::log(0.25 * cell_nm), hi = std::log(base.phasematch_bandwidth_nm);
  const double f_lo = k_minus_target(lo), f_hi = k_minus_target(hi);
  if (!(f_lo > 0.0 && f_hi < 0.0)) {
    throw NoRootError(fmt::format("Schmidt number {} is not reachable by tuning the pump bandwidth", target_k));
  }
  std::uintmax_t iterations = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(k_minus_target, lo, hi, f_lo, f_hi,
                                                        boost::math::tools::eps_tolerance<double>(40), iterations);
  return std::exp(0.5 * (a + b));
}

SchmidtSpectrum default_source_spectrum() {
  static const SchmidtSpectrum spectrum = schmidt_decompose(synthesize_jsi(JsiSourceParams{}));
  return spectrum;
}

void write_jsi_csv(std::ostream& out, const JsiGrid& jsi) {
  jsi.validate();
  out << "signal_nm\\idler_nm";
  for (double x : jsi.idler_nm) out << fmt::format(",{}", x);
  out << '\n';
  for (std::size_t r = 0; r < jsi.signal_nm.size(); ++r) {
    out << fmt::format("{}", jsi.signal_nm[r]);
    for (Eigen::Index c = 0; c < jsi.intensity.cols(); ++c) {
      out << fmt::format(",{}", jsi.intensity(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
}

JsiGrid read_jsi_csv(std::istream& in) {
  std::string line;
  JsiGrid grid;
  if (!std::getline(in, line)) throw FormatError("JSI CSV is empty");
  {
    const auto fields = detail::split_csv(line);
    for (std::size_t i = 1; i < fields.size(); ++i) grid.idler_nm.push_back(detail::parse_double(fields[i]));
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != grid.idler_nm.size() + 1) {
      throw FormatError(fmt::format("JSI CSV row {} has {} fields, expected {}", rows.size() + 2, fields.size(),
                                    grid.idler_nm.size() + 1));
    }
    grid.signal_nm.push_back(detail::parse_double(fields[0]));
    auto& row = rows.emplace_back();
    for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(detail::parse_double(fields[i]));
  }
  grid.intensity.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(grid.idler_nm.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      grid.intensity(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  grid.validate();
  return grid;
}

void write_spectrum_csv(std::ostream& out, const SchmidtSpectrum& spectrum) {
  out << fmt::format("# schmidt_number={:.6f}\n", spectrum.schmidt_number());
  out << "mode,lambda\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i) out << fmt::format("{},{}\n", i, spectrum[i]);
}

SchmidtSpectrum read_spectrum_csv(std::istream& in) {
  std::string line;
  std::vector<double> weights;
  bool header_seen = false;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = detail::split_csv(t);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 2 && fields[1] == "lambda") continue;
    }
    if (fields.size() != 2) throw FormatError("spectrum CSV rows must be 'mode,lambda'");
    weights.push_back(detail::parse_double(fields[1]));
  }
  if (weights.empty()) throw FormatError("spectrum CSV has no entries");
  return SchmidtSpectrum::from_weights(std::move(weights));
}

}  // namespace pnr
