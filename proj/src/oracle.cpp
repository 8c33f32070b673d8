#include "pnr/oracle.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "pnr/error.hpp"
#include "random.hpp"
#include "summation.hpp"

namespace pnr {
namespace {

constexpr int kMaxOracleDepth = 30;

double choose(double n, int r) {
  if (r < 0 || r > n) return 0.0;
  if (n <= 64.0) {
    double c = 1.0;
    for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
    return c;
  }
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0));
}

std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int m = 0; m <= n; ++m) pmf[static_cast<std::size_t>(m)] = choose(n, m) * std::pow(p, m) * std::pow(1.0 - p, n - m);
  return pmf;
}

// occupancy[m][j]: probability that m photons routed uniformly over `ports`
// outputs light exactly j of them.
std::vector<std::vector<double>> occupancy_table(int max_photons, double ports, int max_lit) {
  std::vector<std::vector<double>> occ(static_cast<std::size_t>(max_photons) + 1,
                                       std::vector<double>(static_cast<std::size_t>(max_lit) + 1, 0.0));
  occ[0][0] = 1.0;
  for (int m = 0; m < max_photons; ++m) {
    for (int j = 0; j <= std::min(m, max_lit); ++j) {
      const double p = occ[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
      if (p == 0.0) continue;
      occ[static_cast<std::size_t>(m) + 1][static_cast<std::size_t>(j)] += p * j / ports;
      if (j + 1 <= max_lit) {
        occ[static_cast<std::size_t>(m) + 1][static_cast<std::size_t>(j) + 1] += p * (ports - j) / ports;
      }
    }
  }
  return occ;
}

// Signal click law for n photons: index 2*s1 + s2.
std::array<double, 4> signal_law(int n, const Efficiencies& eta, SignalRouting routing) {
  std::array<double, 4> law{};
  if (routing == SignalRouting::combined) {
    const double p1 = 0.5 * eta.signal1, p2 = 0.5 * eta.signal2;
    const double lost = 1.0 - p1 - p2;
    const double both_dark = std::pow(lost, n);
    const double s1_dark = std::pow(1.0 - p1, n);
    const double s2_dark = std::pow(1.0 - p2, n);
    law[0] = both_dark;
    law[1] = s1_dark - both_dark;
    law[2] = s2_dark - both_dark;
    law[3] = 1.0 - s1_dark - s2_dark + both_dark;
    return law;
  }
  const auto split = binomial_pmf(n, 0.5);
  for (int n1 = 0; n1 <= n; ++n1) {
    const double w = split[static_cast<std::size_t>(n1)];
    const double d1 = std::pow(1.0 - eta.signal1, n1);
    const double d2 = std::pow(1.0 - eta.signal2, n - n1);
    law[0] += w * d1 * d2;
    law[1] += w * d1 * (1.0 - d2);
    law[2] += w * (1.0 - d1) * d2;
    law[3] += w * (1.0 - d1) * (1.0 - d2);
  }
  return law;
}

}  // namespace

PairDistribution pair_distribution(double mean, int n_max) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidArgument("mean pair number must be finite and >= 0");
  if (n_max < 0) throw InvalidArgument("n_max must be non-negative");
  PairDistribution d;
  d.probabilities.resize(static_cast<std::size_t>(n_max) + 1);
  const double r = mean / (1.0 + mean);
  const double p0 = 1.0 / (1.0 + mean);
  double rn = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    d.probabilities[static_cast<std::size_t>(n)] = p0 * rn;
    rn *= r;
  }
  d.tail = rn;  // r^(n_max + 1)
  return d;
}

void OracleConfig::validate() const {
  ModelParams{mu, eta, static_cast<double>(k), spectrum}.validate();
  if (k < 0 || k > kMaxOracleDepth) throw InvalidArgument(fmt::format("oracle tree depth must be in [0, {}]", kMaxOracleDepth));
  if (n_max < 6) throw InvalidArgument("oracle truncation n_max must be at least 6");
}

double OutcomeLattice::total() const {
  detail::NeumaierSum s;
  for (const auto& row : cells) {
    for (double c : row) s.add(c);
  }
  return s.value();
}

OutcomeLattice outcome_lattice(const OracleConfig& config) {
  config.validate();
  const double ports = std::exp2(config.k);
  const int modes = static_cast<int>(config.spectrum.size());
  const int max_lit = static_cast<int>(std::min<double>(ports, static_cast<double>(config.n_max) * modes));
  const int mode_lit = static_cast<int>(std::min<double>(ports, config.n_max));
  const auto occupancy = occupancy_table(config.n_max, ports, mode_lit);

  // Law of lit-port count and signal clicks for n pairs in one mode; it does
  // not depend on which mode the pairs belong to.
  std::vector<std::vector<std::array<double, 4>>> per_n(static_cast<std::size_t>(config.n_max) + 1);
  for (int n = 0; n <= config.n_max; ++n) {
    const auto survivors = binomial_pmf(n, config.eta.idler);
    const auto signal = signal_law(n, config.eta, config.routing);
    auto& table = per_n[static_cast<std::size_t>(n)];
    table.assign(static_cast<std::size_t>(mode_lit) + 1, {});
    for (int m = 0; m <= n; ++m) {
      for (int j = 0; j <= mode_lit; ++j) {
        const double pj = survivors[static_cast<std::size_t>(m)] * occupancy[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
        if (pj == 0.0) continue;
        for (int b = 0; b < 4; ++b) table[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] += pj * signal[static_cast<std::size_t>(b)];
      }
    }
  }

  OutcomeLattice lattice;
  lattice.ports = static_cast<int>(std::min<double>(ports, 1 << 30));
  lattice.cells.assign(static_cast<std::size_t>(max_lit) + 1, {});
  lattice.cells[0][0] = 1.0;
  int lit_so_far = 0;

  for (double lambda : config.spectrum.lambdas()) {
    const PairDistribution pairs = pair_distribution(lambda * config.mu, config.n_max);
    lattice.truncation_bound += pairs.tail;

    std::vector<std::array<double, 4>> mode(static_cast<std::size_t>(mode_lit) + 1, std::array<double, 4>{});
    for (int n = 0; n <= config.n_max; ++n) {
      const double pn = pairs.probabilities[static_cast<std::size_t>(n)];
      for (int j = 0; j <= mode_lit; ++j) {
        for (int b = 0; b < 4; ++b) mode[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] += pn * per_n[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
      }
    }

    // Ports lit by this mode are a uniformly random subset, independent of
    // the ports lit so far; the union size follows a hypergeometric overlap.
    std::vector<std::array<double, 4>> next(lattice.cells.size(), std::array<double, 4>{});
    const int new_lit = std::min(max_lit, lit_so_far + mode_lit);
    for (int j1 = 0; j1 <= lit_so_far; ++j1) {
      const auto& left_row = lattice.cells[static_cast<std::size_t>(j1)];
      if (left_row[0] == 0.0 && left_row[1] == 0.0 && left_row[2] == 0.0 && left_row[3] == 0.0) continue;
      for (int j2 = 0; j2 <= mode_lit; ++j2) {
        const auto& right_row = mode[static_cast<std::size_t>(j2)];
        const double norm = choose(ports, j2);
        const int min_overlap = static_cast<int>(std::max(0.0, j1 + j2 - ports));
        for (int overlap = min_overlap; overlap <= std::min(j1, j2); ++overlap) {
          const double h = choose(j1, overlap) * choose(ports - j1, j2 - overlap) / norm;
          const int u = j1 + j2 - overlap;
          if (h == 0.0 || u > max_lit) continue;
          auto& target = next[static_cast<std::size_t>(u)];
          for (int b1 = 0; b1 < 4; ++b1) {
            for (int b2 = 0; b2 < 4; ++b2) target[static_cast<std::size_t>(b1 | b2)] += left_row[static_cast<std::size_t>(b1)] * h * right_row[static_cast<std::size_t>(b2)];
          }
        }
      }
    }
    lattice.cells = std::move(next);
    lit_so_far = new_lit;
  }
  return lattice;
}

OracleResult exact_probabilities(const OracleConfig& config) {
  const OutcomeLattice lattice = outcome_lattice(config);
  OracleResult result;
  auto accumulate = [](ProbabilitySet& p, const std::array<double, 4>& cell) {
    p.p_i += cell[0] + cell[1] + cell[2] + cell[3];
    p.p_is1 += cell[2] + cell[3];
    p.p_is2 += cell[1] + cell[3];
    p.p_is1s2 += cell[3];
  };
  for (std::size_t j = 1; j < lattice.cells.size(); ++j) {
    if (j == 1) accumulate(result.pnr, lattice.cells[j]);
    accumulate(result.threshold, lattice.cells[j]);
  }
  result.truncation_bound = lattice.truncation_bound;
  result.within_tolerance = lattice.truncation_bound <= config.tolerance;
  return result;
}

std::vector<double> port_click_probabilities(int n_photons, double eta, int k) {
  if (n_photons < 0) throw InvalidArgument("photon number must be non-negative");
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("efficiency must lie in [0, 1]");
  if (k < 0 || k > 10) throw InvalidArgument("explicit tree enumeration supports depth 0..10");
  const std::uint64_t ports = std::uint64_t{1} << k;
  const double outcomes = std::pow(static_cast<double>(ports + 1), n_photons);
  if (outcomes > 5e8) throw InvalidArgument("explicit tree enumeration is too large");

  // Each photon is lost, or walks k splitters taking the left/right branch
  // with probability 1/2 each; the branch bits name the output port.
  const double path_probability = eta * std::ldexp(1.0, -k);
  std::vector<double> only_port(ports, 0.0);
  std::vector<std::uint64_t> fate(static_cast<std::size_t>(n_photons), 0);  // ports == lost
  const auto total = static_cast<std::uint64_t>(outcomes);
  for (std::uint64_t index = 0; index < total; ++index) {
    std::uint64_t rest = index;
    double weight = 1.0;
    std::uint64_t lit = ports;  // sentinel: nothing lit
    bool several = false;
    for (int p = 0; p < n_photons; ++p) {
      const std::uint64_t where = rest % (ports + 1);
      rest /= ports + 1;
      if (where == ports) {
        weight *= 1.0 - eta;
        continue;
      }
      std::uint64_t port = 0;
      for (int level = 0; level < k; ++level) port = (port << 1) | ((where >> (k - 1 - level)) & 1U);
      weight *= path_probability;
      if (lit == ports) {
        lit = port;
      } else if (lit != port) {
        several = true;
      }
    }
    if (!several && lit != ports) only_port[lit] += weight;
  }
  return only_port;
}

double povm_click_probability(int n_photons, double eta, int k) {
  const auto per_port = port_click_probabilities(n_photons, eta, k);
  return detail::compensated_sum(per_port);
}

PulseSampler::PulseSampler(const ModelParams& params) : params_(params) {
  params_.validate();
  if (params_.k != std::floor(params_.k) || params_.k > kMaxOracleDepth) {
    throw InvalidArgument("photon-level sampling needs an integer tree depth in [0, 30]");
  }
  ports_ = std::uint32_t{1} << static_cast<int>(params_.k);
  const auto lambdas = params_.spectrum.lambdas();
  prefix_vacuum_.resize(lambdas.size() + 1);
  prefix_vacuum_[0] = 1.0;
  for (std::size_t s = 0; s < lambdas.size(); ++s) {
    prefix_vacuum_[s + 1] = prefix_vacuum_[s] / (1.0 + lambdas[s] * params_.mu);
  }
}

int PulseSampler::sample_pairs(std::mt19937_64& rng) const {
  // Skip directly to the next mode with a non-zero pair number:
  // P(first non-empty mode > j | start) = prefix[j+1] / prefix[start].
  const auto lambdas = params_.spectrum.lambdas();
  int pairs = 0;
  std::size_t start = 0;
  while (start < lambdas.size()) {
    const double threshold = (1.0 - detail::uniform01(rng)) * prefix_vacuum_[start];
    const auto first = std::partition_point(prefix_vacuum_.begin() + static_cast<std::ptrdiff_t>(start) + 1,
                                            prefix_vacuum_.end(), [threshold](double v) { return v >= threshold; });
    if (first == prefix_vacuum_.end()) break;
    const auto mode = static_cast<std::size_t>(first - prefix_vacuum_.begin()) - 1;
    pairs += 1 + static_cast<int>(detail::thermal_count(lambdas[mode] * params_.mu, rng));
    start = mode + 1;
  }
  return pairs;
}

PulseOutcome PulseSampler::operator()(std::mt19937_64& rng) const {
  PulseOutcome out;
  out.pairs = sample_pairs(rng);
  if (out.pairs == 0) return out;

  const double p1 = 0.5 * params_.eta.signal1;
  const double p2 = 0.5 * params_.eta.signal2;
  std::uint64_t mask = 0;
  std::vector<std::uint32_t> lit;
  for (int i = 0; i < out.pairs; ++i) {
    if (detail::uniform01(rng) < params_.eta.idler) {
      const auto port = static_cast<std::uint32_t>(rng() & (ports_ - 1));
      if (ports_ <= 64) {
        mask |= std::uint64_t{1} << port;
      } else {
        lit.push_back(port);
      }
    }
    const double u = detail::uniform01(rng);
    if (u < p1) {
      out.signal1 = true;
    } else if (u < p1 + p2) {
      out.signal2 = true;
    }
  }
  if (ports_ <= 64) {
    out.lit_ports = std::popcount(mask);
  } else {
    std::sort(lit.begin(), lit.end());
    out.lit_ports = static_cast<int>(std::unique(lit.begin(), lit.end()) - lit.begin());
  }
  return out;
}

MonteCarloEstimate monte_carlo_probabilities(const OracleConfig& config, std::uint64_t shots, std::uint64_t seed) {
  config.validate();
  if (shots == 0) throw InvalidArgument("Monte Carlo needs at least one shot");
  const PulseSampler sampler(ModelParams{config.mu, config.eta, static_cast<double>(config.k), config.spectrum});
  std::mt19937_64 rng(seed);
  std::array<std::uint64_t, 4> one{}, any{};
  for (std::uint64_t shot = 0; shot < shots; ++shot) {
    const PulseOutcome o = sampler(rng);
    if (o.lit_ports == 0) continue;
    auto tally = [&](std::array<std::uint64_t, 4>& c) {
      ++c[0];
      c[1] += o.signal1;
      c[2] += o.signal2;
      c[3] += o.signal1 && o.signal2;
    };
    tally(any);
    if (o.lit_ports == 1) tally(one);
  }
  const double n = static_cast<double>(shots);
  auto to_set = [n](const std::array<std::uint64_t, 4>& c) {
    return ProbabilitySet{c[0] / n, c[1] / n, c[2] / n, c[3] / n};
  };
  return {to_set(one), to_set(any), shots};
}

}  // namespace pnr
