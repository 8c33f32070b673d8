#include "pnr/tagstream.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "pnr/error.hpp"
#include "pnr/oracle.hpp"
#include "random.hpp"

namespace pnr {
namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

// Pulse outcome drawn from the closed-form table (used for real-valued k).
class TableSampler {
 public:
  explicit TableSampler(const ModelParams& params) {
    const OutcomeTable table = outcome_table(params);
    double acc = 0.0;
    for (int idler = 0; idler < 3; ++idler) {
      for (int s1 = 0; s1 < 2; ++s1) {
        for (int s2 = 0; s2 < 2; ++s2) {
          acc += table.cells[static_cast<std::size_t>(idler)][static_cast<std::size_t>(s1)][static_cast<std::size_t>(s2)];
          cumulative_.push_back(acc);
          outcomes_.push_back(PulseOutcome{0, idler, s1 == 1, s2 == 1});
        }
      }
    }
  }

  PulseOutcome operator()(std::mt19937_64& rng) const {
    const double u = detail::uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), outcomes_.size() - 1);
    return outcomes_[i];
  }

 private:
  std::vector<double> cumulative_;
  std::vector<PulseOutcome> outcomes_;
};

}  // namespace

std::string_view channel_name(Channel channel) {
  switch (channel) {
    case Channel::idler:
      return "idler";
    case Channel::signal1:
      return "signal1";
    case Channel::signal2:
      return "signal2";
    case Channel::clock:
      return "clock";
  }
  throw InvalidArgument("unknown channel code");
}

Channel parse_channel(std::string_view name) {
  if (name == "idler" || name == "0") return Channel::idler;
  if (name == "signal1" || name == "1") return Channel::signal1;
  if (name == "signal2" || name == "2") return Channel::signal2;
  if (name == "clock" || name == "3") return Channel::clock;
  throw FormatError("unknown channel '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (clock_period_ps <= 0) throw InvalidArgument("clock period must be positive");
  if (window_ps < 0) throw InvalidArgument("coincidence window must be non-negative");
  if (2 * window_ps >= clock_period_ps) throw InvalidArgument("coincidence window must be below half the clock period");
  const auto [lo, hi] = std::minmax_element(channel_delays_ps.begin(), channel_delays_ps.end());
  if (2 * (*hi - *lo) >= clock_period_ps) throw InvalidArgument("channel delays must differ by less than half a period");
}

RunConfig TimingModel::matching_run_config(std::int64_t window_ps) const {
  RunConfig config;
  config.clock_period_ps = clock_period_ps;
  config.window_ps = window_ps;
  config.channel_delays_ps = channel_delays_ps;
  config.pnr_bin_boundary_ps = default_boundary_ps();
  return config;
}

void TimingModel::validate() const {
  if (clock_period_ps <= 0) throw InvalidArgument("clock period must be positive");
  if (!(signal_jitter_ps >= 0.0) || !(idler_jitter_ps >= 0.0)) throw InvalidArgument("jitter must be non-negative");
  for (auto d : channel_delays_ps) {
    if (d < 0) throw InvalidArgument("generator delays must be non-negative");
  }
}

void CountSummary::validate() const {
  if (pnr_single.idler + idler_multi != threshold.idler) {
    throw InvalidArgument("single + multi idler counts do not add up to the threshold count");
  }
  for (const CoincidenceCounts* c : {&threshold, &pnr_single}) {
    if (c->idler_signal1_signal2 > std::min(c->idler_signal1, c->idler_signal2) ||
        std::max(c->idler_signal1, c->idler_signal2) > c->idler) {
      throw InvalidArgument("coincidence counts are not nested");
    }
  }
  if (pnr_single.idler_signal1 > threshold.idler_signal1 || pnr_single.idler_signal2 > threshold.idler_signal2 ||
      pnr_single.idler_signal1_signal2 > threshold.idler_signal1_signal2) {
    throw InvalidArgument("single-bin coincidences exceed threshold coincidences");
  }
}

void generate_run(const ModelParams& params, std::uint64_t pulses, const TimingModel& timing, std::uint64_t seed,
                  const TagSink& tags, const LabelSink& labels) {
  params.validate();
  timing.validate();
  if (pulses == 0) throw InvalidArgument("a run needs at least one pulse");
  if (!tags) throw InvalidArgument("generate_run needs a tag sink");

  std::function<PulseOutcome(std::mt19937_64&)> sample;
  if (params.k == std::floor(params.k) && params.k <= 30.0) {
    sample = PulseSampler(params);
  } else {
    sample = TableSampler(params);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto& delay = timing.channel_delays_ps;
  auto stamp = [](std::int64_t t) { return static_cast<std::uint64_t>(std::max<std::int64_t>(t, 0)); };
  auto jitter = [&](double sigma) { return static_cast<std::int64_t>(std::llround(sigma * gauss(rng))); };

  std::vector<TagRecord> pulse_tags;
  for (std::uint64_t p = 0; p < pulses; ++p) {
    const auto slot = static_cast<std::int64_t>(p + 1) * timing.clock_period_ps;
    const PulseOutcome o = sample(rng);
    pulse_tags.clear();
    pulse_tags.push_back({Channel::clock, stamp(slot + delay[index_of(Channel::clock)])});
    if (o.signal1) {
      pulse_tags.push_back(
          {Channel::signal1, stamp(slot + delay[index_of(Channel::signal1)] + jitter(timing.signal_jitter_ps))});
    }
    if (o.signal2) {
      pulse_tags.push_back(
          {Channel::signal2, stamp(slot + delay[index_of(Channel::signal2)] + jitter(timing.signal_jitter_ps))});
    }
    if (o.lit_ports > 0) {
      const auto center = o.lit_ports == 1 ? timing.idler_single_center_ps : timing.idler_multi_center_ps;
      pulse_tags.push_back(
          {Channel::idler, stamp(slot + delay[index_of(Channel::idler)] + center + jitter(timing.idler_jitter_ps))});
    }
    std::stable_sort(pulse_tags.begin(), pulse_tags.end(),
                     [](const TagRecord& a, const TagRecord& b) { return a.time_ps < b.time_ps; });
    for (const auto& t : pulse_tags) tags(t);
    if (labels) labels(PulseLabel{p, o.lit_ports, o.signal1, o.signal2});
  }
}

CoincidenceCounter::CoincidenceCounter(RunConfig config) : config_(config) {
  config_.validate();
  max_delay_ = *std::max_element(config_.channel_delays_ps.begin(), config_.channel_delays_ps.end());
}

void CoincidenceCounter::push(const TagRecord& tag) {
  if (any_ && tag.time_ps < last_time_) {
    throw InvalidArgument(fmt::format("tag stream is not sorted: {} ps follows {} ps", tag.time_ps, last_time_));
  }
  any_ = true;
  last_time_ = tag.time_ps;

  if (!anchor_) {
    if (tag.channel == Channel::clock) {
      anchor_ = static_cast<std::int64_t>(tag.time_ps) - config_.channel_delays_ps[index_of(Channel::clock)];
    } else {
      pending_.push_back(tag);
      if (tag.time_ps - pending_.front().time_ps <= static_cast<std::uint64_t>(config_.clock_period_ps)) return;
      anchor_ = 0;
    }
    auto replay = std::move(pending_);
    pending_.clear();
    for (const auto& t : replay) place(t);
    if (tag.channel != Channel::clock) return;  // already replayed
  }
  place(tag);
}

void CoincidenceCounter::place(const TagRecord& tag) {
  const auto raw = static_cast<std::int64_t>(tag.time_ps);
  flush_before(raw);
  const auto period = config_.clock_period_ps;
  const std::int64_t relative = raw - config_.channel_delays_ps[index_of(tag.channel)] - *anchor_;
  const std::int64_t slot = floor_div(relative + period / 2, period);
  const std::int64_t offset = relative - slot * period;

  if (tag.channel == Channel::clock) {
    ++summary_.pulses;
    return;
  }
  if (std::abs(offset) > config_.window_ps) {
    ++summary_.orphans;
    return;
  }
  Slot& s = open_[slot];
  switch (tag.channel) {
    case Channel::idler:
      // A second idler tag in the same slot does not change the outcome.
      if (!s.idler) {
        s.idler = true;
        s.idler_single = offset >= config_.pnr_bin_boundary_ps;
      }
      break;
    case Channel::signal1:
      s.signal1 = true;
      break;
    case Channel::signal2:
      s.signal2 = true;
      break;
    case Channel::clock:
      break;
  }
}

void CoincidenceCounter::flush_before(std::int64_t raw_time) {
  const auto period = config_.clock_period_ps;
  while (!open_.empty()) {
    const auto it = open_.begin();
    const std::int64_t latest_raw = *anchor_ + it->first * period + period / 2 + max_delay_;
    if (latest_raw >= raw_time) break;
    close(it->second);
    open_.erase(it);
  }
}

void CoincidenceCounter::close(const Slot& slot) {
  if (slot.signal1) ++summary_.signal1;
  if (slot.signal2) ++summary_.signal2;
  if (slot.signal1 && slot.signal2) ++summary_.signal1_signal2;
  if (!slot.idler) return;
  auto add = [&slot](CoincidenceCounts& c) {
    ++c.idler;
    if (slot.signal1) ++c.idler_signal1;
    if (slot.signal2) ++c.idler_signal2;
    if (slot.signal1 && slot.signal2) ++c.idler_signal1_signal2;
  };
  add(summary_.threshold);
  if (slot.idler_single) {
    add(summary_.pnr_single);
  } else {
    ++summary_.idler_multi;
  }
}

CountSummary CoincidenceCounter::finish() {
  if (!anchor_ && !pending_.empty()) {
    anchor_ = 0;
    auto replay = std::move(pending_);
    pending_.clear();
    for (const auto& t : replay) place(t);
  }
  for (const auto& [slot, state] : open_) close(state);
  open_.clear();
  summary_.validate();
  return summary_;
}

CountSummary count_coincidences(std::span<const TagRecord> stream, const RunConfig& config) {
  CoincidenceCounter counter(config);
  for (const auto& tag : stream) counter.push(tag);
  return counter.finish();
}

CountSummary count_from_labels(std::span<const PulseLabel> labels, std::uint64_t pulses) {
  CountSummary summary;
  summary.pulses = pulses;
  for (const auto& l : labels) {
    if (l.signal1) ++summary.signal1;
    if (l.signal2) ++summary.signal2;
    if (l.signal1 && l.signal2) ++summary.signal1_signal2;
    if (l.lit_ports == 0) continue;
    auto add = [&l](CoincidenceCounts& c) {
      ++c.idler;
      if (l.signal1) ++c.idler_signal1;
      if (l.signal2) ++c.idler_signal2;
      if (l.signal1 && l.signal2) ++c.idler_signal1_signal2;
    };
    add(summary.threshold);
    if (l.lit_ports == 1) {
      add(summary.pnr_single);
    } else {
      ++summary.idler_multi;
    }
  }
  return summary;
}

CountSummary sample_counts(const ModelParams& params, std::uint64_t pulses, std::mt19937_64& rng) {
  const OutcomeTable table = outcome_table(params);
  CountSummary summary;
  summary.pulses = pulses;
  std::uint64_t remaining = pulses;
  double remaining_probability = 1.0;
  for (int idler = 0; idler < 3; ++idler) {
    for (int s1 = 0; s1 < 2; ++s1) {
      for (int s2 = 0; s2 < 2; ++s2) {
        const double cell =
            table.cells[static_cast<std::size_t>(idler)][static_cast<std::size_t>(s1)][static_cast<std::size_t>(s2)];
        std::uint64_t n = 0;
        if (remaining > 0 && cell > 0.0) {
          const double p = std::clamp(cell / remaining_probability, 0.0, 1.0);
          n = std::binomial_distribution<std::uint64_t>(remaining, p)(rng);
        }
        remaining -= n;
        remaining_probability -= cell;
        if (s1) summary.signal1 += n;
        if (s2) summary.signal2 += n;
        if (s1 && s2) summary.signal1_signal2 += n;
        if (idler == 0) continue;
        auto add = [&](CoincidenceCounts& c) {
          c.idler += n;
          if (s1) c.idler_signal1 += n;
          if (s2) c.idler_signal2 += n;
          if (s1 && s2) c.idler_signal1_signal2 += n;
        };
        add(summary.threshold);
        if (idler == 1) {
          add(summary.pnr_single);
        } else {
          summary.idler_multi += n;
        }
      }
    }
  }
  return summary;
}

G2Result g2_from_counts(const CountSummary& counts, G2Mode mode) {
  const CoincidenceCounts& c = mode == G2Mode::threshold ? counts.threshold : counts.pnr_single;
  if (c.idler_signal1_signal2 == 0) throw UndefinedRatioError("C_is1s2");
  if (c.idler == 0) throw UndefinedRatioError("C_i");
  if (c.idler_signal1 == 0) throw UndefinedRatioError("C_is1");
  if (c.idler_signal2 == 0) throw UndefinedRatioError("C_is2");
  const double c3 = static_cast<double>(c.idler_signal1_signal2);
  const double ci = static_cast<double>(c.idler);
  const double c1 = static_cast<double>(c.idler_signal1);
  const double c2 = static_cast<double>(c.idler_signal2);
  const double value = c3 * ci / (c1 * c2);
  return {value, value * std::sqrt(1.0 / c3 + 1.0 / ci + 1.0 / c1 + 1.0 / c2)};
}

}  // namespace pnr
