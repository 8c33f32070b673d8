#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "pnr/model.hpp"

namespace pnr {

enum class Channel : std::uint8_t { idler = 0, signal1 = 1, signal2 = 2, clock = 3 };

std::string_view channel_name(Channel channel);
Channel parse_channel(std::string_view name);

/// One time-tagger event; time in picoseconds since run start.
struct TagRecord {
  Channel channel = Channel::clock;
  std::uint64_t time_ps = 0;

  friend bool operator==(const TagRecord&, const TagRecord&) = default;
};

/// Analysis settings for a tag stream.
struct RunConfig {
  std::int64_t clock_period_ps = 1'000'000;
  /// Detector tags further than this from their slot centre are orphans.
  std::int64_t window_ps = 1000;
  /// Subtracted from raw times, indexed by Channel.
  std::array<std::int64_t, 4> channel_delays_ps{};
  /// Idler tags earlier than this (relative to the slot centre, after delay
  /// correction) are multi-photon; later ones are single-photon.
  std::int64_t pnr_bin_boundary_ps = 0;

  void validate() const;
};

/// Arrival-time model of the generator: signal tags jitter around the slot
/// centre; idler tags come from one of two Gaussians, the earlier one for
/// multi-photon pulses (steeper readout edge) and the later one for single
/// photons.
struct TimingModel {
  std::int64_t clock_period_ps = 1'000'000;
  double signal_jitter_ps = 50.0;
  std::int64_t idler_single_center_ps = 50;
  std::int64_t idler_multi_center_ps = -50;
  double idler_jitter_ps = 8.0;
  std::array<std::int64_t, 4> channel_delays_ps{};

  /// Midpoint of the two idler centres.
  std::int64_t default_boundary_ps() const noexcept { return (idler_single_center_ps + idler_multi_center_ps) / 2; }
  /// RunConfig that undoes this model's delays and uses its midpoint boundary.
  RunConfig matching_run_config(std::int64_t window_ps = 1000) const;
  void validate() const;
};

struct CoincidenceCounts {
  std::uint64_t idler = 0;
  std::uint64_t idler_signal1 = 0;
  std::uint64_t idler_signal2 = 0;
  std::uint64_t idler_signal1_signal2 = 0;

  friend bool operator==(const CoincidenceCounts&, const CoincidenceCounts&) = default;
};

/// Singles and coincidences of one run. `threshold` counts every idler click;
/// `pnr_single` only those in the single-photon bin.
struct CountSummary {
  std::uint64_t pulses = 0;
  std::uint64_t signal1 = 0;
  std::uint64_t signal2 = 0;
  std::uint64_t signal1_signal2 = 0;
  std::uint64_t idler_multi = 0;
  CoincidenceCounts threshold;
  CoincidenceCounts pnr_single;
  std::uint64_t orphans = 0;

  std::uint64_t idler_total() const noexcept { return threshold.idler; }
  std::uint64_t idler_single() const noexcept { return pnr_single.idler; }

  /// Throws InvalidArgument if the bin split or coincidence ordering is broken.
  void validate() const;

  friend bool operator==(const CountSummary&, const CountSummary&) = default;
};

/// Ground truth of one generated pulse, emitted next to the tag stream.
struct PulseLabel {
  std::uint64_t pulse = 0;
  /// 0, 1, or the number of lit ports (>= 2) for multi-photon pulses.
  int lit_ports = 0;
  bool signal1 = false;
  bool signal2 = false;
};

using TagSink = std::function<void(const TagRecord&)>;
using LabelSink = std::function<void(const PulseLabel&)>;

/// Simulates `pulses` clock periods. Pulse p sits at (p + 1) * period. For
/// integer k every pair is sampled photon by photon (PulseSampler); for real
/// k the pulse outcome is drawn from the closed-form outcome table. Tags are
/// emitted in time order. Deterministic for a given seed.
void generate_run(const ModelParams& params, std::uint64_t pulses, const TimingModel& timing, std::uint64_t seed,
                  const TagSink& tags, const LabelSink& labels = {});

/// Single-pass streaming coincidence counter. Slots are anchored to the
/// first clock tag (or to time zero if no clock tag arrives within the first
/// period), so the counts are invariant under a common time shift. Memory
/// is bounded by the tags of the two most recent slots.
class CoincidenceCounter {
 public:
  explicit CoincidenceCounter(RunConfig config);

  /// Throws InvalidArgument if raw times decrease.
  void push(const TagRecord& tag);
  CountSummary finish();

 private:
  struct Slot {
    bool idler = false;
    bool idler_single = false;
    bool signal1 = false;
    bool signal2 = false;
  };

  void place(const TagRecord& tag);
  void flush_before(std::int64_t raw_time);
  void close(const Slot& slot);

  RunConfig config_;
  std::int64_t max_delay_ = 0;
  std::optional<std::int64_t> anchor_;
  std::vector<TagRecord> pending_;  // detector tags seen before the anchor is known
  std::map<std::int64_t, Slot> open_;
  std::uint64_t last_time_ = 0;
  bool any_ = false;
  CountSummary summary_;
};

CountSummary count_coincidences(std::span<const TagRecord> stream, const RunConfig& config);

/// Counts implied directly by ground-truth labels.
CountSummary count_from_labels(std::span<const PulseLabel> labels, std::uint64_t pulses);

/// Draws the counts of a run of `pulses` directly from the closed-form
/// outcome table (multinomial), skipping tag generation.
CountSummary sample_counts(const ModelParams& params, std::uint64_t pulses, std::mt19937_64& rng);

enum class G2Mode { threshold, pnr_single };

struct G2Result {
  double value = 0.0;
  double sigma = 0.0;
};

/// C_is1s2 C_i / (C_is1 C_is2) with first-order Poisson error propagation.
/// Throws UndefinedRatioError naming the first zero count.
G2Result g2_from_counts(const CountSummary& counts, G2Mode mode);

// Tag files. CSV: header "channel,time_ps", channel by name. Binary: 9-byte
// records, 1-byte channel code then 8-byte little-endian time.
void write_tag_csv_header(std::ostream& out);
void write_tag_csv(std::ostream& out, const TagRecord& tag);
void write_tag_binary(std::ostream& out, const TagRecord& tag);

/// Streams records to `sink` without holding the file in memory.
void read_tags_csv(std::istream& in, const TagSink& sink);
void read_tags_binary(std::istream& in, const TagSink& sink);

void write_labels_csv(std::ostream& out, std::span<const PulseLabel> labels);

}  // namespace pnr
