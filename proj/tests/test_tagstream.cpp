#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pnr/error.hpp"
#include "pnr/oracle.hpp"
#include "pnr/tagstream.hpp"

using namespace pnr;

namespace {

constexpr std::uint64_t kPeriod = 1'000'000;

TagRecord tag(Channel c, std::uint64_t t) { return {c, t}; }

void sort_by_time(std::vector<TagRecord>& stream) {
  std::stable_sort(stream.begin(), stream.end(), [](const TagRecord& a, const TagRecord& b) { return a.time_ps < b.time_ps; });
}

// Pulse n (1-based) sits at n * period; idler tags land in the single bin.
std::vector<TagRecord> hand_built_stream() {
  const auto at = [](int pulse, std::int64_t offset) {
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(kPeriod) * pulse + offset);
  };
  std::vector<TagRecord> stream = {
      tag(Channel::signal2, at(1, -20)), tag(Channel::clock, at(1, 0)), tag(Channel::idler, at(1, 40)),
      tag(Channel::signal1, at(1, 60)), tag(Channel::clock, at(2, 0)),    tag(Channel::signal1, at(2, 10)),
      tag(Channel::idler, at(2, 55)),   tag(Channel::clock, at(3, 0)),    tag(Channel::idler, at(3, -45)),
      tag(Channel::clock, at(4, 0)),    tag(Channel::signal2, at(4, 5)),
  };
  sort_by_time(stream);
  return stream;
}

std::vector<TagRecord> generate(const ModelParams& p, std::uint64_t pulses, std::uint64_t seed,
                                std::vector<PulseLabel>* labels = nullptr, const TimingModel& timing = {}) {
  std::vector<TagRecord> out;
  LabelSink sink;
  if (labels) sink = [labels](const PulseLabel& l) { labels->push_back(l); };
  generate_run(p, pulses, timing, seed, [&out](const TagRecord& t) { out.push_back(t); }, sink);
  return out;
}

const ModelParams kReference{0.2, {0.5, 0.3, 0.4}, 2.0, SchmidtSpectrum::from_weights({0.7, 0.3})};

}  // namespace

TEST_CASE("hand-built four-pulse stream") {
  const auto stream = hand_built_stream();
  const CountSummary c = count_coincidences(stream, RunConfig{});
  CHECK(c.pulses == 4);
  CHECK(c.threshold.idler == 3);
  CHECK(c.threshold.idler_signal1 == 2);
  CHECK(c.threshold.idler_signal2 == 1);
  CHECK(c.threshold.idler_signal1_signal2 == 1);
  CHECK(c.signal1 == 2);
  CHECK(c.signal2 == 2);
  CHECK(c.signal1_signal2 == 1);
  // Pulse 3's idler is early: multi-photon bin.
  CHECK(c.idler_multi == 1);
  CHECK(c.pnr_single.idler == 2);
  CHECK(c.pnr_single.idler_signal1 == 2);
  CHECK(c.orphans == 0);
}

TEST_CASE("empty and clock-only streams") {
  const CountSummary empty = count_coincidences({}, RunConfig{});
  CHECK(empty == CountSummary{});
  const std::vector<TagRecord> clocks = {tag(Channel::clock, kPeriod), tag(Channel::clock, 2 * kPeriod)};
  const CountSummary c = count_coincidences(clocks, RunConfig{});
  CHECK(c.pulses == 2);
  CHECK(c.threshold.idler == 0);
}

TEST_CASE("tags outside the window are orphans") {
  auto stream = hand_built_stream();
  stream.push_back(tag(Channel::signal2, 2 * kPeriod + 5000));
  sort_by_time(stream);
  const CountSummary c = count_coincidences(stream, RunConfig{});
  CHECK(c.orphans == 1);
  CHECK(c.threshold.idler_signal2 == 1);
}

TEST_CASE("unsorted input is rejected") {
  std::vector<TagRecord> stream = {tag(Channel::clock, 2 * kPeriod), tag(Channel::idler, kPeriod)};
  CHECK_THROWS_AS(count_coincidences(stream, RunConfig{}), InvalidArgument);
}

TEST_CASE("counting is invariant under a common time shift") {
  const auto stream = generate(kReference, 20'000, 4);
  const CountSummary base = count_coincidences(stream, RunConfig{});
  for (std::uint64_t shift : {1ull, 123'457ull, 7'000'000'000ull}) {
    auto shifted = stream;
    for (auto& t : shifted) t.time_ps += shift;
    CHECK(count_coincidences(shifted, RunConfig{}) == base);
  }
}

TEST_CASE("order of simultaneous tags does not matter") {
  std::vector<TagRecord> a = {tag(Channel::clock, kPeriod), tag(Channel::idler, kPeriod + 30),
                              tag(Channel::signal1, kPeriod + 30), tag(Channel::signal2, kPeriod + 30)};
  auto b = a;
  std::reverse(b.begin() + 1, b.end());
  CHECK(count_coincidences(a, RunConfig{}) == count_coincidences(b, RunConfig{}));
}

TEST_CASE("detector tags before the first clock tag are kept") {
  std::vector<TagRecord> stream = {tag(Channel::signal1, kPeriod - 30), tag(Channel::clock, kPeriod + 2),
                                   tag(Channel::idler, kPeriod + 40)};
  const CountSummary c = count_coincidences(stream, RunConfig{});
  CHECK(c.threshold.idler_signal1 == 1);
  CHECK(c.pnr_single.idler == 1);
}

TEST_CASE("channel delays are undone") {
  TimingModel timing;
  timing.channel_delays_ps = {3000, 12000, 500, 700};
  std::vector<PulseLabel> labels;
  const auto stream = generate(kReference, 50'000, 8, &labels, timing);
  const CountSummary counted = count_coincidences(stream, timing.matching_run_config());
  CHECK(counted == count_from_labels(labels, 50'000));
  const CountSummary naive = count_coincidences(stream, RunConfig{});
  CHECK(naive.orphans > 0);
}

TEST_CASE("counts from tags equal counts from ground-truth labels") {
  for (double k : {0.0, 2.0, 2.55}) {
    std::vector<PulseLabel> labels;
    const auto stream = generate(kReference.with_k(k), 200'000, 17, &labels);
    const CountSummary counted = count_coincidences(stream, TimingModel{}.matching_run_config());
    CHECK(counted == count_from_labels(labels, 200'000));
    CHECK(counted.pnr_single.idler + counted.idler_multi == counted.threshold.idler);
  }
}

TEST_CASE("vacuum gives clock tags only") {
  const auto stream = generate(kReference.with_mu(0.0), 1000, 1);
  CHECK(stream.size() == 1000);
  CHECK(std::all_of(stream.begin(), stream.end(), [](const TagRecord& t) { return t.channel == Channel::clock; }));
}

TEST_CASE("bright pulses mostly land in the multi-photon bin") {
  const ModelParams bright{5.0, {0.5, 0.3, 0.4}, 2.0, SchmidtSpectrum::uniform(4)};
  const CountSummary c = count_coincidences(generate(bright, 20'000, 2), TimingModel{}.matching_run_config());
  CHECK(c.idler_multi > c.pnr_single.idler);
  const CountSummary dim = count_coincidences(generate(bright.with_mu(0.01), 200'000, 2), TimingModel{}.matching_run_config());
  CHECK(dim.idler_multi < dim.pnr_single.idler);
}

TEST_CASE("count rates converge to the exact probabilities") {
  constexpr std::uint64_t kPulses = 1'000'000;
  const CountSummary c = count_coincidences(generate(kReference, kPulses, 31), TimingModel{}.matching_run_config());
  const OracleResult exact =
      exact_probabilities(OracleConfig{kReference.spectrum, kReference.mu, kReference.eta, 2});
  auto within = [&](std::uint64_t count, double p) {
    const double sigma = std::sqrt(p * (1 - p) / kPulses);
    CHECK(std::abs(static_cast<double>(count) / kPulses - p) <= 4 * sigma);
  };
  within(c.pnr_single.idler, exact.pnr.p_i);
  within(c.pnr_single.idler_signal1, exact.pnr.p_is1);
  within(c.pnr_single.idler_signal1_signal2, exact.pnr.p_is1s2);
  within(c.threshold.idler, exact.threshold.p_i);
  within(c.threshold.idler_signal2, exact.threshold.p_is2);
  within(c.threshold.idler_signal1_signal2, exact.threshold.p_is1s2);
}

TEST_CASE("multinomial count sampling matches the closed forms") {
  std::mt19937_64 rng(5);
  constexpr std::uint64_t kPulses = 100'000'000;
  const ModelParams p = kReference.with_k(2.55);
  const CountSummary c = sample_counts(p, kPulses, rng);
  c.validate();
  auto within = [&](std::uint64_t count, double prob) {
    const double sigma = std::sqrt(prob * (1 - prob) / kPulses);
    CHECK(std::abs(static_cast<double>(count) / kPulses - prob) <= 4 * sigma);
  };
  within(c.pnr_single.idler, p_idler(p));
  within(c.pnr_single.idler_signal1_signal2, p_threefold(p));
  within(c.threshold.idler_signal2, p_twofold_threshold(p, Arm::signal2));
  within(c.signal1, p_signal(p, Arm::signal1));
  within(c.signal1_signal2, p_signal_both(p));
}

TEST_CASE("generation is deterministic per seed") {
  CHECK(generate(kReference, 5000, 77) == generate(kReference, 5000, 77));
  CHECK(generate(kReference, 5000, 77) != generate(kReference, 5000, 78));
}

TEST_CASE("g2 from counts") {
  CountSummary c;
  c.threshold = {100, 10, 10, 1};
  c.pnr_single = c.threshold;
  const G2Result g = g2_from_counts(c, G2Mode::threshold);
  CHECK(g.value == doctest::Approx(1.0));
  CHECK(g.sigma == doctest::Approx(1.1).epsilon(1e-12));

  c.threshold.idler_signal1_signal2 = 0;
  try {
    g2_from_counts(c, G2Mode::threshold);
    FAIL("expected an undefined ratio");
  } catch (const UndefinedRatioError& e) {
    CHECK(std::string(e.what()).find("C_is1s2") != std::string::npos);
  }
  CHECK_NOTHROW(g2_from_counts(c, G2Mode::pnr_single));
}

TEST_CASE("tag files round trip") {
  const auto stream = generate(kReference, 2000, 9);
  std::stringstream csv;
  write_tag_csv_header(csv);
  for (const auto& t : stream) write_tag_csv(csv, t);
  std::vector<TagRecord> from_csv;
  read_tags_csv(csv, [&](const TagRecord& t) { from_csv.push_back(t); });
  CHECK(from_csv == stream);

  std::stringstream bin;
  for (const auto& t : stream) write_tag_binary(bin, t);
  CHECK(bin.str().size() == 9 * stream.size());
  std::vector<TagRecord> from_bin;
  read_tags_binary(bin, [&](const TagRecord& t) { from_bin.push_back(t); });
  CHECK(from_bin == stream);

  std::stringstream truncated(bin.str().substr(0, 13));
  CHECK_THROWS_AS(read_tags_binary(truncated, [](const TagRecord&) {}), FormatError);
  std::stringstream bad("channel,time_ps\nlaser,12\n");
  CHECK_THROWS_AS(read_tags_csv(bad, [](const TagRecord&) {}), FormatError);
  std::stringstream negative("channel,time_ps\nidler,-5\n");
  CHECK_THROWS_AS(read_tags_csv(negative, [](const TagRecord&) {}), FormatError);
}

TEST_CASE("run configuration limits") {
  RunConfig c;
  c.window_ps = 500'000;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.channel_delays_ps = {0, 600'000, 0, 0};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_THROWS_AS(generate(kReference, 0, 1), InvalidArgument);
}
