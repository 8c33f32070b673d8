// pnrsim: command-line front end. Every command writes its outputs plus a
// manifest (<command>.manifest.json) from which `pnrsim replay` reruns it.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "pnr/error.hpp"
#include "pnr/estimation.hpp"
#include "pnr/jsi.hpp"
#include "pnr/json.hpp"
#include "pnr/model.hpp"
#include "pnr/povm.hpp"
#include "pnr/tagstream.hpp"

#ifndef PNRSIM_VERSION
#define PNRSIM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pnr;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitContract = 3;

/// Bad invocation that the argument parser cannot see (missing or empty input).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options whose values are file paths; stored absolute in manifests.
const std::set<std::string> kPathOptions = {"input", "spectrum"};

struct Context {
  std::string out_dir = ".";
  std::string config_path;
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) const { return fs::path(out_dir) / name; }

  // Writes through a temporary file and renames, so readers never see a
  // partially written output.
  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path target = path(name);
    fs::create_directories(target.parent_path().empty() ? fs::path(".") : target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
    }
    fs::rename(tmp, target);
    outputs.push_back(name);
  }

  void write_json(const std::string& name, const json& j) {
    write(name, [&j](std::ostream& out) { out << j.dump(2) << '\n'; });
  }
};

// Shortest representation that parses back to the same double.
std::string format_double(double x) { return fmt::format("{}", x); }

std::string to_text(double x) { return format_double(x); }
std::string to_text(const std::string& x) { return x; }
template <typename T>
std::enable_if_t<std::is_integral_v<T>, std::string> to_text(T x) {
  return fmt::format("{}", x);
}
template <typename T>
std::string to_text(const std::vector<T>& xs) {
  std::string out;
  for (const auto& x : xs) out += (out.empty() ? "" : ",") + to_text(x);
  return out;
}
template <typename T>
std::string to_text(const std::optional<T>& x) {
  return x ? to_text(*x) : std::string();
}

// add_option with a default string that round-trips the value exactly.
template <typename T>
CLI::Option* add(CLI::App* cmd, const std::string& name, T& var, const std::string& description) {
  CLI::Option* opt = cmd->add_option(name, var, description);
  opt->default_function([&var] { return to_text(var); });
  opt->capture_default_str();
  return opt;
}

json nullable(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// ---------------------------------------------------------------- options

struct ModelOptions {
  double mu = 0.0;
  double eta_i = 0.3280;
  double eta_s1 = 0.1802;
  double eta_s2 = 0.2210;
  double k = 2.55;
  std::string spectrum = "default";

  ModelParams params() const { return ModelParams{mu, {eta_i, eta_s1, eta_s2}, k, load_spectrum(spectrum)}; }

  static SchmidtSpectrum load_spectrum(const std::string& name) {
    if (name == "default") return default_source_spectrum();
    if (name == "single") return SchmidtSpectrum{};
    std::ifstream in(name);
    if (!in) throw UsageError("cannot open spectrum file '" + name + "'");
    return read_spectrum_csv(in);
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& m, bool with_mu) {
  if (with_mu) add(cmd, "--mu", m.mu, "Mean pair number per pulse")->check(CLI::NonNegativeNumber);
  add(cmd, "--eta-i", m.eta_i, "Idler path efficiency")->check(CLI::Range(0.0, 1.0));
  add(cmd, "--eta-s1", m.eta_s1, "Signal arm 1 efficiency")->check(CLI::Range(0.0, 1.0));
  add(cmd, "--eta-s2", m.eta_s2, "Signal arm 2 efficiency")->check(CLI::Range(0.0, 1.0));
  add(cmd, "--k", m.k, "Splitter-tree depth of the PNR detector")->check(CLI::NonNegativeNumber);
  add(cmd, "--spectrum", m.spectrum, "Schmidt spectrum: default, single, or a spectrum CSV");
}

struct TimingOptions {
  TimingModel timing;
  void register_options(CLI::App* cmd) {
    add(cmd, "--period", timing.clock_period_ps, "Clock period in ps")->check(CLI::PositiveNumber);
    add(cmd, "--signal-jitter", timing.signal_jitter_ps, "Signal tag jitter (sigma, ps)");
    add(cmd, "--idler-single-center", timing.idler_single_center_ps, "Single-photon idler tag offset (ps)");
    add(cmd, "--idler-multi-center", timing.idler_multi_center_ps, "Multi-photon idler tag offset (ps)");
    add(cmd, "--idler-jitter", timing.idler_jitter_ps, "Idler tag jitter (sigma, ps)");
  }
};

// Reconstructs a canonical argument list from the parsed options so that a
// manifest can rerun the command. Defaults are written out explicitly.
std::vector<std::string> canonical_args(const CLI::App* cmd) {
  std::vector<std::string> args{cmd->get_name()};
  for (const CLI::Option* opt : cmd->get_options()) {
    if (!opt->nonpositional()) continue;
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "out" || name == "config") continue;
    if (opt->get_type_size_max() == 0) {
      if (opt->count() > 0) args.push_back("--" + name);
      continue;
    }
    std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (values.empty()) {
      const std::string d = opt->get_default_str();
      if (d.empty()) continue;
      values.push_back(d);
    }
    if (kPathOptions.count(name) && fs::exists(values.front())) values.front() = fs::absolute(values.front()).string();
    std::string joined;
    for (const auto& v : values) joined += (joined.empty() ? "" : ",") + v;
    args.push_back("--" + name + "=" + joined);
  }
  return args;
}

void write_manifest(Context& ctx, const CLI::App* cmd, std::optional<std::uint64_t> seed) {
  const auto args = canonical_args(cmd);
  json params = json::object();
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      params[a.substr(2)] = true;
    } else {
      params[a.substr(2, eq - 2)] = a.substr(eq + 1);
    }
  }
  json manifest = {
      {"tool", "pnrsim"},
      {"version", PNRSIM_VERSION},
      {"command", cmd->get_name()},
      {"argv", args},
      {"parameters", params},
      {"seed", seed ? json(*seed) : json(nullptr)},
      {"outputs", ctx.outputs},
  };
  const std::string name = cmd->get_name() + ".manifest.json";
  ctx.write_json(name, manifest);
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs body(i) for i in [0, jobs) on up to `workers` threads. The first
// exception is rethrown after all threads finish.
void parallel_for(std::size_t jobs, std::size_t workers, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < worker_count(workers, jobs); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Per-setting seeds derived from the run seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

json g2_json(const CountSummary& c, G2Mode mode) {
  try {
    return g2_from_counts(c, mode);
  } catch (const UndefinedRatioError& e) {
    return json{{"value", nullptr}, {"undefined", e.quantity()}};
  }
}

json counts_json(const CountSummary& c) {
  json j = c;
  j["g2_threshold"] = g2_json(c, G2Mode::threshold);
  j["g2_pnr"] = g2_json(c, G2Mode::pnr_single);
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open input file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (ss.str().empty()) throw UsageError("input file '" + path + "' is empty");
  return ss.str();
}

// ---------------------------------------------------------------- commands

struct JsiOptions {
  JsiSourceParams source;
  bool separable = false;
  std::string input;
  double cutoff = 1e-6;
  std::vector<double> signal_band{1523.5, 1536.5};
  std::vector<double> idler_band{1543.5, 1556.5};
};

void cmd_jsi(Context& ctx, const CLI::App* cmd, JsiOptions o) {
  JsiGrid grid;
  if (!o.input.empty()) {
    std::istringstream in(read_file(o.input));
    grid = read_jsi_csv(in);
  } else {
    if (o.signal_band.size() != 2 || o.idler_band.size() != 2) throw UsageError("bands take two values: lo,hi");
    o.source.signal_band = {o.signal_band[0], o.signal_band[1]};
    o.source.idler_band = {o.idler_band[0], o.idler_band[1]};
    if (o.separable) o.source.pump_bandwidth_nm = o.source.phasematch_bandwidth_nm;
    grid = synthesize_jsi(o.source);
    ctx.write("jsi.csv", [&](std::ostream& out) { write_jsi_csv(out, grid); });
  }
  const SchmidtSpectrum spectrum = schmidt_decompose(grid, o.cutoff);
  ctx.write("spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, spectrum); });
  write_manifest(ctx, cmd, std::nullopt);
  fmt::print("K = {:.4f} ({} modes)\n", spectrum.schmidt_number(), spectrum.size());
}

void cmd_povm(Context& ctx, const CLI::App* cmd, double eta, double k, int n_max) {
  const PovmElement raw = pi_one_coefficients(eta, k, n_max);
  json result = {{"unnormalized", raw}, {"normalized", normalize_pi_one(raw)}};
  std::optional<double> discrimination;
  try {
    discrimination = eta_pnr(raw);
  } catch (const DivergenceError& e) {
    result["eta_pnr_undefined"] = e.what();
  }
  result["eta_pnr"] = nullable(discrimination);
  ctx.write_json("povm.json", result);
  write_manifest(ctx, cmd, std::nullopt);
  if (discrimination) fmt::print("eta_PNR = {:.4f}\n", *discrimination);
}

struct CurveOptions {
  double mu_min = 1e-4;
  double mu_max = 1.0;
  int points = 201;
  double target_g2 = 7e-3;
  std::size_t threads = 0;
};

void cmd_curve(Context& ctx, const CLI::App* cmd, const ModelOptions& m, const CurveOptions& c) {
  if (!(c.mu_min > 0.0) || !(c.mu_max > c.mu_min)) throw UsageError("need 0 < mu-min < mu-max");
  if (c.points < 2) throw UsageError("need at least two curve points");
  const ModelParams base = m.params();
  base.with_mu(c.mu_max).validate();
  struct Row {
    double mu, g2_thr, g2_pnr;
    ProbabilitySet thr, pnr;
  };
  std::vector<Row> rows(static_cast<std::size_t>(c.points));
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    const double t = static_cast<double>(i) / static_cast<double>(c.points - 1);
    double mu = std::exp(std::log(c.mu_min) + t * (std::log(c.mu_max) - std::log(c.mu_min)));
    if (i == 0) mu = c.mu_min;
    if (i + 1 == rows.size()) mu = c.mu_max;
    const ModelParams p = base.with_mu(mu);
    rows[i] = Row{mu, g2(p, DetectionConfig::threshold), g2(p, DetectionConfig::pnr),
                  probabilities(p, DetectionConfig::threshold), probabilities(p, DetectionConfig::pnr)};
  });
  ctx.write("curve.csv", [&](std::ostream& out) {
    out << "mu,g2_threshold,g2_pnr,g2_gap,p_i_threshold,p_i_pnr,p_is1_threshold,p_is1_pnr,p_is2_threshold,p_is2_pnr,"
           "p_is1s2_threshold,p_is1s2_pnr\n";
    for (const Row& r : rows) {
      out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", format_double(r.mu), format_double(r.g2_thr),
                         format_double(r.g2_pnr), format_double(r.g2_thr - r.g2_pnr), format_double(r.thr.p_i),
                         format_double(r.pnr.p_i), format_double(r.thr.p_is1), format_double(r.pnr.p_is1),
                         format_double(r.thr.p_is2), format_double(r.pnr.p_is2), format_double(r.thr.p_is1s2),
                         format_double(r.pnr.p_is1s2));
    }
  });
  const auto best = std::max_element(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.g2_thr - a.g2_pnr < b.g2_thr - b.g2_pnr;
  });
  auto crossing = [&](DetectionConfig config) -> std::optional<double> {
    try {
      return mu_for_g2(c.target_g2, base, config);
    } catch (const NoRootError&) {
      return std::nullopt;
    }
  };
  const auto mu_thr = crossing(DetectionConfig::threshold);
  const auto mu_pnr = crossing(DetectionConfig::pnr);
  ctx.write_json("curve_summary.json", {{"max_gap", best->g2_thr - best->g2_pnr},
                                        {"mu_at_max_gap", best->mu},
                                        {"target_g2", c.target_g2},
                                        {"mu_threshold_at_target", nullable(mu_thr)},
                                        {"mu_pnr_at_target", nullable(mu_pnr)},
                                        {"schmidt_number", base.spectrum.schmidt_number()}});
  write_manifest(ctx, cmd, std::nullopt);
  fmt::print("max gap {:.4f} at mu = {:.4g}\n", best->g2_thr - best->g2_pnr, best->mu);
}

struct SimulateOptions {
  std::uint64_t pulses = 1'000'000;
  std::uint64_t seed = 1;
  std::string format = "binary";
  bool labels = false;
};

void cmd_simulate(Context& ctx, const CLI::App* cmd, const ModelOptions& m, const TimingOptions& t,
                  const SimulateOptions& s) {
  const ModelParams params = m.params();
  const bool binary = s.format == "binary";
  std::vector<PulseLabel> labels;
  LabelSink label_sink;
  if (s.labels) label_sink = [&labels](const PulseLabel& l) { labels.push_back(l); };
  ctx.write(binary ? "tags.bin" : "tags.csv", [&](std::ostream& out) {
    if (binary) {
      generate_run(params, s.pulses, t.timing, s.seed, [&out](const TagRecord& r) { write_tag_binary(out, r); },
                   label_sink);
    } else {
      write_tag_csv_header(out);
      generate_run(params, s.pulses, t.timing, s.seed, [&out](const TagRecord& r) { write_tag_csv(out, r); },
                   label_sink);
    }
  });
  if (s.labels) ctx.write("labels.csv", [&](std::ostream& out) { write_labels_csv(out, labels); });
  write_manifest(ctx, cmd, s.seed);
}

struct CountOptions {
  std::string input;
  std::string format = "auto";
  RunConfig run;
  std::optional<std::int64_t> boundary;
  std::vector<std::int64_t> delays{0, 0, 0, 0};
};

void cmd_count(Context& ctx, const CLI::App* cmd, CountOptions o) {
  if (o.delays.size() != 4) throw UsageError("--delays takes four values: idler,signal1,signal2,clock");
  std::copy(o.delays.begin(), o.delays.end(), o.run.channel_delays_ps.begin());
  o.run.pnr_bin_boundary_ps = o.boundary.value_or(TimingModel{}.default_boundary_ps());
  std::ifstream in(o.input, std::ios::binary);
  if (!in) throw UsageError("cannot open input file '" + o.input + "'");
  if (in.peek() == std::ifstream::traits_type::eof()) throw UsageError("input file '" + o.input + "' is empty");
  const bool binary = o.format == "binary" || (o.format == "auto" && fs::path(o.input).extension() != ".csv");
  CoincidenceCounter counter(o.run);
  auto sink = [&counter](const TagRecord& r) { counter.push(r); };
  if (binary) {
    read_tags_binary(in, sink);
  } else {
    read_tags_csv(in, sink);
  }
  const CountSummary counts = counter.finish();
  ctx.write_json("counts.json", counts_json(counts));
  write_manifest(ctx, cmd, std::nullopt);
  fmt::print("pulses {}  idler {} (single {}, multi {})  threefold {}  orphans {}\n", counts.pulses,
             counts.idler_total(), counts.idler_single(), counts.idler_multi, counts.threshold.idler_signal1_signal2,
             counts.orphans);
}

SettingData parse_settings(const json& j) {
  if (!j.is_array()) throw FormatError("expected a JSON array of count summaries");
  SettingData data;
  for (const auto& item : j) data.push_back((item.contains("counts") ? item.at("counts") : item).get<CountSummary>());
  return data;
}

json fit_json(const SettingData& data, const SchmidtSpectrum& spectrum) {
  const SweepFit fit = fit_sweep(data, spectrum);
  json j = fit;
  std::vector<double> residuals;
  const Efficiencies eta{fit.efficiencies.idler.value, fit.efficiencies.signal1.value,
                         fit.efficiencies.signal2.value};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double expected =
        static_cast<double>(data[i].pulses) * p_idler(ModelParams{fit.mus[i], eta, fit.tree.k, spectrum});
    residuals.push_back(static_cast<double>(data[i].idler_single()) - expected);
  }
  j["single_bin_residuals"] = residuals;
  return j;
}

void cmd_fit(Context& ctx, const CLI::App* cmd, const std::string& input, const std::string& spectrum_name) {
  json j;
  try {
    j = json::parse(read_file(input));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("cannot parse count summaries: ") + e.what());
  }
  const SettingData data = parse_settings(j);
  if (data.empty()) throw UsageError("input contains no settings");
  const json result = fit_json(data, ModelOptions::load_spectrum(spectrum_name));
  ctx.write_json("fit.json", result);
  write_manifest(ctx, cmd, std::nullopt);
  fmt::print("eta_i {:.4f}  eta_s1 {:.4f}  eta_s2 {:.4f}  k {:.3f}\n",
             result["efficiencies"]["eta_i"]["value"].get<double>(),
             result["efficiencies"]["eta_s1"]["value"].get<double>(),
             result["efficiencies"]["eta_s2"]["value"].get<double>(), result["tree_depth"]["k"].get<double>());
}

struct PipelineOptions {
  std::vector<double> mus{1e-3, 2e-3, 3e-3, 4e-3, 0.01, 0.03, 0.1, 0.3, 0.5};
  std::uint64_t pulses = 1'000'000;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  bool keep_tags = false;
};

void cmd_pipeline(Context& ctx, const CLI::App* cmd, const ModelOptions& m, const TimingOptions& t,
                  const PipelineOptions& o) {
  if (o.mus.empty()) throw UsageError("--mus needs at least one value");
  const ModelParams base = m.params();
  const RunConfig run = t.timing.matching_run_config();
  SettingData data(o.mus.size());
  std::vector<std::string> tag_files(o.mus.size());
  parallel_for(o.mus.size(), o.threads, [&](std::size_t i) {
    const ModelParams p = base.with_mu(o.mus[i]);
    CoincidenceCounter counter(run);
    std::ofstream tags;
    if (o.keep_tags) {
      tag_files[i] = fmt::format("tags_{}.bin", i);
      tags.open(ctx.path(tag_files[i]), std::ios::binary | std::ios::trunc);
    }
    generate_run(p, o.pulses, t.timing, derive_seed(o.seed, i), [&](const TagRecord& r) {
      counter.push(r);
      if (o.keep_tags) write_tag_binary(tags, r);
    });
    data[i] = counter.finish();
  });
  for (const auto& f : tag_files) {
    if (!f.empty()) ctx.outputs.push_back(f);
  }
  json settings = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) settings.push_back({{"mu_true", o.mus[i]}, {"counts", counts_json(data[i])}});
  ctx.write_json("settings.json", settings);
  json fit;
  try {
    fit = fit_json(data, base.spectrum);
  } catch (const pnr::Error& e) {
    fit = {{"error", e.what()}};
    ctx.write_json("fit.json", fit);
    write_manifest(ctx, cmd, o.seed);
    throw;
  }
  fit["truth"] = {{"eta_i", m.eta_i}, {"eta_s1", m.eta_s1}, {"eta_s2", m.eta_s2}, {"k", m.k}, {"mu", o.mus}};
  ctx.write_json("fit.json", fit);
  write_manifest(ctx, cmd, o.seed);
  fmt::print("eta_i {:.4f}  eta_s1 {:.4f}  eta_s2 {:.4f}  k {:.3f}\n", fit["efficiencies"]["eta_i"]["value"].get<double>(),
             fit["efficiencies"]["eta_s1"]["value"].get<double>(), fit["efficiencies"]["eta_s2"]["value"].get<double>(),
             fit["tree_depth"]["k"].get<double>());
}

int run(std::vector<std::string> argv);

void cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("cannot parse manifest: ") + e.what());
  }
  auto args = manifest.at("argv").get<std::vector<std::string>>();
  if (args.empty() || args.front() == "replay") throw FormatError("manifest does not describe a replayable command");
  const std::string out = out_override.empty() ? fs::path(manifest_path).parent_path().string() : out_override;
  args.push_back("--out=" + (out.empty() ? std::string(".") : out));
  const int code = run(args);
  if (code != 0) throw NumericError(fmt::format("replayed command exited with status {}", code));
}

// Splices the entries of a subcommand's key=value file in front of its
// command-line arguments, skipping keys that were given as flags. The parser
// then validates them like any other argument.
std::vector<std::string> expand_config(std::vector<std::string> argv) {
  if (argv.empty() || argv.front().starts_with("-")) return argv;
  std::string path;
  for (std::size_t i = 1; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
    if (argv[i].starts_with("--config=")) path = argv[i].substr(9);
  }
  if (path.empty()) return argv;
  if (!fs::is_regular_file(path)) throw UsageError("cannot open config file '" + path + "'");

  auto given = [&argv](const std::string& key) {
    return std::any_of(argv.begin() + 1, argv.end(), [&key](const std::string& a) {
      return a == "--" + key || a.starts_with("--" + key + "=");
    });
  };
  std::vector<std::string> injected;
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
    if (!item.parents.empty() || item.name == "config" || item.name == "++" || item.name == "--") continue;
    if (given(item.name)) continue;
    std::string joined;
    for (const auto& v : item.inputs) joined += (joined.empty() ? "" : ",") + v;
    if (joined == "true") {
      injected.push_back("--" + item.name);
    } else if (joined != "false") {
      injected.push_back("--" + item.name + "=" + joined);
    }
  }
  argv.insert(argv.begin() + 1, injected.begin(), injected.end());
  return argv;
}

int run(std::vector<std::string> argv) {
  CLI::App app{"Simulation and analysis of heralded single-photon sources read out by PNR detectors", "pnrsim"};
  app.set_version_flag("--version", PNRSIM_VERSION);
  app.require_subcommand(1);

  Context ctx;
  auto add_common = [&ctx](CLI::App* cmd) {
    add(cmd, "--out", ctx.out_dir, "Output directory");
    cmd->add_option("--config", ctx.config_path, "key=value configuration file (command-line flags win)");
  };

  JsiOptions jsi;
  auto* jsi_cmd = app.add_subcommand("jsi", "Synthesize or read a JSI and compute its Schmidt spectrum");
  add(jsi_cmd, "--pump-bw", jsi.source.pump_bandwidth_nm, "Pump bandwidth (nm FWHM)");
  add(jsi_cmd, "--phasematch-bw", jsi.source.phasematch_bandwidth_nm, "Phase-matching bandwidth (nm FWHM)");
  add(jsi_cmd, "--pump-center", jsi.source.pump_center_nm, "Pump wavelength (nm)");
  add(jsi_cmd, "--signal-band", jsi.signal_band, "Signal filter lo,hi (nm)")->delimiter(',');
  add(jsi_cmd, "--idler-band", jsi.idler_band, "Idler filter lo,hi (nm)")->delimiter(',');
  add(jsi_cmd, "--grid", jsi.source.grid_size, "Grid points per axis");
  add(jsi_cmd, "--cutoff", jsi.cutoff, "Relative Schmidt-eigenvalue cutoff");
  jsi_cmd->add_flag("--separable", jsi.separable, "Match pump and phase-matching bandwidths (K = 1)");
  add(jsi_cmd, "--input", jsi.input, "Read the JSI from a CSV grid instead of synthesizing");
  add_common(jsi_cmd);

  double povm_eta = 0.71, povm_k = 2.55;
  int povm_nmax = 12;
  auto* povm_cmd = app.add_subcommand("povm", "Single-photon POVM element and eta_PNR");
  add(povm_cmd, "--eta", povm_eta, "Detector efficiency")->check(CLI::Range(0.0, 1.0));
  add(povm_cmd, "--k", povm_k, "Tree depth")->check(CLI::NonNegativeNumber);
  add(povm_cmd, "--n-max", povm_nmax, "Highest photon number stored")->check(CLI::Range(6, 1000));
  add_common(povm_cmd);

  ModelOptions curve_model;
  CurveOptions curve;
  auto* curve_cmd = app.add_subcommand("curve", "g2 versus mu for threshold and PNR readout");
  add_model_options(curve_cmd, curve_model, false);
  add(curve_cmd, "--mu-min", curve.mu_min, "Smallest mu");
  add(curve_cmd, "--mu-max", curve.mu_max, "Largest mu");
  add(curve_cmd, "--points", curve.points, "Logarithmically spaced points");
  add(curve_cmd, "--target-g2", curve.target_g2, "g2 at which the crossing mu is reported");
  add(curve_cmd, "--threads", curve.threads, "Worker threads (0 = all cores)");
  add_common(curve_cmd);

  ModelOptions sim_model;
  sim_model.mu = 0.1;
  TimingOptions sim_timing;
  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a time-tag stream");
  add_model_options(sim_cmd, sim_model, true);
  sim_timing.register_options(sim_cmd);
  add(sim_cmd, "--pulses", sim.pulses, "Number of clock periods")->check(CLI::PositiveNumber);
  add(sim_cmd, "--seed", sim.seed, "Random seed");
  add(sim_cmd, "--format", sim.format, "Tag file format")->check(CLI::IsMember({"binary", "csv"}));
  sim_cmd->add_flag("--labels", sim.labels, "Also write per-pulse ground-truth labels");
  add_common(sim_cmd);

  CountOptions count;
  auto* count_cmd = app.add_subcommand("count", "Count coincidences in a tag file");
  add(count_cmd, "--input", count.input, "Tag file (.bin or .csv)")->required();
  add(count_cmd, "--format", count.format, "Tag file format")->check(CLI::IsMember({"auto", "binary", "csv"}));
  add(count_cmd, "--period", count.run.clock_period_ps, "Clock period in ps");
  add(count_cmd, "--window", count.run.window_ps, "Coincidence half-width in ps");
  add(count_cmd, "--boundary", count.boundary, "PNR bin boundary in ps (default: generator midpoint)");
  add(count_cmd, "--delays", count.delays, "Channel delays idler,signal1,signal2,clock in ps")->delimiter(',');
  add_common(count_cmd);

  std::string fit_input, fit_spectrum = "default";
  auto* fit_cmd = app.add_subcommand("fit", "Fit efficiencies, mu per setting and tree depth");
  add(fit_cmd, "--input", fit_input, "JSON array of count summaries, lowest power first")->required();
  add(fit_cmd, "--spectrum", fit_spectrum, "Schmidt spectrum: default, single, or a spectrum CSV");
  add_common(fit_cmd);

  ModelOptions pipe_model;
  TimingOptions pipe_timing;
  PipelineOptions pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Simulate a power sweep, count every setting and fit");
  add_model_options(pipe_cmd, pipe_model, false);
  pipe_timing.register_options(pipe_cmd);
  add(pipe_cmd, "--mus", pipe.mus, "Mean pair numbers of the sweep")->delimiter(',');
  add(pipe_cmd, "--pulses", pipe.pulses, "Pulses per setting")->check(CLI::PositiveNumber);
  add(pipe_cmd, "--seed", pipe.seed, "Random seed");
  add(pipe_cmd, "--threads", pipe.threads, "Worker threads (0 = all cores)");
  pipe_cmd->add_flag("--keep-tags", pipe.keep_tags, "Write the tag stream of every setting");
  add_common(pipe_cmd);

  std::string replay_manifest, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  add(replay_cmd, "manifest", replay_manifest, "Manifest file")->required();
  add(replay_cmd, "--out", replay_out, "Output directory (default: the manifest's directory)");

  try {
    argv = expand_config(std::move(argv));
  } catch (const std::exception& e) {
    std::cerr << "pnrsim: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (jsi_cmd->parsed()) cmd_jsi(ctx, jsi_cmd, jsi);
    if (povm_cmd->parsed()) cmd_povm(ctx, povm_cmd, povm_eta, povm_k, povm_nmax);
    if (curve_cmd->parsed()) cmd_curve(ctx, curve_cmd, curve_model, curve);
    if (sim_cmd->parsed()) cmd_simulate(ctx, sim_cmd, sim_model, sim_timing, sim);
    if (count_cmd->parsed()) cmd_count(ctx, count_cmd, count);
    if (fit_cmd->parsed()) cmd_fit(ctx, fit_cmd, fit_input, fit_spectrum);
    if (pipe_cmd->parsed()) cmd_pipeline(ctx, pipe_cmd, pipe_model, pipe_timing, pipe);
    if (replay_cmd->parsed()) cmd_replay(replay_manifest, replay_out);
  } catch (const UsageError& e) {
    std::cerr << "pnrsim: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "pnrsim: " << e.what() << '\n';
    return kExitContract;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args));
}
