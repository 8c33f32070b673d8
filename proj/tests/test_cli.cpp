#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh scratch directory per test case, removed on exit.
struct Scratch {
  fs::path dir;
  Scratch() {
    static int counter = 0;
    dir = fs::temp_directory_path() / ("pnrsim_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

int pnrsim(const std::string& args) {
  const std::string command = std::string(PNRSIM_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) { return json::parse(slurp(path)); }

// Schmidt number from the "# schmidt_number=..." header line.
double header_k(const std::string& spectrum_csv) {
  std::ifstream in(spectrum_csv);
  std::string line;
  std::getline(in, line);
  const auto eq = line.find('=');
  REQUIRE(eq != std::string::npos);
  return std::stod(line.substr(eq + 1));
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("jsi default spectrum has K = 20.6") {
  Scratch s;
  REQUIRE(pnrsim("jsi --out " + s.dir.string()) == 0);
  CHECK(header_k(s / "spectrum.csv") == doctest::Approx(20.6).epsilon(0.5 / 20.6));
  CHECK(fs::exists(s / "jsi.csv"));
  const json manifest = read_json(s / "jsi.manifest.json");
  CHECK(manifest["command"] == "jsi");
  CHECK(manifest["outputs"].size() == 2);
}

TEST_CASE("jsi separable gives K = 1") {
  Scratch s;
  REQUIRE(pnrsim("jsi --separable --out " + s.dir.string()) == 0);
  CHECK(std::abs(header_k(s / "spectrum.csv") - 1.0) < 1e-6);
}

TEST_CASE("jsi K is stable under grid refinement") {
  Scratch s;
  REQUIRE(pnrsim("jsi --grid 128 --out " + (s / "a")) == 0);
  REQUIRE(pnrsim("jsi --grid 256 --out " + (s / "b")) == 0);
  const double coarse = header_k(s / "a/spectrum.csv");
  const double fine = header_k(s / "b/spectrum.csv");
  CHECK(std::abs(coarse - fine) / fine < 0.02);
}

TEST_CASE("curve columns and crossing") {
  Scratch s;
  REQUIRE(pnrsim("curve --points 25 --out " + s.dir.string()) == 0);
  const auto rows = read_csv(s / "curve.csv");
  REQUIRE(rows.size() == 25);
  for (const auto& r : rows) {
    REQUIRE(r.size() == 12);
    CHECK(r[2] <= r[1]);
  }
  const json summary = read_json(s / "curve_summary.json");
  CHECK(summary["mu_threshold_at_target"].get<double>() == doctest::Approx(4e-3).epsilon(0.15));

  Scratch t;
  REQUIRE(pnrsim("curve --k 0 --points 9 --out " + t.dir.string()) == 0);
  for (const auto& r : read_csv(t / "curve.csv")) CHECK(r[1] == r[2]);
}

TEST_CASE("povm writes coefficients and eta_pnr") {
  Scratch s;
  REQUIRE(pnrsim("povm --out " + s.dir.string()) == 0);
  const json povm = read_json(s / "povm.json");
  CHECK(povm["eta_pnr"].get<double>() == doctest::Approx(0.360).epsilon(0.005 / 0.360));
  CHECK(povm["normalized"]["coefficients"][1].get<double>() == doctest::Approx(0.418).epsilon(0.005 / 0.418));
}

TEST_CASE("simulate, count and fit chain") {
  Scratch s;
  REQUIRE(pnrsim("simulate --mu 0.3 --k 2 --pulses 200000 --labels --out " + s.dir.string()) == 0);
  REQUIRE(pnrsim("count --input " + (s / "tags.bin") + " --out " + s.dir.string()) == 0);
  const json counts = read_json(s / "counts.json");
  CHECK(counts["pulses"].get<std::uint64_t>() == 200000);
  CHECK(counts["c_i_multi"].get<std::uint64_t>() > 0);

  REQUIRE(pnrsim("simulate --format csv --mu 0.3 --pulses 1000 --out " + (s / "csv")) == 0);
  CHECK(pnrsim("count --input " + (s / "csv/tags.csv") + " --out " + (s / "csv")) == 0);
}

TEST_CASE("pipeline runs end to end and replays bit-identically") {
  Scratch s;
  REQUIRE(pnrsim("pipeline --pulses 20000 --out " + s.dir.string()) == 0);
  const json fit = read_json(s / "fit.json");
  CHECK(fit["mu"].size() == 9);
  CHECK(fit.contains("tree_depth"));
  CHECK(fit.contains("truth"));
  REQUIRE(pnrsim("fit --input " + (s / "settings.json") + " --out " + (s / "refit")) == 0);
  CHECK(read_json(s / "refit/fit.json")["tree_depth"] == fit["tree_depth"]);

  REQUIRE(pnrsim("replay " + (s / "pipeline.manifest.json") + " --out " + (s / "again")) == 0);
  CHECK(slurp(s / "fit.json") == slurp(s / "again/fit.json"));
  CHECK(slurp(s / "settings.json") == slurp(s / "again/settings.json"));
}

TEST_CASE("seeded simulate replays bit-identically") {
  Scratch s;
  REQUIRE(pnrsim("simulate --seed 99 --pulses 50000 --out " + s.dir.string()) == 0);
  REQUIRE(pnrsim("replay " + (s / "simulate.manifest.json") + " --out " + (s / "again")) == 0);
  CHECK(slurp(s / "tags.bin") == slurp(s / "again/tags.bin"));
}

TEST_CASE("config file values apply and flags win") {
  Scratch s;
  {
    std::ofstream cfg(s / "run.cfg");
    cfg << "# comment\nmu=0.05\npulses=1000\nlabels=true\n";
  }
  REQUIRE(pnrsim("simulate --config " + (s / "run.cfg") + " --pulses 500 --out " + s.dir.string()) == 0);
  const json params = read_json(s / "simulate.manifest.json")["parameters"];
  CHECK(params["mu"] == "0.05");
  CHECK(params["pulses"] == "500");
  CHECK(fs::exists(s / "labels.csv"));
}

TEST_CASE("usage errors exit with status 2") {
  Scratch s;
  { std::ofstream(s / "empty.json"); }
  { std::ofstream(s / "none.json") << "[]"; }
  { std::ofstream(s / "bad.cfg") << "no-such-key=1\n"; }
  CHECK(pnrsim("fit --input " + (s / "empty.json") + " --out " + s.dir.string()) == 2);
  CHECK(pnrsim("fit --input " + (s / "none.json") + " --out " + s.dir.string()) == 2);
  CHECK(pnrsim("count --input " + (s / "missing.bin") + " --out " + s.dir.string()) == 2);
  CHECK(pnrsim("count --out " + s.dir.string()) == 2);
  CHECK(pnrsim("") == 2);
  CHECK(pnrsim("frobnicate") == 2);
  CHECK(pnrsim("curve --eta-i 2") == 2);
  CHECK(pnrsim("povm --config " + (s / "bad.cfg")) == 2);
  CHECK(pnrsim("povm --config " + (s / "missing.cfg")) == 2);
}

TEST_CASE("numeric and contract errors exit with status 3") {
  Scratch s;
  CHECK(pnrsim("jsi --grid 2 --out " + s.dir.string()) == 3);
  CHECK(pnrsim("jsi --signal-band 800,700 --out " + s.dir.string()) == 3);
}

TEST_CASE("help and version succeed") {
  CHECK(pnrsim("--help") == 0);
  CHECK(pnrsim("--version") == 0);
  CHECK(pnrsim("simulate --help") == 0);
}
