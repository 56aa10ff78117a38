#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace boundtail::cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("boundtail_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::string> data_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

int run_in(const TempDir& t, const std::string& sub, const std::string& cmd, json cfg, Flags flags = {}) {
  flags.out = (t.path / sub).string();
  std::ostringstream log;
  return run_command(cmd, cfg, flags, log);
}

json tanh_config(double over_star) {
  return {{"map", {{"family", "tanh_affine"}, {"b", 3}, {"sigma_over_star", over_star}}}};
}

json affine_config() {
  return {{"map", {{"family", "affine"}, {"lambda", 0.5}, {"sigma", 1}}},
          {"grid", {{"cells", 200}, {"grading", "uniform"}}}};
}

}  // namespace

TEST_CASE("analyze reports intervals and boundary classes") {
  TempDir t;
  REQUIRE(run_in(t, "tanh", "analyze", tanh_config(0.5)) == kOk);
  const auto a = load(t.path / "tanh" / "analysis.json");
  REQUIRE(a["intervals"].size() == 2);
  CHECK(a["intervals"][0]["upper_boundary"]["kind"] == "hyperbolic");
  CHECK(a["intervals"][0]["lo"].get<double>() == doctest::Approx(-2.892347557318).epsilon(1e-9));
  CHECK(a["intervals"][0]["hi"].get<double>() == doctest::Approx(-2.186801653017).epsilon(1e-9));
  CHECK(a["sigma_star"].get<double>() == doctest::Approx(0.415092910644).epsilon(1e-10));
  CHECK(a["meta"]["command"] == "analyze");
  CHECK(a["meta"]["config"]["grid"]["cells"] == 2000);

  REQUIRE(run_in(t, "aff", "analyze", affine_config()) == kOk);
  const auto b = load(t.path / "aff" / "analysis.json");
  REQUIRE(b["intervals"].size() == 1);
  CHECK(b["intervals"][0]["lo"].get<double>() == doctest::Approx(-2.0));
  CHECK(b["intervals"][0]["hi"].get<double>() == doctest::Approx(2.0));
  CHECK(b["intervals"][0]["upper_boundary"]["lambda"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("config errors exit with code 2") {
  TempDir t;
  json bif = {{"map", {{"family", "tanh_affine"}, {"b", 1.5}, {"sigma", 0.1}}}};
  CHECK(run_in(t, "a", "bifurcation", bif) == kConfigError);
  auto unknown = affine_config();
  unknown["run"] = {{"interval", 0}};
  CHECK(run_in(t, "b", "analyze", unknown) == kConfigError);
  auto typo = affine_config();
  typo["grid"]["cels"] = 10;
  CHECK(run_in(t, "c", "density", typo) == kConfigError);
  auto bad_type = affine_config();
  bad_type["grid"]["cells"] = "many";
  CHECK(run_in(t, "d", "density", bad_type) == kConfigError);
  auto bad_noise = affine_config();
  bad_noise["noise"] = {{"kind", "gaussian"}};
  CHECK(run_in(t, "e", "density", bad_noise) == kConfigError);
  CHECK(run_in(t, "f", "frobnicate", affine_config()) == kConfigError);
}

TEST_CASE("numerical failures exit with code 3") {
  TempDir t;
  auto cfg = affine_config();
  cfg["run"] = {{"max_iter", 1}, {"tol", 1e-15}};
  CHECK(run_in(t, "a", "density", cfg) == kNumericalFailure);
}

TEST_CASE("command line parsing") {
  TempDir t;
  const auto path = (t.path / "cfg.json").string();
  std::ofstream(path) << affine_config().dump();
  const auto out = (t.path / "cli_out").string();
  const char* ok[] = {"boundtail", "analyze", "--config", path.c_str(), "--out", out.c_str()};
  CHECK(run(6, ok) == kOk);
  CHECK(fs::exists(fs::path(out) / "analysis.json"));
  const char* missing[] = {"boundtail", "analyze", "--config", "/nonexistent/cfg.json"};
  CHECK(run(4, missing) == kConfigError);
  const auto broken = (t.path / "broken.json").string();
  std::ofstream(broken) << "{ not json";
  const char* bad[] = {"boundtail", "analyze", "--config", broken.c_str()};
  CHECK(run(4, bad) == kConfigError);
  const char* nosub[] = {"boundtail"};
  CHECK(run(1, nosub) == kConfigError);
}

TEST_CASE("density output is a normalised CSV at full precision") {
  TempDir t;
  REQUIRE(run_in(t, "d", "density", affine_config()) == kOk);
  const auto csv = t.path / "d" / "density.csv";
  const auto text = slurp(csv);
  CHECK(text.rfind("# boundtail ", 0) == 0);
  CHECK(text.find("# config {") != std::string::npos);
  CHECK(text.find('\r') == std::string::npos);
  const auto lines = data_lines(csv);
  REQUIRE(lines.size() == 201);
  CHECK(lines[0] == "interval,x_lo,x_hi,x_mid,phi");
  double mass = 0.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 5);
    CHECK(cells[4].find('e') != std::string::npos);
    CHECK(cells[4].size() >= 20);
    mass += (std::stod(cells[2]) - std::stod(cells[1])) * std::stod(cells[4]);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fs::exists(t.path / "d" / "meta.json"));
}

TEST_CASE("density then simulate round trip") {
  TempDir t;
  REQUIRE(run_in(t, "d", "density", affine_config()) == kOk);
  json sim = affine_config();
  sim["run"] = {{"x0", 0},
                {"burn_in", 100},
                {"samples", 200000},
                {"seed", 3},
                {"density_csv", (t.path / "d" / "density.csv").string()},
                {"density_interval", 0}};
  REQUIRE(run_in(t, "s1", "simulate", sim) == kOk);
  Flags two;
  two.threads = 2;
  REQUIRE(run_in(t, "s2", "simulate", sim, two) == kOk);
  const auto s = load(t.path / "s1" / "summary.json");
  CHECK(s["total"] == 200000);
  CHECK(s["l1_distance"].get<double>() < 0.05);
  CHECK(data_lines(t.path / "s1" / "histogram.csv") == data_lines(t.path / "s2" / "histogram.csv"));

  Flags reseed;
  reseed.seed = 4;
  REQUIRE(run_in(t, "s3", "simulate", sim, reseed) == kOk);
  CHECK(load(t.path / "s3" / "summary.json")["seed"] == 4);
  CHECK(data_lines(t.path / "s1" / "histogram.csv") != data_lines(t.path / "s3" / "histogram.csv"));
}

TEST_CASE("bifurcation scan") {
  TempDir t;
  json cfg = {{"map", {{"family", "tanh_affine"}, {"b", 5}, {"sigma", 0.1}}},
              {"run", {{"sigmas", {0.1, 1.0, 2.5}}}}};
  REQUIRE(run_in(t, "b", "bifurcation", cfg) == kOk);
  const auto lines = data_lines(t.path / "b" / "bifurcation.csv");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "sigma,n_intervals,interval_bounds");
  std::vector<int> counts;
  for (std::size_t i = 1; i < lines.size(); ++i) counts.push_back(std::stoi(lines[i].substr(lines[i].find(',') + 1)));
  CHECK(counts == std::vector<int>{2, 2, 1});
}

TEST_CASE("scaling report on an affine boundary") {
  TempDir t;
  json cfg = {{"map", {{"family", "affine"}, {"lambda", 0.5}, {"sigma", 1}}},
              {"grid", {{"cells", 1500}}},
              {"run", {{"window", {{"d_min", 1e-3}, {"d_max", 1e-1}, {"points", 10}}}}}};
  REQUIRE(run_in(t, "s", "scaling", cfg) == kOk);
  const auto r = load(t.path / "s" / "report.json");
  CHECK(r["density"]["mode"] == "hyperbolic_density");
  CHECK(r["density"]["raw_values"].size() == 10);
  const auto lines = data_lines(t.path / "s" / "scaling.csv");
  CHECK(lines[0] == "d,raw_value,phi,tail_raw_value");
  CHECK(lines.size() == 11);
}
