#include "qprobe/commands.hpp"
#include "qprobe/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace qprobe;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RunConfig resolve(const std::string& text) { return Config::parse(text, "t.conf").resolve(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("qprobe_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Data lines of a CSV, comment lines dropped, header kept first.
std::vector<std::string> csv_rows(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(item);
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

// Maximum of f on [0, t_max] from a dense scan plus golden-section polishing.
double dense_max(const std::function<double(double)>& f, double t_max) {
  const int n = 20000;
  int best = 0;
  double bv = f(0.0);
  for (int k = 1; k <= n; ++k) {
    const double v = f(t_max * k / n);
    if (v > bv) {
      bv = v;
      best = k;
    }
  }
  double a = t_max * std::max(0, best - 1) / n, b = t_max * std::min(n, best + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a), d = a + g * (b - a);
    if (f(c) > f(d)) b = d;
    else a = c;
  }
  return std::max(bv, f(0.5 * (a + b)));
}

const char* kWeak = "delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nsamples = 400\n";

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(-2.5e-20) == "-2.5e-20");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(123456789.0) == "123456789");
}

TEST_CASE("atomic writes") {
  TempDir dir("atomic");
  fs::create_directories(dir.path);
  const fs::path p = dir.path / "out.txt";
  write_atomic(p, "one\n");
  CHECK(slurp(p) == "one\n");
  write_atomic(p, "two\n");
  CHECK(slurp(p) == "two\n");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
  CHECK(files == 1);
  CHECK_THROWS_AS(write_atomic(dir.path / "missing" / "x.txt", "z"), Error);
  CHECK_FALSE(fs::exists(dir.path / "missing"));
}

TEST_CASE("simulate writes the trajectory") {
  TempDir dir("simulate");
  RunConfig cfg = resolve("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nchi = 1\nt_max = 100\nsamples = 51\n");
  cmd_simulate(cfg, dir.path);
  const std::string text = slurp(dir.path / "trajectory.csv");
  CHECK(text.rfind("# command: simulate\n# version: 1.0.0\n", 0) == 0);
  CHECK(text.find("# solver: heom") != std::string::npos);
  const auto rows = csv_rows(text);
  REQUIRE(rows.size() == 52);
  CHECK(rows[0] == "t,re_rho_pp,im_rho_pp,re_rho_pm,im_rho_pm,re_rho_mp,im_rho_mp,re_rho_mm,im_rho_mm,r_x,r_y,r_z");
  const auto first = split(rows[1]);
  REQUIRE(first.size() == 12);
  CHECK(std::stod(first[0]) == 0.0);
  CHECK(std::stod(first[1]) == doctest::Approx(0.5));
  CHECK(std::stod(first[3]) == doctest::Approx(0.5));
  const auto last = split(rows.back());
  CHECK(std::stod(last[0]) == 100.0);
  CHECK(std::stod(last[1]) + std::stod(last[7]) == doctest::Approx(1.0).epsilon(1e-10));

  RunConfig oc = resolve("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nsolver = oracle\nt_max = 50\nsamples = 11\n"
                         "oracle_modes = 32\n");
  TempDir odir("simulate_oracle");
  cmd_simulate(oc, odir.path);
  CHECK(csv_rows(slurp(odir.path / "trajectory.csv")).size() == 12);
  CHECK_THROWS_AS(run_fisher(oc), Error);
}

TEST_CASE("fisher at chi = 0 reproduces the closed-form optimum") {
  TempDir dir("fisher0");
  const RunConfig cfg = resolve(kWeak);
  cmd_fisher(cfg, dir.path);
  const json m = json::parse(slurp(dir.path / "metrics.json"));
  const ModelSpec& spec = cfg.spec;
  const double t_max = default_t_max(spec);
  const double fq = dense_max([&](double t) { return rwa_fisher(t, spec).qfi; }, t_max);
  const double fc = dense_max([&](double t) { return rwa_fisher(t, spec).cfi; }, t_max);
  CHECK(std::abs(m["max_FQ"].get<double>() - fq) / fq < 1e-6);
  CHECK(std::abs(m["max_FC"].get<double>() - fc) / fc < 1e-6);
  CHECK(m["R_Q"].get<double>() == 1.0);
  CHECK(m["delta_FQ"].get<double>() == 0.0);
  CHECK(m["flags"].empty());
  CHECK(m["reference"]["solver"] == "heom");
  CHECK(m["solver_metadata"]["version"] == "1.0.0");

  const auto rows = csv_rows(slurp(dir.path / "fisher_series.csv"));
  REQUIRE(rows.size() == 401);
  CHECK(rows[0] == "t,F_C,F_Q,flags");
  CHECK(split(rows[1])[2] == "0");
}

TEST_CASE("decoupled probe: boundary maximum at t_max^2") {
  const RunConfig cfg = resolve("delta_thz = 0.1\ngamma_cm1 = 0\nlambda_over_gamma = 2\nchi = 1\nsamples = 200\n");
  const FisherRun run = run_fisher(cfg);
  const double t_max = run.grid.t_max;
  CHECK(t_max == doctest::Approx(20.0 * kPi / cfg.spec.delta));
  CHECK(run.report.max_fq.boundary);
  CHECK(run.report.max_fq.value == doctest::Approx(t_max * t_max).epsilon(1e-6));
  CHECK(run.report.r_q == doctest::Approx(1.0).epsilon(1e-9));
  const json m = json::parse(metrics_json(run, cfg));
  CHECK(m["flags"][0] == "boundary-max");
}

TEST_CASE("damped series: F_C vanishes, F_Q settles on the stationary value") {
  const std::string base = "delta_thz = 0.1\ngamma_cm1 = 0.1\nlambda_over_gamma = 5\nchi = 1\n";
  const FisherRun run = run_fisher(resolve(base + "samples = 500\n"));
  const FisherSeries& s = run.result.series;
  CHECK_FALSE(run.report.max_fq.boundary);
  CHECK_FALSE(run.report.max_fc.boundary);
  CHECK(s.cfi.back() < 0.01 * run.report.max_fc.value);
  CHECK(run.report.max_fq.t < 0.3 * run.grid.t_max);

  // The dressed stationary state still depends on delta, so F_Q flattens instead of vanishing.
  const FisherRun longer = run_fisher(resolve(base + "samples = 300\nt_max = 2000\n"));
  const double plateau = longer.result.series.qfi.back();
  CHECK(plateau > 0.0);
  CHECK(plateau < 0.02 * run.report.max_fq.value);
  CHECK(std::abs(s.qfi.back() - plateau) / plateau < 0.05);
  CHECK(longer.result.series.cfi.back() < 1e-12);
}

TEST_CASE("sweep rows match single runs and do not depend on the thread count") {
  const std::string base = std::string(kWeak) + "axis = chi\n";
  const RunConfig one = resolve(base + "values = 0.5\n");
  const auto rows = run_sweep(one, 1);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].run);
  RunConfig single = resolve(std::string(kWeak) + "chi = 0.5\n");
  const FisherRun direct = run_fisher(single);
  CHECK(rows[0].run->report.max_fq.value == direct.report.max_fq.value);
  CHECK(rows[0].run->report.max_fc.value == direct.report.max_fc.value);
  CHECK(rows[0].run->report.r_q == direct.report.r_q);

  const RunConfig many = resolve(base + "values = 1, 0.75, 0.5, 0.25, 0\n");
  TempDir a("sweep1"), b("sweep3");
  cmd_sweep(many, a.path, 1);
  cmd_sweep(many, b.path, 3);
  const std::string sa = slurp(a.path / "sweep.csv");
  CHECK(sa == slurp(b.path / "sweep.csv"));
  const auto lines = csv_rows(sa);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0].rfind("axis_value,chi,gamma_cm1,", 0) == 0);
  CHECK(split(lines[1])[0] == "0");
  CHECK(split(lines[5])[0] == "1");
  CHECK(split(lines[1])[13] == "1");
  CHECK(sa.find("# chi:") == std::string::npos);
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(split(lines[i]).size() == 17);
}

TEST_CASE("sweep errors stay in their row") {
  const RunConfig cfg = resolve(std::string(kWeak) + "axis = chi\nvalues = 0, 1\ndt = 1000\n");
  const auto rows = run_sweep(cfg, 2);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK_FALSE(r.run);
    CHECK_FALSE(r.error.empty());
  }
  const std::string csv = sweep_csv(rows, cfg);
  CHECK(csv.find("error: ") != std::string::npos);
}

TEST_CASE("validate: closed form, bath equivalence and oracle at chi = 0") {
  TempDir dir("validate0");
  const RunConfig cfg = resolve("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nt_max = 400\nsamples = 200\n"
                                "oracle_modes = 64\n");
  CHECK(cmd_validate(cfg, dir.path));
  const json v = json::parse(slurp(dir.path / "validation.json"));
  CHECK(v["passed"] == true);
  std::vector<std::string> names;
  for (const auto& c : v["checks"]) {
    names.push_back(c["name"]);
    CHECK(c["passed"] == true);
  }
  CHECK(names == std::vector<std::string>{"heom_trace", "heom_hermiticity", "rwa", "bath_equivalence", "oracle",
                                          "heom_convergence"});
  CHECK(v["convergence"]["depths"] == json({10, 20, 30}));
}

TEST_CASE("validate: NZ strict only at weak coupling") {
  const ValidationReport weak = run_validate(
      resolve("delta_thz = 0.2\nchi = 1\ngamma_cm1 = 0.01\nlambda_over_gamma = 5\nsamples = 200\n"));
  const ValidationReport strong = run_validate(
      resolve("delta_thz = 0.1\nchi = 1\ngamma_cm1 = 0.2\nlambda_over_gamma = 1\nsamples = 200\noracle = off\n"));
  auto find = [](const ValidationReport& r, const std::string& n) {
    for (const auto& c : r.checks)
      if (c.name == n) return c;
    FAIL("missing check " << n);
    return ValidationCheck{};
  };
  CHECK(find(weak, "nz").strict);
  CHECK(find(weak, "nz").passed);
  CHECK(weak.passed);
  CHECK_FALSE(find(strong, "nz").strict);
  for (const auto& c : strong.checks) CHECK(c.name != "oracle");
  CHECK(strong.passed == find(strong, "heom_convergence").passed);
}

TEST_CASE("validate fails on an unconverged hierarchy") {
  TempDir dir("validate_fail");
  const RunConfig cfg =
      resolve("delta_thz = 0.1\nchi = 1\ngamma_cm1 = 0.3\nlambda_over_gamma = 0.5\nsamples = 100\noracle = off\n"
              "convergence_depths = 1, 2\n");
  CHECK_FALSE(cmd_validate(cfg, dir.path));
  const json v = json::parse(slurp(dir.path / "validation.json"));
  CHECK(v["passed"] == false);
  CHECK(v["checks"].back()["name"] == "heom_convergence");
  CHECK(v["checks"].back()["passed"] == false);
}
