#include "qprobe/qprobe.h"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const double kDelta = 0.1 * 2.0 * M_PI * 2.99792458e10 * 1e-12;

qprobe_config* parse(const char* text) {
  qprobe_config* cfg = nullptr;
  REQUIRE(qprobe_config_parse(text, &cfg) == QPROBE_OK);
  REQUIRE(cfg != nullptr);
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qprobe_capi_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("version and argument checks") {
  CHECK(std::string(qprobe_version()) == "1.0.0");
  qprobe_config* cfg = nullptr;
  CHECK(qprobe_config_parse(nullptr, &cfg) == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(qprobe_last_error()) > 0);
  CHECK(qprobe_config_parse("chi = 0", nullptr) == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(qprobe_config_check(nullptr) == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(qprobe_simulate(nullptr, ".") == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(qprobe_trajectory_size(nullptr) == 0);
  CHECK(qprobe_fisher_size(nullptr) == 0);
  qprobe_config_free(nullptr);
  qprobe_trajectory_free(nullptr);
  qprobe_fisher_free(nullptr);
}

TEST_CASE("config errors map to status codes") {
  qprobe_config* cfg = nullptr;
  CHECK(qprobe_config_parse("chi = 0\nbogus = 1\n", &cfg) == QPROBE_ERR_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(qprobe_last_error()) == "config:2: unknown key 'bogus'");
  CHECK(qprobe_config_load("/nonexistent/x.conf", &cfg) == QPROBE_ERR_CONFIG);

  cfg = parse("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\n");
  CHECK(qprobe_config_check(cfg) == QPROBE_OK);
  CHECK(std::string(qprobe_last_error()).empty());
  CHECK(qprobe_config_set(cfg, "nope", "1") == QPROBE_ERR_CONFIG);
  CHECK(qprobe_config_set(cfg, "chi", "3") == QPROBE_OK);
  CHECK(qprobe_config_check(cfg) == QPROBE_ERR_CONFIG);
  CHECK(std::string(qprobe_last_error()).find("chi must lie in [0, 1]") != std::string::npos);
  CHECK(qprobe_config_set(cfg, "chi", "1") == QPROBE_OK);
  CHECK(qprobe_config_set(cfg, "solver", "nz") == QPROBE_OK);
  CHECK(qprobe_config_set(cfg, "dt", "1000") == QPROBE_OK);
  qprobe_trajectory* traj = nullptr;
  CHECK(qprobe_trajectory_compute(cfg, &traj) == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(traj == nullptr);
  CHECK(qprobe_sweep(cfg, ".", 0) == QPROBE_ERR_INVALID_ARGUMENT);
  qprobe_config_free(cfg);
}

TEST_CASE("trajectory handle: free precession") {
  qprobe_config* cfg = parse("delta_thz = 0.1\ngamma_cm1 = 0\nlambda_over_gamma = 1\nt_max = 200\nsamples = 41\n");
  qprobe_trajectory* traj = nullptr;
  REQUIRE(qprobe_trajectory_compute(cfg, &traj) == QPROBE_OK);
  REQUIRE(qprobe_trajectory_size(traj) == 41);
  for (size_t i = 0; i < 41; ++i) {
    double t = -1.0, rho[8], r[3];
    REQUIRE(qprobe_trajectory_sample(traj, i, &t, rho) == QPROBE_OK);
    REQUIRE(qprobe_trajectory_bloch(traj, i, r) == QPROBE_OK);
    CHECK(t == doctest::Approx(5.0 * i));
    CHECK(rho[0] == doctest::Approx(0.5));
    CHECK(rho[6] == doctest::Approx(0.5));
    const std::complex<double> pm(rho[2], rho[3]);
    CHECK(std::abs(pm - 0.5 * std::exp(std::complex<double>(0.0, -kDelta * t))) < 1e-8);
    CHECK(r[0] * r[0] + r[1] * r[1] + r[2] * r[2] == doctest::Approx(1.0).epsilon(1e-8));
  }
  double t;
  CHECK(qprobe_trajectory_sample(traj, 41, &t, nullptr) == QPROBE_ERR_INVALID_ARGUMENT);
  double r[3];
  CHECK(qprobe_trajectory_bloch(traj, 99, r) == QPROBE_ERR_INVALID_ARGUMENT);
  qprobe_trajectory_free(traj);
  qprobe_config_free(cfg);
}

TEST_CASE("fisher handle") {
  qprobe_config* cfg = parse("delta_thz = 0.1\ngamma_cm1 = 0\nlambda_over_gamma = 1\nchi = 1\nsamples = 101\n");
  qprobe_fisher* f = nullptr;
  REQUIRE(qprobe_fisher_compute(cfg, &f) == QPROBE_OK);
  REQUIRE(qprobe_fisher_size(f) == 101);
  double t, fc, fq;
  unsigned flags;
  REQUIRE(qprobe_fisher_sample(f, 100, &t, &fc, &fq, &flags) == QPROBE_OK);
  CHECK(fq == doctest::Approx(t * t).epsilon(1e-6));
  qprobe_metrics m;
  REQUIRE(qprobe_fisher_metrics(f, &m) == QPROBE_OK);
  CHECK(m.chi == 1.0);
  CHECK(m.boundary_max == 1);
  CHECK(m.max_fq == doctest::Approx(t * t).epsilon(1e-6));
  CHECK(m.r_q == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.delta_fq == doctest::Approx(m.max_fq - m.reference_max_fq));
  CHECK(qprobe_fisher_sample(f, 101, &t, &fc, &fq, &flags) == QPROBE_ERR_INVALID_ARGUMENT);
  CHECK(qprobe_fisher_metrics(f, nullptr) == QPROBE_ERR_INVALID_ARGUMENT);
  qprobe_fisher_free(f);

  CHECK(qprobe_config_set(cfg, "solver", "oracle") == QPROBE_OK);
  CHECK(qprobe_fisher_compute(cfg, &f) == QPROBE_ERR_INVALID_ARGUMENT);
  qprobe_config_free(cfg);
}

TEST_CASE("commands write their files") {
  qprobe_config* cfg = parse("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nsamples = 100\nt_max = 300\n");
  const fs::path dir = fresh_dir("cmds");
  CHECK(qprobe_simulate(cfg, dir.c_str()) == QPROBE_OK);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(qprobe_fisher_run(cfg, dir.c_str()) == QPROBE_OK);
  CHECK(fs::exists(dir / "fisher_series.csv"));
  CHECK(fs::exists(dir / "metrics.json"));
  CHECK(qprobe_validate(cfg, dir.c_str()) == QPROBE_OK);
  CHECK(fs::exists(dir / "validation.json"));

  qprobe_config* sw = parse("delta_thz = 0.1\ngamma_cm1 = 0.05\nlambda_over_gamma = 2\nsamples = 100\naxis = chi\n"
                            "values = 0, 1\n");
  CHECK(qprobe_sweep(sw, dir.c_str(), 2) == QPROBE_OK);
  CHECK(fs::exists(dir / "sweep.csv"));
  qprobe_config_free(sw);

  CHECK(qprobe_config_set(cfg, "chi", "1") == QPROBE_OK);
  CHECK(qprobe_config_set(cfg, "gamma_cm1", "0.3") == QPROBE_OK);
  CHECK(qprobe_config_set(cfg, "lambda_over_gamma", "0.5") == QPROBE_OK);
  CHECK(qprobe_config_set(cfg, "convergence_depths", "1, 2") == QPROBE_OK);
  CHECK(qprobe_validate(cfg, dir.c_str()) == QPROBE_ERR_VALIDATION_FAILED);
  CHECK(std::string(qprobe_last_error()).find("validation failed") != std::string::npos);

  const fs::path blocked = dir / "blocked";
  std::ofstream(blocked) << "file";
  CHECK(qprobe_simulate(cfg, blocked.c_str()) == QPROBE_ERR_IO);
  qprobe_config_free(cfg);
  fs::remove_all(dir);
}
