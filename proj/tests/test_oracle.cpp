#include "qprobe/error.hpp"
#include "qprobe/oracle.hpp"
#include "qprobe/reference.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace qprobe;

namespace {

ModelSpec make_spec(double delta, double chi, BathKind bath, double gamma, double lambda, double phi = kPi / 4) {
  ModelSpec s;
  s.delta = delta;
  s.chi = chi;
  s.bath = bath;
  s.gamma = gamma;
  s.lambda_width = lambda;
  s.phi = phi;
  return s;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int k = 0; k < n; ++k) v[k] = a + (b - a) * k / (n - 1);
  return v;
}

double max_abs_diff(const DensityMatrix2& a, const DensityMatrix2& b) { return (a.m - b.m).cwiseAbs().maxCoeff(); }

double binom(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

}  // namespace

TEST_CASE("discretised Lorentzian") {
  const ModelSpec spec = make_spec(1.0, 0.0, BathKind::Boson, 0.3, 0.2);
  const DiscretizedBath b = DiscretizedBath::lorentzian(spec, 40, 10.0);
  REQUIRE(b.modes() == 40);
  CHECK(b.spacing == doctest::Approx(2.0 * 10.0 * 0.2 / 40));
  CHECK(b.omega.front() == doctest::Approx(1.0 - 2.0 + 0.5 * b.spacing));
  CHECK(b.omega.back() == doctest::Approx(1.0 + 2.0 - 0.5 * b.spacing));
  for (int k = 0; k < b.modes(); ++k)
    CHECK(b.coupling[k] * b.coupling[k] == doctest::Approx(spectral_density(b.omega[k], spec) * b.spacing));
  CHECK(b.total_mass == doctest::Approx(0.5 * 0.3 * 0.2));
  CHECK(b.window_mass == doctest::Approx(0.3 * 0.2 / kPi * std::atan(10.0)));
  CHECK(b.discrete_mass() == doctest::Approx(b.window_mass).epsilon(1e-3));
  CHECK(b.recurrence_time() == doctest::Approx(2.0 * kPi / b.spacing));
  CHECK(b.trust_horizon() == doctest::Approx(2.0 * kPi / b.spacing - std::log(1e3) / 0.2));
  CHECK_THROWS_AS(DiscretizedBath::lorentzian(spec, 0), Error);
}

TEST_CASE("truncated basis") {
  for (int e = 1; e <= 3; ++e) {
    const OracleBasis bos(5, e, BathKind::Boson, 1'000'000);
    CHECK(bos.size() == static_cast<std::size_t>(binom(5 + e, e) + binom(5 + e - 1, e - 1)));
    const OracleBasis fer(5, e, BathKind::Fermion, 1'000'000);
    double count = 0.0;
    for (int j = 0; j <= e; ++j) count += binom(5, j);
    for (int j = 0; j <= e - 1; ++j) count += binom(5, j);
    CHECK(fer.size() == static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < bos.size(); ++i) {
      CHECK(bos.excitations(i) <= e);
      CHECK(bos.find(bos.probe(i), bos.occupation(i)) == static_cast<std::ptrdiff_t>(i));
      const std::ptrdiff_t p = bos.partner(i);
      if (p >= 0) {
        CHECK(bos.probe(p) != bos.probe(i));
        CHECK(bos.occupation(p) == bos.occupation(i));
      } else {
        CHECK(bos.probe(i) == 1);
        CHECK(bos.excitations(i) == e);
      }
    }
  }
  CHECK_THROWS_AS(OracleBasis(200, 4, BathKind::Boson, 10'000), Error);
  CHECK(OracleConfig{}.resolved_excitations(0.0) == 1);
  CHECK(OracleConfig{}.resolved_excitations(1.0) == 3);
}

TEST_CASE("Hamiltonian is real symmetric") {
  for (BathKind kind : {BathKind::Boson, BathKind::Fermion}) {
    const ModelSpec spec = make_spec(1.0, 0.7, kind, 0.2, 0.3);
    const DiscretizedBath bath = DiscretizedBath::lorentzian(spec, 6);
    const OracleBasis basis(6, 3, kind, 1'000'000);
    const Eigen::SparseMatrix<double> h = build_hamiltonian(bath, spec, basis);
    const Eigen::SparseMatrix<double> ht = h.transpose();
    CHECK((Eigen::MatrixXd(h) - Eigen::MatrixXd(ht)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single resonant mode: vacuum Rabi oscillation") {
  const double phi = 0.6;
  const ModelSpec spec = make_spec(1.0, 0.0, BathKind::Boson, 0.4, 0.05, phi);
  OracleConfig cfg;
  cfg.modes = 1;
  const DiscretizedBath bath = DiscretizedBath::lorentzian(spec, 1, cfg.window);
  const double g = bath.coupling[0];
  REQUIRE(bath.omega[0] == doctest::Approx(1.0));
  const std::vector<double> times = linspace(0.0, 0.9 * bath.recurrence_time(), 60);
  const OracleRun run = exact_evolve(spec, cfg, times);
  const DensityMatrix2 rho0 = initial_density(phi);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    const DensityMatrix2& r = run.trajectory.states[k];
    const double c = std::cos(g * t);
    CHECK(r(0, 0).real() == doctest::Approx(rho0(0, 0).real() * c * c).epsilon(1e-10));
    CHECK(std::abs(r(0, 1) - rho0(0, 1) * c * std::exp(cplx(0.0, -t))) < 1e-10);
    CHECK(r.trace() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("decoupled bath: free precession") {
  const ModelSpec spec = make_spec(0.7, 1.0, BathKind::Boson, 0.0, 0.1);
  OracleConfig cfg;
  cfg.modes = 8;
  const std::vector<double> times = linspace(0.0, 0.95 * DiscretizedBath::lorentzian(spec, 8).recurrence_time(), 31);
  const OracleRun run = exact_evolve(spec, cfg, times);
  const DensityMatrix2 rho0 = initial_density(spec.phi);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const DensityMatrix2& r = run.trajectory.states[k];
    CHECK(r.purity() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(r(0, 1) - rho0(0, 1) * std::exp(cplx(0.0, -0.7 * times[k]))) < 1e-10);
  }
}

TEST_CASE("rotating-wave bath: boson and fermion agree, excitations conserved") {
  const double c = UnitSystem::kCm1Angular;
  const ModelSpec bos = make_spec(0.1 * c, 0.0, BathKind::Boson, 0.05 * c, 0.05 * c);
  ModelSpec fer = bos;
  fer.bath = BathKind::Fermion;
  OracleConfig cfg;
  cfg.modes = 64;
  const double horizon = DiscretizedBath::lorentzian(bos, 64).trust_horizon();
  const std::vector<double> times = linspace(0.0, horizon, 50);
  const OracleRun a = exact_evolve(bos, cfg, times);
  const OracleRun b = exact_evolve(fer, cfg, times);
  const double n0 = a.excitations.front();
  CHECK(n0 == doctest::Approx(std::norm(std::cos(bos.phi))).epsilon(1e-12));
  for (std::size_t k = 0; k < times.size(); ++k) {
    CHECK(max_abs_diff(a.trajectory.states[k], b.trajectory.states[k]) < 1e-12);
    CHECK(std::abs(a.excitations[k] - n0) < 1e-10);
    CHECK(std::abs(b.excitations[k] - n0) < 1e-10);
  }
  CHECK(a.max_norm_drift < 1e-8);
  CHECK(b.max_norm_drift < 1e-8);
}

TEST_CASE("counter-rotating coupling creates excitations") {
  const double c = UnitSystem::kCm1Angular;
  const ModelSpec spec = make_spec(0.1 * c, 1.0, BathKind::Boson, 0.05 * c, 0.05 * c);
  OracleConfig cfg;
  cfg.modes = 16;
  const OracleRun run = exact_evolve(spec, cfg, linspace(0.0, 40.0, 9));
  CHECK(run.excitations.back() > run.excitations.front() + 1e-4);
  CHECK(run.max_norm_drift < 1e-8);
  for (const DensityMatrix2& r : run.trajectory.states) {
    CHECK(r.hermiticity_error() < 1e-12);
    CHECK(r.min_eigenvalue() > -1e-12);
  }
}

TEST_CASE("more modes approach the continuum at chi = 0") {
  const double c = UnitSystem::kCm1Angular;
  const ModelSpec spec = make_spec(0.1 * c, 0.0, BathKind::Boson, 0.05 * c, 0.1 * c);
  const DensityMatrix2 rho0 = initial_density(spec.phi);
  const double t_end = 2.0 / spec.lambda_width;
  double prev = 1.0;
  for (int k : {32, 64, 128}) {
    OracleConfig cfg;
    cfg.modes = k;
    REQUIRE(DiscretizedBath::lorentzian(spec, k).recurrence_time() > t_end);
    const std::vector<double> times = linspace(0.0, t_end, 21);
    const OracleRun run = exact_evolve(spec, cfg, times);
    double err = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j)
      err = std::max(err, max_abs_diff(run.trajectory.states[j], rwa_density(times[j], rho0, spec)));
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 5e-5);
}

TEST_CASE("refusals") {
  const ModelSpec spec = make_spec(1.0, 1.0, BathKind::Boson, 0.1, 0.2);
  OracleConfig cfg;
  cfg.modes = 8;
  const double t_rec = DiscretizedBath::lorentzian(spec, 8).recurrence_time();
  CHECK_THROWS_AS(exact_evolve(spec, cfg, {0.0, 1.01 * t_rec}), Error);
  CHECK_THROWS_AS(exact_evolve(spec, cfg, {1.0, 0.5}), Error);
  cfg.modes = 500;
  cfg.max_excitations = 4;
  cfg.max_dimension = 100'000;
  CHECK_THROWS_AS(exact_evolve(spec, cfg, {0.0, 1.0}), Error);
}
