#include "qprobe/oracle.hpp"

#include "qprobe/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace qprobe {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

DiscretizedBath DiscretizedBath::lorentzian(const ModelSpec& spec, int modes, double window) {
  spec.validate();
  if (modes < 1) throw invalid_argument("discretized bath needs at least one mode");
  if (!(window > 0.0)) throw invalid_argument("discretization window must be positive");
  DiscretizedBath b;
  b.kind = spec.bath;
  b.window = window;
  b.width = spec.lambda_width;
  const double lo = spec.delta - window * spec.lambda_width;
  b.spacing = 2.0 * window * spec.lambda_width / modes;
  b.omega.resize(static_cast<std::size_t>(modes));
  b.coupling.resize(static_cast<std::size_t>(modes));
  for (int k = 0; k < modes; ++k) {
    const double w = lo + (k + 0.5) * b.spacing;
    b.omega[static_cast<std::size_t>(k)] = w;
    b.coupling[static_cast<std::size_t>(k)] = std::sqrt(spectral_density(w, spec) * b.spacing);
  }
  b.total_mass = 0.5 * spec.gamma * spec.lambda_width;
  b.window_mass = spec.gamma * spec.lambda_width / kPi * std::atan(window);
  return b;
}

double DiscretizedBath::discrete_mass() const {
  double s = 0.0;
  for (double g : coupling) s += g * g;
  return s;
}

double DiscretizedBath::recurrence_time() const { return 2.0 * kPi / spacing; }

double DiscretizedBath::trust_horizon(double revival_weight) const {
  if (!(revival_weight > 0.0 && revival_weight < 1.0)) throw invalid_argument("revival weight must lie in (0, 1)");
  return std::max(0.0, recurrence_time() + std::log(revival_weight) / width);
}

int OracleConfig::resolved_excitations(double chi) const {
  if (max_excitations > 0) return max_excitations;
  return chi == 0.0 ? 1 : 3;
}

OracleBasis::OracleBasis(int modes, int max_excitations, BathKind kind, std::size_t max_dimension)
    : emax_(max_excitations) {
  if (modes < 1 || modes > 65535) throw invalid_argument("oracle mode count out of range");
  if (max_excitations < 1) throw invalid_argument("oracle excitation cutoff must be >= 1");
  const bool fermion = kind == BathKind::Fermion;

  std::vector<std::vector<std::uint16_t>> configs;
  std::vector<std::uint16_t> cur;
  std::size_t count = 0;
  // Bath configurations with at most `left` quanta, modes non-decreasing
  // (strictly increasing for fermions).
  std::function<void(int, int)> rec = [&](int first, int left) {
    configs.push_back(cur);
    if (++count > max_dimension) throw invalid_argument("oracle basis exceeds the dimension cap");
    if (left == 0) return;
    for (int k = first; k < modes; ++k) {
      cur.push_back(static_cast<std::uint16_t>(k));
      rec(fermion ? k + 1 : k, left - 1);
      cur.pop_back();
    }
  };
  rec(0, max_excitations);

  for (const auto& c : configs) {
    const int quanta = static_cast<int>(c.size());
    std::array<std::ptrdiff_t, 2> idx{-1, -1};
    for (int p = 0; p < 2; ++p) {
      const int e = quanta + (p == 0 ? 1 : 0);
      if (e > emax_) continue;
      if (probe_.size() >= max_dimension) throw invalid_argument("oracle basis exceeds the dimension cap");
      idx[static_cast<std::size_t>(p)] = static_cast<std::ptrdiff_t>(probe_.size());
      probe_.push_back(p);
      occ_.push_back(c);
    }
    index_.emplace(c, idx);
  }
  partner_.assign(probe_.size(), -1);
  for (const auto& [c, idx] : index_) {
    if (idx[0] >= 0 && idx[1] >= 0) {
      partner_[static_cast<std::size_t>(idx[0])] = idx[1];
      partner_[static_cast<std::size_t>(idx[1])] = idx[0];
    }
  }
}

std::ptrdiff_t OracleBasis::find(int probe, const std::vector<std::uint16_t>& occ) const {
  auto it = index_.find(occ);
  if (it == index_.end()) return -1;
  return it->second[static_cast<std::size_t>(probe)];
}

int OracleBasis::excitations(std::size_t i) const {
  return static_cast<int>(occ_[i].size()) + (probe_[i] == 0 ? 1 : 0);
}

Eigen::SparseMatrix<double> build_hamiltonian(const DiscretizedBath& bath, const ModelSpec& spec,
                                              const OracleBasis& basis) {
  spec.validate();
  if (bath.kind != spec.bath) throw invalid_argument("bath statistics differ between model and discretization");
  const bool fermion = spec.bath == BathKind::Fermion;
  const int modes = bath.modes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(basis.size() * static_cast<std::size_t>(modes + 1));

  for (std::size_t i = 0; i < basis.size(); ++i) {
    const int p = basis.probe(i);
    const auto& occ = basis.occupation(i);
    double e = p == 0 ? 0.5 * spec.delta : -0.5 * spec.delta;
    for (auto k : occ) e += bath.omega[k];
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), e);

    // Creation terms only; their conjugates fill the other triangle.
    // |+> --sigma_- c_k^dag (g_k)--> |->;  |-> --chi sigma_+ c_k^dag (chi g_k)--> |+>.
    const double weight = p == 0 ? 1.0 : spec.chi;
    if (weight == 0.0) continue;
    const int q = 1 - p;
    for (int k = 0; k < modes; ++k) {
      std::vector<std::uint16_t> next = occ;
      auto pos = std::lower_bound(next.begin(), next.end(), static_cast<std::uint16_t>(k));
      const auto before = pos - next.begin();
      double amp = bath.coupling[static_cast<std::size_t>(k)] * weight;
      if (fermion) {
        if (pos != next.end() && *pos == k) continue;
        if (before % 2) amp = -amp;
      } else {
        const auto n_k = std::upper_bound(next.begin(), next.end(), static_cast<std::uint16_t>(k)) - pos;
        amp *= std::sqrt(static_cast<double>(n_k + 1));
      }
      next.insert(pos, static_cast<std::uint16_t>(k));
      const std::ptrdiff_t j = basis.find(q, next);
      if (j < 0) continue;
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), amp);
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), amp);
    }
  }
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::SparseMatrix<double> h(n, n);
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

Eigen::VectorXcd oracle_initial_state(const OracleBasis& basis, double phi) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size()));
  const std::vector<std::uint16_t> vac;
  psi(basis.find(0, vac)) = std::cos(phi);
  psi(basis.find(1, vac)) = std::sin(phi);
  return psi;
}

DensityMatrix2 reduced_density(const OracleBasis& basis, const Eigen::VectorXcd& psi) {
  Mat2 m = Mat2::Zero();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const cplx a = psi(static_cast<Eigen::Index>(i));
    const int p = basis.probe(i);
    m(p, p) += std::norm(a);
    if (p == 0) {
      const std::ptrdiff_t j = basis.partner(i);
      if (j >= 0) m(0, 1) += a * std::conj(psi(j));
    }
  }
  m(1, 0) = std::conj(m(0, 1));
  return DensityMatrix2(m);
}

double excitation_number(const OracleBasis& basis, const Eigen::VectorXcd& psi) {
  double n = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i)
    n += basis.excitations(i) * std::norm(psi(static_cast<Eigen::Index>(i)));
  return n;
}

namespace {

Eigen::VectorXcd spmv(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXcd& v) {
  const Eigen::VectorXd re = h * v.real();
  const Eigen::VectorXd im = h * v.imag();
  Eigen::VectorXcd out(v.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

/// exp(-i H tau) psi by restarted Lanczos; the sub-step shrinks until the
/// a-posteriori error estimate is below tol.
void lanczos_step(const Eigen::SparseMatrix<double>& h, Eigen::VectorXcd& psi, double tau, int krylov = 30,
                  double tol = 1e-12) {
  double remaining = tau;
  while (remaining > 0.0) {
    const double nrm = psi.norm();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(krylov, psi.size()));
    std::vector<Eigen::VectorXcd> v;
    v.reserve(static_cast<std::size_t>(m_max));
    std::vector<double> alpha, beta;
    v.push_back(psi / nrm);
    double beta_last = 0.0;
    for (int j = 0; j < m_max; ++j) {
      Eigen::VectorXcd w = spmv(h, v[static_cast<std::size_t>(j)]);
      const double a = v[static_cast<std::size_t>(j)].dot(w).real();
      alpha.push_back(a);
      w -= a * v[static_cast<std::size_t>(j)];
      if (j > 0) w -= beta.back() * v[static_cast<std::size_t>(j - 1)];
      for (const auto& u : v) w -= u.dot(w) * u;  // full reorthogonalisation
      const double b = w.norm();
      if (j + 1 == m_max || b < 1e-13 * std::max(1.0, std::abs(a))) {
        beta_last = b;
        break;
      }
      beta.push_back(b);
      v.push_back(w / b);
    }
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) t(j, j) = alpha[static_cast<std::size_t>(j)];
    for (int j = 0; j + 1 < m; ++j) t(j, j + 1) = t(j + 1, j) = beta[static_cast<std::size_t>(j)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const Eigen::MatrixXd& q = es.eigenvectors();

    auto coeffs = [&](double dt) {
      Eigen::VectorXcd c(m);
      Eigen::VectorXcd phase(m);
      for (int k = 0; k < m; ++k) phase(k) = std::exp(cplx(0.0, -ev(k) * dt)) * q(0, k);
      for (int j = 0; j < m; ++j) {
        cplx s = 0.0;
        for (int k = 0; k < m; ++k) s += q(j, k) * phase(k);
        c(j) = s;
      }
      return c;
    };
    double dt = remaining;
    Eigen::VectorXcd c = coeffs(dt);
    while (beta_last * std::abs(c(m - 1)) > tol && dt > 1e-14 * tau) {
      dt *= 0.5;
      c = coeffs(dt);
    }
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(psi.size());
    for (int j = 0; j < m; ++j) next += c(j) * v[static_cast<std::size_t>(j)];
    psi = nrm * next;
    remaining -= dt;
    if (remaining < 1e-14 * tau) remaining = 0.0;
  }
}

}  // namespace

OracleRun exact_evolve(const ModelSpec& spec, const OracleConfig& cfg, const std::vector<double>& times) {
  spec.validate();
  const DiscretizedBath bath = DiscretizedBath::lorentzian(spec, cfg.modes, cfg.window);
  const int emax = cfg.resolved_excitations(spec.chi);
  const OracleBasis basis(cfg.modes, emax, spec.bath, cfg.max_dimension);
  const Eigen::SparseMatrix<double> h = build_hamiltonian(bath, spec, basis);

  OracleRun run;
  run.recurrence_time = bath.recurrence_time();
  run.trust_horizon = bath.trust_horizon();
  run.dimension = basis.size();
  double prev = 0.0;
  for (double t : times) {
    if (t < prev) throw invalid_argument("oracle sample times must be nondecreasing and nonnegative");
    if (t > run.recurrence_time)
      throw invalid_argument("oracle time " + fmt(t) + " lies beyond the recurrence horizon " +
                             fmt(run.recurrence_time));
    prev = t;
  }

  Eigen::VectorXcd psi = oracle_initial_state(basis, spec.phi);
  const bool dense = basis.size() <= cfg.dense_limit;
  Eigen::MatrixXd vecs;
  Eigen::VectorXd vals;
  Eigen::VectorXcd psi0_eig;
  if (dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
    vecs = es.eigenvectors();
    vals = es.eigenvalues();
    psi0_eig = vecs.transpose().cast<cplx>() * psi;
  }

  double t_cur = 0.0;
  for (double t : times) {
    if (dense) {
      Eigen::VectorXcd c(vals.size());
      for (Eigen::Index k = 0; k < vals.size(); ++k) c(k) = std::exp(cplx(0.0, -vals(k) * t)) * psi0_eig(k);
      psi = vecs.cast<cplx>() * c;
    } else if (t > t_cur) {
      lanczos_step(h, psi, t - t_cur);
    }
    t_cur = t;
    const double drift = std::abs(psi.squaredNorm() - 1.0);
    run.max_norm_drift = std::max(run.max_norm_drift, drift);
    if (drift > 1e-8) throw invariant_breach("oracle norm drift " + fmt(drift) + " at t = " + fmt(t));
    const DensityMatrix2 rho = reduced_density(basis, psi);
    check_density(rho, t);
    run.trajectory.times.push_back(t);
    run.trajectory.states.push_back(rho);
    run.excitations.push_back(excitation_number(basis, psi));
  }
  run.trajectory.metadata = {{"solver", "oracle"},
                             {"modes", std::to_string(cfg.modes)},
                             {"window", fmt(cfg.window)},
                             {"max_excitations", std::to_string(emax)},
                             {"dimension", std::to_string(basis.size())},
                             {"recurrence_time", fmt(run.recurrence_time)},
                             {"trust_horizon", fmt(run.trust_horizon)},
                             {"tail_mass_fraction", fmt(1.0 - bath.window_mass / bath.total_mass)},
                             {"discrete_mass_error", fmt(bath.discrete_mass() / bath.window_mass - 1.0)}};
  return run;
}

}  // namespace qprobe
