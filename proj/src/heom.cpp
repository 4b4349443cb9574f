#include "qprobe/heom.hpp"

#include "qprobe/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qprobe {

namespace {

double guard_rate(const ModelSpec& spec, int depth) {
  const auto [alpha, beta] = correlation_params(spec);
  return std::max({std::abs(beta), spec.delta, depth * std::sqrt(std::abs(alpha))});
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void pack(const HierarchyState& s, std::vector<cplx>& y) {
  y.resize(4 * s.blocks.size());
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    y[4 * b + 0] = s.blocks[b](0, 0);
    y[4 * b + 1] = s.blocks[b](0, 1);
    y[4 * b + 2] = s.blocks[b](1, 0);
    y[4 * b + 3] = s.blocks[b](1, 1);
  }
}

HierarchyState unpack(const std::vector<cplx>& y, int depth, double t) {
  HierarchyState s;
  s.depth = depth;
  s.t = t;
  s.blocks.resize(y.size() / 4);
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    s.blocks[b] << y[4 * b + 0], y[4 * b + 1], y[4 * b + 2], y[4 * b + 3];
  }
  return s;
}

HierarchyState rhs_for(const HierarchyState& state, const ModelSpec& spec, BathKind expected) {
  if (spec.bath != expected) throw invalid_argument("HEOM right-hand side called for the wrong bath kind");
  const HeomGenerator gen(spec, state.depth);
  std::vector<cplx> y;
  pack(state, y);
  std::vector<cplx> dy(y.size());
  gen.apply(y.data(), dy.data());
  return unpack(dy, state.depth, state.t);
}

}  // namespace

void HeomConfig::validate(const ModelSpec& spec) const {
  if (depth < 0) throw invalid_argument("HEOM depth must be >= 0");
  if (record_stride < 1) throw invalid_argument("record stride must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw invalid_argument("HEOM step must be > 0");
  const double g = dt * guard_rate(spec, depth);
  if (g > 0.1 * (1.0 + 1e-12)) {
    throw invalid_argument("HEOM step fails the stability guard: dt*max(|beta|, delta, N sqrt|alpha|) = " + fmt(g) +
                           " > 0.1");
  }
}

int default_depth(double gamma_cm1) { return gamma_cm1 <= 0.2 ? 20 : 30; }

double default_heom_dt(const ModelSpec& spec, int depth) {
  const auto [alpha, beta] = correlation_params(spec);
  double dt = std::min(0.01 / spec.delta, 0.01 / spec.lambda_width);
  const double na = depth * std::abs(alpha) * std::max(1.0, std::abs(beta));
  if (na > 0.0) dt = std::min(dt, 0.02 / std::sqrt(na));
  return std::min(dt, 0.1 / guard_rate(spec, depth));
}

HeomConfig resolved(const HeomConfig& cfg, const ModelSpec& spec) {
  HeomConfig out = cfg;
  if (!(out.dt > 0.0)) out.dt = default_heom_dt(spec, out.depth);
  return out;
}

double HierarchyState::cross_conjugacy_error() const {
  double e = 0.0;
  for (int level = 0; level <= depth; ++level)
    for (int m = 0; m <= level; ++m) {
      const int n = level - m;
      e = std::max(e, (at(n, m) - at(m, n).adjoint()).cwiseAbs().maxCoeff());
    }
  return e;
}

HierarchyState init_hierarchy(const DensityMatrix2& rho0, int depth) {
  if (depth < 0) throw invalid_argument("HEOM depth must be >= 0");
  HierarchyState s;
  s.depth = depth;
  s.blocks.assign(hierarchy_size(depth), Mat2::Zero());
  s.blocks[0] = rho0.m;
  return s;
}

CouplingOperator CouplingOperator::from_chi(double chi) {
  Mat2 l;
  l << 0.0, chi, 1.0, 0.0;
  return {l, l.adjoint()};
}

HierarchyState heom_rhs_boson(const HierarchyState& state, const ModelSpec& spec) {
  return rhs_for(state, spec, BathKind::Boson);
}

HierarchyState heom_rhs_fermion(const HierarchyState& state, const ModelSpec& spec) {
  return rhs_for(state, spec, BathKind::Fermion);
}

HeomGenerator::HeomGenerator(const ModelSpec& spec, int depth) : depth_(depth), chi_(spec.chi) {
  spec.validate();
  if (depth < 0) throw invalid_argument("HEOM depth must be >= 0");
  const auto [alpha, beta] = correlation_params(spec);
  const bool fermion = spec.bath == BathKind::Fermion;
  const double energy[2] = {0.5 * spec.delta, -0.5 * spec.delta};
  const cplx i(0.0, 1.0);

  links_.resize(hierarchy_size(depth));
  for (int level = 0; level <= depth; ++level) {
    for (int n = 0; n <= level; ++n) {
      const int m = level - n;
      Link& k = links_[hierarchy_index(m, n)];
      const cplx damp = -static_cast<double>(m) * beta - static_cast<double>(n) * std::conj(beta);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) k.diag[2 * a + b] = -i * (energy[a] - energy[b]) + damp;

      const double wm = fermion ? static_cast<double>(m % 2) : static_cast<double>(m);
      const double wn = fermion ? static_cast<double>(n % 2) : static_cast<double>(n);
      k.c_down_m = wm * alpha;
      k.c_down_n = wn * std::conj(alpha);
      k.down_m = (m > 0 && k.c_down_m != cplx(0.0)) ? static_cast<int>(hierarchy_index(m - 1, n)) : -1;
      k.down_n = (n > 0 && k.c_down_n != cplx(0.0)) ? static_cast<int>(hierarchy_index(m, n - 1)) : -1;
      k.up_m = level < depth ? static_cast<int>(hierarchy_index(m + 1, n)) : -1;
      k.up_n = level < depth ? static_cast<int>(hierarchy_index(m, n + 1)) : -1;
      k.sign_up_m = fermion && (n % 2) ? -1.0 : 1.0;
      k.sign_up_n = fermion && (m % 2) ? -1.0 : 1.0;
    }
  }
}

void HeomGenerator::apply(const cplx* in, cplx* out) const {
  std::vector<unsigned char> flags(links_.size());
  apply(in, out, flags.data());
}

void HeomGenerator::apply(const cplx* in, cplx* out, unsigned char* nonzero_) const {
  const cplx zero(0.0, 0.0);
  const std::size_t nb = links_.size();
  for (std::size_t b = 0; b < nb; ++b) {
    const cplx* x = in + 4 * b;
    nonzero_[b] = (x[0] != zero || x[1] != zero || x[2] != zero || x[3] != zero) ? 1 : 0;
  }
  const double chi = chi_;
  for (std::size_t b = 0; b < nb; ++b) {
    const Link& k = links_[b];
    const bool active = nonzero_[b] || (k.down_m >= 0 && nonzero_[k.down_m]) ||
                        (k.down_n >= 0 && nonzero_[k.down_n]) || (k.up_m >= 0 && nonzero_[k.up_m]) ||
                        (k.up_n >= 0 && nonzero_[k.up_n]);
    cplx* o = out + 4 * b;
    if (!active) {
      o[0] = o[1] = o[2] = o[3] = zero;
      continue;
    }
    const cplx* x = in + 4 * b;
    cplx r0 = k.diag[0] * x[0];
    cplx r1 = k.diag[1] * x[1];
    cplx r2 = k.diag[2] * x[2];
    cplx r3 = k.diag[3] * x[3];

    // L = [[0, chi], [1, 0]] in the {+,-} basis.
    if (k.down_m >= 0) {  // c * L rho^(m-1,n)
      const cplx* y = in + 4 * k.down_m;
      const cplx c = k.c_down_m;
      r0 += c * chi * y[2];
      r1 += c * chi * y[3];
      r2 += c * y[0];
      r3 += c * y[1];
    }
    if (k.down_n >= 0) {  // c * rho^(m,n-1) L^dagger
      const cplx* y = in + 4 * k.down_n;
      const cplx c = k.c_down_n;
      r0 += c * chi * y[1];
      r1 += c * y[0];
      r2 += c * chi * y[3];
      r3 += c * y[2];
    }
    if (k.up_m >= 0) {  // s * rho^(m+1,n) L^dagger - L^dagger rho^(m+1,n)
      const cplx* y = in + 4 * k.up_m;
      const double s = k.sign_up_m;
      r0 += s * chi * y[1] - y[2];
      r1 += s * y[0] - y[3];
      r2 += s * chi * y[3] - chi * y[0];
      r3 += s * y[2] - chi * y[1];
    }
    if (k.up_n >= 0) {  // s * L rho^(m,n+1) - rho^(m,n+1) L
      const cplx* y = in + 4 * k.up_n;
      const double s = k.sign_up_n;
      r0 += s * chi * y[2] - y[1];
      r1 += s * chi * y[3] - chi * y[0];
      r2 += s * y[0] - y[3];
      r3 += s * y[1] - chi * y[2];
    }
    o[0] = r0;
    o[1] = r1;
    o[2] = r2;
    o[3] = r3;
  }
}

HeomPropagator::HeomPropagator(const ModelSpec& spec, const HeomConfig& cfg, const DensityMatrix2& rho0) {
  const HeomConfig c = resolved(cfg, spec);
  c.validate(spec);
  gen_ = std::make_shared<const HeomGenerator>(spec, c.depth);
  dt_ = c.dt;
  pack(init_hierarchy(rho0, c.depth), y_);
}

void HeomPropagator::step(double h) {
  const std::size_t n = y_.size();
  Workspace& w = ws_;
  if (w.k1.size() != n) {
    for (auto* v : {&w.k1, &w.k2, &w.k3, &w.k4, &w.tmp}) v->assign(n, cplx(0.0));
    w.flags.assign(gen_->blocks(), 0);
  }
  unsigned char* f = w.flags.data();
  gen_->apply(y_.data(), w.k1.data(), f);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y_[i] + 0.5 * h * w.k1[i];
  gen_->apply(w.tmp.data(), w.k2.data(), f);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y_[i] + 0.5 * h * w.k2[i];
  gen_->apply(w.tmp.data(), w.k3.data(), f);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y_[i] + h * w.k3[i];
  gen_->apply(w.tmp.data(), w.k4.data(), f);
  const double c = h / 6.0;
  for (std::size_t i = 0; i < n; ++i) y_[i] += c * (w.k1[i] + 2.0 * (w.k2[i] + w.k3[i]) + w.k4[i]);
}

void HeomPropagator::advance_to(double t) {
  if (t < t_ - 1e-12 * std::max(1.0, std::abs(t_))) throw invalid_argument("HEOM propagator cannot run backwards");
  const double span = t - t_;
  if (span <= 0.0) return;
  const int steps = substeps_for(span, dt_);
  const double h = span / steps;
  for (int s = 0; s < steps; ++s) step(h);
  t_ = t;
}

DensityMatrix2 HeomPropagator::density() const {
  Mat2 m;
  m << y_[0], y_[1], y_[2], y_[3];
  return DensityMatrix2(m);
}

HierarchyState HeomPropagator::state() const { return unpack(y_, gen_->depth(), t_); }

Trajectory integrate(const DensityMatrix2& rho0, const ModelSpec& spec, const HeomConfig& cfg, double t_max) {
  const HeomConfig c = resolved(cfg, spec);
  if (!(t_max >= 0.0)) throw invalid_argument("t_max must be >= 0");
  HeomPropagator prop(spec, c, rho0);
  const double record_dt = c.dt * c.record_stride;
  const auto records = static_cast<long>(std::floor(t_max / record_dt + 1e-9));

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(records + 1));
  traj.states.reserve(static_cast<std::size_t>(records + 1));
  for (long j = 0; j <= records; ++j) {
    const double t = static_cast<double>(j) * record_dt;
    if (j > 0)
      for (int s = 0; s < c.record_stride; ++s) prop.step(c.dt);
    DensityMatrix2 rho = prop.density();
    check_density(rho, t);
    traj.times.push_back(t);
    traj.states.push_back(std::move(rho));
  }
  traj.metadata = {{"solver", "heom"},
                   {"depth", std::to_string(c.depth)},
                   {"dt", fmt(c.dt)},
                   {"record_stride", std::to_string(c.record_stride)}};
  return traj;
}

ConvergenceReport convergence_scan(const DensityMatrix2& rho0, const ModelSpec& spec, const HeomConfig& cfg,
                                   double t_max, const std::vector<int>& depths, double tolerance) {
  if (depths.empty()) throw invalid_argument("convergence_scan: no depths given");
  for (std::size_t i = 1; i < depths.size(); ++i)
    if (depths[i] <= depths[i - 1]) throw invalid_argument("convergence_scan: depths must be strictly increasing");

  ConvergenceReport rep;
  rep.depths = depths;
  rep.tolerance = tolerance;
  HeomConfig c = cfg;
  c.depth = depths.back();
  rep.dt = resolved(c, spec).dt;

  Trajectory previous;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    c.depth = depths[i];
    c.dt = rep.dt;
    Trajectory current = integrate(rho0, spec, c, t_max);
    if (i > 0) {
      const double d = sup_norm_distance(previous, current);
      rep.deviations.push_back(d);
      if (d < tolerance && rep.converged_depth < 0) rep.converged_depth = depths[i];
    }
    previous = std::move(current);
  }
  rep.converged = depths.size() == 1 ? false : rep.deviations.back() < tolerance;
  return rep;
}

}  // namespace qprobe
