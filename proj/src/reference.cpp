#include "qprobe/reference.hpp"

#include "qprobe/error.hpp"

#include <cmath>

namespace qprobe {

namespace {

// sinh(x)/x and sin(x)/x without cancellation near zero.
double sinhc(double x) { return std::abs(x) < 1e-4 ? 1.0 + x * x / 6.0 : std::sinh(x) / x; }
double sinc(double x) { return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

}  // namespace

OmegaVariant parse_omega_variant(std::string_view text) {
  if (text == "standard") return OmegaVariant::Standard;
  if (text == "printed") return OmegaVariant::Printed;
  throw invalid_argument("unknown rwa variant '" + std::string(text) + "' (expected standard|printed)");
}

std::string_view to_string(OmegaVariant v) { return v == OmegaVariant::Standard ? "standard" : "printed"; }

double rwa_omega_squared(double gamma, double lambda, OmegaVariant variant) {
  return variant == OmegaVariant::Standard ? lambda * lambda - 2.0 * gamma * lambda
                                           : gamma * gamma - 2.0 * gamma * lambda;
}

double rwa_decoherence_factor(double t, double gamma, double lambda, OmegaVariant variant) {
  if (t < 0.0) throw invalid_argument("rwa_decoherence_factor: negative time");
  const double omega2 = rwa_omega_squared(gamma, lambda, variant);
  const double half_lt = 0.5 * lambda * t;
  if (omega2 >= 0.0) {
    const double omega = std::sqrt(omega2);
    const double x = 0.5 * omega * t;
    if (x > 1.0) {
      // Split into growing and decaying exponentials to avoid overflow.
      const double ratio = lambda / omega;
      return 0.5 * std::exp(x - half_lt) * (1.0 + ratio) + 0.5 * std::exp(-x - half_lt) * (1.0 - ratio);
    }
    return std::exp(-half_lt) * (std::cosh(x) + half_lt * sinhc(x));
  }
  const double x = 0.5 * std::sqrt(-omega2) * t;
  return std::exp(-half_lt) * (std::cos(x) + half_lt * sinc(x));
}

DensityMatrix2 rwa_density(double t, const DensityMatrix2& rho0, const ModelSpec& spec, OmegaVariant variant) {
  const double g = rwa_decoherence_factor(t, spec.gamma, spec.lambda_width, variant);
  const cplx phase = std::polar(1.0, -spec.delta * t);
  const cplx pp = rho0(0, 0) * (g * g);
  const cplx pm = rho0(0, 1) * g * phase;
  Mat2 m;
  m << pp, pm, std::conj(pm), 1.0 - pp;
  return DensityMatrix2(m);
}

FisherPair rwa_fisher(double t, const ModelSpec& spec, OmegaVariant variant) {
  if (std::abs(spec.phi - kPi / 4.0) > 1e-12) throw invalid_argument("rwa_fisher requires phi = pi/4");
  if (t < 0.0) throw invalid_argument("rwa_fisher: negative time");
  const double g = rwa_decoherence_factor(t, spec.gamma, spec.lambda_width, variant);
  const double g2 = g * g;
  const double s = std::sin(spec.delta * t);
  const double c = std::cos(spec.delta * t);
  const double qfi = t * t * g2;
  const double num = qfi * s * s;
  const double den = 1.0 - g2 * c * c;
  double cfi = 0.0;
  if (num == 0.0) {
    cfi = 0.0;
  } else if (den <= 0.0) {
    cfi = qfi;  // G = 1: the removable singularity takes the noiseless value
  } else {
    cfi = num / den;
  }
  return {cfi, qfi};
}

RwaPropagator::RwaPropagator(const ModelSpec& spec, const DensityMatrix2& rho0, OmegaVariant variant)
    : spec_(spec), rho0_(rho0), variant_(variant) {
  spec_.validate();
}

void RwaPropagator::advance_to(double t) {
  if (t < t_) throw invalid_argument("RWA propagator cannot run backwards");
  t_ = t;
}

NzKernelMode parse_nz_kernel(std::string_view text) {
  if (text == "real") return NzKernelMode::Real;
  if (text == "complex") return NzKernelMode::Complex;
  throw invalid_argument("unknown nz kernel '" + std::string(text) + "' (expected real|complex)");
}

std::string_view to_string(NzKernelMode m) { return m == NzKernelMode::Real ? "real" : "complex"; }

NzKernels NzKernels::from(const ModelSpec& spec, NzKernelMode mode) {
  // A = 4 cos(delta t) C(t) = gamma lambda e^{-lambda t} (1 + e^{-2 i delta t}),
  // B = 4 C(t) = 2 gamma lambda e^{-(lambda + i delta) t}; Re() of these gives the kappa kernels.
  const double gl = spec.gamma * spec.lambda_width;
  const double lam = spec.lambda_width;
  NzKernels k;
  k.mode = mode;
  k.a_terms = {{cplx(gl), cplx(lam)}, {cplx(gl), cplx(lam, 2.0 * spec.delta)}};
  k.b_terms = {{cplx(2.0 * gl), cplx(lam, spec.delta)}};
  return k;
}

namespace {

cplx eval_terms(const std::vector<NzKernels::Term>& terms, double t, NzKernelMode mode) {
  cplx s(0.0);
  for (const auto& term : terms) s += term.weight * std::exp(-term.rate * t);
  return mode == NzKernelMode::Real ? cplx(s.real()) : s;
}

cplx laplace_terms(const std::vector<NzKernels::Term>& terms, cplx zeta, NzKernelMode mode) {
  cplx s(0.0);
  for (const auto& term : terms) {
    if (mode == NzKernelMode::Real)
      s += 0.5 * (term.weight / (zeta + term.rate) + std::conj(term.weight) / (zeta + std::conj(term.rate)));
    else
      s += term.weight / (zeta + term.rate);
  }
  return s;
}

}  // namespace

cplx NzKernels::a(double t) const { return eval_terms(a_terms, t, mode); }
cplx NzKernels::b(double t) const { return eval_terms(b_terms, t, mode); }
cplx NzKernels::a_laplace(cplx zeta) const { return laplace_terms(a_terms, zeta, mode); }
cplx NzKernels::b_laplace(cplx zeta) const { return laplace_terms(b_terms, zeta, mode); }

double default_nz_dt(const ModelSpec& spec) {
  const double dt = std::min(0.01 / spec.delta, 0.01 / spec.lambda_width);
  const double rate = std::max(std::abs(correlation_params(spec).beta), spec.delta);
  return std::min(dt, 0.1 / rate);
}

NzPropagator::NzPropagator(const ModelSpec& spec, const BlochVector& r0, double dt, NzKernelMode mode)
    : kernels_(NzKernels::from(spec, mode)), delta_(spec.delta), dt_(dt) {
  spec.validate();
  if (!(dt > 0.0)) throw invalid_argument("NZ step must be > 0");
  const double rate = std::max(std::abs(correlation_params(spec).beta), spec.delta);
  if (dt * rate > 0.1 * (1.0 + 1e-12)) throw invalid_argument("NZ step fails the stability guard dt*max(|beta|, delta) <= 0.1");
  y_ = State::Zero(static_cast<Eigen::Index>(3 + kernels_.a_terms.size() + kernels_.b_terms.size()));
  y_(0) = r0.x;
  y_(1) = r0.y;
  y_(2) = r0.z;
}

NzPropagator::State NzPropagator::rhs(const State& y) const {
  const auto na = static_cast<Eigen::Index>(kernels_.a_terms.size());
  const auto nb = static_cast<Eigen::Index>(kernels_.b_terms.size());
  cplx conv_x(0.0), conv_y(0.0);
  for (Eigen::Index j = 0; j < na; ++j) conv_x += kernels_.a_terms[static_cast<std::size_t>(j)].weight * y(3 + j);
  for (Eigen::Index j = 0; j < nb; ++j) conv_y += kernels_.b_terms[static_cast<std::size_t>(j)].weight * y(3 + na + j);
  if (kernels_.mode == NzKernelMode::Real) {
    conv_x = conv_x.real();
    conv_y = conv_y.real();
  }
  State d(y.size());
  d(0) = -conv_x;
  d(1) = -conv_y - delta_ * y(2);
  d(2) = delta_ * y(1);
  for (Eigen::Index j = 0; j < na; ++j) d(3 + j) = y(0) - kernels_.a_terms[static_cast<std::size_t>(j)].rate * y(3 + j);
  for (Eigen::Index j = 0; j < nb; ++j)
    d(3 + na + j) = y(1) - kernels_.b_terms[static_cast<std::size_t>(j)].rate * y(3 + na + j);
  return d;
}

void NzPropagator::step(double h) {
  const State k1 = rhs(y_);
  const State k2 = rhs(y_ + 0.5 * h * k1);
  const State k3 = rhs(y_ + 0.5 * h * k2);
  const State k4 = rhs(y_ + h * k3);
  y_ += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void NzPropagator::advance_to(double t) {
  if (t < t_ - 1e-12 * std::max(1.0, std::abs(t_))) throw invalid_argument("NZ propagator cannot run backwards");
  const double span = t - t_;
  if (span <= 0.0) return;
  const int steps = substeps_for(span, dt_);
  const double h = span / steps;
  for (int s = 0; s < steps; ++s) step(h);
  t_ = t;
}

BlochVector NzPropagator::bloch() const { return {y_(0).real(), y_(1).real(), y_(2).real()}; }

BlochTrajectory nz_integrate(const BlochVector& r0, const ModelSpec& spec, double dt, double t_max, int stride,
                             NzKernelMode mode) {
  if (spec.bath != BathKind::Boson) throw invalid_argument("nz_integrate requires a bosonic bath");
  if (std::abs(spec.chi - 1.0) > 1e-12) throw invalid_argument("nz_integrate requires chi = 1");
  if (stride < 1) throw invalid_argument("stride must be >= 1");
  NzPropagator prop(spec, r0, dt, mode);
  const double record_dt = dt * stride;
  const auto records = static_cast<long>(std::floor(t_max / record_dt + 1e-9));
  BlochTrajectory out;
  for (long j = 0; j <= records; ++j) {
    if (j > 0)
      for (int s = 0; s < stride; ++s) prop.step(dt);
    out.times.push_back(static_cast<double>(j) * record_dt);
    out.r.push_back(prop.bloch());
  }
  return out;
}

Eigen::Matrix3cd nz_laplace_transfer(cplx zeta, const ModelSpec& spec, NzKernelMode mode) {
  if (zeta.imag() == 0.0 && zeta.real() <= 0.0) throw invalid_argument("nz_laplace_transfer: zeta on the negative real axis");
  const NzKernels k = NzKernels::from(spec, mode);
  const cplx at = k.a_laplace(zeta);
  const cplx bt = k.b_laplace(zeta);
  const double d = spec.delta;
  const cplx fyy = 1.0 / (zeta + bt + d * d / zeta);
  Eigen::Matrix3cd f = Eigen::Matrix3cd::Zero();
  f(0, 0) = 1.0 / (zeta + at);
  f(1, 1) = fyy;
  f(2, 2) = (1.0 + bt / zeta) * fyy;
  f(1, 2) = -d / zeta * fyy;
  f(2, 1) = d / zeta * fyy;
  return f;
}

double talbot_inverse(const std::function<cplx(cplx)>& transform, double t, int nodes) {
  if (!(t > 0.0)) throw invalid_argument("talbot_inverse: t must be > 0");
  if (nodes < 2) throw invalid_argument("talbot_inverse: need at least two nodes");
  const double r = 2.0 * nodes / (5.0 * t);
  double sum = 0.5 * (transform(cplx(r)) * std::exp(r * t)).real();
  for (int k = 1; k < nodes; ++k) {
    const double theta = k * kPi / nodes;
    const double cot = std::cos(theta) / std::sin(theta);
    const cplx s(r * theta * cot, r * theta);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    sum += (std::exp(t * s) * transform(s) * cplx(1.0, sigma)).real();
  }
  return r / nodes * sum;
}

BlochVector nz_laplace_bloch(const BlochVector& r0, const ModelSpec& spec, double t, int nodes) {
  const Eigen::Vector3cd v0(r0.x, r0.y, r0.z);
  double out[3];
  for (int i = 0; i < 3; ++i) {
    out[i] = talbot_inverse([&](cplx z) { return (nz_laplace_transfer(z, spec).row(i) * v0)(0); }, t, nodes);
  }
  return {out[0], out[1], out[2]};
}

}  // namespace qprobe
