#include "qprobe/model.hpp"

#include "qprobe/error.hpp"

#include <cmath>
#include <sstream>

namespace qprobe {

std::string_view to_string(BathKind kind) { return kind == BathKind::Boson ? "boson" : "fermion"; }

BathKind parse_bath_kind(std::string_view text) {
  if (text == "boson" || text == "B") return BathKind::Boson;
  if (text == "fermion" || text == "F") return BathKind::Fermion;
  throw invalid_argument("unknown bath kind '" + std::string(text) + "' (expected boson|fermion)");
}

void UnitSystem::validate() const {
  if (!(cm1_to_internal > 0.0) || !(thz_to_internal > 0.0) || !std::isfinite(cm1_to_internal) ||
      !std::isfinite(thz_to_internal)) {
    throw invalid_argument("unit conversion factors must be finite and strictly positive");
  }
}

UnitSystem UnitSystem::from_convention(std::string_view name) {
  if (name == "wavenumber") return wavenumber_thz();
  if (name == "angular") return angular_thz();
  if (name == "linear") return linear_thz();
  throw invalid_argument("unknown THz convention '" + std::string(name) + "' (expected wavenumber|angular|linear)");
}

Unit parse_unit(std::string_view tag) {
  if (tag == "cm-1" || tag == "cm1" || tag == "cm^-1") return Unit::Cm1;
  if (tag == "THz" || tag == "thz") return Unit::THz;
  if (tag == "internal" || tag == "ps-1") return Unit::Internal;
  throw invalid_argument("unknown unit tag '" + std::string(tag) + "'");
}

double convert_units(double value, Unit from, const UnitSystem& sys) {
  switch (from) {
    case Unit::Cm1: return value * sys.cm1_to_internal;
    case Unit::THz: return value * sys.thz_to_internal;
    case Unit::Internal: return value;
  }
  return value;
}

double convert_units(double value, std::string_view from, const UnitSystem& sys) {
  return convert_units(value, parse_unit(from), sys);
}

double convert_from_internal(double value, Unit to, const UnitSystem& sys) {
  switch (to) {
    case Unit::Cm1: return value / sys.cm1_to_internal;
    case Unit::THz: return value / sys.thz_to_internal;
    case Unit::Internal: return value;
  }
  return value;
}

void ModelSpec::validate() const {
  std::ostringstream err;
  if (!(chi >= 0.0 && chi <= 1.0)) err << "chi must lie in [0,1] (got " << chi << "); ";
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) err << "gamma must be >= 0 (got " << gamma << "); ";
  if (!(lambda_width > 0.0) || !std::isfinite(lambda_width))
    err << "lambda must be > 0 (got " << lambda_width << "); ";
  if (!(delta > 0.0) || !std::isfinite(delta)) err << "delta must be > 0 (got " << delta << "); ";
  if (!std::isfinite(phi)) err << "phi must be finite; ";
  const std::string msg = err.str();
  if (!msg.empty()) throw invalid_argument("invalid model: " + msg.substr(0, msg.size() - 2));
}

CorrelationParams correlation_params(const ModelSpec& spec) {
  return {cplx(0.5 * spec.gamma * spec.lambda_width, 0.0), cplx(spec.lambda_width, spec.delta)};
}

double spectral_density(double omega, const ModelSpec& spec) {
  const double lam = spec.lambda_width;
  const double d = omega - spec.delta;
  return spec.gamma * lam * lam / (2.0 * kPi * (d * d + lam * lam));
}

cplx correlation_function(double t, const ModelSpec& spec) {
  if (t < 0.0) throw invalid_argument("correlation_function: negative time");
  const auto [alpha, beta] = correlation_params(spec);
  return alpha * std::exp(-beta * t);
}

double DensityMatrix2::hermiticity_error() const {
  double e = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) e = std::max(e, std::abs(m(i, j) - std::conj(m(j, i))));
  return e;
}

double DensityMatrix2::min_eigenvalue() const {
  // Eigenvalues of the Hermitian part: tr/2 -+ sqrt(((a-d)/2)^2 + |b|^2).
  const double a = m(0, 0).real();
  const double d = m(1, 1).real();
  const cplx b = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
  const double half = 0.5 * (a - d);
  return 0.5 * (a + d) - std::sqrt(half * half + std::norm(b));
}

void check_density(const DensityMatrix2& rho, double t, const StateTolerances& tol) {
  std::ostringstream msg;
  msg.precision(12);
  if (!rho.m.allFinite()) {
    msg << "non-finite reduced state at t=" << t;
    throw invariant_breach(msg.str());
  }
  if (const double h = rho.hermiticity_error(); h > tol.hermiticity) {
    msg << "hermiticity violated at t=" << t << " (error " << h << ")";
    throw invariant_breach(msg.str());
  }
  if (const double tr = std::abs(rho.trace() - 1.0); tr > tol.trace) {
    msg << "trace drift at t=" << t << " (|tr-1| = " << tr << ")";
    throw invariant_breach(msg.str());
  }
  if (const double ev = rho.min_eigenvalue(); ev < -tol.negativity) {
    msg << "positivity violated at t=" << t << " (min eigenvalue " << ev << ")";
    throw invariant_breach(msg.str());
  }
}

DensityMatrix2 initial_density(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Mat2 m;
  m << c * c, c * s, c * s, s * s;
  return DensityMatrix2(m);
}

Mat2 pauli_x() {
  Mat2 m;
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

Mat2 pauli_y() {
  const cplx i(0.0, 1.0);
  Mat2 m;
  m << 0.0, i, -i, 0.0;
  return m;
}

Mat2 pauli_z() {
  Mat2 m;
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

BlochVector bloch_from_density(const DensityMatrix2& rho) {
  if (rho.hermiticity_error() > 1e-8) throw invalid_argument("bloch_from_density: matrix is not Hermitian");
  const cplx coherence = rho(0, 1);
  return {rho(0, 0).real() - rho(1, 1).real(), 2.0 * coherence.imag(), 2.0 * coherence.real()};
}

DensityMatrix2 density_from_bloch(const BlochVector& r) {
  // rho = (1 + r.sigma)/2 with the Pauli matrices written in the +- basis.
  const cplx coherence(0.5 * r.z, 0.5 * r.y);
  Mat2 m;
  m << 0.5 * (1.0 + r.x), coherence, std::conj(coherence), 0.5 * (1.0 - r.x);
  return DensityMatrix2(m);
}

MeasurementScheme MeasurementScheme::z_basis() {
  Mat2 e;
  e << 0.5, 0.5, 0.5, 0.5;
  Mat2 g;
  g << 0.5, -0.5, -0.5, 0.5;
  return {e, g};
}

std::pair<double, double> MeasurementScheme::probabilities(const DensityMatrix2& rho) const {
  return {(excited * rho.m).trace().real(), (ground * rho.m).trace().real()};
}

}  // namespace qprobe
