#pragma once

// Probe/bath model shared by every solver.
//
// Conventions: the probe Hamiltonian is H_s = (delta/2) sigma_x and all 2x2
// operators are stored in the {|+>, |->} eigenbasis of sigma_x (index 0 = |+>).
// Bloch components are ordinary Pauli expectation values in the sigma_z
// eigenbasis {|e>, |g>}, with |+-> = (|e> +- |g>)/sqrt(2).

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <string_view>

namespace qprobe {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;

/// Number of repeated measurements in the Cramer-Rao bound. Fixed; nothing scales by it.
inline constexpr int kMeasurementRepetitions = 1;

enum class BathKind { Boson, Fermion };

std::string_view to_string(BathKind kind);
BathKind parse_bath_kind(std::string_view text);

/// Conversion factors into the internal unit (angular ps^-1).
struct UnitSystem {
  /// 2*pi*c*(1 cm^-1) with c = 2.99792458e10 cm/s.
  static constexpr double kCm1Angular = 2.0 * kPi * 2.99792458e10 * 1e-12;

  double cm1_to_internal = kCm1Angular;
  /// By default a "THz" number sits on the same scale as a cm^-1 number
  /// (this reproduces the published Fisher tables); 1 for 1e12 rad/s, 2*pi for 1e12 Hz.
  double thz_to_internal = kCm1Angular;

  static UnitSystem wavenumber_thz() { return {}; }
  static UnitSystem angular_thz() { return {kCm1Angular, 1.0}; }
  static UnitSystem linear_thz() { return {kCm1Angular, 2.0 * kPi}; }
  /// "wavenumber" | "angular" | "linear"
  static UnitSystem from_convention(std::string_view name);

  void validate() const;
};

enum class Unit { Cm1, THz, Internal };

Unit parse_unit(std::string_view tag);
double convert_units(double value, Unit from, const UnitSystem& sys);
double convert_units(double value, std::string_view from, const UnitSystem& sys);
double convert_from_internal(double value, Unit to, const UnitSystem& sys);

/// Physical parameters, all rates in internal units.
struct ModelSpec {
  double delta = 1.0;
  double chi = 0.0;
  BathKind bath = BathKind::Boson;
  double gamma = 0.0;
  double lambda_width = 1.0;
  double phi = kPi / 4.0;

  void validate() const;
  ModelSpec with_delta(double d) const {
    ModelSpec s = *this;
    s.delta = d;
    return s;
  }
};

/// C(t) = alpha * exp(-beta t).
struct CorrelationParams {
  cplx alpha;
  cplx beta;
};

CorrelationParams correlation_params(const ModelSpec& spec);

/// Lorentzian J(w) = (1/2pi) gamma lambda^2 / ((w - delta)^2 + lambda^2).
double spectral_density(double omega, const ModelSpec& spec);

/// Bath correlation function for t >= 0; throws for negative t.
cplx correlation_function(double t, const ModelSpec& spec);

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm2() const { return x * x + y * y + z * z; }
  double dot(const BlochVector& o) const { return x * o.x + y * o.y + z * o.z; }
};

/// Reduced probe state in the {|+>, |->} basis.
struct DensityMatrix2 {
  Mat2 m = Mat2::Zero();

  DensityMatrix2() = default;
  explicit DensityMatrix2(const Mat2& mat) : m(mat) {}

  cplx operator()(int i, int j) const { return m(i, j); }
  double trace() const { return m.trace().real(); }
  double purity() const { return (m * m).trace().real(); }
  /// max |m(i,j) - conj(m(j,i))|
  double hermiticity_error() const;
  double min_eigenvalue() const;
};

/// Thresholds applied when a solver hands back a reduced state.
struct StateTolerances {
  double hermiticity = 1e-6;
  double trace = 1e-6;
  double negativity = 1e-6;
};

/// Throws Error(Invariant) naming the violated property and the time.
void check_density(const DensityMatrix2& rho, double t, const StateTolerances& tol = {});

DensityMatrix2 initial_density(double phi);

/// Throws for non-Hermitian input (1e-8).
BlochVector bloch_from_density(const DensityMatrix2& rho);
DensityMatrix2 density_from_bloch(const BlochVector& r);

/// Pauli matrices expressed in the {|+>, |->} basis.
Mat2 pauli_x();
Mat2 pauli_y();
Mat2 pauli_z();

/// Two-outcome projective measurement {|e><e|, |g><g|}.
struct MeasurementScheme {
  Mat2 excited;
  Mat2 ground;

  static MeasurementScheme z_basis();
  /// Outcome probabilities (p_e, p_g).
  std::pair<double, double> probabilities(const DensityMatrix2& rho) const;
};

}  // namespace qprobe
