#pragma once

// Benchmark solvers: the exact rotating-wave (chi = 0) solution and the
// Born-level Nakajima-Zwanzig Bloch equation for chi = 1.

#include "qprobe/model.hpp"
#include "qprobe/trajectory.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace qprobe {

/// Which frequency enters the decoherence factor.
///  Standard: Omega = sqrt(lambda^2 - 2 gamma lambda) (damped Jaynes-Cummings).
///  Printed:  Omega = sqrt(gamma^2 - 2 gamma lambda).
/// Standard is the default: it is the variant that reproduces the chi = 0 hierarchy.
enum class OmegaVariant { Standard, Printed };

OmegaVariant parse_omega_variant(std::string_view text);
std::string_view to_string(OmegaVariant v);

/// Omega^2 for the chosen variant.
double rwa_omega_squared(double gamma, double lambda, OmegaVariant variant = OmegaVariant::Standard);

/// G_t = exp(-lambda t/2) [cosh(Omega t/2) + (lambda/Omega) sinh(Omega t/2)], evaluated
/// through its real trigonometric form for Omega^2 < 0 and continuously across Omega = 0.
double rwa_decoherence_factor(double t, double gamma, double lambda,
                              OmegaVariant variant = OmegaVariant::Standard);

/// Exact chi = 0 reduced state; chi in `spec` is ignored.
DensityMatrix2 rwa_density(double t, const DensityMatrix2& rho0, const ModelSpec& spec,
                           OmegaVariant variant = OmegaVariant::Standard);

struct FisherPair {
  double cfi = 0.0;
  double qfi = 0.0;
};

/// Closed-form CFI (z measurement) and QFI for phi = pi/4.
FisherPair rwa_fisher(double t, const ModelSpec& spec, OmegaVariant variant = OmegaVariant::Standard);

class RwaPropagator final : public Propagator {
 public:
  RwaPropagator(const ModelSpec& spec, const DensityMatrix2& rho0, OmegaVariant variant);

  double time() const override { return t_; }
  void advance_to(double t) override;
  DensityMatrix2 density() const override { return rwa_density(t_, rho0_, spec_, variant_); }
  std::unique_ptr<Propagator> clone() const override { return std::make_unique<RwaPropagator>(*this); }

 private:
  ModelSpec spec_;
  DensityMatrix2 rho0_;
  OmegaVariant variant_;
  double t_ = 0.0;
};

/// Real: kernels built from kappa(t) = Re C(t). Complex: the complex C(t) on a complexified Bloch vector.
enum class NzKernelMode { Real, Complex };

NzKernelMode parse_nz_kernel(std::string_view text);
std::string_view to_string(NzKernelMode m);

/// Memory kernels A(t) = 4 cos(delta t) kappa(t), B(t) = 4 kappa(t), each held as
/// sum_j w_j exp(-s_j t) (real part taken in Real mode).
struct NzKernels {
  struct Term {
    cplx weight;
    cplx rate;
  };
  std::vector<Term> a_terms;
  std::vector<Term> b_terms;
  NzKernelMode mode = NzKernelMode::Real;

  static NzKernels from(const ModelSpec& spec, NzKernelMode mode = NzKernelMode::Real);

  cplx a(double t) const;
  cplx b(double t) const;
  /// Laplace transforms at complex frequency zeta.
  cplx a_laplace(cplx zeta) const;
  cplx b_laplace(cplx zeta) const;
};

/// Default NZ step: min(0.01/delta, 0.01/lambda) clamped to dt*max(|beta|, delta) <= 0.1.
double default_nz_dt(const ModelSpec& spec);

/// Bloch-vector NZ equation with the exponential convolutions embedded as
/// auxiliary linear variables, integrated by RK4 at a fixed step.
class NzPropagator final : public Propagator {
 public:
  NzPropagator(const ModelSpec& spec, const BlochVector& r0, double dt, NzKernelMode mode = NzKernelMode::Real);

  double time() const override { return t_; }
  void advance_to(double t) override;
  DensityMatrix2 density() const override { return density_from_bloch(bloch()); }
  BlochVector bloch() const override;
  std::unique_ptr<Propagator> clone() const override { return std::make_unique<NzPropagator>(*this); }

  double dt() const { return dt_; }
  void step(double h);

 private:
  using State = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
  State rhs(const State& y) const;

  NzKernels kernels_;
  double delta_;
  double dt_;
  double t_ = 0.0;
  State y_;
};

/// Requires a bosonic bath and chi = 1; samples every `stride` steps up to t_max.
BlochTrajectory nz_integrate(const BlochVector& r0, const ModelSpec& spec, double dt, double t_max, int stride = 1,
                             NzKernelMode mode = NzKernelMode::Real);

/// Laplace-domain propagator F(zeta) with r~(zeta) = F(zeta) r(0). Rejects zeta on the
/// closed negative real axis.
Eigen::Matrix3cd nz_laplace_transfer(cplx zeta, const ModelSpec& spec, NzKernelMode mode = NzKernelMode::Real);

/// Fixed-Talbot numerical inverse Laplace transform of a real-valued function.
double talbot_inverse(const std::function<cplx(cplx)>& transform, double t, int nodes = 32);

/// Bloch vector at time t obtained by Talbot inversion of F(zeta) r0.
BlochVector nz_laplace_bloch(const BlochVector& r0, const ModelSpec& spec, double t, int nodes = 32);

}  // namespace qprobe
