#pragma once

// Classical and quantum Fisher information of the probe with respect to delta.
//
// Derivatives come from four extra solver runs at delta +- step, delta +- 2 step
// (the Lorentzian centre moves with delta), combined by the five-point stencil.

#include "qprobe/model.hpp"
#include "qprobe/reference.hpp"
#include "qprobe/trajectory.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace qprobe {

enum class SolverKind { Heom, Nz, Rwa };

SolverKind parse_solver_kind(std::string_view text);
std::string_view to_string(SolverKind kind);

struct SolverSettings {
  SolverKind kind = SolverKind::Heom;
  int depth = 20;
  /// <= 0 selects the solver default for the model.
  double dt = 0.0;
  OmegaVariant rwa_variant = OmegaVariant::Standard;
  NzKernelMode nz_kernel = NzKernelMode::Real;
};

/// Step the solver will use for `spec` (0 for the closed-form RWA solver).
double resolved_step(const ModelSpec& spec, const SolverSettings& settings);

std::unique_ptr<Propagator> make_propagator(const ModelSpec& spec, const SolverSettings& settings,
                                            const DensityMatrix2& rho0);

struct DerivativeConfig {
  /// step / delta
  double relative_step = 1e-6;

  void validate() const;
};

/// (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / (12 h); h = 0 is rejected.
double five_point_derivative(double f_minus2, double f_minus1, double f_plus1, double f_plus2, double step);

template <class F>
double five_point_derivative(F&& f, double x, double step) {
  return five_point_derivative(f(x - 2.0 * step), f(x - step), f(x + step), f(x + 2.0 * step), step);
}

/// |dr|^2 + (r.dr)^2 / (1 - |r|^2); the pure-state form is used once 1 - |r|^2 < 1e-10.
/// Rejects |r| > 1 + 1e-8.
double qfi_from_bloch(const BlochVector& r, const BlochVector& dr);

/// Same quantity with r.dr = -dm/2, m = 1 - |r|^2 = 4 det(rho) differentiated directly.
/// Stays accurate for nearly pure states, where r.dr is below the stencil noise.
double qfi_from_mixedness(const BlochVector& dr, double mixedness, double dmixedness);

/// 4 det(rho), i.e. 1 - |r|^2 for unit trace.
double mixedness(const DensityMatrix2& rho);

struct CfiValue {
  double value = 0.0;
  /// Denominator 1 - r_z^2 was floored at 1e-12.
  bool floored = false;
};

/// Fisher information of the {|e>,|g>} measurement: (d r_z)^2 / (1 - r_z^2).
CfiValue cfi_z_measurement(const BlochVector& r, const BlochVector& dr);

enum SampleFlag : unsigned { kCfiFloored = 1u };

struct FisherSample {
  double t = 0.0;
  BlochVector r;
  BlochVector dr;
  double cfi = 0.0;
  double qfi = 0.0;
  unsigned flags = 0;
};

struct FisherSeries {
  std::vector<double> times;
  std::vector<double> cfi;
  std::vector<double> qfi;
  std::vector<unsigned> flags;
  Metadata metadata;

  std::size_t size() const { return times.size(); }
};

/// Five propagators at delta + k*step, k = -2..2, advanced in lockstep.
class ShiftedEnsemble {
 public:
  ShiftedEnsemble(const ModelSpec& spec, const SolverSettings& settings, const DerivativeConfig& deriv);
  ShiftedEnsemble(const ShiftedEnsemble& other);
  ShiftedEnsemble& operator=(const ShiftedEnsemble& other);
  ShiftedEnsemble(ShiftedEnsemble&&) noexcept = default;
  ShiftedEnsemble& operator=(ShiftedEnsemble&&) noexcept = default;

  double time() const { return props_[2]->time(); }
  void advance_to(double t);
  FisherSample sample() const;

 private:
  std::array<std::unique_ptr<Propagator>, 5> props_;
  double step_ = 0.0;
};

FisherSeries fisher_series(const ModelSpec& spec, const SolverSettings& settings, const TimeGrid& grid,
                           const DerivativeConfig& deriv = {});

struct TimeOptimum {
  double t = 0.0;
  double value = 0.0;
  /// The maximum sits on the last grid time.
  bool boundary = false;
};

/// Grid argmax (ties to the earlier time), then golden-section refinement on
/// [t_{i-1}, t_{i+1}] through `evaluate` until the bracket is below rel_tol * t.
/// The refined point is kept only if it beats the grid value.
TimeOptimum max_over_time(std::span<const double> times, std::span<const double> values,
                          const std::function<double(double)>& evaluate = {}, double rel_tol = 1e-4);

struct FisherResult {
  FisherSeries series;
  TimeOptimum cfi_max;
  TimeOptimum qfi_max;
};

/// Series plus refined optima; refinement re-runs the solver from a snapshot
/// taken at the left edge of the bracket.
FisherResult optimize_fisher(const ModelSpec& spec, const SolverSettings& settings, const TimeGrid& grid,
                             const DerivativeConfig& deriv = {}, double rel_tol = 1e-4);

/// Comparison of a run against its chi = 0 counterpart.
struct MetricReport {
  ModelSpec spec;
  TimeOptimum max_fq;
  TimeOptimum max_fc;
  TimeOptimum rwa_fq;
  TimeOptimum rwa_fc;
  /// max F(run) - max F(chi = 0)
  double delta_fq = 0.0;
  double delta_fc = 0.0;
  /// max F(chi = 0) / max F(run)
  double r_q = 1.0;
  double r_c = 1.0;
};

/// Rejects pairs that differ in delta, gamma, lambda, phi or bath, or a reference with chi != 0.
MetricReport metric_report(const ModelSpec& run_spec, const FisherResult& run, const ModelSpec& reference_spec,
                           const FisherResult& reference);

/// Default horizon: 8 / gamma_eff with gamma_eff = gamma lambda / (gamma + lambda);
/// ten probe periods when gamma = 0.
double default_t_max(const ModelSpec& spec);

}  // namespace qprobe
