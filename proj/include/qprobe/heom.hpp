#pragma once

// Hierarchical equations of motion for a probe coupled through
// L = sigma_- + chi sigma_+ to a single-exponential (Lorentzian) bath.
//
// Auxiliary matrices rho^(m,n), m + n <= depth, are stored level by level:
// block index = (m+n)(m+n+1)/2 + n. Anything beyond the truncation is zero.

#include "qprobe/model.hpp"
#include "qprobe/trajectory.hpp"

#include <cstddef>
#include <memory>
#include <vector>

namespace qprobe {

struct HeomConfig {
  int depth = 20;
  /// Fixed RK4 step; <= 0 selects default_heom_dt().
  double dt = 0.0;
  /// Steps between stored samples in integrate().
  int record_stride = 1;

  /// Throws unless depth >= 0, dt > 0 and dt * max(|beta|, delta, depth*sqrt(|alpha|)) <= 0.1.
  void validate(const ModelSpec& spec) const;
};

/// 20 for gamma <= 0.2 cm^-1, 30 above.
int default_depth(double gamma_cm1);

/// min(0.01/delta, 0.01/lambda, 0.02/sqrt(N alpha max(1,|beta|))), clamped to the stability guard.
double default_heom_dt(const ModelSpec& spec, int depth);

/// Returns cfg with dt filled in when unset.
HeomConfig resolved(const HeomConfig& cfg, const ModelSpec& spec);

inline std::size_t hierarchy_size(int depth) {
  const auto n = static_cast<std::size_t>(depth) + 1;
  return n * (n + 1) / 2;
}

inline std::size_t hierarchy_index(int m, int n) {
  const auto level = static_cast<std::size_t>(m + n);
  return level * (level + 1) / 2 + static_cast<std::size_t>(n);
}

struct HierarchyState {
  int depth = 0;
  std::vector<Mat2> blocks;
  double t = 0.0;

  const Mat2& at(int m, int n) const { return blocks[hierarchy_index(m, n)]; }
  Mat2& at(int m, int n) { return blocks[hierarchy_index(m, n)]; }
  std::size_t size() const { return blocks.size(); }
  /// max over stored (m,n) of |rho^(n,m) - (rho^(m,n))^dagger|
  double cross_conjugacy_error() const;
};

HierarchyState init_hierarchy(const DensityMatrix2& rho0, int depth);

struct CouplingOperator {
  Mat2 l;
  Mat2 l_dag;

  static CouplingOperator from_chi(double chi);
};

/// Time derivative of every block; result carries state.t.
HierarchyState heom_rhs_boson(const HierarchyState& state, const ModelSpec& spec);
HierarchyState heom_rhs_fermion(const HierarchyState& state, const ModelSpec& spec);

/// Precomputed right-hand side acting on the packed representation
/// (4 complex numbers per block, row-major).
class HeomGenerator {
 public:
  HeomGenerator(const ModelSpec& spec, int depth);

  int depth() const { return depth_; }
  std::size_t blocks() const { return links_.size(); }
  /// out = d/dt in. Blocks whose inputs are all exactly zero are written as zero.
  /// `flags` needs blocks() bytes of scratch.
  void apply(const cplx* in, cplx* out, unsigned char* flags) const;
  void apply(const cplx* in, cplx* out) const;

 private:
  struct Link {
    cplx diag[4];
    int down_m, down_n, up_m, up_n;
    cplx c_down_m, c_down_n;
    double sign_up_m, sign_up_n;
  };

  int depth_;
  double chi_;
  std::vector<Link> links_;
};

/// Classical RK4 on the full hierarchy with a fixed step.
class HeomPropagator final : public Propagator {
 public:
  HeomPropagator(const ModelSpec& spec, const HeomConfig& cfg, const DensityMatrix2& rho0);

  double time() const override { return t_; }
  void advance_to(double t) override;
  DensityMatrix2 density() const override;
  std::unique_ptr<Propagator> clone() const override { return std::make_unique<HeomPropagator>(*this); }

  double dt() const { return dt_; }
  HierarchyState state() const;
  /// One RK4 step of size h.
  void step(double h);

 private:
  std::shared_ptr<const HeomGenerator> gen_;
  double dt_;
  double t_ = 0.0;
  std::vector<cplx> y_;

  // RK4 stages; not copied with the propagator.
  struct Workspace {
    std::vector<cplx> k1, k2, k3, k4, tmp;
    std::vector<unsigned char> flags;
    Workspace() = default;
    Workspace(const Workspace&) {}
    Workspace& operator=(const Workspace&) { return *this; }
  };
  Workspace ws_;
};

/// rho^(0,0) sampled every record_stride steps on [0, t_max]. Every sample is
/// checked (trace, hermiticity, positivity) and a breach aborts with the time.
Trajectory integrate(const DensityMatrix2& rho0, const ModelSpec& spec, const HeomConfig& cfg, double t_max);

struct ConvergenceReport {
  std::vector<int> depths;
  /// deviations[i] = sup-norm distance between depths[i] and depths[i+1]
  std::vector<double> deviations;
  double tolerance = 1e-6;
  double dt = 0.0;
  bool converged = false;
  /// First depths[i+1] whose distance to depths[i] is below tolerance; -1 if none.
  int converged_depth = -1;
};

/// Integrates at each depth with a shared step (the default for the deepest
/// level unless cfg.dt is set) and compares consecutive depths.
ConvergenceReport convergence_scan(const DensityMatrix2& rho0, const ModelSpec& spec, const HeomConfig& cfg,
                                   double t_max, const std::vector<int>& depths, double tolerance = 1e-6);

}  // namespace qprobe
