#pragma once

#include "qprobe/model.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace qprobe {

/// Ordered key/value provenance written as '#' header lines.
using Metadata = std::vector<std::pair<std::string, std::string>>;

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix2> states;
  Metadata metadata;

  std::size_t size() const { return times.size(); }
  std::vector<BlochVector> bloch() const;
  std::vector<double> sigma_z() const;
};

struct BlochTrajectory {
  std::vector<double> times;
  std::vector<BlochVector> r;
};

/// Uniform sampling grid t_j = j * t_max / (samples - 1).
struct TimeGrid {
  double t_max = 0.0;
  int samples = 2000;

  void validate() const;
  double interval() const { return samples > 1 ? t_max / (samples - 1) : 0.0; }
  double at(int j) const { return j == samples - 1 ? t_max : j * interval(); }
  std::vector<double> times() const;
};

/// Smallest integer number of equal sub-steps of size <= dt_target that tile `interval`.
int substeps_for(double interval, double dt_target);

/// A solver advanced forward in time. Copies are independent snapshots.
class Propagator {
 public:
  virtual ~Propagator() = default;

  virtual double time() const = 0;
  /// Advance to t >= time() with steps no larger than the configured step.
  virtual void advance_to(double t) = 0;
  virtual DensityMatrix2 density() const = 0;
  virtual BlochVector bloch() const { return bloch_from_density(density()); }
  virtual std::unique_ptr<Propagator> clone() const = 0;
};

/// Records the reduced state on `grid`, validating every sample.
Trajectory record(Propagator& prop, const TimeGrid& grid, const StateTolerances& tol = {});

/// max_t max_ij |a(t)_ij - b(t)_ij| over paired samples (equal times required).
double sup_norm_distance(const Trajectory& a, const Trajectory& b);

}  // namespace qprobe
