#include "qprobe/trajectory.hpp"

#include "qprobe/error.hpp"

#include <cmath>

namespace qprobe {

std::vector<BlochVector> Trajectory::bloch() const {
  std::vector<BlochVector> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(bloch_from_density(s));
  return out;
}

std::vector<double> Trajectory::sigma_z() const {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(2.0 * s(0, 1).real());
  return out;
}

void TimeGrid::validate() const {
  if (samples < 1) throw invalid_argument("time grid needs at least one sample");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw invalid_argument("t_max must be finite and >= 0");
  if (samples > 1 && t_max == 0.0) throw invalid_argument("t_max must be > 0 when more than one sample is requested");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) t[static_cast<std::size_t>(j)] = at(j);
  return t;
}

int substeps_for(double interval, double dt_target) {
  if (!(dt_target > 0.0)) throw invalid_argument("step size must be > 0");
  if (interval <= 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(interval / dt_target - 1e-9)));
}

Trajectory record(Propagator& prop, const TimeGrid& grid, const StateTolerances& tol) {
  grid.validate();
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(grid.samples));
  traj.states.reserve(static_cast<std::size_t>(grid.samples));
  for (int j = 0; j < grid.samples; ++j) {
    const double t = grid.at(j);
    prop.advance_to(t);
    DensityMatrix2 rho = prop.density();
    check_density(rho, t, tol);
    traj.times.push_back(t);
    traj.states.push_back(std::move(rho));
  }
  return traj;
}

double sup_norm_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw invalid_argument("sup_norm_distance: trajectories differ in length");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(a.times[k])))
      throw invalid_argument("sup_norm_distance: sample times differ");
    d = std::max(d, (a.states[k].m - b.states[k].m).cwiseAbs().maxCoeff());
  }
  return d;
}

}  // namespace qprobe
