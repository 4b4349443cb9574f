#pragma once

// Brute-force reference: the probe plus a finite set of bath modes, evolved
// exactly in a basis truncated by total excitation number.
//
// The probe state |+> carries one excitation, each bath quantum one more.
// Fermionic modes are ordered by ascending frequency for the Jordan-Wigner signs.

#include "qprobe/model.hpp"
#include "qprobe/trajectory.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <map>
#include <vector>

namespace qprobe {

struct DiscretizedBath {
  BathKind kind = BathKind::Boson;
  std::vector<double> omega;
  std::vector<double> coupling;
  double spacing = 0.0;
  /// Half-width of the sampled window in units of lambda.
  double window = 20.0;
  double width = 0.0;
  /// Integral of J over the window and over the whole line.
  double window_mass = 0.0;
  double total_mass = 0.0;

  /// K midpoint modes on [delta - W lambda, delta + W lambda], |g_k|^2 = J(w_k) dw.
  static DiscretizedBath lorentzian(const ModelSpec& spec, int modes, double window = 20.0);

  int modes() const { return static_cast<int>(omega.size()); }
  double discrete_mass() const;
  /// Results are meaningful only before the discrete bath revives: 2 pi / dw.
  double recurrence_time() const;
  /// Recurrence time less the time for the revived correlation to fall to
  /// `revival_weight`: 2 pi / dw - ln(1/revival_weight) / lambda.
  double trust_horizon(double revival_weight = 1e-3) const;
};

struct OracleConfig {
  int modes = 64;
  double window = 20.0;
  /// Excitation cutoff; <= 0 picks 1 for chi = 0 and 3 otherwise.
  int max_excitations = 0;
  std::size_t max_dimension = 2'000'000;
  /// Dimensions up to this size are diagonalised densely.
  std::size_t dense_limit = 1500;

  int resolved_excitations(double chi) const;
};

/// Basis of probe state x bath occupations with total excitation <= max_excitations.
class OracleBasis {
 public:
  OracleBasis(int modes, int max_excitations, BathKind kind, std::size_t max_dimension);

  std::size_t size() const { return probe_.size(); }
  int max_excitations() const { return emax_; }
  /// 0 = |+>, 1 = |->.
  int probe(std::size_t i) const { return probe_[i]; }
  /// Occupied modes, sorted; repeated entries for multiply occupied bosonic modes.
  const std::vector<std::uint16_t>& occupation(std::size_t i) const { return occ_[i]; }
  /// Index of the state with the same bath part and the other probe state, or -1.
  std::ptrdiff_t partner(std::size_t i) const { return partner_[i]; }
  std::ptrdiff_t find(int probe, const std::vector<std::uint16_t>& occ) const;
  int excitations(std::size_t i) const;

 private:
  int emax_;
  std::vector<int> probe_;
  std::vector<std::vector<std::uint16_t>> occ_;
  std::vector<std::ptrdiff_t> partner_;
  std::map<std::vector<std::uint16_t>, std::array<std::ptrdiff_t, 2>> index_;
};

/// Real symmetric Hamiltonian on `basis`.
Eigen::SparseMatrix<double> build_hamiltonian(const DiscretizedBath& bath, const ModelSpec& spec,
                                              const OracleBasis& basis);

/// Probe state times the bath vacuum.
Eigen::VectorXcd oracle_initial_state(const OracleBasis& basis, double phi);

DensityMatrix2 reduced_density(const OracleBasis& basis, const Eigen::VectorXcd& psi);

/// Expectation of the total excitation number.
double excitation_number(const OracleBasis& basis, const Eigen::VectorXcd& psi);

struct OracleRun {
  Trajectory trajectory;
  /// Excitation-number expectation at each sample.
  std::vector<double> excitations;
  double max_norm_drift = 0.0;
  double recurrence_time = 0.0;
  double trust_horizon = 0.0;
  std::size_t dimension = 0;
};

/// Evolves the probe state (bath in vacuum) and records the reduced state on `times`.
/// Rejects times beyond the recurrence horizon and aborts if the norm drifts by more than 1e-8.
OracleRun exact_evolve(const ModelSpec& spec, const OracleConfig& cfg, const std::vector<double>& times);

}  // namespace qprobe
