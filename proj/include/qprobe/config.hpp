#pragma once

// Flat key = value run configuration.
//
// Grammar: one `key = value` per line; '#' starts a comment; blank lines are
// ignored; keys may appear once. Lists are comma separated, or `start:step:stop`.
// Rates: delta_thz plus two of gamma_cm1, lambda_cm1, lambda_over_gamma.

#include "qprobe/fisher.hpp"
#include "qprobe/model.hpp"
#include "qprobe/oracle.hpp"
#include "qprobe/reference.hpp"
#include "qprobe/trajectory.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qprobe {

enum class SweepAxis { Chi, Gamma };

/// Solver names accepted by `solver =`; oracle is valid for simulate only.
enum class TrajectorySolver { Heom, Nz, Rwa, Oracle };

struct RunConfig {
  std::string origin = "config";
  UnitSystem units;
  std::string thz_convention = "wavenumber";

  double delta_thz = 0.1;
  double gamma_cm1 = 0.0;
  double lambda_over_gamma = 0.0;
  ModelSpec spec;
  /// True when gamma = 0 forced a nominal lambda (= delta); lambda is then irrelevant.
  bool nominal_lambda = false;
  /// A gamma sweep keeps lambda/gamma fixed (else lambda).
  bool hold_ratio = true;

  TrajectorySolver solver = TrajectorySolver::Heom;
  SolverSettings settings;
  bool depth_given = false;
  /// 0 selects the default horizon of each point.
  double t_max = 0.0;
  int samples = 2000;
  DerivativeConfig derivative;
  /// Solver used for the chi = 0 comparison run: heom or rwa.
  SolverKind reference_solver = SolverKind::Heom;

  OracleConfig oracle;
  /// validate: "auto" runs the oracle only for chi = 0.
  std::string oracle_mode = "auto";
  std::vector<int> convergence_depths;

  std::optional<SweepAxis> axis;
  std::vector<double> values;

  /// Horizon used for this spec when t_max is not set.
  double horizon(const ModelSpec& s) const;
  /// Hierarchy depth for gamma given in cm^-1 (explicit depth wins).
  int depth_for(double gamma_cm1_value) const;
  /// The same configuration at another point of the sweep axis.
  RunConfig at_axis(double value) const;
  Metadata metadata() const;
};

/// Raw entries kept with their line numbers so late validation errors can point at them.
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::string_view text, std::string origin = "config");
  static Config load(const std::filesystem::path& path);

  /// Adds or replaces a key (line 0: set programmatically).
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  /// Checks every key and value; throws config errors anchored at the offending line.
  RunConfig resolve() const;

 private:
  std::string origin_ = "config";
  std::map<std::string, Entry> entries_;
};

/// Accepts plain numbers and pi expressions: "pi", "pi/4", "3*pi/8", "0.25pi".
double parse_angle(std::string_view text);

/// Comma-separated items, each a number or "start:step:stop" (inclusive, tolerant to rounding).
std::vector<double> parse_number_list(std::string_view text);

std::string_view to_string(SweepAxis axis);
std::string_view to_string(TrajectorySolver solver);

}  // namespace qprobe
