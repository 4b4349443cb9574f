#pragma once

// The four front-end operations. Each run_* returns data; each cmd_* also
// writes its files into an output directory (write-to-temp, then rename).

#include "qprobe/config.hpp"
#include "qprobe/fisher.hpp"
#include "qprobe/heom.hpp"
#include "qprobe/trajectory.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qprobe {

inline constexpr const char* kVersion = "1.0.0";

Trajectory run_simulate(const RunConfig& cfg);

struct FisherRun {
  ModelSpec spec;
  ModelSpec reference_spec;
  SolverSettings settings;
  SolverSettings reference_settings;
  FisherResult result;
  FisherResult reference;
  MetricReport report;
  TimeGrid grid;
  double gamma_cm1 = 0.0;
  double lambda_over_gamma = 0.0;
};

FisherRun run_fisher(const RunConfig& cfg);

struct SweepRow {
  double value = 0.0;
  std::optional<FisherRun> run;
  std::string error;
};

/// Points run on `jobs` threads; rows come back ordered by axis value.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, int jobs);

struct ValidationCheck {
  std::string name;
  std::string quantity;
  double deviation = 0.0;
  double tolerance = 0.0;
  /// Informational checks are reported but never fail the run.
  bool strict = true;
  bool passed = true;
  std::string note;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  ConvergenceReport convergence;
  Metadata metadata;
  bool passed = true;
};

/// NZ agreement is enforced only when gamma <= this fraction of delta.
inline constexpr double kNzStrictCoupling = 0.1;

ValidationReport run_validate(const RunConfig& cfg);

std::string trajectory_csv(const Trajectory& traj, const Metadata& header);
std::string fisher_csv(const FisherSeries& series, const Metadata& header);
std::string metrics_json(const FisherRun& run, const RunConfig& cfg);
std::string sweep_csv(const std::vector<SweepRow>& rows, const RunConfig& cfg);
std::string validation_json(const ValidationReport& report);

/// Writes `content` to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Shortest round-trip-safe rendering with 12 significant digits.
std::string format_number(double v);

void cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_fisher(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir, int jobs);
/// Returns whether every strict check passed.
bool cmd_validate(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace qprobe
