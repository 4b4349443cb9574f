#include "qprobe/fisher.hpp"

#include "qprobe/error.hpp"
#include "qprobe/heom.hpp"

#include <cmath>
#include <sstream>

namespace qprobe {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

SolverKind parse_solver_kind(std::string_view text) {
  if (text == "heom") return SolverKind::Heom;
  if (text == "nz") return SolverKind::Nz;
  if (text == "rwa") return SolverKind::Rwa;
  throw invalid_argument("unknown solver '" + std::string(text) + "' (expected heom|nz|rwa)");
}

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Heom: return "heom";
    case SolverKind::Nz: return "nz";
    case SolverKind::Rwa: return "rwa";
  }
  return "?";
}

double resolved_step(const ModelSpec& spec, const SolverSettings& settings) {
  if (settings.dt > 0.0) return settings.dt;
  switch (settings.kind) {
    case SolverKind::Heom: return default_heom_dt(spec, settings.depth);
    case SolverKind::Nz: return default_nz_dt(spec);
    case SolverKind::Rwa: return 0.0;
  }
  return 0.0;
}

std::unique_ptr<Propagator> make_propagator(const ModelSpec& spec, const SolverSettings& settings,
                                            const DensityMatrix2& rho0) {
  switch (settings.kind) {
    case SolverKind::Heom:
      return std::make_unique<HeomPropagator>(spec, HeomConfig{settings.depth, resolved_step(spec, settings), 1},
                                              rho0);
    case SolverKind::Nz:
      if (spec.bath != BathKind::Boson || std::abs(spec.chi - 1.0) > 1e-12)
        throw invalid_argument("the nz solver covers only chi = 1 with a bosonic bath");
      return std::make_unique<NzPropagator>(spec, bloch_from_density(rho0), resolved_step(spec, settings),
                                            settings.nz_kernel);
    case SolverKind::Rwa: return std::make_unique<RwaPropagator>(spec, rho0, settings.rwa_variant);
  }
  throw invalid_argument("unknown solver");
}

void DerivativeConfig::validate() const {
  if (!(relative_step > 0.0 && relative_step < 1e-2))
    throw invalid_argument("relative derivative step must lie in (0, 1e-2)");
}

double five_point_derivative(double f_minus2, double f_minus1, double f_plus1, double f_plus2, double step) {
  if (step == 0.0) throw invalid_argument("five_point_derivative: zero step");
  return (-f_plus2 + 8.0 * f_plus1 - 8.0 * f_minus1 + f_minus2) / (12.0 * step);
}

double qfi_from_bloch(const BlochVector& r, const BlochVector& dr) {
  const double r2 = r.norm2();
  if (r2 > (1.0 + 1e-8) * (1.0 + 1e-8)) throw invalid_argument("qfi_from_bloch: |r| exceeds 1");
  const double base = dr.norm2();
  const double mixedness = 1.0 - r2;
  if (mixedness < 1e-10) return base;
  const double proj = r.dot(dr);
  return base + proj * proj / mixedness;
}

double qfi_from_mixedness(const BlochVector& dr, double mixedness, double dmixedness) {
  const double base = dr.norm2();
  if (mixedness < 1e-10) return base;
  return base + dmixedness * dmixedness / (4.0 * mixedness);
}

double mixedness(const DensityMatrix2& rho) {
  const auto& m = rho.m;
  return 4.0 * (m(0, 0).real() * m(1, 1).real() - std::norm(0.5 * (m(0, 1) + std::conj(m(1, 0)))));
}

CfiValue cfi_z_measurement(const BlochVector& r, const BlochVector& dr) {
  if (std::abs(r.z) > 1.0 + 1e-8) throw invalid_argument("cfi_z_measurement: |r_z| exceeds 1");
  if (dr.z == 0.0) return {0.0, false};
  const double den = 1.0 - r.z * r.z;
  if (den < 1e-12) return {dr.z * dr.z / 1e-12, true};
  return {dr.z * dr.z / den, false};
}

ShiftedEnsemble::ShiftedEnsemble(const ModelSpec& spec, const SolverSettings& settings, const DerivativeConfig& deriv) {
  spec.validate();
  deriv.validate();
  step_ = deriv.relative_step * spec.delta;
  // Every shifted run uses the step of the central one so that all five
  // discretisations are the same map of delta.
  SolverSettings fixed = settings;
  fixed.dt = resolved_step(spec, settings);
  const DensityMatrix2 rho0 = initial_density(spec.phi);
  for (int k = -2; k <= 2; ++k)
    props_[static_cast<std::size_t>(k + 2)] = make_propagator(spec.with_delta(spec.delta + k * step_), fixed, rho0);
}

ShiftedEnsemble::ShiftedEnsemble(const ShiftedEnsemble& other) : step_(other.step_) {
  for (std::size_t i = 0; i < props_.size(); ++i) props_[i] = other.props_[i]->clone();
}

ShiftedEnsemble& ShiftedEnsemble::operator=(const ShiftedEnsemble& other) {
  if (this != &other) {
    ShiftedEnsemble copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void ShiftedEnsemble::advance_to(double t) {
  for (auto& p : props_) p->advance_to(t);
}

FisherSample ShiftedEnsemble::sample() const {
  std::array<BlochVector, 5> r;
  std::array<double, 5> m;
  for (std::size_t i = 0; i < 5; ++i) {
    const DensityMatrix2 rho = props_[i]->density();
    r[i] = bloch_from_density(rho);
    m[i] = mixedness(rho);
  }
  FisherSample s;
  s.t = time();
  s.r = r[2];
  s.dr = {five_point_derivative(r[0].x, r[1].x, r[3].x, r[4].x, step_),
          five_point_derivative(r[0].y, r[1].y, r[3].y, r[4].y, step_),
          five_point_derivative(r[0].z, r[1].z, r[3].z, r[4].z, step_)};
  if (r[2].norm2() > (1.0 + 1e-8) * (1.0 + 1e-8)) throw invalid_argument("qfi_from_bloch: |r| exceeds 1");
  s.qfi = qfi_from_mixedness(s.dr, m[2], five_point_derivative(m[0], m[1], m[3], m[4], step_));
  const CfiValue c = cfi_z_measurement(s.r, s.dr);
  s.cfi = c.value;
  s.flags = c.floored ? kCfiFloored : 0u;
  return s;
}

namespace {

Metadata series_metadata(const ModelSpec& spec, const SolverSettings& settings, const TimeGrid& grid,
                         const DerivativeConfig& deriv) {
  Metadata md = {{"solver", std::string(to_string(settings.kind))},
                 {"delta_rel", fmt(deriv.relative_step)},
                 {"t_max", fmt(grid.t_max)},
                 {"samples", std::to_string(grid.samples)}};
  if (settings.kind == SolverKind::Heom) {
    md.emplace_back("depth", std::to_string(settings.depth));
    md.emplace_back("dt", fmt(resolved_step(spec, settings)));
  } else if (settings.kind == SolverKind::Nz) {
    md.emplace_back("dt", fmt(resolved_step(spec, settings)));
    md.emplace_back("nz_kernel", std::string(to_string(settings.nz_kernel)));
  } else {
    md.emplace_back("rwa_variant", std::string(to_string(settings.rwa_variant)));
  }
  return md;
}

void append(FisherSeries& series, const FisherSample& s) {
  series.times.push_back(s.t);
  series.cfi.push_back(s.cfi);
  series.qfi.push_back(s.qfi);
  series.flags.push_back(s.flags);
}

}  // namespace

FisherSeries fisher_series(const ModelSpec& spec, const SolverSettings& settings, const TimeGrid& grid,
                           const DerivativeConfig& deriv) {
  grid.validate();
  ShiftedEnsemble ens(spec, settings, deriv);
  FisherSeries series;
  series.metadata = series_metadata(spec, settings, grid, deriv);
  for (int j = 0; j < grid.samples; ++j) {
    ens.advance_to(grid.at(j));
    append(series, ens.sample());
  }
  return series;
}

TimeOptimum max_over_time(std::span<const double> times, std::span<const double> values,
                          const std::function<double(double)>& evaluate, double rel_tol) {
  if (times.empty() || times.size() != values.size()) throw invalid_argument("max_over_time: empty or mismatched series");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;

  TimeOptimum opt{times[best], values[best], false};
  const std::size_t last = times.size() - 1;
  if (evaluate && times.size() > 1) {
    double a = times[best == 0 ? 0 : best - 1];
    double b = times[best == last ? last : best + 1];
    const double tol = rel_tol * std::max(times[best], times[1] - times[0]);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = evaluate(c);
    double fd = evaluate(d);
    while (b - a > tol) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = evaluate(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = evaluate(d);
      }
    }
    const double t_ref = fc >= fd ? c : d;
    const double f_ref = fc >= fd ? fc : fd;
    if (f_ref > opt.value) opt = {t_ref, f_ref, false};
  }
  opt.boundary = times.size() > 1 && opt.t >= times[last];
  return opt;
}

FisherResult optimize_fisher(const ModelSpec& spec, const SolverSettings& settings, const TimeGrid& grid,
                             const DerivativeConfig& deriv, double rel_tol) {
  grid.validate();
  ShiftedEnsemble ens(spec, settings, deriv);
  FisherResult res;
  res.series.metadata = series_metadata(spec, settings, grid, deriv);

  // Snapshot of the ensemble one grid point before each running maximum, so the
  // refinement bracket can be re-integrated without starting from t = 0.
  ShiftedEnsemble prev = ens;
  ShiftedEnsemble snap_c = ens;
  ShiftedEnsemble snap_q = ens;
  double best_c = -1.0, best_q = -1.0;
  for (int j = 0; j < grid.samples; ++j) {
    if (j > 0) prev = ens;
    ens.advance_to(grid.at(j));
    const FisherSample s = ens.sample();
    append(res.series, s);
    if (s.cfi > best_c) {
      best_c = s.cfi;
      snap_c = prev;
    }
    if (s.qfi > best_q) {
      best_q = s.qfi;
      snap_q = prev;
    }
  }

  auto evaluator = [&spec, &settings, &deriv](const ShiftedEnsemble& snap, bool quantum) {
    return [&spec, &settings, &deriv, &snap, quantum](double t) {
      ShiftedEnsemble e = t >= snap.time() ? snap : ShiftedEnsemble(spec, settings, deriv);
      e.advance_to(t);
      const FisherSample s = e.sample();
      return quantum ? s.qfi : s.cfi;
    };
  };
  res.cfi_max = max_over_time(res.series.times, res.series.cfi, evaluator(snap_c, false), rel_tol);
  res.qfi_max = max_over_time(res.series.times, res.series.qfi, evaluator(snap_q, true), rel_tol);
  return res;
}

MetricReport metric_report(const ModelSpec& run_spec, const FisherResult& run, const ModelSpec& reference_spec,
                           const FisherResult& reference) {
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); };
  if (!same(run_spec.delta, reference_spec.delta) || !same(run_spec.gamma, reference_spec.gamma) ||
      !same(run_spec.lambda_width, reference_spec.lambda_width) || !same(run_spec.phi, reference_spec.phi) ||
      run_spec.bath != reference_spec.bath) {
    throw invalid_argument("metric_report: runs differ in delta, gamma, lambda, phi or bath");
  }
  if (reference_spec.chi != 0.0) throw invalid_argument("metric_report: reference run must have chi = 0");

  MetricReport rep;
  rep.spec = run_spec;
  rep.max_fq = run.qfi_max;
  rep.max_fc = run.cfi_max;
  rep.rwa_fq = reference.qfi_max;
  rep.rwa_fc = reference.cfi_max;
  rep.delta_fq = rep.max_fq.value - rep.rwa_fq.value;
  rep.delta_fc = rep.max_fc.value - rep.rwa_fc.value;
  auto ratio = [](double num, double den) {
    if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return num / den;
  };
  rep.r_q = ratio(rep.rwa_fq.value, rep.max_fq.value);
  rep.r_c = ratio(rep.rwa_fc.value, rep.max_fc.value);
  return rep;
}

double default_t_max(const ModelSpec& spec) {
  if (spec.gamma <= 0.0) return 20.0 * kPi / spec.delta;
  const double eff = spec.gamma * spec.lambda_width / (spec.gamma + spec.lambda_width);
  return 8.0 / eff;
}

}  // namespace qprobe
