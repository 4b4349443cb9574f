#include "qprobe/config.hpp"

#include "qprobe/error.hpp"
#include "qprobe/heom.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qprobe {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

bool parse_double(std::string_view text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "delta_thz",       "chi",         "bath",          "phi",          "gamma_cm1",         "lambda_cm1",
      "lambda_over_gamma", "thz_convention", "cm1_to_internal", "thz_to_internal", "solver",      "depth",
      "dt",              "t_max",       "samples",       "rwa_variant",  "nz_kernel",         "delta_rel",
      "reference_solver", "oracle_modes", "oracle_window", "oracle_emax", "oracle",           "convergence_depths",
      "axis",            "values"};
  return keys;
}

}  // namespace

double parse_angle(std::string_view text) {
  std::string t = trim(text);
  t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
  double v = 0.0;
  if (parse_double(t, v)) return v;
  const auto p = t.find("pi");
  if (p == std::string::npos) throw invalid_argument("not an angle: '" + std::string(text) + "'");
  std::string num = t.substr(0, p);
  std::string den = t.substr(p + 2);
  double scale = 1.0;
  if (!num.empty()) {
    if (num.back() == '*') num.pop_back();
    if (num == "-") {
      scale = -1.0;
    } else if (!parse_double(num, scale)) {
      throw invalid_argument("not an angle: '" + std::string(text) + "'");
    }
  }
  if (!den.empty()) {
    double d = 0.0;
    if (den.front() != '/' || !parse_double(den.substr(1), d) || d == 0.0)
      throw invalid_argument("not an angle: '" + std::string(text) + "'");
    scale /= d;
  }
  return scale * kPi;
}

namespace {

void append_range(const std::string& t, std::vector<double>& out) {
  std::vector<double> parts;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ':')) {
    double v = 0.0;
    if (!parse_double(item, v)) throw invalid_argument("bad range element '" + trim(item) + "'");
    parts.push_back(v);
  }
  if (parts.size() != 3) throw invalid_argument("range must be start:step:stop");
  const double start = parts[0], step = parts[1], stop = parts[2];
  if (!(step > 0.0) || stop < start) throw invalid_argument("range needs step > 0 and stop >= start");
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  if (n > 1000000) throw invalid_argument("range has too many points");
  for (long i = 0; i <= n; ++i) {
    // Snap to the decimal grid so 0.1:0.05:0.75 yields 0.15, not 0.15000000000000002.
    const double v = start + static_cast<double>(i) * step;
    out.push_back(std::stod(fmt(v)));
  }
}

}  // namespace

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.find(':') != std::string::npos) {
      append_range(t, out);
      continue;
    }
    double v = 0.0;
    if (!parse_double(t, v)) throw invalid_argument("bad number '" + t + "'");
    out.push_back(v);
  }
  if (out.empty()) throw invalid_argument("empty list");
  return out;
}

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::Chi ? "chi" : "gamma"; }

std::string_view to_string(TrajectorySolver solver) {
  switch (solver) {
    case TrajectorySolver::Heom: return "heom";
    case TrajectorySolver::Nz: return "nz";
    case TrajectorySolver::Rwa: return "rwa";
    case TrajectorySolver::Oracle: return "oracle";
  }
  return "?";
}

Config Config::parse(std::string_view text, std::string origin) {
  Config cfg;
  cfg.origin_ = std::move(origin);
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw config_error(cfg.origin_, line, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw config_error(cfg.origin_, line, "missing key");
    if (value.empty()) throw config_error(cfg.origin_, line, "missing value for '" + key + "'");
    if (!known_keys().count(key)) throw config_error(cfg.origin_, line, "unknown key '" + key + "'");
    if (cfg.entries_.count(key))
      throw config_error(cfg.origin_, line,
                         "duplicate key '" + key + "' (first on line " + std::to_string(cfg.entries_[key].line) + ")");
    cfg.entries_[key] = {value, line};
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) throw config_error(origin_, 0, "unknown key '" + key + "'");
  if (trim(value).empty()) throw config_error(origin_, 0, "missing value for '" + key + "'");
  entries_[key] = {trim(value), 0};
}

RunConfig Config::resolve() const {
  RunConfig rc;
  rc.origin = origin_;
  auto line_of = [&](const std::string& key) {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  };
  auto fail = [&](const std::string& key, const std::string& msg) { return config_error(origin_, line_of(key), msg); };
  auto get = [&](const std::string& key) -> const std::string* {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second.value;
  };
  auto number = [&](const std::string& key) {
    double v = 0.0;
    if (!parse_double(*get(key), v)) throw fail(key, "'" + key + "' expects a number, got '" + *get(key) + "'");
    return v;
  };
  auto integer = [&](const std::string& key) {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw fail(key, "'" + key + "' expects an integer");
    return static_cast<int>(v);
  };
  // Runs a parser and re-anchors its message at the key's line.
  auto guarded = [&](const std::string& key, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config) throw;
      throw fail(key, e.what());
    }
  };

  if (auto v = get("thz_convention")) {
    rc.thz_convention = *v;
    rc.units = guarded("thz_convention", [&] { return UnitSystem::from_convention(*v); });
  }
  if (get("cm1_to_internal")) rc.units.cm1_to_internal = number("cm1_to_internal");
  if (get("thz_to_internal")) rc.units.thz_to_internal = number("thz_to_internal");
  guarded(get("cm1_to_internal") ? "cm1_to_internal" : "thz_to_internal", [&] {
    rc.units.validate();
    return 0;
  });

  if (get("delta_thz")) rc.delta_thz = number("delta_thz");
  if (!(rc.delta_thz > 0.0)) throw fail("delta_thz", "delta_thz must be positive");
  rc.spec.delta = convert_units(rc.delta_thz, Unit::THz, rc.units);
  if (get("chi")) rc.spec.chi = number("chi");
  if (!(rc.spec.chi >= 0.0 && rc.spec.chi <= 1.0)) throw fail("chi", "chi must lie in [0, 1]");
  if (auto v = get("bath")) rc.spec.bath = guarded("bath", [&] { return parse_bath_kind(*v); });
  if (auto v = get("phi")) rc.spec.phi = guarded("phi", [&] { return parse_angle(*v); });

  const bool has_l = get("lambda_cm1"), has_r = get("lambda_over_gamma");
  bool has_g = get("gamma_cm1");
  // A gamma sweep may leave gamma_cm1 out; its first grid value stands in.
  std::optional<double> axis_gamma;
  if (!has_g && get("axis") && *get("axis") == "gamma" && get("values")) {
    const auto vs = guarded("values", [&] { return parse_number_list(*get("values")); });
    if (!vs.empty()) axis_gamma = vs.front();
    has_g = axis_gamma.has_value();
  }
  const int given = int(has_g) + int(has_l) + int(has_r);
  if (given < 2) throw config_error(origin_, 0, "give two of gamma_cm1, lambda_cm1, lambda_over_gamma");
  if (given == 3)
    throw fail("lambda_over_gamma", "gamma_cm1, lambda_cm1 and lambda_over_gamma are over-determined; give two");
  double lambda_cm1 = 0.0;
  if (has_g) {
    rc.gamma_cm1 = axis_gamma ? *axis_gamma : number("gamma_cm1");
    if (rc.gamma_cm1 < 0.0)
      throw axis_gamma ? fail("values", "gamma values must be >= 0") : fail("gamma_cm1", "gamma_cm1 must be >= 0");
  }
  if (has_l) {
    lambda_cm1 = number("lambda_cm1");
    if (!(lambda_cm1 > 0.0)) throw fail("lambda_cm1", "lambda_cm1 must be positive");
  }
  if (has_r) {
    rc.lambda_over_gamma = number("lambda_over_gamma");
    if (!(rc.lambda_over_gamma > 0.0)) throw fail("lambda_over_gamma", "lambda_over_gamma must be positive");
  }
  if (!has_g) rc.gamma_cm1 = lambda_cm1 / rc.lambda_over_gamma;
  if (!has_l) lambda_cm1 = rc.gamma_cm1 * rc.lambda_over_gamma;
  if (!has_r) rc.lambda_over_gamma = rc.gamma_cm1 > 0.0 ? lambda_cm1 / rc.gamma_cm1 : 0.0;
  rc.hold_ratio = has_r;
  rc.spec.gamma = convert_units(rc.gamma_cm1, Unit::Cm1, rc.units);
  if (lambda_cm1 > 0.0) {
    rc.spec.lambda_width = convert_units(lambda_cm1, Unit::Cm1, rc.units);
  } else {
    rc.spec.lambda_width = rc.spec.delta;
    rc.nominal_lambda = true;
  }

  if (auto v = get("solver")) {
    if (*v == "heom") rc.solver = TrajectorySolver::Heom;
    else if (*v == "nz") rc.solver = TrajectorySolver::Nz;
    else if (*v == "rwa") rc.solver = TrajectorySolver::Rwa;
    else if (*v == "oracle") rc.solver = TrajectorySolver::Oracle;
    else throw fail("solver", "unknown solver '" + *v + "' (expected heom|nz|rwa|oracle)");
    if (rc.solver != TrajectorySolver::Oracle) rc.settings.kind = parse_solver_kind(*v);
  }
  if (get("depth")) {
    rc.settings.depth = integer("depth");
    if (rc.settings.depth < 0) throw fail("depth", "depth must be >= 0");
    rc.depth_given = true;
  } else {
    rc.settings.depth = default_depth(rc.gamma_cm1);
  }
  if (get("dt")) {
    rc.settings.dt = number("dt");
    if (!(rc.settings.dt > 0.0)) throw fail("dt", "dt must be positive");
  }
  if (get("t_max")) {
    rc.t_max = number("t_max");
    if (!(rc.t_max > 0.0)) throw fail("t_max", "t_max must be positive");
  }
  if (get("samples")) {
    rc.samples = integer("samples");
    if (rc.samples < 2) throw fail("samples", "samples must be >= 2");
  }
  if (auto v = get("rwa_variant")) rc.settings.rwa_variant = guarded("rwa_variant", [&] { return parse_omega_variant(*v); });
  if (auto v = get("nz_kernel")) rc.settings.nz_kernel = guarded("nz_kernel", [&] { return parse_nz_kernel(*v); });
  if (get("delta_rel")) {
    rc.derivative.relative_step = number("delta_rel");
    guarded("delta_rel", [&] {
      rc.derivative.validate();
      return 0;
    });
  }
  if (auto v = get("reference_solver")) {
    if (*v == "heom") rc.reference_solver = SolverKind::Heom;
    else if (*v == "rwa") rc.reference_solver = SolverKind::Rwa;
    else throw fail("reference_solver", "reference_solver must be heom or rwa");
  }

  if (get("oracle_modes")) {
    rc.oracle.modes = integer("oracle_modes");
    if (rc.oracle.modes < 1) throw fail("oracle_modes", "oracle_modes must be >= 1");
  }
  if (get("oracle_window")) {
    rc.oracle.window = number("oracle_window");
    if (!(rc.oracle.window > 0.0)) throw fail("oracle_window", "oracle_window must be positive");
  }
  if (get("oracle_emax")) {
    rc.oracle.max_excitations = integer("oracle_emax");
    if (rc.oracle.max_excitations < 1) throw fail("oracle_emax", "oracle_emax must be >= 1");
  }
  if (auto v = get("oracle")) {
    if (*v != "auto" && *v != "on" && *v != "off") throw fail("oracle", "oracle must be auto, on or off");
    rc.oracle_mode = *v;
  }
  if (auto v = get("convergence_depths")) {
    const auto list = guarded("convergence_depths", [&] { return parse_number_list(*v); });
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i] != std::floor(list[i]) || list[i] < 0) throw fail("convergence_depths", "depths must be integers >= 0");
      if (i > 0 && list[i] <= list[i - 1]) throw fail("convergence_depths", "depths must be strictly increasing");
      rc.convergence_depths.push_back(static_cast<int>(list[i]));
    }
    if (rc.convergence_depths.size() < 2) throw fail("convergence_depths", "need at least two depths");
  }

  if (auto v = get("axis")) {
    if (*v == "chi") rc.axis = SweepAxis::Chi;
    else if (*v == "gamma") rc.axis = SweepAxis::Gamma;
    else throw fail("axis", "axis must be chi or gamma");
  }
  if (auto v = get("values")) {
    rc.values = guarded("values", [&] { return parse_number_list(*v); });
    const bool up = std::is_sorted(rc.values.begin(), rc.values.end(), std::less_equal<>());
    const bool down = std::is_sorted(rc.values.begin(), rc.values.end(), std::greater_equal<>());
    if (!up && !down) throw fail("values", "sweep values must be strictly monotone");
  }
  if (rc.axis.has_value() != !rc.values.empty())
    throw fail(rc.axis ? "axis" : "values", "axis and values must be given together");
  if (rc.axis == SweepAxis::Chi)
    for (double c : rc.values)
      if (!(c >= 0.0 && c <= 1.0)) throw fail("values", "chi values must lie in [0, 1]");
  if (rc.axis == SweepAxis::Gamma) {
    if (!has_r && !has_l) throw fail("axis", "a gamma sweep needs lambda_over_gamma or lambda_cm1 to hold fixed");
    for (double g : rc.values)
      if (g < 0.0) throw fail("values", "gamma values must be >= 0");
  }

  guarded("chi", [&] {
    rc.spec.validate();
    return 0;
  });
  return rc;
}

double RunConfig::horizon(const ModelSpec& s) const { return t_max > 0.0 ? t_max : default_t_max(s); }

int RunConfig::depth_for(double gamma_cm1_value) const {
  return depth_given ? settings.depth : default_depth(gamma_cm1_value);
}

RunConfig RunConfig::at_axis(double value) const {
  RunConfig rc = *this;
  rc.axis.reset();
  rc.values.clear();
  if (axis == SweepAxis::Chi) {
    rc.spec.chi = value;
    return rc;
  }
  rc.gamma_cm1 = value;
  rc.spec.gamma = convert_units(value, Unit::Cm1, units);
  if (hold_ratio) {
    const double lambda_cm1 = value * lambda_over_gamma;
    rc.nominal_lambda = lambda_cm1 <= 0.0;
    rc.spec.lambda_width = rc.nominal_lambda ? spec.delta : convert_units(lambda_cm1, Unit::Cm1, units);
  } else {
    rc.lambda_over_gamma = value > 0.0 ? convert_from_internal(spec.lambda_width, Unit::Cm1, units) / value : 0.0;
  }
  rc.settings.depth = depth_for(value);
  return rc;
}

Metadata RunConfig::metadata() const {
  Metadata md = {{"delta_thz", fmt(delta_thz)},
                 {"chi", fmt(spec.chi)},
                 {"bath", std::string(to_string(spec.bath))},
                 {"gamma_cm1", fmt(gamma_cm1)},
                 {"lambda_over_gamma", fmt(lambda_over_gamma)},
                 {"phi", fmt(spec.phi)},
                 {"thz_convention", thz_convention},
                 {"cm1_to_internal", fmt(units.cm1_to_internal)},
                 {"thz_to_internal", fmt(units.thz_to_internal)},
                 {"delta_internal", fmt(spec.delta)},
                 {"gamma_internal", fmt(spec.gamma)},
                 {"lambda_internal", fmt(spec.lambda_width)}};
  if (nominal_lambda) md.emplace_back("lambda_note", "gamma = 0: lambda set to delta, it has no effect");
  return md;
}

}  // namespace qprobe
