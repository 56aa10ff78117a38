#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "boundtail/boundary.hpp"
#include "boundtail/errors.hpp"
#include "boundtail/map_model.hpp"
#include "boundtail/montecarlo.hpp"
#include "boundtail/noise.hpp"
#include "boundtail/parallel.hpp"
#include "boundtail/scaling.hpp"
#include "boundtail/ulam.hpp"

namespace boundtail::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config reading. Every key read is recorded, with its default if absent, so the
// resolved config can be echoed; keys never read are reported as unknown.

class Reader {
 public:
  Reader(const json& in, std::string path) : path_(std::move(path)) {
    if (!in.is_null() && !in.is_object()) throw ConfigError(path_ + " must be an object");
    if (in.is_object()) in_ = in;
    out_ = json::object();
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    T v = present(key) ? convert<T>(key) : fallback;
    out_[key] = v;
    return v;
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    used_.insert(key);
    if (!present(key)) return std::nullopt;
    T v = convert<T>(key);
    out_[key] = v;
    return v;
  }

  template <class T>
  T need(const std::string& key) {
    auto v = maybe<T>(key);
    if (!v) throw ConfigError(path_ + "." + key + " is required");
    return *v;
  }

  bool has(const std::string& key) const { return present(key); }

  Reader child(const std::string& key) {
    used_.insert(key);
    return Reader(present(key) ? in_.at(key) : json(), path_ + "." + key);
  }

  void adopt(const std::string& key, Reader& c) {
    c.close();
    out_[key] = c.out_;
  }

  void set(const std::string& key, json value) { out_[key] = std::move(value); }

  void close() const {
    for (const auto& item : in_.items()) {
      if (!used_.count(item.key())) throw ConfigError("unknown key " + path_ + "." + item.key());
    }
  }

  const json& resolved() const { return out_; }
  const std::string& path() const { return path_; }

 private:
  bool present(const std::string& key) const { return in_.contains(key) && !in_.at(key).is_null(); }

  template <class T>
  T convert(const std::string& key) const {
    const json& j = in_.at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      const bool integral = j.is_number_integer() || (j.is_number_float() && std::floor(j.get<double>()) == j.get<double>());
      if (!integral) throw ConfigError(path_ + "." + key + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j.get<double>() < 0.0) throw ConfigError(path_ + "." + key + " must be non-negative");
      }
    }
    try {
      return j.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  std::string path_;
  json in_ = json::object();
  json out_;
  std::set<std::string> used_;
};

// Errors raised while turning config values into objects are configuration errors.
template <class F>
auto setup(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Sections

struct MapConfig {
  std::string family;
  double b = 3.0;
  double lambda = 0.5;
  double alpha = 1.0;
  int r = 2;
  std::optional<double> sigma;
  std::optional<double> sigma_over_star;
  std::vector<double> knots;
  std::vector<double> values;
  std::optional<Interval> domain;
};

MapConfig read_map(Reader& r) {
  MapConfig m;
  m.family = r.get<std::string>("family", "tanh_affine");
  if (auto d = r.maybe<std::vector<double>>("domain")) {
    if (d->size() != 2) throw ConfigError("map.domain must be [lo, hi]");
    m.domain = Interval{(*d)[0], (*d)[1]};
  }
  m.sigma = r.maybe<double>("sigma");
  if (m.family == "tanh_affine") {
    m.b = r.get<double>("b", 3.0);
    m.sigma_over_star = r.maybe<double>("sigma_over_star");
    if (m.sigma && m.sigma_over_star) throw ConfigError("map: give sigma or sigma_over_star, not both");
  } else if (m.family == "affine") {
    m.lambda = r.get<double>("lambda", 0.5);
  } else if (m.family == "power_nonhyp") {
    m.alpha = r.get<double>("alpha", 1.0);
    m.r = r.get<int>("r", 2);
  } else if (m.family == "tabulated") {
    m.knots = r.need<std::vector<double>>("knots");
    m.values = r.need<std::vector<double>>("values");
  } else {
    throw ConfigError("map.family must be tanh_affine, affine, power_nonhyp or tabulated");
  }
  return m;
}

double resolved_sigma(const MapConfig& m, Reader& r) {
  if (m.sigma) return *m.sigma;
  if (m.family == "tanh_affine" && m.sigma_over_star) {
    if (!(m.b > 2.0)) throw ConfigError("sigma_over_star needs b > 2 (no bifurcation otherwise)");
    const double s = *m.sigma_over_star * bifurcation_parameter(m.b).sigma_star;
    r.set("sigma", s);
    return s;
  }
  throw ConfigError("map.sigma is required for this command");
}

RandomMap make_map(const MapConfig& m, Reader& r) {
  return setup([&] {
    const double sigma = resolved_sigma(m, r);
    Interval domain{};
    MapFamily family;
    if (m.family == "tanh_affine") {
      family = TanhAffine{m.b, sigma};
      domain = m.domain.value_or(tanh_affine_domain(m.b, sigma));
    } else if (m.family == "affine") {
      family = Affine{m.lambda, sigma};
      if (m.domain) {
        domain = *m.domain;
      } else {
        if (!(std::abs(m.lambda) < 1.0)) throw ConfigError("affine map needs an explicit domain unless |lambda| < 1");
        const double reach = std::abs(sigma) / (1.0 - std::abs(m.lambda));
        domain = {-reach - 1.0, reach + 1.0};
      }
    } else if (m.family == "power_nonhyp") {
      family = PowerNonhyp{m.alpha, m.r, sigma};
      if (!m.domain) throw ConfigError("power_nonhyp needs map.domain");
      domain = *m.domain;
    } else {
      family = tabulated_additive(MonotoneSpline(m.knots, m.values), sigma);
      if (!m.domain) throw ConfigError("tabulated needs map.domain");
      domain = *m.domain;
    }
    r.set("domain", json::array({domain.lo, domain.hi}));
    return RandomMap(family, domain);
  });
}

NoiseModel read_noise(Reader& r) {
  const auto kind = r.get<std::string>("kind", "uniform");
  const double k = r.get<double>("k", 0.0);
  return setup([&] {
    if (kind == "uniform") return NoiseModel::from_kind(NoiseKind::uniform, k);
    if (kind == "poly_upper") return NoiseModel::from_kind(NoiseKind::poly_upper, k);
    if (kind == "poly_symmetric") return NoiseModel::from_kind(NoiseKind::poly_symmetric, k);
    throw ConfigError("noise.kind must be uniform, poly_upper or poly_symmetric");
  });
}

struct GridConfig {
  std::size_t cells = 2000;
  Grading grading = Grading::geometric;
  double ratio = 0.995;
  double min_width = 1e-14;
  bool anchor_upper = true;
  int quadrature = 4;
};

GridConfig read_grid(Reader& r) {
  GridConfig g;
  g.cells = r.get<std::size_t>("cells", 2000);
  const auto grading = r.get<std::string>("grading", "geometric");
  if (grading == "uniform") {
    g.grading = Grading::uniform;
  } else if (grading != "geometric") {
    throw ConfigError("grid.grading must be uniform or geometric");
  }
  g.ratio = r.get<double>("ratio", 0.995);
  g.min_width = r.get<double>("min_width", 1e-14);
  const auto anchor = r.get<std::string>("anchor", "upper");
  if (anchor == "lower") {
    g.anchor_upper = false;
  } else if (anchor != "upper") {
    throw ConfigError("grid.anchor must be upper or lower");
  }
  g.quadrature = r.get<int>("quadrature", 4);
  if (g.cells < 1) throw ConfigError("grid.cells must be >= 1");
  if (g.quadrature < 1 || g.quadrature > 64) throw ConfigError("grid.quadrature must be in [1, 64]");
  return g;
}

BoundaryTolerances read_tolerances(Reader& run) {
  Reader t = run.child("tolerances");
  BoundaryTolerances tol;
  tol.neutral = t.get<double>("neutral", tol.neutral);
  tol.tangency = t.get<double>("tangency", tol.tangency);
  tol.derivative = t.get<double>("derivative", tol.derivative);
  tol.scan_points = t.get<int>("scan_points", tol.scan_points);
  run.adopt("tolerances", t);
  return tol;
}

struct Output {
  fs::path dir;
  bool csv = true;
  bool json_files = true;
};

Output read_output(Reader& r, const Flags& flags) {
  Output o;
  std::string dir = r.get<std::string>("directory", "out");
  if (flags.out) {
    dir = *flags.out;
    r.set("directory", dir);
  }
  o.dir = dir;
  const auto formats = r.get<std::vector<std::string>>("formats", {"csv", "json"});
  o.csv = o.json_files = false;
  for (const auto& f : formats) {
    if (f == "csv") {
      o.csv = true;
    } else if (f == "json") {
      o.json_files = true;
    } else {
      throw ConfigError("output.formats entries must be csv or json");
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// Writers

std::string num(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(16) << v;
  return os.str();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

struct Meta {
  std::string command;
  json config;

  json as_json() const { return {{"version", BOUNDTAIL_VERSION}, {"command", command}, {"config", config}}; }
};

std::ofstream open_out(const Output& out, const std::string& name) {
  fs::create_directories(out.dir);
  std::ofstream f(out.dir / name, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + (out.dir / name).string());
  return f;
}

void write_json(const Output& out, const std::string& name, const json& j) {
  if (!out.json_files) return;
  auto f = open_out(out, name);
  f << j.dump(2) << '\n';
}

// CSV with a '#' metadata preamble, then a header row; LF line ends.
std::ofstream open_csv(const Output& out, const std::string& name, const Meta& meta, const std::string& header) {
  auto f = open_out(out, name);
  f << "# boundtail " << BOUNDTAIL_VERSION << " " << meta.command << '\n';
  f << "# config " << meta.config.dump() << '\n';
  f << header << '\n';
  return f;
}

json interval_json(const MinimalInvariantInterval& m) {
  return {{"lo", m.lo}, {"hi", m.hi}, {"verified", m.verified}, {"ambiguous", m.ambiguous}};
}

json classification_json(const BoundaryClassification& c, int k) {
  json j;
  if (const auto* h = std::get_if<Hyperbolic>(&c.kind)) {
    j = {{"kind", "hyperbolic"}, {"lambda", h->lambda}, {"c1", hyperbolic_constant(k, h->lambda)}};
  } else {
    const auto& nh = std::get<Nonhyperbolic>(c.kind);
    j = {{"kind", "nonhyperbolic"}, {"r", nh.r}, {"alpha", nh.alpha},
         {"c2", nonhyperbolic_constant(k, nh.r, nh.alpha)}};
  }
  j["gamma"] = c.gamma;
  j["hitting_constant"] = hitting_constant(c);
  return j;
}

json fixed_points_json(const std::vector<FixedPoint>& pts) {
  json a = json::array();
  for (const auto& p : pts) {
    a.push_back({{"x", p.x_star}, {"multiplier", p.multiplier}, {"stability", to_string(p.stability)}});
  }
  return a;
}

json report_json(const ScalingReport& r) {
  json j = {{"mode", to_string(r.mode)},
            {"estimate", finite_or_null(r.estimate)},
            {"theory", r.theory},
            {"rel_error", finite_or_null(r.rel_error)},
            {"converged", r.converged},
            {"window", r.window},
            {"raw_values", r.raw_values},
            {"warnings", r.warnings}};
  if (r.fit) {
    j["fit"] = {{"slope", r.fit->slope},
                {"intercept", r.fit->intercept},
                {"residual", r.fit->residual},
                {"theory_residual", r.fit->theory_residual}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Shared pieces of the density pipeline

struct DensityOptions {
  double tol = 1e-13;
  long long max_iter = 1'000'000;
  double relative_tol = 0.0;
};

DensityOptions read_density_options(Reader& run, double relative_default) {
  DensityOptions d;
  d.tol = run.get<double>("tol", 1e-13);
  d.max_iter = run.get<long long>("max_iter", 1'000'000);
  d.relative_tol = run.get<double>("relative_tol", relative_default);
  return d;
}

struct IntervalRun {
  StationaryDensity density;
  std::size_t nonzeros;
  double max_row_defect;
};

IntervalRun solve_interval(const RandomMap& map, const NoiseModel& noise, const MinimalInvariantInterval& m,
                           const GridConfig& g, const DensityOptions& d) {
  GridSpec spec{g.grading, g.ratio, g.anchor_upper ? m.hi : m.lo, g.min_width};
  const Grid grid = build_grid(m.as_interval(), g.cells, spec);
  const TransitionMatrix p = assemble(map, noise, grid, g.quadrature);
  StationaryOptions opt;
  opt.tol = d.tol;
  opt.max_iter = d.max_iter;
  opt.relative_tol = d.relative_tol;
  opt.support = m;
  return {stationary(p, opt), p.nonzeros(), p.max_row_defect()};
}

std::vector<MinimalInvariantInterval> pick_intervals(const std::vector<MinimalInvariantInterval>& all,
                                                     long long index) {
  if (index < 0) return all;
  if (static_cast<std::size_t>(index) >= all.size()) {
    throw ConfigError("run.interval = " + std::to_string(index) + " but only " + std::to_string(all.size()) +
                      " minimal invariant interval(s) exist");
  }
  return {all[static_cast<std::size_t>(index)]};
}

std::vector<double> sigma_grid(Reader& run, double lo_default, double hi_default) {
  if (auto s = run.maybe<std::vector<double>>("sigmas")) {
    if (run.has("sigma_min") || run.has("sigma_max") || run.has("points")) {
      throw ConfigError("run: give sigmas or sigma_min/sigma_max/points, not both");
    }
    return *s;
  }
  const double lo = run.get<double>("sigma_min", lo_default);
  const double hi = run.get<double>("sigma_max", hi_default);
  const int n = run.get<int>("points", 100);
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("run needs 0 < sigma_min <= sigma_max and points >= 1");
  std::vector<double> s(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return s;
}

StationaryDensity read_density_csv(const fs::path& path, long long interval) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read density file " + path.string());
  std::string line;
  bool header = false;
  std::vector<double> edges;
  std::vector<double> phi;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "interval,x_lo,x_hi,x_mid,phi") throw ConfigError("unexpected density.csv header: " + line);
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ConfigError("malformed density.csv row: " + line);
    }
    if (v.size() != 5) throw ConfigError("malformed density.csv row: " + line);
    if (static_cast<long long>(v[0]) != interval) continue;
    if (edges.empty()) edges.push_back(v[1]);
    edges.push_back(v[2]);
    phi.push_back(v[4]);
  }
  if (phi.empty()) throw ConfigError("density file has no rows for interval " + std::to_string(interval));
  Grid grid = setup([&] { return Grid(edges, GridSpec{}, 1.0); });
  std::vector<double> mass(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) mass[j] = phi[j] * grid.width(j);
  MinimalInvariantInterval support{grid.lo(), grid.hi(), false};
  return StationaryDensity{grid, phi, mass, support, 0.0, 0};
}

// ---------------------------------------------------------------------------
// Commands. Each parses everything first (errors -> exit 2), then computes.

struct Parsed {
  Reader root;
  Reader map_r;
  Reader noise_r;
  Reader grid_r;
  Reader run_r;
  Reader out_r;
  MapConfig map;
  GridConfig grid;
  Output out;

  Parsed(const json& config, const Flags& flags)
      : root(config, "config"),
        map_r(root.child("map")),
        noise_r(root.child("noise")),
        grid_r(root.child("grid")),
        run_r(root.child("run")),
        out_r(root.child("output")) {
    map = read_map(map_r);
    grid = read_grid(grid_r);
    out = read_output(out_r, flags);
  }

  // Closes every section and returns the resolved config.
  json finish() {
    root.adopt("map", map_r);
    root.adopt("noise", noise_r);
    root.adopt("grid", grid_r);
    root.adopt("run", run_r);
    root.adopt("output", out_r);
    root.close();
    return root.resolved();
  }
};

void cmd_analyze(Parsed& p, std::ostream& log) {
  const RandomMap map = make_map(p.map, p.map_r);
  const NoiseModel noise = read_noise(p.noise_r);
  const BoundaryTolerances tol = read_tolerances(p.run_r);
  const Meta meta{"analyze", p.finish()};

  std::vector<FixedPoint> upper;
  std::vector<FixedPoint> lower;
  try {
    upper = find_fixed_points(map, Extremal::upper, map.domain(), tol);
  } catch (const NoFixedPointError&) {
  }
  try {
    lower = find_fixed_points(map, Extremal::lower, map.domain(), tol);
  } catch (const NoFixedPointError&) {
  }
  const auto intervals = minimal_invariant_intervals(map, tol);
  json ivs = json::array();
  for (const auto& m : intervals) {
    json j = interval_json(m);
    j["upper_boundary"] = classification_json(classify_boundary(map, m.hi, tol), noise.k());
    ivs.push_back(j);
  }
  json report = {{"meta", meta.as_json()},
                 {"map", map.name()},
                 {"noise", noise.name()},
                 {"upper_fixed_points", fixed_points_json(upper)},
                 {"lower_fixed_points", fixed_points_json(lower)},
                 {"intervals", ivs}};
  if (p.map.family == "tanh_affine" && p.map.b > 2.0) {
    const auto bp = bifurcation_parameter(p.map.b);
    report["sigma_star"] = bp.sigma_star;
    report["x_c"] = bp.x_plus;
  }
  write_json(p.out, "analysis.json", report);
  log << intervals.size() << " minimal invariant interval(s)\n";
}

void cmd_density(Parsed& p, std::ostream& log) {
  const RandomMap map = make_map(p.map, p.map_r);
  const NoiseModel noise = read_noise(p.noise_r);
  const BoundaryTolerances tol = read_tolerances(p.run_r);
  const DensityOptions dopt = read_density_options(p.run_r, 0.0);
  const auto index = p.run_r.get<long long>("interval", -1);
  const Meta meta{"density", p.finish()};

  const auto all = minimal_invariant_intervals(map, tol);
  const auto chosen = pick_intervals(all, index);
  std::optional<std::ofstream> csv;
  if (p.out.csv) csv = open_csv(p.out, "density.csv", meta, "interval,x_lo,x_hi,x_mid,phi");
  json runs = json::array();
  for (std::size_t n = 0; n < chosen.size(); ++n) {
    const auto label = index < 0 ? static_cast<long long>(n) : index;
    const IntervalRun run = solve_interval(map, noise, chosen[n], p.grid, dopt);
    const StationaryDensity& s = run.density;
    double mass = 0.0;
    for (double m : s.mass) mass += m;
    if (csv) {
      for (std::size_t j = 0; j < s.grid.size(); ++j) {
        *csv << label << ',' << num(s.grid.edges()[j]) << ',' << num(s.grid.edges()[j + 1]) << ','
             << num(s.grid.mid(j)) << ',' << num(s.phi[j]) << '\n';
      }
    }
    runs.push_back({{"interval", label},
                    {"support", interval_json(chosen[n])},
                    {"cells", s.grid.size()},
                    {"effective_ratio", s.grid.effective_ratio()},
                    {"nonzeros", run.nonzeros},
                    {"max_row_defect", run.max_row_defect},
                    {"residual", s.residual},
                    {"iterations", s.iterations},
                    {"mass", mass}});
    log << "interval " << label << ": residual " << s.residual << " after " << s.iterations << " iterations\n";
  }
  write_json(p.out, "meta.json", {{"meta", meta.as_json()}, {"densities", runs}});
}

void cmd_bifurcation(Parsed& p, std::ostream& log) {
  const BoundaryTolerances tol = read_tolerances(p.run_r);
  std::vector<double> sigmas;
  json extra = json::object();
  if (p.map.family == "tanh_affine") {
    if (!(p.map.b > 2.0)) {
      throw ConfigError("bifurcation needs b > 2 for tanh_affine (b = " + num(p.map.b) + ")");
    }
    const auto bp = bifurcation_parameter(p.map.b);
    extra = {{"sigma_star", bp.sigma_star},
             {"sigma_star_closed_form", sigma_star_closed_form(p.map.b)},
             {"x_c", bp.x_plus}};
    sigmas = sigma_grid(p.run_r, 0.05 * bp.sigma_star, 2.5 * bp.sigma_star);
  } else if (p.map.family == "affine") {
    sigmas = sigma_grid(p.run_r, 0.05, 2.0);
  } else {
    throw ConfigError("bifurcation supports map.family tanh_affine or affine");
  }
  read_noise(p.noise_r);
  const Meta meta{"bifurcation", p.finish()};

  const auto rows = p.map.family == "tanh_affine" ? bifurcation_scan(p.map.b, sigmas, tol)
                                                   : bifurcation_scan_affine(p.map.lambda, sigmas, tol);
  if (p.out.csv) {
    auto csv = open_csv(p.out, "bifurcation.csv", meta, "sigma,n_intervals,interval_bounds");
    for (const auto& row : rows) {
      csv << num(row.sigma) << ',' << row.intervals.size() << ',';
      for (std::size_t i = 0; i < row.intervals.size(); ++i) {
        csv << (i ? ";" : "") << num(row.intervals[i].lo) << ':' << num(row.intervals[i].hi);
      }
      csv << '\n';
    }
  }
  json m = {{"meta", meta.as_json()}, {"rows", rows.size()}};
  m.update(extra);
  write_json(p.out, "meta.json", m);
  log << rows.size() << " sigma values scanned\n";
}

void cmd_scaling(Parsed& p, std::ostream& log) {
  const RandomMap map = make_map(p.map, p.map_r);
  const NoiseModel noise = read_noise(p.noise_r);
  const BoundaryTolerances tol = read_tolerances(p.run_r);
  const DensityOptions dopt = read_density_options(p.run_r, 1e-8);
  const auto index = p.run_r.get<long long>("interval", 0);
  if (index < 0) throw ConfigError("run.interval must be >= 0 for scaling");
  Reader win = p.run_r.child("window");
  const auto d_min = win.maybe<double>("d_min");
  const auto d_max = win.maybe<double>("d_max");
  const auto points = win.get<int>("points", 20);

  const auto all = minimal_invariant_intervals(map, tol);
  const auto chosen = pick_intervals(all, index).front();
  const double x_plus = chosen.hi;
  const BoundaryClassification cls = classify_boundary(map, x_plus, tol);
  // Hyperbolic ln phi ~ c1 ln^2 d stays in double range down to 1e-4; the
  // nonhyperbolic tail decays like exp(c2 ln d / d) and needs a shallower window.
  const double lo = d_min.value_or(cls.hyperbolic() ? 1e-4 : 3e-3);
  const double hi = d_max.value_or(cls.hyperbolic() ? 1e-1 : 3e-1);
  win.set("d_min", lo);
  win.set("d_max", hi);
  p.run_r.adopt("window", win);
  const auto window = setup([&] { return log_window(lo, hi, points); });
  const Meta meta{"scaling", p.finish()};

  const IntervalRun run = solve_interval(map, noise, chosen, p.grid, dopt);
  const StationaryDensity& s = run.density;
  const int k = noise.k();
  const ScalingReport dens = density_tail_exponent(s, x_plus, cls, k, window);
  const ScalingReport tail = measure_tail_exponent(s, x_plus, cls, k, window);
  json loglog;
  try {
    const LogLogFit fit = loglog_fit(s, x_plus, cls, k, window);
    loglog = {{"slope", fit.details.slope},
              {"intercept", fit.details.intercept},
              {"residual", fit.details.residual},
              {"theory_residual", fit.details.theory_residual},
              {"theory_intercept", fit.theory_intercept},
              {"window", fit.window}};
  } catch (const WindowError& e) {
    loglog = {{"error", e.what()}};
  }

  if (p.out.csv) {
    auto csv = open_csv(p.out, "scaling.csv", meta, "d,raw_value,phi,tail_raw_value");
    for (std::size_t i = 0; i < dens.window.size(); ++i) {
      const double d = dens.window[i];
      double tail_raw = std::nan("");
      for (std::size_t t = 0; t < tail.window.size(); ++t) {
        if (tail.window[t] == d) tail_raw = tail.raw_values[t];
      }
      csv << num(d) << ',' << num(dens.raw_values[i]) << ',' << num(density_at(s, x_plus - d)) << ','
          << num(tail_raw) << '\n';
    }
  }
  write_json(p.out, "report.json",
             {{"meta", meta.as_json()},
              {"x_plus", x_plus},
              {"support", interval_json(chosen)},
              {"boundary", classification_json(cls, k)},
              {"stationary", {{"residual", s.residual}, {"iterations", s.iterations}, {"cells", s.grid.size()},
                              {"effective_ratio", s.grid.effective_ratio()}}},
              {"density", report_json(dens)},
              {"tail", report_json(tail)},
              {"loglog", loglog},
              {"density_tail_agreement", std::abs(dens.estimate - tail.estimate) / std::abs(dens.estimate)}});
  log << "density estimate " << dens.estimate << " vs theory " << dens.theory << " (rel " << dens.rel_error << ")\n";
}

void cmd_simulate(Parsed& p, const Flags& flags, std::ostream& log) {
  const RandomMap map = make_map(p.map, p.map_r);
  const NoiseModel noise = read_noise(p.noise_r);
  Reader& run = p.run_r;
  SimulationPlan plan;
  const Interval dom = map.domain();
  plan.x0 = run.get<double>("x0", 0.5 * (dom.lo + dom.hi));
  plan.burn_in = run.get<long long>("burn_in", plan.burn_in);
  plan.n_samples = run.get<long long>("samples", plan.n_samples);
  plan.n_chains = run.get<int>("chains", plan.n_chains);
  plan.seed = run.get<std::uint64_t>("seed", 0);
  if (flags.seed) {
    plan.seed = *flags.seed;
    run.set("seed", plan.seed);
  }
  std::optional<StationaryDensity> reference;
  if (auto path = run.maybe<std::string>("density_csv")) {
    reference = read_density_csv(*path, run.get<long long>("density_interval", 0));
  }
  Reader hist = run.child("histogram");
  std::optional<Grid> grid;
  if (reference) {
    if (hist.has("lo") || hist.has("hi") || hist.has("cells")) {
      throw ConfigError("run.histogram is taken from density_csv; do not set it as well");
    }
    grid = reference->grid;
  } else {
    const double lo = hist.get<double>("lo", dom.lo);
    const double hi = hist.get<double>("hi", dom.hi);
    const auto cells = hist.get<std::size_t>("cells", p.grid.cells);
    grid = setup([&] { return build_grid({lo, hi}, cells); });
  }
  run.adopt("histogram", hist);
  const Meta meta{"simulate", p.finish()};

  const EmpiricalMeasure m = simulate(map, noise, plan, *grid);
  if (p.out.csv) {
    auto csv = open_csv(p.out, "histogram.csv", meta, "x_mid,count");
    for (std::size_t j = 0; j < m.grid.size(); ++j) csv << num(m.grid.mid(j)) << ',' << m.counts[j] << '\n';
  }
  json summary = {{"meta", meta.as_json()},
                  {"total", m.total},
                  {"min_seen", m.min_seen},
                  {"max_seen", m.max_seen},
                  {"seed", plan.seed}};
  if (reference) {
    summary["l1_distance"] = l1_distance(m, *reference);
    log << "L1 distance to reference density " << summary["l1_distance"].get<double>() << '\n';
  }
  write_json(p.out, "summary.json", summary);
  log << m.total << " samples recorded\n";
}

const char* kDefaults = R"(Config file (JSON), sections and defaults:
  map:    family = tanh_affine | affine | power_nonhyp | tabulated (default tanh_affine)
          tanh_affine: b = 3, sigma or sigma_over_star (one required)
          affine: lambda = 0.5, sigma          power_nonhyp: alpha = 1, r = 2, sigma, domain
          tabulated: knots, values, sigma, domain
          domain = [lo, hi] (default: covers every invariant interval for tanh_affine/affine)
  noise:  kind = uniform | poly_upper | poly_symmetric (uniform), k = 0
  grid:   cells = 2000, grading = geometric | uniform (geometric), ratio = 0.995,
          min_width = 1e-14, anchor = upper | lower (upper), quadrature = 4
  run:    tolerances = {neutral 1e-6, tangency 1e-10, derivative 1e-7, scan_points 2000}
          density:     interval = -1 (all), tol = 1e-13, max_iter = 1e6, relative_tol = 0
          bifurcation: sigmas = [...] or sigma_min, sigma_max, points = 100
                       (tanh_affine 0.05..2.5 sigma*, affine 0.05..2)
          scaling:     interval = 0, tol = 1e-13, max_iter = 1e6, relative_tol = 1e-8,
                       window = {d_min, d_max, points = 20}
                       (hyperbolic 1e-4..1e-1, nonhyperbolic 3e-3..3e-1)
          simulate:    x0 = domain midpoint, burn_in = 1000, samples = 1e6, chains = 1, seed = 0,
                       histogram = {lo, hi, cells = grid.cells} or density_csv + density_interval = 0
  output: directory = out, formats = [csv, json]
Unknown keys are errors. Exit codes: 0 success, 2 config error, 3 numerical failure.)";

}  // namespace

int run_command(const std::string& command, const json& config, const Flags& flags, std::ostream& log) {
  try {
    if (flags.threads) set_thread_count(*flags.threads);
    Parsed p(config, flags);
    if (command == "analyze") {
      cmd_analyze(p, log);
    } else if (command == "density") {
      cmd_density(p, log);
    } else if (command == "bifurcation") {
      cmd_bifurcation(p, log);
    } else if (command == "scaling") {
      cmd_scaling(p, log);
    } else if (command == "simulate") {
      cmd_simulate(p, flags, log);
    } else {
      throw ConfigError("unknown command " + command);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const fs::filesystem_error& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Stationary densities and boundary tails of bounded-noise random maps"};
  app.footer(kDefaults);
  app.set_version_flag("--version", BOUNDTAIL_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  Flags flags;
  std::string out;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"analyze", "fixed points, invariant intervals and boundary classes"},
      {"density", "Ulam stationary densities per invariant interval"},
      {"bifurcation", "interval count over a sigma scan"},
      {"scaling", "tail exponent estimates at the upper boundary"},
      {"simulate", "Monte Carlo histogram, optionally against a density"}};
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory (overrides output.directory)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores (default)");
    sub->add_option("--seed", seed, "RNG seed (overrides run.seed)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  auto* sub = app.get_subcommands().front();
  if (sub->count("--out")) flags.out = out;
  if (sub->count("--threads")) flags.threads = threads;
  if (sub->count("--seed")) flags.seed = seed;

  json config;
  try {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot read config " + config_path);
    config = json::parse(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << config_path << ": " << e.what() << '\n';
    return kConfigError;
  }
  return run_command(sub->get_name(), config, flags, std::cerr);
}

}  // namespace boundtail::cli
