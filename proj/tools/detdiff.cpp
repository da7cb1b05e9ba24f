// detdiff: diffusion coefficients of piecewise-linear lifting maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detdiff/detdiff.hpp"
#include "detdiff/io.hpp"

using namespace detdiff;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240611;

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw io_error("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

struct Options {
  std::string map;
  std::string partition_system;
  std::string method = "spectral";
  std::size_t N = 100000;
  std::size_t n = 50;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string lambda_grid;
  std::optional<double> from, to, step;
  std::string checkpoints;
  std::string snapshots;
  std::string samples;
  std::string model = "approximate";
  std::string lambda = "2";
  double h = 1.0;
  std::size_t reflections = 200;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_surd(item).value());
  }
  if (out.empty() && !text.empty()) throw validation_error(what + ": empty list");
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (double v : parse_list(text, what)) {
    if (!(v >= 0.0) || v != std::floor(v)) throw validation_error(what + ": entries must be non-negative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

struct LoadedMap {
  json spec;
  PiecewiseLinearLiftMap map;
};

LoadedMap load_map(const Options& o) {
  if (o.map.empty()) throw validation_error("--map is required");
  auto spec = load_spec_argument(o.map, "map spec");
  auto map = map_from_json(spec);
  return {std::move(spec), std::move(map)};
}

/// Partition for the spectral method: from --partition-system if given,
/// else the map's own breakpoints, else those plus 0.
MarkovPartition resolve_partition(const Options& o, const PiecewiseLinearLiftMap& map) {
  if (!o.partition_system.empty()) {
    const auto sol = solve_partition_system(partition_system_from_json(load_spec_argument(o.partition_system, "partition system")));
    const auto rep = validate_consistency(map, sol.partition);
    if (!rep.consistent) {
      std::ostringstream msg;
      msg << "partition from the system (slope " << sol.lambda << ") is not consistent with the map: " << rep.detail;
      throw validation_error(msg.str());
    }
    return sol.partition;
  }
  const auto own = MarkovPartition::from_map(map);
  const auto rep = validate_consistency(map, own);
  if (rep.consistent) return own;
  auto y = std::vector<double>(own.breakpoints().begin(), own.breakpoints().end());
  if (std::find(y.begin(), y.end(), 0.0) == y.end()) {
    y.push_back(0.0);
    std::sort(y.begin(), y.end());
    const MarkovPartition with_zero(y);
    if (validate_consistency(map, with_zero).consistent) return with_zero;
  }
  throw validation_error("no Markov partition found for this map (" + rep.detail +
                         "); pass --partition-system");
}

DiffusionReport mc_report(const PiecewiseLinearLiftMap& map, const Options& o) {
  const auto stats = estimate_stats(simulate_ensemble(map, o.N, o.n, o.seed));
  DiffusionReport r;
  r.method = Method::monte_carlo;
  r.D = stats.d_increment;
  r.drift = stats.drift_estimate;
  r.diagnostics["stderr"] = stats.d_increment_stderr;
  r.diagnostics["d_variance_over_2n"] = stats.d_estimate;
  r.diagnostics["d_variance_over_2n_stderr"] = stats.d_stderr;
  r.diagnostics["samples"] = static_cast<double>(stats.N);
  r.diagnostics["steps"] = static_cast<double>(stats.n);
  r.diagnostics["ks"] = stats.ks ? *stats.ks : std::nan("");
  return r;
}

DiffusionReport slope_report(const PiecewiseLinearLiftMap& map, Method m) {
  const auto slope = map.linear_slope();
  if (!slope) throw validation_error(std::string(method_name(m)) + " method needs a linear map f(x) = L x");
  DiffusionReport r;
  r.method = m;
  r.D = m == Method::heuristic ? heuristic_D(*slope) : omega_approx_D(*slope);
  r.diagnostics["approximate"] = 1.0;
  return r;
}

DiffusionReport run_method(const std::string& name, const PiecewiseLinearLiftMap& map, const Options& o) {
  if (name == "closed-form") return closed_form_report(map);
  if (name == "spectral") {
    auto r = diffusion_spectral(build_transition_matrices(map, resolve_partition(o, map)));
    return r;
  }
  if (name == "heuristic") return slope_report(map, Method::heuristic);
  if (name == "omega") return slope_report(map, Method::omega);
  if (name == "mc") return mc_report(map, o);
  throw validation_error("unknown method '" + name + "'");
}

int cmd_diffusion(const Options& o) {
  const auto loaded = load_map(o);
  auto prov = provenance_for(loaded.spec);
  json doc;
  doc["provenance"] = json::object();
  doc["map"] = loaded.spec;
  if (o.method != "all") {
    if (o.method == "mc") {
      prov.seed = o.seed;
      prov.has_seed = true;
    }
    doc["report"] = report_to_json(run_method(o.method, loaded.map, o));
  } else {
    prov.seed = o.seed;
    prov.has_seed = true;
    std::vector<std::pair<std::string, double>> values;
    doc["reports"] = json::array();
    for (const std::string name : {"closed-form", "spectral", "heuristic", "omega", "mc"}) {
      try {
        const auto r = run_method(name, loaded.map, o);
        doc["reports"].push_back(report_to_json(r));
        values.emplace_back(name, r.D);
      } catch (const std::exception& e) {
        json j;
        j["method"] = name;
        j["error"] = e.what();
        doc["reports"].push_back(std::move(j));
      }
    }
    doc["deltas"] = json::object();
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        doc["deltas"][values[i].first + " - " + values[j].first] = real_to_json(values[i].second - values[j].second);
      }
    }
  }
  doc["provenance"] = prov.to_json();
  Output out(o.out);
  out.stream() << doc.dump(2) << "\n";
  return 0;
}

int cmd_solve_partition(const Options& o) {
  if (o.partition_system.empty()) throw validation_error("--partition-system is required");
  const auto spec = load_spec_argument(o.partition_system, "partition system");
  const auto sys = partition_system_from_json(spec);
  const auto sol = solve_partition_system(sys);
  json doc;
  doc["provenance"] = provenance_for(spec).to_json();
  doc["polynomial"] = sol.polynomial.to_string("L");
  doc["coefficients"] = sol.polynomial.coefficients();
  doc["lambda"] = sol.lambda;
  doc["values"] = json::object();
  for (std::size_t i = 0; i < sys.unknowns.size(); ++i) doc["values"][sys.unknowns[i]] = sol.values[i];
  doc["polynomial_residual"] = static_cast<double>(sol.polynomial_residual);
  doc["system_residual"] = sol.system_residual;
  doc["breakpoints"] = std::vector<double>(sol.partition.breakpoints().begin(), sol.partition.breakpoints().end());
  doc["cell_lengths"] = sol.partition.cell_lengths();
  Output out(o.out);
  out.stream() << doc.dump(2) << "\n";
  return 0;
}

std::vector<double> scan_grid(const Options& o) {
  if (!o.lambda_grid.empty()) {
    if (o.from || o.to || o.step) throw validation_error("use either --lambda-grid or --from/--to/--step");
    return parse_list(o.lambda_grid, "--lambda-grid");
  }
  if (!o.from && !o.to && !o.step) return {};
  if (!o.from || !o.to || !o.step) throw validation_error("--from, --to and --step go together");
  if (!(*o.step > 0.0) || *o.to < *o.from) throw validation_error("need --step > 0 and --to >= --from");
  const auto count = static_cast<std::size_t>(std::floor((*o.to - *o.from) / *o.step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = *o.from + static_cast<double>(i) * *o.step;
  return grid;
}

int cmd_scan(const Options& o) {
  const auto grid = scan_grid(o);
  const auto rows = scan_lambda(grid, o.N, o.n, o.seed);
  Output out(o.out);
  auto& os = out.stream();
  json scan_spec;
  scan_spec["type"] = "linear-scan";
  scan_spec["grid"] = grid;
  auto prov = provenance_for(scan_spec);
  prov.seed = o.seed;
  prov.has_seed = true;
  prov.write_csv_comments(os);
  os << "# N " << o.N << " n " << o.n << "\n";
  for (const auto& r : rows) {
    if (!r.error.empty()) os << "# error at lambda=" << format_real(r.lambda) << ": " << r.error << "\n";
  }
  os << "lambda,d_mc,stderr,d_heuristic,d_omega,ks\n";
  for (const auto& r : rows) {
    os << format_real(r.lambda) << ',' << format_real(r.d_mc) << ',' << format_real(r.stderr_mc) << ','
       << format_real(r.d_heuristic) << ',' << format_real(r.d_omega) << ',' << format_real(r.ks) << '\n';
  }
  return 0;
}

int cmd_evolve(const Options& o) {
  const auto loaded = load_map(o);
  const auto partition = resolve_partition(o, loaded.map);
  const auto set = build_transition_matrices(loaded.map, partition);
  const auto spectral = diffusion_spectral(set);
  auto cps = o.checkpoints.empty() ? std::vector<std::size_t>{10, 50, 100, 500} : parse_counts(o.checkpoints, "--checkpoints");
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  if (cps.empty() || cps.front() == 0) throw validation_error("--checkpoints must be positive");

  std::optional<Output> snap;
  if (!o.snapshots.empty()) {
    snap.emplace(o.snapshots);
    provenance_for(loaded.spec).write_csv_comments(snap->stream());
    snap->stream() << "step,k,j,density,mass\n";
  }
  Output out(o.out);
  auto& os = out.stream();
  provenance_for(loaded.spec).write_csv_comments(os);
  os << "# D " << format_real(spectral.D) << " drift " << format_real(spectral.drift) << "\n";
  os << "step,kolmogorov_distance,mass,variance_over_2n\n";
  auto density = LatticeDensity::uniform_on_main_cell(partition.cell_lengths());
  for (auto c : cps) {
    density = evolve(set, std::move(density), c - density.step());
    const auto reference = gaussian_profile(spectral.D, spectral.drift, spectral.alpha, partition.cell_lengths(), c);
    const auto [mean, var] = density.lattice_moments();
    (void)mean;
    os << c << ',' << format_real(kolmogorov_distance(density, reference)) << ',' << format_real(density.mass()) << ','
       << format_real(var / (2.0 * static_cast<double>(c))) << '\n';
    if (snap) {
      for (auto k = density.k_min(); k <= density.k_max(); ++k) {
        for (std::size_t j = 0; j < density.cell_count(); ++j) {
          snap->stream() << c << ',' << k << ',' << j + 1 << ',' << format_real(density.value(k, j)) << ','
                         << format_real(density.value(k, j) * density.cell_lengths()[j]) << '\n';
        }
      }
    }
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  const auto loaded = load_map(o);
  const auto samples = simulate_ensemble(loaded.map, o.N, o.n, o.seed);
  const auto s = estimate_stats(samples);
  auto prov = provenance_for(loaded.spec);
  prov.seed = o.seed;
  prov.has_seed = true;
  Output out(o.out);
  auto& os = out.stream();
  prov.write_csv_comments(os);
  if (!s.diagnostic.empty()) os << "# " << s.diagnostic << "\n";
  os << "N,n,mean,variance,d_estimate,d_stderr,d_increment,d_increment_stderr,drift_estimate,ks,aborted\n";
  os << s.N << ',' << s.n << ',' << format_real(s.mean) << ',' << format_real(s.variance) << ','
     << format_real(s.d_estimate) << ',' << format_real(s.d_stderr) << ',' << format_real(s.d_increment) << ','
     << format_real(s.d_increment_stderr) << ',' << format_real(s.drift_estimate) << ','
     << format_real(s.ks ? *s.ks : std::nan("")) << ',' << samples.aborted << '\n';
  if (!o.samples.empty()) {
    Output f(o.samples);
    prov.write_csv_comments(f.stream());
    f.stream() << "x_final\n";
    for (double x : samples.final_positions) f.stream() << format_real(x) << '\n';
  }
  return 0;
}

int cmd_billiard(const Options& o) {
  const double lambda = parse_surd(o.lambda).value();
  ChannelOptions copts;
  copts.lambda = lambda;
  if (!o.checkpoints.empty()) copts.checkpoints = parse_counts(o.checkpoints, "--checkpoints");
  const Sawtooth f{lambda};
  ChannelResult res;
  if (o.model == "approximate") {
    res = simulate_channel(f, o.N, o.reflections, o.seed, copts);
  } else if (o.model == "exact") {
    const double h = o.h;
    res = simulate_exact_channel([&](double x) { return 0.5 * std::atan(f(x) / h); }, h, o.N, o.reflections, o.seed, copts);
  } else {
    throw validation_error("--model must be 'approximate' or 'exact'");
  }
  json spec;
  spec["type"] = "billiard";
  spec["model"] = o.model;
  spec["lambda"] = lambda;
  spec["h"] = o.h;
  auto prov = provenance_for(spec);
  prov.seed = o.seed;
  prov.has_seed = true;
  Output out(o.out);
  auto& os = out.stream();
  prov.write_csv_comments(os);
  os << "# growth_exponent " << format_real(res.growth_exponent) << " discarded " << res.discarded << "\n";
  if (!res.warning.empty()) {
    os << "# warning: " << res.warning << "\n";
    std::cerr << "warning: " << res.warning << "\n";
  }
  os << "checkpoint,variance,theoretical_variance,exponent_so_far\n";
  for (const auto& c : res.checkpoints) {
    os << c.step << ',' << format_real(c.variance) << ',' << format_real(c.theoretical_variance) << ','
       << format_real(c.exponent_so_far) << '\n';
  }
  return 0;
}

int fail(const char* kind, const std::string& what, int code) {
  std::cerr << "error[" << kind << "]: " << what << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic diffusion in piecewise-linear lifting maps"};
  app.require_subcommand(1);
  Options o;

  const auto add_map = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--map", o.map, "map: inline JSON, JSON file, or shorthand like 'linear lambda=2+sqrt(3)'");
    if (required) opt->required();
  };
  const auto add_partition = [&](CLI::App* c) {
    c->add_option("--partition-system", o.partition_system, "partition equation system (JSON or file)");
  };
  const auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output file (default stdout)"); };

  auto* solve = app.add_subcommand("solve-partition", "solve a partition equation system for the slope");
  add_partition(solve);
  add_out(solve);

  auto* diffusion = app.add_subcommand("diffusion", "diffusion coefficient by one or all methods");
  add_map(diffusion, true);
  add_partition(diffusion);
  diffusion->add_option("--method", o.method, "closed-form | spectral | heuristic | omega | mc | all")
      ->check(CLI::IsMember({"closed-form", "spectral", "heuristic", "omega", "mc", "all"}));
  diffusion->add_option("--N", o.N, "Monte Carlo samples")->check(CLI::PositiveNumber);
  diffusion->add_option("--n", o.n, "Monte Carlo steps")->check(CLI::PositiveNumber);
  diffusion->add_option("--seed", o.seed, "random seed");
  add_out(diffusion);

  auto* scan = app.add_subcommand("scan", "Monte Carlo D(L) for f(x) = L x over a grid");
  scan->add_option("--from", o.from, "first slope");
  scan->add_option("--to", o.to, "last slope");
  scan->add_option("--step", o.step, "grid step");
  scan->add_option("--lambda-grid", o.lambda_grid, "comma-separated slopes");
  scan->add_option("--N", o.N, "samples per slope")->check(CLI::PositiveNumber);
  scan->add_option("--n", o.n, "steps")->check(CLI::PositiveNumber);
  scan->add_option("--seed", o.seed, "random seed");
  add_out(scan);

  auto* evolve_cmd = app.add_subcommand("evolve", "evolve the lattice density and track the distance to the Gaussian");
  add_map(evolve_cmd, true);
  add_partition(evolve_cmd);
  evolve_cmd->add_option("--checkpoints", o.checkpoints, "comma-separated step counts (default 10,50,100,500)");
  evolve_cmd->add_option("--snapshots", o.snapshots, "CSV file for density snapshots at each checkpoint");
  add_out(evolve_cmd);

  auto* simulate = app.add_subcommand("simulate", "ensemble simulation and statistics");
  add_map(simulate, true);
  simulate->add_option("--N", o.N, "number of samples")->check(CLI::PositiveNumber);
  simulate->add_option("--n", o.n, "number of steps")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", o.seed, "random seed");
  simulate->add_option("--samples", o.samples, "CSV file for the final positions");
  add_out(simulate);

  auto* billiard = app.add_subcommand("billiard", "billiard-channel ensemble with f(x) = L frac(x)");
  billiard->add_option("--lambda", o.lambda, "slope L of the wall profile");
  billiard->add_option("--model", o.model, "approximate | exact");
  billiard->add_option("--half-width", o.h, "channel half-width (exact model)");
  billiard->add_option("--N", o.N, "number of samples")->check(CLI::PositiveNumber);
  billiard->add_option("--n", o.reflections, "number of reflections")->check(CLI::PositiveNumber);
  billiard->add_option("--seed", o.seed, "random seed");
  billiard->add_option("--checkpoints", o.checkpoints, "comma-separated checkpoints (default n/8,n/4,n/2,n)");
  add_out(billiard);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("validation", e.what(), 2);
  }

  try {
    if (*solve) return cmd_solve_partition(o);
    if (*diffusion) return cmd_diffusion(o);
    if (*scan) return cmd_scan(o);
    if (*evolve_cmd) return cmd_evolve(o);
    if (*simulate) return cmd_simulate(o);
    if (*billiard) return cmd_billiard(o);
  } catch (const validation_error& e) {
    return fail("validation", e.what(), 2);
  } catch (const numerical_error& e) {
    return fail("numerical", e.what(), 3);
  } catch (const io_error& e) {
    return fail("io", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
