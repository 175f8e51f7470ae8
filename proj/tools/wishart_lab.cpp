// Reproducible experiment runner: every module exposed as a subcommand with
// flat-file configuration, seeded runs, and CSV/JSON emission for plotting.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wishart/asymptotics.hpp"
#include "wishart/charpoly.hpp"
#include "wishart/common.hpp"
#include "wishart/diffusion.hpp"
#include "wishart/io.hpp"
#include "wishart/resolvent.hpp"
#include "wishart/specfun.hpp"

namespace {

using wishart::Complex;
using wishart::ConfigError;
using wishart::DataTable;
using wishart::EnsembleParams;
using wishart::RunConfig;
using wishart::RunManifest;

constexpr const char* kToolVersion = "wishart-lab 0.1.0";

int read_positive_int(RunConfig& cfg, const std::string& key,
                      const std::string& fallback) {
  const long long v = wishart::parse_int(cfg.get(key, fallback), key);
  if (v < 1 || v > (1LL << 31))
    throw ConfigError("key '" + key + "': expected a positive integer");
  return static_cast<int>(v);
}

EnsembleParams read_ensemble(RunConfig& cfg, bool tau_required) {
  EnsembleParams p;
  p.N = read_positive_int(cfg, "N", "1");
  p.M = read_positive_int(cfg, "M", cfg.get("N", "1"));
  p.a = wishart::parse_double(cfg.require("a"), "a");
  p.tau = tau_required ? wishart::parse_double(cfg.require("tau"), "tau")
                       : wishart::parse_double(cfg.get("tau", "1"), "tau");
  p.seed = wishart::parse_u64(cfg.get("seed", "1"), "seed");
  if (p.M < p.N) throw ConfigError("ensemble needs M >= N");
  return p;
}

double rectangularity(const EnsembleParams& p) {
  return static_cast<double>(p.N) / static_cast<double>(p.M);
}

wishart::ACPContext context_for(RunConfig& cfg, const EnsembleParams& p) {
  wishart::ACPContext ctx = wishart::make_context(p);
  if (cfg.has("max_panels"))
    ctx.quad.max_panels = read_positive_int(cfg, "max_panels", "0");
  return ctx;
}

// density: spectral density curves for a tau list (the Fig. 1 style data).
DataTable run_density(RunConfig& cfg, RunManifest& man) {
  EnsembleParams p = read_ensemble(cfg, false);
  const double r = rectangularity(p);
  auto tau_list = wishart::parse_real_grid(cfg.get("tau_list", "0.4,1,2"), "tau_list");
  const int n_lambda = read_positive_int(cfg, "lambda_points", "200");
  const double eps = wishart::parse_double(cfg.get("eps", "1e-6"), "eps");
  cfg.real_grids["tau_list"] = tau_list;

  DataTable table;
  table.columns = {"tau", "lambda", "rho", "normalization_defect"};
  for (double tau : tau_list) {
    auto [lo, hi] = wishart::support_edges(tau, p.a, r);
    std::vector<double> grid(static_cast<std::size_t>(n_lambda));
    for (int i = 0; i < n_lambda; ++i)
      grid[static_cast<std::size_t>(i)] =
          lo + (hi - lo) * (i + 0.5) / static_cast<double>(n_lambda);
    wishart::DensityCurve curve = wishart::density(tau, p.a, r, grid, eps);
    if (!(curve.normalization_defect <= 1e-6))
      throw wishart::ContractViolation(
          "density: normalization defect " +
          wishart::format_double(curve.normalization_defect) + " exceeds 1e-6");
    for (int i = 0; i < n_lambda; ++i)
      table.rows.push_back({tau, curve.lambda[static_cast<std::size_t>(i)],
                            curve.rho[static_cast<std::size_t>(i)],
                            curve.normalization_defect});
  }
  (void)man;
  return table;
}

// edges: spectral edges across a tau sweep plus the refined wall-collision
// time (bisection on the criticality flag; -1 when the sweep never crosses).
DataTable run_edges(RunConfig& cfg, RunManifest& man) {
  const double a = wishart::parse_double(cfg.require("a"), "a");
  const double tau_min = wishart::parse_double(cfg.get("tau_min", "0.1"), "tau_min");
  const double tau_max = wishart::parse_double(cfg.get("tau_max", "2"), "tau_max");
  const int points = read_positive_int(cfg, "tau_points", "25");
  if (!(tau_min >= 0.0) || !(tau_max > tau_min))
    throw ConfigError("edges needs 0 <= tau_min < tau_max");
  if (points < 2) throw ConfigError("edges needs tau_points >= 2");

  auto critical_at = [&](double tau) {
    return wishart::shock_positions(tau, a).critical;
  };
  double tau_c = -1.0;
  if (!critical_at(tau_min) && critical_at(tau_max)) {
    double lo = tau_min, hi = tau_max;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (critical_at(mid) ? hi : lo) = mid;
    }
    tau_c = hi;
  } else if (critical_at(tau_min)) {
    man.warnings.push_back("edges: range starts critical; no crossing bracketed");
  } else {
    man.warnings.push_back("edges: range ends subcritical; no crossing bracketed");
  }

  DataTable table;
  table.columns = {"tau", "lower", "upper", "critical", "tau_c"};
  for (int i = 0; i < points; ++i) {
    const double tau =
        tau_min + (tau_max - tau_min) * i / static_cast<double>(points - 1);
    wishart::ShockFront sf = wishart::shock_positions(tau, a);
    table.rows.push_back(
        {tau, sf.edges[0], sf.edges[1], sf.critical ? 1.0 : 0.0, tau_c});
  }
  return table;
}

// mc-density: sampled eigenvalue histogram with the large-N theory overlay.
DataTable run_mc_density(RunConfig& cfg, RunManifest& man) {
  EnsembleParams p = read_ensemble(cfg, true);
  const int trials = read_positive_int(cfg, "trials", "100");
  const int bins = read_positive_int(cfg, "bins", "40");
  const double pad = wishart::parse_double(cfg.get("range_pad", "0.02"), "range_pad");

  wishart::TrialStatistics stats = wishart::estimate_acp(p, {}, trials);
  const double r = rectangularity(p);
  auto [lo, hi] = wishart::support_edges(p.tau, p.a, r);
  const double width = (hi - lo) * pad;
  const double range_lo = std::max(0.0, lo - width);
  const double range_hi = hi + width;
  wishart::DensityCurve hist =
      wishart::estimate_density(stats, bins, {range_lo, range_hi});
  if (hist.outside_mass > 0.02)
    man.warnings.push_back("mc-density: fraction " +
                           wishart::format_double(hist.outside_mass) +
                           " of samples fell outside the histogram range");

  std::vector<double> inside;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < hist.lambda.size(); ++i) {
    if (hist.lambda[i] > lo && hist.lambda[i] < hi) {
      inside.push_back(hist.lambda[i]);
      where.push_back(i);
    }
  }
  std::vector<double> theory(hist.lambda.size(), 0.0);
  if (!inside.empty()) {
    wishart::DensityCurve ref = wishart::density(p.tau, p.a, r, inside, 1e-6);
    for (std::size_t k = 0; k < where.size(); ++k) theory[where[k]] = ref.rho[k];
  }

  DataTable table;
  table.columns = {"lambda", "hist_rho", "theory_rho"};
  for (std::size_t i = 0; i < hist.lambda.size(); ++i)
    table.rows.push_back({hist.lambda[i], hist.rho[i], theory[i]});
  return table;
}

// acp-compare: Monte Carlo averaged characteristic polynomial against the
// integral representation on a complex z list.
DataTable run_acp_compare(RunConfig& cfg, RunManifest& man) {
  EnsembleParams p = read_ensemble(cfg, true);
  const int trials = read_positive_int(cfg, "trials", "10000");
  auto z_list = wishart::parse_complex_grid(cfg.require("z_list"), "z_list");
  cfg.complex_grids["z_list"] = z_list;

  wishart::TrialStatistics stats = wishart::estimate_acp(p, z_list, trials);
  wishart::ACPContext ctx = context_for(cfg, p);

  DataTable table;
  table.columns = {"z_re", "z_im", "q_mc_re", "q_mc_im",
                   "stderr_re", "stderr_im", "q_int_re", "q_int_im"};
  for (std::size_t i = 0; i < z_list.size(); ++i) {
    const Complex qi = wishart::q_integral(ctx, z_list[i], p.tau);
    const Complex mc = stats.acp_mean[i];
    const Complex se = stats.acp_stderr[i];
    const double gap = std::abs(mc - qi);
    const double band = 3.0 * std::hypot(se.real(), se.imag());
    if (gap > band)
      man.warnings.push_back("acp-compare: point " + std::to_string(i) +
                             " deviates beyond 3 standard errors");
    table.rows.push_back({z_list[i].real(), z_list[i].imag(), mc.real(),
                          mc.imag(), se.real(), se.imag(), qi.real(), qi.imag()});
  }
  return table;
}

// pde-check: max scaled residual of the evolution equation on a uniform grid.
DataTable run_pde_check(RunConfig& cfg, RunManifest& man) {
  EnsembleParams p = read_ensemble(cfg, false);
  const double z_min = wishart::parse_double(cfg.get("z_min", "1"), "z_min");
  const double z_step = wishart::parse_double(cfg.get("z_step", "0.5"), "z_step");
  const int z_points = read_positive_int(cfg, "z_points", "5");
  const double tau_min = wishart::parse_double(cfg.get("tau_min", "0.2"), "tau_min");
  const double tau_step =
      wishart::parse_double(cfg.get("tau_step", "0.25"), "tau_step");
  const int tau_points = read_positive_int(cfg, "tau_points", "5");

  std::vector<Complex> z_grid;
  for (int i = 0; i < z_points; ++i) z_grid.push_back(Complex(z_min + i * z_step, 0.0));
  std::vector<double> tau_grid;
  for (int i = 0; i < tau_points; ++i) tau_grid.push_back(tau_min + i * tau_step);
  cfg.real_grids["tau_grid"] = tau_grid;

  p.tau = tau_grid.front() > 0.0 ? tau_grid.front() : 1.0;
  wishart::ACPContext ctx = context_for(cfg, p);
  const double residual = wishart::pde_residual(ctx, z_grid, tau_grid);

  DataTable table;
  table.columns = {"z_min", "z_step", "z_points", "tau_min",
                   "tau_step", "tau_points", "max_residual"};
  table.rows.push_back({z_min, z_step, static_cast<double>(z_points), tau_min,
                        tau_step, static_cast<double>(tau_points), residual});
  (void)man;
  return table;
}

// bessoid-map: magnitude and phase of the limit function on an s grid.
DataTable run_bessoid_map(RunConfig& cfg, RunManifest& man) {
  const double nu = wishart::parse_double(cfg.get("nu", "0"), "nu");
  const double t = wishart::parse_double(cfg.get("t", "0"), "t");
  auto s_re = wishart::parse_real_grid(cfg.get("s_re", "-2:2:9"), "s_re");
  auto s_im = wishart::parse_real_grid(cfg.get("s_im", "-2:2:9"), "s_im");
  cfg.real_grids["s_re"] = s_re;
  cfg.real_grids["s_im"] = s_im;

  DataTable table;
  table.columns = {"s_re", "s_im", "t", "abs_B", "arg_B"};
  for (double re : s_re) {
    for (double im : s_im) {
      const Complex b = wishart::bessoid({Complex(re, im), t, nu});
      table.rows.push_back({re, im, t, std::abs(b), std::arg(b)});
    }
  }
  (void)man;
  return table;
}

// scaling-fit: mean smallest eigenvalue across N with the fitted power law.
DataTable run_scaling_fit(RunConfig& cfg, RunManifest& man) {
  const double a = wishart::parse_double(cfg.require("a"), "a");
  auto n_list = wishart::parse_int_list(cfg.get("N_list", "50,100,200,400"), "N_list");
  const int trials = read_positive_int(cfg, "trials", "200");
  const std::uint64_t seed = wishart::parse_u64(cfg.get("seed", "1"), "seed");

  wishart::SmallestEigenvalueFit fit =
      wishart::smallest_eigenvalue_fit(a, n_list, trials, seed);

  DataTable table;
  table.columns = {"N", "mean_smallest", "fitted_exponent"};
  for (std::size_t i = 0; i < fit.N_values.size(); ++i)
    table.rows.push_back({static_cast<double>(fit.N_values[i]),
                          fit.mean_smallest[i], fit.exponent});
  (void)man;
  return table;
}

// characteristics: curve samples lambda(start, tau) for real and complex
// starting points (the Fig. 2 style data).
DataTable run_characteristics(RunConfig& cfg, RunManifest& man) {
  EnsembleParams p = read_ensemble(cfg, false);
  const double r = rectangularity(p);
  auto starts = wishart::parse_complex_grid(
      cfg.get("start_list",
              "-5,-3,-2,-1.2,-0.6,0.8,1.5,2.5,4,-1+0.5i,-1-0.5i,-2+1i"),
      "start_list");
  const double tau_min = wishart::parse_double(cfg.get("tau_min", "0"), "tau_min");
  const double tau_max = wishart::parse_double(cfg.get("tau_max", "2"), "tau_max");
  const int points = read_positive_int(cfg, "tau_points", "33");
  if (!(tau_min >= 0.0) || !(tau_max > tau_min))
    throw ConfigError("characteristics needs 0 <= tau_min < tau_max");
  if (points < 2) throw ConfigError("characteristics needs tau_points >= 2");
  cfg.complex_grids["start_list"] = starts;

  DataTable table;
  table.columns = {"start_re", "start_im", "tau", "lambda_re", "lambda_im"};
  for (const Complex& z0 : starts) {
    for (int i = 0; i < points; ++i) {
      const double tau =
          tau_min + (tau_max - tau_min) * i / static_cast<double>(points - 1);
      const Complex lam = wishart::characteristic_map(z0, tau, r, p.a);
      table.rows.push_back({z0.real(), z0.imag(), tau, lam.real(), lam.imag()});
    }
  }
  (void)man;
  return table;
}

DataTable dispatch(const std::string& command, RunConfig& cfg, RunManifest& man) {
  if (command == "density") return run_density(cfg, man);
  if (command == "edges") return run_edges(cfg, man);
  if (command == "mc-density") return run_mc_density(cfg, man);
  if (command == "acp-compare") return run_acp_compare(cfg, man);
  if (command == "pde-check") return run_pde_check(cfg, man);
  if (command == "bessoid-map") return run_bessoid_map(cfg, man);
  if (command == "scaling-fit") return run_scaling_fit(cfg, man);
  if (command == "characteristics") return run_characteristics(cfg, man);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for the diffusing complex Wishart ensemble"};
  app.require_subcommand(1);

  std::string config_path, seed_flag, out_flag, format_flag;
  std::vector<std::string> overrides;
  const std::pair<const char*, const char*> commands[] = {
      {"density", "spectral density curves for a tau list"},
      {"edges", "spectral edges across a tau sweep"},
      {"mc-density", "sampled eigenvalue histogram with theory overlay"},
      {"acp-compare", "Monte Carlo characteristic polynomial vs integral"},
      {"pde-check", "evolution equation residual on a grid"},
      {"bessoid-map", "limit function magnitude and phase on an s grid"},
      {"scaling-fit", "smallest-eigenvalue scaling exponent fit"},
      {"characteristics", "characteristic curves in the (lambda, tau) plane"},
  };
  for (const auto& [name, blurb] : commands) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", config_path, "flat key=value config file")
        ->required();
    sub->add_option("--seed", seed_flag, "override the seed key");
    sub->add_option("--out", out_flag, "output data file path");
    sub->add_option("--format", format_flag, "csv or json");
    sub->add_option("overrides", overrides, "key=value overrides");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg;
    cfg.command = command;
    cfg.raw = wishart::load_key_values(config_path);
    for (const std::string& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + kv + "' is not key=value");
      cfg.raw[wishart::detail::trim(kv.substr(0, eq))] =
          wishart::detail::trim(kv.substr(eq + 1));
    }
    if (!seed_flag.empty()) cfg.raw["seed"] = seed_flag;
    if (!out_flag.empty()) cfg.raw["out"] = out_flag;
    if (!format_flag.empty()) cfg.raw["format"] = format_flag;

    const std::string fmt = cfg.get("format", "csv");
    if (fmt == "csv")
      cfg.format = wishart::OutputFormat::csv;
    else if (fmt == "json")
      cfg.format = wishart::OutputFormat::json;
    else
      throw ConfigError("format must be csv or json, got '" + fmt + "'");
    cfg.output_path = cfg.get("out", command + (fmt == "csv" ? ".csv" : ".json"));
    wishart::check_output_parent(cfg.output_path);

    RunManifest man;
    man.tool_version = kToolVersion;
    man.seed = wishart::parse_u64(cfg.get("seed", "1"), "seed");

    const auto t0 = std::chrono::steady_clock::now();
    DataTable table = dispatch(command, cfg, man);
    man.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    man.config_echo = cfg.raw;
    man.config_echo["command"] = command;

    if (cfg.format == wishart::OutputFormat::csv)
      wishart::write_csv(cfg.output_path, table);
    else
      wishart::write_json(cfg.output_path, table, man);
    wishart::write_manifest_sidecar(cfg.output_path, man);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const wishart::ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
