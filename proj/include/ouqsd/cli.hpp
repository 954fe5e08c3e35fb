#pragma once

#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ouqsd/csv.hpp"
#include "ouqsd/eigen.hpp"
#include "ouqsd/errors.hpp"
#include "ouqsd/heavytail.hpp"
#include "ouqsd/kernels.hpp"
#include "ouqsd/oracle.hpp"
#include "ouqsd/quadrature.hpp"
#include "ouqsd/runconfig.hpp"
#include "ouqsd/simulate.hpp"

// Orchestration: config + flags -> deterministic CSV artifacts.
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

namespace ouqsd::cli {

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  if (name.find('/') != std::string::npos || dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

inline heavytail::ParetoDensity initial_density(const RunConfig& rc, std::ostream& err) {
  if (rc.eta >= 1.0) {
    err << "warning: eta >= 1 is outside the theorem class; run is exploratory, "
           "no acceptance target applies\n";
    return heavytail::ParetoDensity::make_exploratory(rc.eta, rc.x_m);
  }
  return heavytail::ParetoDensity::make(rc.eta, rc.x_m);
}

inline sim::SimConfig sim_config(const RunConfig& rc, std::ostream& err) {
  return sim::SimConfig{kernels::OUParams(rc.a), initial_density(rc, err), rc.checkpoints,
                        rc.n_paths, rc.seed, rc.dg_step_or_default()};
}

// --- subcommands -----------------------------------------------------------

inline int cmd_qsd(const RunConfig& rc, double du, const std::string& out) {
  const kernels::OUParams params(rc.a);
  const double lambda = rc.lambda_or_default();
  if (!(lambda > 0.0 && lambda <= rc.a))
    throw config_error("qsd: lambda must lie in (0, a]");
  const auto dist = eigen::build_qsd(params, lambda, rc.u_max);
  csv::Writer w(out, "y,density,cdf", rc.seed);
  const long n = std::lround(rc.u_max / du);
  for (long i = 0; i <= n; ++i) {
    const double y = du * static_cast<double>(i);
    w.row({y, dist.density(y), dist.cdf(y)});
  }
  return 0;
}

inline int cmd_simulate(const RunConfig& rc, const std::string& out, std::ostream& err) {
  const auto cfg = sim_config(rc, err);
  const auto ens = sim::simulate_ensemble(cfg);
  const auto f = initial_density(rc, err);
  const quad::QuadratureSpec spec(rc.quad_tol, 48);
  csv::Writer w(out, "t,p_mc,se_mc,p_oracle", rc.seed);
  for (std::size_t i = 0; i < ens.checkpoints.size(); ++i) {
    const double p_oracle = oracle::survival_oracle(cfg.params, f, ens.checkpoints[i], spec);
    w.row({ens.checkpoints[i], ens.survival_fraction(i), ens.survival_std_error(i), p_oracle});
  }
  return 0;
}

inline int cmd_converge(const RunConfig& rc, double du, const std::string& out,
                        std::ostream& err) {
  const auto cfg = sim_config(rc, err);
  const auto ens = sim::simulate_ensemble(cfg);
  const auto f = initial_density(rc, err);
  const double lambda = rc.lambda_or_default();
  if (!(lambda > 0.0 && lambda <= rc.a))
    throw config_error("converge: lambda must lie in (0, a]");
  const auto nu = eigen::build_qsd(kernels::OUParams(rc.a), lambda, rc.u_max);
  const quad::QuadratureSpec spec(rc.quad_tol, 48);
  std::vector<double> grid;
  for (double y = du; y <= rc.u_max + 1e-12; y += du) grid.push_back(y);
  csv::Writer w(out, "t,y,ecdf,oracle_density,qsd_density", rc.seed);
  for (std::size_t i = 0; i < ens.checkpoints.size(); ++i) {
    const double t = ens.checkpoints[i];
    const auto ecdf = sim::conditional_ecdf(ens, i);
    const auto table = oracle::conditional_density_oracle(cfg.params, f, t, grid, spec);
    for (std::size_t j = 0; j < grid.size(); ++j)
      w.row({t, grid[j], ecdf(grid[j]), table.density[j], nu.density(grid[j])});
  }
  return 0;
}

inline int cmd_decay(const RunConfig& rc, const std::string& out, std::ostream& err) {
  if (rc.checkpoints.size() < 2) throw config_error("decay: need at least two checkpoints");
  const kernels::OUParams params(rc.a);
  const auto f = initial_density(rc, err);
  const quad::QuadratureSpec spec(rc.quad_tol, 48);
  std::vector<std::pair<double, double>> curve;
  for (const double t : rc.checkpoints)
    curve.emplace_back(t, oracle::survival_oracle(params, f, t, spec));
  const double t_lo = rc.checkpoints.front();
  const double t_hi = rc.checkpoints.back();
  const double lambda_hat = sim::decay_rate(curve, {t_lo, t_hi});
  csv::Writer w(out, "t_lo,t_hi,lambda_hat,target", rc.seed);
  w.row({t_lo, t_hi, lambda_hat, rc.a * rc.eta});
  return 0;
}

// --- verify ----------------------------------------------------------------

struct VerifyReport {
  std::ostream& out;
  int failures = 0;
  void check(const std::string& name, bool ok, double observed, double bound) {
    out << (ok ? "[PASS] " : "[FAIL] ") << name << ": observed " << csv::format_real(observed)
        << " (bound " << csv::format_real(bound) << ")\n";
    if (!ok) ++failures;
  }
};

inline int cmd_verify(const RunConfig& rc, double tol, std::ostream& out) {
  VerifyReport rep{out};
  const kernels::OUParams one(1.0);
  const quad::QuadratureSpec spec(1e-10, 48);

  {  // time-change identity h e^{2at} = g
    double worst = 0.0;
    for (double a : {0.5, 1.0, 2.0})
      for (double t : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const auto tc = kernels::time_change(kernels::OUParams(a), t);
        worst = std::max(worst, std::fabs(tc.h * std::exp(2.0 * a * t) - tc.g) / tc.g);
      }
    rep.check("time-change identity", worst <= 1e-12, worst, 1e-12);
  }
  {  // transition density normalization
    const auto r = quad::integrate_adaptive(
        [&](double y) { return kernels::transition_density(one, 1.0, 2.0, y); }, -12.0, 13.0,
        spec);
    rep.check("transition density normalizes", std::fabs(r.value - 1.0) <= 1e-8,
              std::fabs(r.value - 1.0), 1e-8);
  }
  {  // absorbed kernel integrates to the survival probability
    double worst = 0.0;
    for (double t : {0.5, 1.0, 2.0})
      for (double x : {0.5, 1.0, 2.0}) {
        const auto r = quad::integrate_adaptive(
            [&](double y) { return kernels::absorbed_density(one, t, x, y); }, 0.0, 14.0, spec);
        worst = std::max(worst, std::fabs(r.value - kernels::ou_survival(one, x, t)));
      }
    rep.check("absorbed kernel mass = survival", worst <= tol, worst, tol);
  }
  {  // Chapman-Kolmogorov at (s,t,x,y) = (0.5,0.5,1,1)
    const auto r = quad::integrate_adaptive(
        [&](double z) {
          return kernels::transition_density(one, 0.5, 1.0, z) *
                 kernels::transition_density(one, 0.5, z, 1.0);
        },
        -14.0, 15.0, spec);
    const double direct = kernels::transition_density(one, 1.0, 1.0, 1.0);
    rep.check("Chapman-Kolmogorov", std::fabs(r.value - direct) <= 1e-6,
              std::fabs(r.value - direct), 1e-6);
  }
  {  // survival ratio bound, fixed grid
    bool ok = true;
    double worst = 0.0;
    for (double x : {0.1, 1.0, 5.0})
      for (auto [b, c] : {std::pair{0.1, 0.2}, std::pair{0.4, 0.5}, std::pair{0.4, 5.0}}) {
        const double ratio = kernels::brownian_survival(x, b) / kernels::brownian_survival(x, c);
        const double cap = std::pow(c / b, 1.5);
        ok = ok && ratio >= 1.0 - 1e-12 && ratio <= cap * (1.0 + 1e-12);
        worst = std::max(worst, ratio / cap);
      }
    rep.check("survival ratio bound (b<c)", ok, worst, 1.0);
  }
  {  // psi_a(u) = u
    const auto s = eigen::spectral_coefficients(one, 1.0, 1e-12, 10.0);
    double worst = 0.0;
    for (double u : {0.5, 2.0, 7.5}) worst = std::max(worst, std::fabs(eigen::psi_eval(s, u) - u));
    rep.check("psi_a(u) = u", s.term_count() == 1 && worst <= 1e-12, worst, 1e-12);
  }
  {  // coefficient signs on both sides of the dichotomy
    const auto below = eigen::spectral_coefficients(one, 0.5, 1e-12, 10.0);
    const auto above = eigen::spectral_coefficients(one, 1.5, 1e-12, 10.0);
    bool ok = true;
    for (std::size_t k = 0; k < below.term_count(); ++k) ok = ok && below.scaled_terms[k] >= 0.0;
    for (std::size_t k = 1; k < above.term_count(); ++k) ok = ok && above.scaled_terms[k] < 0.0;
    rep.check("coefficient sign pattern", ok, ok ? 0.0 : 1.0, 0.0);
  }
  {  // mass: telescoped series vs 1/(2 lambda)
    double worst = 0.0;
    for (double lam : {0.3, 0.7, 1.0}) {
      const auto s = eigen::spectral_coefficients(one, lam, 1e-12, 12.0);
      worst = std::max(worst, std::fabs(eigen::phi_mass(s) * 2.0 * lam - 1.0));
    }
    rep.check("phi mass = 1/(2 lambda)", worst <= 1e-12, worst, 1e-12);
  }
  {  // mass: quadrature + certified tail route
    const eigen::PhiFunction phi(one, 0.5);
    const auto r =
        quad::integrate_adaptive([&](double u) { return phi(u); }, 0.0, 40.0, spec);
    const double total = r.value + phi.tail_integral(40.0);
    rep.check("phi mass by quadrature", std::fabs(total - phi.mass()) <= 1e-8,
              std::fabs(total - phi.mass()), 1e-8);
  }
  {  // eigen-relation residual
    double worst = 0.0;
    for (double lam : {0.5, 1.0})
      worst = std::max(worst, oracle::eigen_relation_residual(one, lam, 1.0, {0.5, 1.0, 2.0},
                                                              quad::QuadratureSpec(1e-11, 52)));
    rep.check("eigen relation residual", worst <= tol, worst, tol);
  }
  {  // generator residual by finite differences
    double worst = 0.0;
    const double hstep = 1e-4;
    for (double lam : {0.3, 0.6, 1.0}) {
      const eigen::PhiFunction phi(one, lam);
      for (double u : {0.5, 1.0, 2.0}) {
        const double p0 = phi(u), pp = phi(u + hstep), pm = phi(u - hstep);
        const double second = (pp - 2.0 * p0 + pm) / (hstep * hstep);
        const double drift =
            ((u + hstep) * pp - (u - hstep) * pm) / (2.0 * hstep);
        worst = std::max(worst, std::fabs(0.5 * second + drift + lam * p0));
      }
    }
    rep.check("generator residual", worst <= 1e-5, worst, 1e-5);
  }
  {  // closed-form QSD at lambda = a
    const auto dist = eigen::build_qsd(one, 1.0, 6.0);
    double worst = 0.0;
    for (double y = 0.0; y <= 6.0; y += 0.01)
      worst = std::max(worst, std::fabs(dist.density(y) - 2.0 * y * std::exp(-y * y)));
    rep.check("minimal QSD closed form", worst <= 1e-8, worst, 1e-8);
  }
  {  // quantile round trip
    const auto dist = eigen::build_qsd(one, 0.5, 12.0);
    double worst = 0.0;
    for (double y : {0.2, 1.0, 2.5})
      worst = std::max(worst, std::fabs(dist.quantile(dist.cdf(y)) - y));
    rep.check("quantile round trip", worst <= 1e-6, worst, 1e-6);
  }
  {  // Lemma 1 limit, fast-converging case
    const auto f = heavytail::ParetoDensity::make(0.5, 1.0);
    const double v = heavytail::truncated_moment_ratio(f, 1e8, 0.25);
    rep.check("truncated moment ratio -> 2", std::fabs(v - 2.0) <= 1e-3, std::fabs(v - 2.0),
              1e-3);
  }
  {  // Pareto sampling round trip
    const auto f = heavytail::ParetoDensity::make(0.5, 1.0);
    double worst = 0.0;
    for (double u : {0.0, 0.5, 0.999})
      worst = std::max(worst, std::fabs(f.cdf(f.quantile(u)) - u));
    rep.check("pareto sample round trip", worst <= 1e-12, worst, 1e-12);
  }

  out << (rep.failures == 0 ? "verify: all checks passed\n"
                            : "verify: " + std::to_string(rep.failures) + " check(s) failed\n");
  return rep.failures == 0 ? 0 : 1;
}

}  // namespace detail

/// Entry point shared by the binary and the tests.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  RunConfig rc;
  // pre-scan for --config so explicit flags can override file values
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") {
      try {
        rc = load_config_file(args[i + 1]);
      } catch (const config_error& e) {
        err << e.what() << "\n";
        return 2;
      }
    }
  }

  CLI::App app{"quasi-stationary distributions of the absorbed OU process"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flat key/value)");
    cmd->add_option("--a", rc.a, "drift rate a > 0");
    cmd->add_option("--eta", rc.eta, "initial-density tail exponent parameter");
    cmd->add_option("--x-m", rc.x_m, "initial-density left endpoint");
    cmd->add_option_function<double>("--lambda", [&rc](double v) { rc.lambda = v; },
                                     "QSD parameter (default a*eta)");
    cmd->add_option("--checkpoints", rc.checkpoints, "ascending checkpoint times");
    cmd->add_option("--n-paths", rc.n_paths, "Monte Carlo path count");
    cmd->add_option("--seed", rc.seed, "RNG seed");
    cmd->add_option("--dg-step", rc.dg_step, "step in transformed time g");
    cmd->add_option("--quad-tol", rc.quad_tol, "quadrature absolute tolerance");
    cmd->add_option("--series-tol", rc.series_tol, "series truncation tolerance");
    cmd->add_option("--u-max", rc.u_max, "validated series range / table span");
    cmd->add_option("--out-dir", rc.output_dir, "output directory");
  };

  double du = 0.01;
  double verify_tol = 1e-6;
  std::string out_qsd = "qsd.csv", out_sim = "survival.csv", out_conv = "conditional.csv",
              out_decay = "decay.csv";

  CLI::App* qsd = app.add_subcommand("qsd", "emit the QSD density/CDF table");
  add_common(qsd);
  qsd->add_option("--du", du, "emission grid step");
  qsd->add_option("--out", out_qsd, "output CSV path");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo survival curve");
  add_common(simulate);
  simulate->add_option("--out", out_sim, "output CSV path");

  CLI::App* converge = app.add_subcommand("converge", "conditioned ECDF vs oracle vs QSD tables");
  add_common(converge);
  converge->add_option("--du", du, "emission grid step");
  converge->add_option("--out", out_conv, "output CSV path");

  CLI::App* decay = app.add_subcommand("decay", "decay-rate estimate from the oracle curve");
  add_common(decay);
  decay->add_option("--out", out_decay, "output CSV path");

  CLI::App* verify = app.add_subcommand("verify", "run the built-in invariant suite");
  add_common(verify);
  verify->add_option("--tol", verify_tol, "residual tolerance for the identity gates");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    rc.validate();
    if (qsd->parsed())
      return detail::cmd_qsd(rc, du, detail::join_path(rc.output_dir, out_qsd));
    if (simulate->parsed())
      return detail::cmd_simulate(rc, detail::join_path(rc.output_dir, out_sim), err);
    if (converge->parsed())
      return detail::cmd_converge(rc, du, detail::join_path(rc.output_dir, out_conv), err);
    if (decay->parsed())
      return detail::cmd_decay(rc, detail::join_path(rc.output_dir, out_decay), err);
    if (verify->parsed()) return detail::cmd_verify(rc, verify_tol, out);
  } catch (const config_error& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ouqsd::cli
