#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ouqsd/eigen.hpp"
#include "ouqsd/heavytail.hpp"
#include "ouqsd/kernels.hpp"
#include "ouqsd/quadrature.hpp"

// Deterministic quadrature oracles for the absorbed OU process started from
// a heavy-tailed density. These are the reference values the Monte Carlo
// engine is checked against. Integrals over the Pareto weight are truncated
// where the remaining integrand is provably flat (survival ~ 1, kernels
// Gaussian-small) and the cut tail is added back as a certified interval,
// so no mass is lost silently.

namespace ouqsd::oracle {

using kernels::OUParams;
using quad::IntegralResult;
using quad::QuadratureSpec;

namespace detail {

inline std::vector<double> geometric_points(double lo, double hi, double ratio = 2.0) {
  std::vector<double> pts{lo};
  double x = lo;
  while (x * ratio < hi) {
    x *= ratio;
    pts.push_back(x);
  }
  pts.push_back(hi);
  return pts;
}

// Breakpoints covering [lo, hi] with extra resolution around a Gaussian
// bump at `center` of width `width`.
inline std::vector<double> bump_points(double lo, double hi, double center, double width) {
  std::vector<double> pts;
  for (double x = std::max(lo, 1e-300); x < hi; x *= 4.0) pts.push_back(x);
  for (double k : {-14.0, -10.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 10.0}) {
    const double x = center + k * width;
    if (x > lo && x < hi) pts.push_back(x);
  }
  pts.push_back(lo);
  pts.push_back(hi);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](double a, double b) { return b - a < 1e-12 * (std::fabs(a) + 1.0); }),
            pts.end());
  return pts;
}

}  // namespace detail

/// P_f(T_0^X > t) = int f(x) P_x(T_0^X > t) dx.
template <class Density>
double survival_oracle(const OUParams& params, const Density& f, double t,
                       const QuadratureSpec& spec = {}) {
  if (!(t > 0.0)) throw std::domain_error("survival_oracle: t must be > 0");
  const kernels::TimeChange tc = kernels::time_change(params, t);
  // survival saturates to 1 once e^{-at} x / sqrt(2h) >> 1
  const double x_sat = 8.0 * std::sqrt(2.0 * tc.h) * std::exp(params.a * t);
  const double cut = std::max({spec.domain_cut, x_sat, 4.0 * f.x_min()});
  const auto pts = detail::geometric_points(f.x_min(), cut);
  const IntegralResult body = quad::integrate_segments(
      [&](double x) { return f.density(x) * kernels::ou_survival(params, x, t); }, pts, spec);
  const double tail = f.tail_mass(cut);
  const double s_cut = kernels::ou_survival(params, cut, t);
  const double value = body.value + tail * 0.5 * (1.0 + s_cut);
  return std::min(1.0, std::max(0.0, value));
}

struct ConditionalDensityTable {
  std::vector<double> y;
  std::vector<double> density;
  double survival = 0.0;    // the normalizing denominator P_f(T > t)
  double tail_mass = 0.0;   // conditioned mass beyond y.back()
  double mass_check = 0.0;  // trapezoid over the grid + tail, should be ~1
};

namespace detail {

// int f(x) q(t,x,y) dx for one y.
template <class Density>
double conditioned_kernel_at(const OUParams& params, const Density& f, double t, double y,
                             const QuadratureSpec& spec) {
  const kernels::TimeChange tc = kernels::time_change(params, t);
  const double blow = std::exp(params.a * t);
  const double center = blow * y;
  const double width = blow * std::sqrt(tc.h);
  const double cut = center + 14.0 * width;
  const auto pts = bump_points(f.x_min(), cut, center, width);
  const IntegralResult r = quad::integrate_segments(
      [&](double x) { return f.density(x) * kernels::absorbed_density(params, t, x, y); }, pts,
      spec);
  // beyond the cut the kernel is at least 14 sigma into its Gaussian tail
  return r.value;
}

// int f(x) P_x(X_t > Y, T_0 > t) dx, used for the certified conditioned tail.
template <class Density>
double conditioned_tail_mass(const OUParams& params, const Density& f, double t, double Y,
                             const QuadratureSpec& spec) {
  const kernels::TimeChange tc = kernels::time_change(params, t);
  const double sd = std::sqrt(tc.h);
  const double ea = std::exp(-params.a * t);
  // P_x(X_t > Y, T_0 > t) = int_Y^inf q dy = Phi((m-Y)/sd) - (1 - Phi((m+Y)/sd))
  auto upper_q = [&](double x) {
    const double m = ea * x;
    auto Phi = [](double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); };
    return Phi((m - Y) / sd) - (1.0 - Phi((m + Y) / sd));
  };
  const double x_sat = std::exp(params.a * t) * (Y + 10.0 * sd);
  const double cut = std::max({spec.domain_cut, x_sat, 4.0 * f.x_min()});
  const auto pts = geometric_points(f.x_min(), cut);
  const IntegralResult body = quad::integrate_segments(
      [&](double x) { return f.density(x) * std::max(0.0, upper_q(x)); }, pts, spec);
  const double tail = f.tail_mass(cut);
  const double sat_val = std::max(0.0, upper_q(cut));
  return body.value + tail * 0.5 * (sat_val + 1.0);
}

}  // namespace detail

/// Conditioned density y -> int f q(t,x,y) dx / P_f(T>t) tabulated on a grid,
/// with a certified account of the (heavy) tail beyond the grid.
template <class Density>
ConditionalDensityTable conditional_density_oracle(const OUParams& params, const Density& f,
                                                   double t, const std::vector<double>& y_grid,
                                                   const QuadratureSpec& spec = {}) {
  if (!(t > 0.0)) throw std::domain_error("conditional_density_oracle: t must be > 0");
  if (y_grid.empty()) throw std::domain_error("conditional_density_oracle: empty grid");
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    if (!(y_grid[i] > 0.0) || (i && !(y_grid[i] > y_grid[i - 1])))
      throw std::domain_error("conditional_density_oracle: grid must be ascending positive");
  }
  ConditionalDensityTable out;
  out.y = y_grid;
  out.survival = survival_oracle(params, f, t, spec);
  out.density.reserve(y_grid.size());
  for (const double y : y_grid)
    out.density.push_back(detail::conditioned_kernel_at(params, f, t, y, spec) / out.survival);
  out.tail_mass =
      detail::conditioned_tail_mass(params, f, t, y_grid.back(), spec) / out.survival;
  // trapezoid over [0, y_grid], density(0) = 0
  double trapz = 0.5 * y_grid.front() * out.density.front();
  for (std::size_t i = 0; i + 1 < y_grid.size(); ++i)
    trapz += 0.5 * (out.density[i] + out.density[i + 1]) * (y_grid[i + 1] - y_grid[i]);
  out.mass_check = trapz + out.tail_mass;
  return out;
}

/// max over the grid of |Lambda(s,y)/phi_lambda(y) - e^{-lambda s}| / e^{-lambda s},
/// Lambda(s,y) = int_0^inf q(s,x,y) phi_lambda(x) dx. The identity
/// Lambda = phi e^{-lambda s} ties kernels, eigenfunctions and quadrature together.
inline double eigen_relation_residual(const OUParams& params, double lambda, double s,
                                      const std::vector<double>& y_grid,
                                      const QuadratureSpec& spec = {}) {
  if (!(lambda > 0.0 && lambda <= params.a))
    throw std::domain_error("eigen_relation_residual: requires lambda in (0, a]");
  if (!(s > 0.0)) throw std::domain_error("eigen_relation_residual: s must be > 0");
  const eigen::PhiFunction phi(params, lambda);
  const kernels::TimeChange tc = kernels::time_change(params, s);
  const double blow = std::exp(params.a * s);
  const double target = std::exp(-lambda * s);
  double worst = 0.0;
  for (const double y : y_grid) {
    const double center = blow * y;
    const double width = blow * std::sqrt(tc.h);
    const double cut = center + 14.0 * width;
    auto pts = detail::bump_points(1e-8, cut, center, width);
    pts.insert(pts.begin(), 0.0);
    const IntegralResult r = quad::integrate_segments(
        [&](double x) { return kernels::absorbed_density(params, s, x, y) * phi(x); }, pts, spec);
    const double resid = std::fabs(r.value / phi(y) - target) / target;
    worst = std::max(worst, resid);
  }
  return worst;
}

/// Lemma 4 ratio: mass of the boundary layer [0, ln(u)/c] against the rest,
/// under the Brownian survival weight P_{c x / u}(T_0^B > t).
template <class Density>
double boundary_layer_ratio(const Density& f, double u, double c, double t,
                            const QuadratureSpec& spec = {}) {
  if (!(u > M_E)) throw std::domain_error("boundary_layer_ratio: requires u > e");
  if (!(c > 0.0 && t > 0.0)) throw std::domain_error("boundary_layer_ratio: requires c,t > 0");
  const double L = std::log(u) / c;
  auto weight = [&](double x) { return std::erf(c * x / (u * std::sqrt(2.0 * t))); };
  double num = 0.0;
  if (L > f.x_min()) {
    const auto pts = detail::geometric_points(f.x_min(), L);
    num = quad::integrate_segments([&](double x) { return f.density(x) * weight(x); }, pts, spec)
              .value;
  }
  const double x_sat = 6.0 * std::sqrt(2.0 * t) * u / c;
  const double cut = std::max({x_sat, 4.0 * L, 4.0 * f.x_min()});
  const double lo = std::max(L, f.x_min());
  const auto pts = detail::geometric_points(lo, cut);
  double den =
      quad::integrate_segments([&](double x) { return f.density(x) * weight(x); }, pts, spec)
          .value;
  den += f.tail_mass(cut) * 0.5 * (weight(cut) + 1.0);
  return num / den;
}

/// Quadrature version of E_f(X_t^gamma | T_0 > t) (the Lemma 2 diagnostic).
/// Requires gamma < eta so the outer Pareto tail moment converges.
inline double conditional_moment_oracle(const OUParams& params, const heavytail::ParetoDensity& f,
                                        double t, double gamma, const QuadratureSpec& spec = {}) {
  if (!(t > 0.0)) throw std::domain_error("conditional_moment_oracle: t must be > 0");
  if (!(gamma > 0.0 && gamma < f.eta()))
    throw std::domain_error("conditional_moment_oracle: requires 0 < gamma < eta");
  const kernels::TimeChange tc = kernels::time_change(params, t);
  const double sd = std::sqrt(tc.h);
  const double ea = std::exp(-params.a * t);
  QuadratureSpec inner_spec = spec;
  inner_spec.abs_tol = std::max(spec.abs_tol, 1e-10);
  auto inner = [&](double x) {
    const double m = ea * x;
    const double lo = std::max(0.0, m - 10.0 * sd);
    const double hi = m + 10.0 * sd;
    std::vector<double> pts{lo};
    if (lo == 0.0 && hi > 1e-4) pts.push_back(1e-4);  // soften the y^gamma endpoint
    pts.push_back(0.5 * (lo + hi));
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return quad::integrate_segments(
               [&](double y) {
                 return std::pow(y, gamma) * kernels::absorbed_density(params, t, x, y);
               },
               pts, inner_spec)
        .value;
  };
  const double x_sat = 8.0 * std::sqrt(2.0 * tc.h) * std::exp(params.a * t);
  const double cut = std::max({spec.domain_cut, x_sat, 4.0 * f.x_min()});
  const auto pts = detail::geometric_points(f.x_min(), cut);
  QuadratureSpec outer_spec = spec;
  outer_spec.abs_tol = std::max(spec.abs_tol, 1e-8);
  const double body =
      quad::integrate_segments([&](double x) { return f.density(x) * inner(x); }, pts, outer_spec)
          .value;
  // beyond the cut the conditioned mean of y^gamma is ~ (e^{-at} x)^gamma;
  // closed-form Pareto tail moment
  const double eta = f.eta();
  const double tail_mom = std::pow(ea, gamma) * eta * std::pow(f.x_min(), eta) *
                          std::pow(cut, gamma - eta) / (eta - gamma);
  return (body + tail_mom) / survival_oracle(params, f, t, spec);
}

}  // namespace ouqsd::oracle
