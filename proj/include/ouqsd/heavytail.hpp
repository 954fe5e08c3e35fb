#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ouqsd/quadrature.hpp"

// Regularly varying initial densities with exponent -(1+eta), eta in (0,1).
// Pareto is the canonical member: every functional below has a closed form,
// which makes it the exact-oracle family. A second member with a slowly
// varying logarithmic factor is provided behind the same interface to
// exercise class-level (not family-specific) behaviour.

namespace ouqsd::heavytail {

class ParetoDensity {
 public:
  /// f(x) = eta * x_m^eta * x^{-(1+eta)} on [x_m, inf).
  static ParetoDensity make(double eta, double x_m = 1.0) {
    if (!(std::isfinite(eta) && eta > 0.0 && eta < 1.0))
      throw std::domain_error("ParetoDensity: eta must lie in (0,1)");
    return ParetoDensity(eta, x_m);
  }

  /// Accepts any eta > 0. Outside (0,1) the density is still a valid
  /// probability density but falls outside the theorem's hypothesis;
  /// callers are expected to flag such runs as exploratory.
  static ParetoDensity make_exploratory(double eta, double x_m = 1.0) {
    if (!(std::isfinite(eta) && eta > 0.0))
      throw std::domain_error("ParetoDensity: eta must be > 0");
    return ParetoDensity(eta, x_m);
  }

  double eta() const { return eta_; }
  double x_min() const { return x_m_; }
  bool in_theorem_class() const { return eta_ < 1.0; }

  double density(double x) const {
    if (x < x_m_) return 0.0;
    return eta_ * std::pow(x_m_, eta_) * std::pow(x, -(1.0 + eta_));
  }

  double tail_mass(double x) const {
    if (x <= x_m_) return 1.0;
    return std::pow(x_m_ / x, eta_);
  }

  double cdf(double x) const { return 1.0 - tail_mass(x); }

  /// Inverse-CDF sampling: x_m (1-u)^{-1/eta} for u in [0,1).
  double quantile(double u) const {
    if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("ParetoDensity::quantile: u must be in [0,1)");
    return x_m_ * std::pow(1.0 - u, -1.0 / eta_);
  }

 private:
  ParetoDensity(double eta, double x_m) : eta_(eta), x_m_(x_m) {
    if (!(std::isfinite(x_m) && x_m > 0.0))
      throw std::domain_error("ParetoDensity: x_m must be finite and > 0");
  }
  double eta_;
  double x_m_;
};

/// Pareto density value at x (free-function form of the operation).
inline double density_eval(const ParetoDensity& f, double x) { return f.density(x); }

inline double sample(const ParetoDensity& f, double uniform) { return f.quantile(uniform); }

/// u^{1-gamma} * int_u^inf x^gamma f dx / int_0^u x f dx, in closed form.
/// Converges to (1-eta)/(eta-gamma) as u -> inf.
inline double truncated_moment_ratio(const ParetoDensity& f, double u, double gamma) {
  const double eta = f.eta();
  if (!(gamma > 0.0 && gamma < eta))
    throw std::domain_error("truncated_moment_ratio: requires 0 < gamma < eta");
  if (!(u > f.x_min())) throw std::domain_error("truncated_moment_ratio: requires u > x_m");
  const double xm = f.x_min();
  if (eta == 1.0) {
    // exploratory boundary case, log-divergent lower moment
    const double upper = std::pow(u, gamma - eta) / (eta - gamma);
    return std::pow(u, 1.0 - gamma) * upper / std::log(u / xm);
  }
  const double u1e = std::pow(u, 1.0 - eta);
  return (1.0 - eta) / (eta - gamma) * u1e / (u1e - std::pow(xm, 1.0 - eta));
}

// ---------------------------------------------------------------------------
// Second family: f(x) = C ln(e+x) x^{-(1+eta)} on [x_m, inf).

class LogParetoDensity {
 public:
  static LogParetoDensity make(double eta, double x_m = 1.0) {
    if (!(std::isfinite(eta) && eta > 0.0 && eta < 1.0))
      throw std::domain_error("LogParetoDensity: eta must lie in (0,1)");
    if (!(std::isfinite(x_m) && x_m > 0.0))
      throw std::domain_error("LogParetoDensity: x_m must be finite and > 0");
    return LogParetoDensity(eta, x_m);
  }

  double eta() const { return eta_; }
  double x_min() const { return x_m_; }
  double norm_constant() const { return c_; }

  double density(double x) const {
    if (x < x_m_) return 0.0;
    return c_ * std::log(M_E + x) * std::pow(x, -(1.0 + eta_));
  }

  double tail_mass(double x) const {
    if (x <= x_m_) return 1.0;
    return c_ * unnormalized_tail(x, eta_);
  }

  double cdf(double x) const { return 1.0 - tail_mass(x); }

  /// Inverse CDF by bracketed Newton on the closed-ish tail formula.
  double quantile(double u) const {
    if (!(u >= 0.0 && u < 1.0))
      throw std::domain_error("LogParetoDensity::quantile: u must be in [0,1)");
    if (u == 0.0) return x_m_;
    const double target = 1.0 - u;  // tail mass to hit
    double lo = x_m_, hi = x_m_ * 2.0;
    while (tail_mass(hi) > target) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) break;
    }
    double x = std::sqrt(lo * hi);
    for (int it = 0; it < 80; ++it) {
      const double tm = tail_mass(x);
      if (tm > target)
        lo = x;
      else
        hi = x;
      const double step = (tm - target) / density(x);
      double nx = x + step;  // d(tail)/dx = -density
      if (!(nx > lo && nx < hi)) nx = std::sqrt(lo * hi);
      if (std::fabs(nx - x) <= 1e-14 * x) return nx;
      x = nx;
    }
    return x;
  }

  /// Numeric version of the Lemma 1 functional, tolerance ~1e-8.
  double truncated_moment_ratio(double u, double gamma) const {
    if (!(gamma > 0.0 && gamma < eta_))
      throw std::domain_error("truncated_moment_ratio: requires 0 < gamma < eta");
    if (!(u > x_m_)) throw std::domain_error("truncated_moment_ratio: requires u > x_m");
    const double upper = c_ * unnormalized_tail(u, eta_ - gamma);
    // lower first moment over [x_m, u], geometric panels
    std::vector<double> pts{x_m_};
    while (pts.back() * 4.0 < u) pts.push_back(pts.back() * 4.0);
    pts.push_back(u);
    const auto r = quad::integrate_segments(
        [this](double x) { return x * density(x); }, pts, quad::QuadratureSpec(1e-10, 48));
    return std::pow(u, 1.0 - gamma) * upper / r.value;
  }

 private:
  LogParetoDensity(double eta, double x_m) : eta_(eta), x_m_(x_m), c_(1.0) {
    c_ = 1.0 / unnormalized_tail(x_m_, eta_);
  }

  // int_X^inf ln(e+x) x^{-(1+s)} dx, by parts:
  //   ln(e+X) X^{-s}/s + (1/s) int_X^inf x^{-s}/(e+x) dx,
  // the remaining integral mapped to a smooth O(1) integrand on [0,1] so
  // the quadrature tolerance is relative no matter how large X is.
  double unnormalized_tail(double X, double s) const {
    const double lead = std::log(M_E + X) * std::pow(X, -s) / s;
    const auto r = quad::integrate_adaptive(
        [X, s](double w) { return 1.0 / (1.0 + (M_E / X) * std::pow(w, 1.0 / s)); }, 0.0, 1.0,
        quad::QuadratureSpec(1e-12, 48));
    const double rest = std::pow(X, -s) / (s * s) * r.value;
    return lead + rest;
  }

  double eta_;
  double x_m_;
  double c_;
};

inline double density_eval(const LogParetoDensity& f, double x) { return f.density(x); }

inline double sample(const LogParetoDensity& f, double uniform) { return f.quantile(uniform); }

inline double truncated_moment_ratio(const LogParetoDensity& f, double u, double gamma) {
  return f.truncated_moment_ratio(u, gamma);
}

}  // namespace ouqsd::heavytail
