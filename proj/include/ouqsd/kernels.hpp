#pragma once

#include <cmath>
#include <stdexcept>

// Closed-form transition machinery for the Ornstein-Uhlenbeck process
// dX = dB - a X dt absorbed at 0. Everything here reduces to Brownian
// quantities through the time changes h and g:
//
//   h(t) = (1 - e^{-2at}) / 2a,   g(t) = (e^{2at} - 1) / 2a,
//   X_t  = e^{-at} (X_0 + W_{g(t)}),
//   P_x(X_t in dy)  has mean e^{-at} x and variance h(t),
//   P_x(T_0 > t)    = P_{e^{-at} x}(T_0^B > h(t)).

namespace ouqsd::kernels {

struct OUParams {
  double a;  // drift rate (1/time), strictly positive

  explicit OUParams(double drift_rate) : a(drift_rate) {
    if (!(std::isfinite(a) && a > 0.0))
      throw std::domain_error("OUParams: drift rate must be finite and > 0");
  }

  /// Bottom of the spectrum: the family nu_lambda exists for lambda in (0, a],
  /// and lambda = a is the minimal quasi-stationary distribution.
  double minimal_qsd_lambda() const { return a; }
};

struct TimeChange {
  double h;  // variance of X_t given X_0, sup = 1/(2a)
  double g;  // Brownian clock: X_t = e^{-at}(X_0 + W_{g(t)})
};

inline TimeChange time_change(const OUParams& params, double t) {
  if (!(std::isfinite(t) && t >= 0.0))
    throw std::domain_error("time_change: t must be finite and >= 0");
  const double a = params.a;
  // expm1 keeps full relative accuracy for small t.
  return {-std::expm1(-2.0 * a * t) / (2.0 * a), std::expm1(2.0 * a * t) / (2.0 * a)};
}

namespace detail {

inline double gaussian_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace detail

/// Free transition density p(t,x,y) of the OU process.
inline double transition_density(const OUParams& params, double t, double x, double y) {
  if (!(std::isfinite(t) && t > 0.0))
    throw std::domain_error("transition_density: t must be finite and > 0");
  const TimeChange tc = time_change(params, t);
  return detail::gaussian_pdf(y, std::exp(-params.a * t) * x, tc.h);
}

/// Absorbed (sub-Markovian) transition density
/// q(t,x,y) = p(t,x,y) - p(t,x,-y), defined for x,y > 0.
/// By continuity q = 0 when x or y sits exactly on the boundary.
inline double absorbed_density(const OUParams& params, double t, double x, double y) {
  if (!(std::isfinite(t) && t > 0.0))
    throw std::domain_error("absorbed_density: t must be finite and > 0");
  if (x < 0.0 || y < 0.0)
    throw std::domain_error("absorbed_density: requires x >= 0 and y >= 0");
  if (x == 0.0 || y == 0.0) return 0.0;
  const TimeChange tc = time_change(params, t);
  const double m = std::exp(-params.a * t) * x;
  const double z = m * y / tc.h;
  if (z < 30.0) {
    // sinh form: no cancellation as q -> 0.
    return std::sqrt(2.0 / (M_PI * tc.h)) * std::exp(-(m * m + y * y) / (2.0 * tc.h)) *
           std::sinh(z);
  }
  // Difference of Gaussians: the reflected term is negligible here and the
  // sinh factor would eventually overflow.
  return detail::gaussian_pdf(y, m, tc.h) - detail::gaussian_pdf(-y, m, tc.h);
}

/// P_x(T_0^B > t) for a Brownian motion started at x >= 0.
inline double brownian_survival(double x, double t) {
  if (!(std::isfinite(t) && t > 0.0))
    throw std::domain_error("brownian_survival: t must be finite and > 0");
  if (!(std::isfinite(x) && x >= 0.0))
    throw std::domain_error("brownian_survival: x must be finite and >= 0");
  return std::erf(x / std::sqrt(2.0 * t));
}

/// P_x(T_0^X > t) for the OU process, via the reduction to Brownian motion.
inline double ou_survival(const OUParams& params, double x, double t) {
  if (!(std::isfinite(t) && t > 0.0))
    throw std::domain_error("ou_survival: t must be finite and > 0");
  const TimeChange tc = time_change(params, t);
  return brownian_survival(std::exp(-params.a * t) * x, tc.h);
}

}  // namespace ouqsd::kernels
