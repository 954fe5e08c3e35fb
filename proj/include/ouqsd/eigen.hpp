#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ouqsd/errors.hpp"
#include "ouqsd/kernels.hpp"

// Eigenfunctions of the adjoint generator L*phi = -lambda phi with
// phi(0) = 0, phi'(0) = 1, and their normalization into quasi-stationary
// distributions nu_lambda.
//
// With psi(u) = e^{a u^2} phi(u), psi is odd analytic with
//   psi(u) = sum_k b_{2k+1} u^{2k+1},
//   b_1 = 1,  b_{2k+3} = b_{2k+1} * (a(2k+1) - lambda) / ((2k+3)(k+1)).
// At lambda = a the series terminates: psi_a(u) = u.
//
// For lambda in (0,a) the density phi_lambda has a regularly varying tail,
//   phi_lambda(u) ~ c0 * u^{-(1+lambda/a)},
//   c0 = (sqrt(pi)/2) a^{-(1+lambda/2a)} / Gamma((1-lambda/a)/2),
// which follows from the coefficient asymptotics. Tail integrals therefore
// must NOT be treated as Gaussian; everything below carries the polynomial
// tail explicitly.
//
// Exact identities used as cross-checks throughout the test suite:
//   int_0^inf phi_lambda = 1/(2 lambda)        (integrate the ODE once),
//   mass series sum_k t_k, t_k = (k!/a^k) b_{2k+1}, telescopes exactly:
//   sum_{k>=K} t_k = (2a/lambda)(K+1/2) t_K.

namespace ouqsd::eigen {

using kernels::OUParams;

namespace detail {

// Series evaluation is safe while a*u^2 stays below this; beyond it the
// closed asymptotic form is already accurate to ~1e-13.
inline constexpr double kSeriesZMax = 600.0;
// The Poisson-weighted CDF series costs O(a u^2) terms; switch to the
// asymptotic complement beyond this.
inline constexpr double kCdfZMax = 2500.0;

}  // namespace detail

struct SpectralSeries {
  double a = 1.0;
  double lambda = 1.0;
  double u_max = 12.0;
  double tol = 1e-12;
  // Terms b_{2k+1} * u_max^{2k+1}. Raw b_{2k+1} underflow double precision
  // beyond k ~ 165, so coefficients are stored in this evaluation-scaled
  // form; signs and truncation criteria are unchanged by the scaling.
  std::vector<double> scaled_terms;

  std::size_t term_count() const { return scaled_terms.size(); }

  /// b_{2k+1} recovered by direct recursion (exact for moderate k).
  double coefficient(std::size_t k) const {
    double b = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double two_i1 = 2.0 * static_cast<double>(i) + 1.0;
      b *= (a * two_i1 - lambda) / ((two_i1 + 2.0) * (static_cast<double>(i) + 1.0));
    }
    return b;
  }
};

inline SpectralSeries spectral_coefficients(const OUParams& params, double lambda, double tol,
                                            double u_max) {
  if (!(std::isfinite(lambda))) throw std::domain_error("spectral_coefficients: lambda not finite");
  if (!(tol > 0.0)) throw std::domain_error("spectral_coefficients: tol must be > 0");
  if (!(u_max > 0.0 && std::isfinite(u_max)))
    throw std::domain_error("spectral_coefficients: u_max must be finite and > 0");
  const double a = params.a;
  if (a * u_max * u_max > 690.0)
    throw std::domain_error("spectral_coefficients: a*u_max^2 too large for double range");

  SpectralSeries s;
  s.a = a;
  s.lambda = lambda;
  s.u_max = u_max;
  s.tol = tol;

  const double z = a * u_max * u_max;
  double term = u_max;  // b_1 * u_max
  double abs_sum = 0.0;
  for (std::size_t k = 0;; ++k) {
    s.scaled_terms.push_back(term);
    abs_sum += std::fabs(term);
    const double two_k1 = 2.0 * static_cast<double>(k) + 1.0;
    term *= u_max * u_max * (a * two_k1 - lambda) / ((two_k1 + 2.0) * (static_cast<double>(k) + 1.0));
    if (term == 0.0) break;  // terminating lambda (e.g. lambda = a)
    if (static_cast<double>(k) > z && std::fabs(term) < tol * abs_sum) break;
    if (k > 400000)
      throw accuracy_error("spectral_coefficients: series did not truncate", abs_sum, 1.0);
  }
  return s;
}

/// psi_lambda(u) = e^{a u^2} phi_lambda(u), for u in [0, u_max].
inline double psi_eval(const SpectralSeries& s, double u) {
  if (!(u >= 0.0)) throw std::domain_error("psi_eval: u must be >= 0");
  if (u > s.u_max * (1.0 + 1e-12)) throw std::out_of_range("psi_eval: u exceeds validated u_max");
  if (u == 0.0) return 0.0;
  const double r = u / s.u_max;
  const double r2 = r * r;
  double pw = r;
  double sum = 0.0;
  for (const double c : s.scaled_terms) {
    sum += c * pw;
    pw *= r2;
  }
  return sum;
}

inline double phi_eval(const SpectralSeries& s, double u) {
  return std::exp(-s.a * u * u) * psi_eval(s, u);
}

/// int_0^inf phi_lambda, lambda in (0, a]. The mass series
/// (1/2a) sum_k t_k is summed with its exact telescoped remainder,
/// so the result is correct to machine precision for every lambda.
inline double phi_mass(const SpectralSeries& s) {
  if (!(s.lambda > 0.0 && s.lambda <= s.a))
    throw std::domain_error("phi_mass: requires lambda in (0, a]");
  const double s0 = s.lambda / s.a;
  const double beta = 0.5 * (1.0 - s0);
  double t = 1.0;
  double partial = 0.0;
  const int K = 64;
  for (int k = 0; k < K; ++k) {
    partial += t;
    t *= (beta + static_cast<double>(k)) / (1.5 + static_cast<double>(k));
  }
  const double remainder = (2.0 / s0) * (static_cast<double>(K) + 0.5) * t;
  return (partial + remainder) / (2.0 * s.a);
}

/// Smallest zero of psi_lambda in (0, scan_max], if any: sign scan on a
/// 10^4-point grid, then bisection to 1e-10.
inline std::optional<double> first_sign_change(const SpectralSeries& s, double scan_max) {
  if (!(scan_max > 0.0 && scan_max <= s.u_max * (1.0 + 1e-12)))
    throw std::domain_error("first_sign_change: scan range exceeds validated u_max");
  const int n = 10000;
  double prev_u = scan_max / n;
  double prev_v = psi_eval(s, prev_u);
  for (int i = 2; i <= n; ++i) {
    const double u = scan_max * i / n;
    const double v = psi_eval(s, u);
    if (v == 0.0) return u;
    if ((prev_v > 0.0) != (v > 0.0)) {
      double lo = prev_u, hi = u;
      double flo = prev_v;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        const double fm = psi_eval(s, mid);
        if (fm == 0.0) return mid;
        if ((flo > 0.0) != (fm > 0.0))
          hi = mid;
        else {
          lo = mid;
          flo = fm;
        }
      }
      return 0.5 * (lo + hi);
    }
    prev_u = u;
    prev_v = v;
  }
  return std::nullopt;
}

/// Full-range evaluator of phi_lambda for lambda in (0, a]: power series
/// while a u^2 <= 600, matched polynomial-tail asymptotics beyond. Also
/// provides the exact CDF, tail integrals and quantiles.
class PhiFunction {
 public:
  PhiFunction(const OUParams& params, double lambda) : a_(params.a), lambda_(lambda) {
    if (!(std::isfinite(lambda) && lambda > 0.0 && lambda <= a_))
      throw std::domain_error("PhiFunction: requires lambda in (0, a]");
    s0_ = lambda_ / a_;
    m_ = 1.0 + s0_;
    mass_ = 1.0 / (2.0 * lambda_);
    if (s0_ == 1.0)
      c0_ = 0.0;  // psi_a(u) = u, no polynomial tail
    else
      c0_ = 0.5 * std::sqrt(M_PI) * std::pow(a_, -(1.0 + 0.5 * s0_)) /
            std::tgamma(0.5 * (1.0 - s0_));
    u_series_max_ = std::sqrt(detail::kSeriesZMax / a_);
  }

  double a() const { return a_; }
  double lambda() const { return lambda_; }
  double mass() const { return mass_; }
  double tail_exponent() const { return m_; }
  double tail_constant() const { return c0_; }
  double series_range() const { return u_series_max_; }

  /// phi_lambda(u) for any u >= 0.
  double operator()(double u) const {
    if (!(u >= 0.0)) throw std::domain_error("PhiFunction: u must be >= 0");
    if (u == 0.0) return 0.0;
    const double z = a_ * u * u;
    if (z <= detail::kSeriesZMax) return std::exp(-z) * psi_series(u);
    return c0_ * std::pow(u, -m_) * asym_factor(u);
  }

  /// Series evaluation of psi = e^{a u^2} phi. Valid a little beyond the
  /// internal series/asymptotic switch, which lets tests compare the two
  /// representations at the same point.
  double psi(double u) const {
    if (!(u >= 0.0 && a_ * u * u <= 660.0))
      throw std::out_of_range("PhiFunction::psi: outside series range");
    return psi_series(u);
  }

  /// int_0^u phi_lambda, exact Poisson-weighted series / asymptotic complement.
  double cdf_unnormalized(double u) const {
    if (!(u >= 0.0)) throw std::domain_error("PhiFunction: u must be >= 0");
    if (u == 0.0) return 0.0;
    const double z = a_ * u * u;
    if (s0_ == 1.0 || z <= detail::kCdfZMax) return poisson_series_cdf(z);
    return mass_ - tail_integral(u);
  }

  double cdf(double u) const {
    const double v = cdf_unnormalized(u) / mass_;
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }

  double density(double u) const { return (*this)(u) / mass_; }

  /// int_u^inf phi_lambda.
  double tail_integral(double u) const {
    if (u <= 0.0) return mass_;
    const double z = a_ * u * u;
    if (s0_ == 1.0 || z <= detail::kCdfZMax) return mass_ - poisson_series_cdf(z);
    // termwise integral of the asymptotic expansion
    double d = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    const double base = std::pow(u, -s0_);
    for (int j = 0; j < 400; ++j) {
      const double term = d * base / (s0_ + 2.0 * j);
      if (std::fabs(term) >= prev) break;
      sum += term;
      prev = std::fabs(term);
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
      const double mj = m_ + 2.0 * j;
      d *= mj * (mj + 1.0) / (4.0 * a_ * (j + 1.0) * u * u);
    }
    return c0_ * sum;
  }

  /// Inverse CDF on [0, 1).
  double quantile(double p) const {
    if (!(p >= 0.0 && p < 1.0)) throw std::domain_error("PhiFunction::quantile: p must be in [0,1)");
    if (p == 0.0) return 0.0;
    double lo = 0.0, hi = u_series_max_;
    if (cdf(hi) < p) {
      // start from the asymptotic inverse of the tail
      const double tail_target = (1.0 - p) * mass_;
      double guess =
          (c0_ > 0.0) ? std::pow(c0_ / (s0_ * tail_target), 1.0 / s0_) : 2.0 * u_series_max_;
      lo = hi;
      hi = std::max(2.0 * guess, 2.0 * hi);
      int grow = 0;
      while (cdf(hi) < p && grow++ < 2000) {
        lo = hi;
        hi *= 4.0;
      }
    }
    // geometric bisection, then Newton polish
    for (int it = 0; it < 110; ++it) {
      const double mid = (lo > 0.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
      if (cdf(mid) < p)
        lo = mid;
      else
        hi = mid;
      if (hi - lo <= 1e-13 * hi) break;
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 4; ++it) {
      const double dens = density(x);
      if (!(dens > 0.0)) break;
      double nx = x - (cdf(x) - p) / dens;
      if (!(nx > lo && nx < hi)) break;
      x = nx;
    }
    return x;
  }

 private:
  double psi_series(double u) const {
    const double z = a_ * u * u;
    double term = u;
    double sum = u;
    const double kcap = z + 12.0 * std::sqrt(z) + 60.0;
    for (double k = 0.0; k <= kcap; k += 1.0) {
      const double two_k1 = 2.0 * k + 1.0;
      term *= u * u * (a_ * two_k1 - lambda_) / ((two_k1 + 2.0) * (k + 1.0));
      if (term == 0.0) break;
      sum += term;
      if (k > z && std::fabs(term) < 1e-17 * std::fabs(sum)) break;
    }
    return sum;
  }

  // 1 + c1 u^{-2} + ... from the Kummer expansion, optimally truncated.
  double asym_factor(double u) const {
    double term = 1.0;
    double sum = 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= 400; ++j) {
      const double mj = m_ + 2.0 * (j - 1);
      term *= mj * (mj + 1.0) / (4.0 * a_ * j * u * u);
      if (std::fabs(term) >= prev) break;
      sum += term;
      prev = std::fabs(term);
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
    }
    return sum;
  }

  // (1/2a) sum_k t_k P(k+1, z) with t_0 = 1, t_{k+1} = t_k (beta+k)/(3/2+k),
  // beta = (1-s0)/2, and P(k+1,z) = P(Poisson(z) > k). The Poisson weights
  // vanish rapidly for k beyond z, so the sum needs O(z + sqrt(z)) terms.
  double poisson_series_cdf(double z) const {
    const double beta = 0.5 * (1.0 - s0_);
    std::size_t kmax = static_cast<std::size_t>(z + 10.0 * std::sqrt(z) + 30.0);
    if (s0_ == 1.0) kmax = 0;  // only t_0 survives
    // Poisson pmf pi_j = e^{-z} z^j / j!, seeded at the mode in log space
    // so that z > 708 cannot underflow the whole array.
    std::vector<double> pi(kmax + 1, 0.0);
    const std::size_t j0 = std::min(kmax, static_cast<std::size_t>(z));
    pi[j0] = std::exp(static_cast<double>(j0) * std::log(z) - z -
                      std::lgamma(static_cast<double>(j0) + 1.0));
    for (std::size_t j = j0; j > 0; --j) pi[j - 1] = pi[j] * static_cast<double>(j) / z;
    for (std::size_t j = j0 + 1; j <= kmax; ++j) pi[j] = pi[j - 1] * z / static_cast<double>(j);
    double t = 1.0;
    double cum = 0.0;  // sum_{j<=k} pi_j
    double acc = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
      cum += pi[k];
      const double upper = cum < 1.0 ? 1.0 - cum : 0.0;  // P(Poisson(z) > k)
      acc += t * upper;
      t *= (beta + static_cast<double>(k)) / (1.5 + static_cast<double>(k));
      if (t == 0.0) break;
    }
    // exact telescoped bound on the discarded terms: sum_{k>kmax} t_k <= remainder
    return acc / (2.0 * a_);
  }

  double a_;
  double lambda_;
  double s0_;    // lambda / a
  double m_;     // tail exponent 1 + s0
  double mass_;  // 1/(2 lambda)
  double c0_;    // tail constant
  double u_series_max_;
};

/// The quasi-stationary distribution nu_lambda: normalized density, CDF
/// table extending through the regularly varying tail, and quantiles.
class QsdDistribution {
 public:
  QsdDistribution(const OUParams& params, double lambda, double u_max, int grid_points)
      : params_(params), lambda_(lambda), phi_(params, lambda), u_max_(u_max) {
    if (!(u_max > 0.0)) throw std::domain_error("QsdDistribution: u_max must be > 0");
    mass_ = phi_.mass();
    build_table(grid_points);
  }

  double a() const { return params_.a; }
  double lambda() const { return lambda_; }
  double mass_c() const { return mass_; }
  double u_max() const { return u_max_; }
  const PhiFunction& phi() const { return phi_; }
  const std::vector<std::pair<double, double>>& cdf_table() const { return cdf_table_; }

  double density(double y) const { return phi_(y) / mass_; }
  double cdf(double y) const { return phi_.cdf(y); }

  double quantile(double p) const {
    if (!(p >= 0.0 && p < 1.0))
      throw std::domain_error("QsdDistribution::quantile: p must be in [0,1)");
    if (p == 0.0) return 0.0;
    if (p > cdf_table_.back().second) return phi_.quantile(p);
    // bracket from the table, then Newton against the exact CDF
    std::size_t lo = 0, hi = cdf_table_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf_table_[mid].second < p)
        lo = mid;
      else
        hi = mid;
    }
    double ylo = cdf_table_[lo].first, yhi = cdf_table_[hi].first;
    const double clo = cdf_table_[lo].second, chi = cdf_table_[hi].second;
    double y = (chi > clo) ? ylo + (yhi - ylo) * (p - clo) / (chi - clo) : 0.5 * (ylo + yhi);
    for (int it = 0; it < 60; ++it) {
      const double c = cdf(y);
      const double dens = density(y);
      double ny = (dens > 0.0) ? y - (c - p) * mass_ / phi_(y) : y;
      if (c < p)
        ylo = y;
      else
        yhi = y;
      if (!(ny > ylo && ny < yhi)) ny = 0.5 * (ylo + yhi);
      if (std::fabs(ny - y) <= 1e-13 * (1.0 + y)) return ny;
      y = ny;
    }
    return y;
  }

  double median() const { return quantile(0.5); }

 private:
  void build_table(int grid_points) {
    cdf_table_.clear();
    cdf_table_.reserve(static_cast<std::size_t>(grid_points) + 420);
    double prev = 0.0;
    for (int i = 0; i <= grid_points; ++i) {
      const double y = u_max_ * static_cast<double>(i) / grid_points;
      double c = cdf(y);
      if (c < prev) c = prev;  // guard fp plateaus
      cdf_table_.emplace_back(y, c);
      prev = c;
    }
    // geometric extension through the heavy tail up to the 1 - 1e-9 quantile
    double y = u_max_;
    for (int i = 0; i < 400 && prev < 1.0 - 1e-9; ++i) {
      y *= 1.35;
      double c = cdf(y);
      if (c < prev) c = prev;
      cdf_table_.emplace_back(y, c);
      prev = c;
    }
  }

  OUParams params_;
  double lambda_;
  PhiFunction phi_;
  double mass_;
  double u_max_;
  std::vector<std::pair<double, double>> cdf_table_;
};

inline QsdDistribution build_qsd(const OUParams& params, double lambda, double u_max = 12.0,
                                 int grid_points = 240) {
  if (!(std::isfinite(lambda) && lambda > 0.0 && lambda <= params.a))
    throw std::domain_error("build_qsd: requires lambda in (0, a]");
  return QsdDistribution(params, lambda, u_max, grid_points);
}

}  // namespace ouqsd::eigen
