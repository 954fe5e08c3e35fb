#include <catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "ouqsd/eigen.hpp"
#include "ouqsd/quadrature.hpp"
#include "oracles.hpp"

using namespace ouqsd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const kernels::OUParams unit_drift(1.0);
}

TEST_CASE("spectral coefficients") {
  SECTION("lambda = a terminates: psi_a(u) = u") {
    const auto s = eigen::spectral_coefficients(unit_drift, 1.0, 1e-12, 10.0);
    CHECK(s.term_count() == 1);
    for (double u : {0.3, 2.0, 9.5}) CHECK_THAT(eigen::psi_eval(s, u), WithinRel(u, 1e-15));
  }

  SECTION("hand-derived low-order coefficients") {
    const auto s = eigen::spectral_coefficients(unit_drift, 0.5, 1e-12, 12.0);
    CHECK(s.coefficient(0) == 1.0);
    CHECK_THAT(s.coefficient(1), WithinRel(1.0 / 6.0, 1e-15));
    CHECK_THAT(s.coefficient(2), WithinRel(1.0 / 24.0, 1e-15));
    const auto above = eigen::spectral_coefficients(unit_drift, 1.5, 1e-12, 12.0);
    CHECK_THAT(above.coefficient(1), WithinRel(-1.0 / 6.0, 1e-15));
  }

  SECTION("sign pattern on both sides of the dichotomy") {
    for (double lam : {0.2, 0.5, 0.9, 1.0}) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 10.0);
      for (const double c : s.scaled_terms) CHECK(c >= 0.0);
    }
    for (double lam : {1.2, 2.0, 2.9}) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 10.0);
      CHECK(s.scaled_terms[0] > 0.0);
      for (std::size_t k = 1; k < s.term_count(); ++k) CHECK(s.scaled_terms[k] < 0.0);
    }
  }

  SECTION("truncation honours the tolerance at u_max") {
    const auto s = eigen::spectral_coefficients(unit_drift, 0.5, 1e-12, 12.0);
    double abs_sum = 0.0;
    for (const double c : s.scaled_terms) abs_sum += std::fabs(c);
    CHECK(std::fabs(s.scaled_terms.back()) < 1e-11 * abs_sum);
  }

  SECTION("input guards") {
    CHECK_THROWS_AS(eigen::spectral_coefficients(unit_drift, 0.5, 0.0, 12.0), std::domain_error);
    CHECK_THROWS_AS(eigen::spectral_coefficients(unit_drift, 0.5, 1e-12, 0.0), std::domain_error);
    CHECK_THROWS_AS(eigen::spectral_coefficients(unit_drift, 0.5, 1e-12, 40.0),
                    std::domain_error);  // a u_max^2 too large for doubles
  }
}

TEST_CASE("phi evaluation") {
  const auto s = eigen::spectral_coefficients(unit_drift, 0.5, 1e-13, 12.0);

  CHECK(eigen::phi_eval(s, 0.0) == 0.0);
  CHECK_THAT(eigen::phi_eval(s, 1.0), WithinRel(0.44850432368017723, 1e-12));

  SECTION("phi'(0) = 1") {
    const double h = 1e-6;
    CHECK_THAT(eigen::phi_eval(s, h) / h, WithinAbs(1.0, 1e-6));
  }

  SECTION("lambda = a closed form") {
    const auto sa = eigen::spectral_coefficients(unit_drift, 1.0, 1e-12, 12.0);
    CHECK_THAT(eigen::phi_eval(sa, 2.0), WithinRel(2.0 * std::exp(-4.0), 1e-14));
  }

  SECTION("agrees with an independent ODE integration") {
    const testoracle::PsiOde ode{1.0, 0.5};
    for (double u : {0.5, 1.0, 2.0, 5.0})
      CHECK_THAT(eigen::phi_eval(s, u), WithinAbs(ode.phi(u), 1e-8));
  }

  SECTION("range guard") {
    CHECK_THROWS_AS(eigen::phi_eval(s, 12.5), std::out_of_range);
    CHECK_THROWS_AS(eigen::phi_eval(s, -0.1), std::domain_error);
  }
}

TEST_CASE("phi mass") {
  SECTION("closed values") {
    const auto s1 = eigen::spectral_coefficients(unit_drift, 1.0, 1e-12, 12.0);
    CHECK_THAT(eigen::phi_mass(s1), WithinRel(0.5, 1e-14));
    const auto s2 = eigen::spectral_coefficients(kernels::OUParams(2.0), 2.0, 1e-12, 12.0);
    CHECK_THAT(eigen::phi_mass(s2), WithinRel(0.25, 1e-14));
    const auto s05 = eigen::spectral_coefficients(unit_drift, 0.5, 1e-12, 12.0);
    CHECK_THAT(eigen::phi_mass(s05), WithinRel(1.0, 1e-14));
  }

  SECTION("equals 1/(2 lambda) across the spectrum") {
    // integrate the eigenvalue equation once: -phi'(0)/2 = -lambda * mass
    for (double lam : {0.05, 0.2, 0.45, 0.8, 1.0}) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 12.0);
      CHECK_THAT(eigen::phi_mass(s), WithinRel(1.0 / (2.0 * lam), 1e-13));
    }
    for (double a : {0.5, 2.0, 3.0}) {
      const auto s = eigen::spectral_coefficients(kernels::OUParams(a), 0.4 * a, 1e-12, 8.0);
      CHECK_THAT(eigen::phi_mass(s), WithinRel(1.0 / (0.8 * a), 1e-13));
    }
  }

  SECTION("quadrature route agrees") {
    const eigen::PhiFunction phi(unit_drift, 0.5);
    const auto body = quad::integrate_segments([&](double u) { return phi(u); },
                                               {0.0, 1.0, 5.0, 15.0, 40.0},
                                               quad::QuadratureSpec(1e-11, 50));
    CHECK_THAT(body.value + phi.tail_integral(40.0), WithinAbs(phi.mass(), 1e-8));
  }

  SECTION("respects the harmonic-sum upper bound") {
    // mass <= (1/2a)(1 + e^{lambda d/2a}/2 * sum k^{-(1+lambda/2a)}), d = 1
    for (double lam : {0.3, 0.5, 0.8}) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 12.0);
      double zeta = 0.0;
      const double expo = 1.0 + 0.5 * lam;
      for (double k = 1.0; k < 2e6; k += 1.0) zeta += std::pow(k, -expo);
      zeta += std::pow(2e6, 1.0 - expo) / (expo - 1.0);  // integral tail
      const double bound = 0.5 * (1.0 + 0.5 * std::exp(0.5 * lam) * zeta);
      CHECK(eigen::phi_mass(s) <= bound);
    }
  }

  SECTION("monotone decreasing and continuous in lambda") {
    double prev = 1e300;
    for (int i = 1; i <= 10; ++i) {
      const double lam = 0.1 * i;
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 12.0);
      const double m = eigen::phi_mass(s);
      CHECK(m < prev);
      prev = m;
    }
  }

  SECTION("domain guards") {
    const auto s = eigen::spectral_coefficients(unit_drift, 1.5, 1e-12, 10.0);
    CHECK_THROWS_AS(eigen::phi_mass(s), std::domain_error);
    const auto s0 = eigen::spectral_coefficients(unit_drift, -0.2, 1e-12, 10.0);
    CHECK_THROWS_AS(eigen::phi_mass(s0), std::domain_error);
  }
}

TEST_CASE("full-range evaluator") {
  SECTION("series and asymptotic branches agree at the same point") {
    for (double lam : {0.3, 0.5, 0.9}) {
      const eigen::PhiFunction phi(unit_drift, lam);
      // u just past the switch: operator() takes the asymptotic branch,
      // psi() still evaluates the power series at the identical u
      for (double factor : {1.001, 1.02, 1.045}) {
        const double u = phi.series_range() * factor;
        const double asym_val = phi(u);
        const double series_val = std::exp(-u * u) * phi.psi(u);
        CHECK_THAT(asym_val, WithinRel(series_val, 1e-10));
      }
      // and the leading-order tail exponent is visible there
      const double u = phi.series_range() * 1.001;
      CHECK_THAT(phi(u), WithinRel(phi.tail_constant() * std::pow(u, -phi.tail_exponent()),
                                   5e-3));
    }
  }

  SECTION("frozen values for lambda = 0.3") {
    const eigen::PhiFunction phi(unit_drift, 0.3);
    CHECK_THAT(phi(2.0), WithinRel(0.19650631293970326, 1e-12));
    CHECK_THAT(phi.tail_constant(), WithinRel(0.34806589461817537, 1e-13));
    CHECK_THAT(phi.cdf_unnormalized(30.0), WithinRel(1.2484022342591321, 1e-11));
    CHECK_THAT(phi.mass(), WithinRel(1.0 / 0.6, 1e-14));
  }

  SECTION("cdf against frozen high-precision values, lambda = 0.5") {
    const eigen::PhiFunction phi(unit_drift, 0.5);
    CHECK_THAT(phi.cdf(0.2), WithinRel(0.019670629802668351, 1e-11));
    CHECK_THAT(phi.cdf(1.0), WithinRel(0.34201567700035282, 1e-12));
    CHECK_THAT(phi.cdf(2.5), WithinRel(0.67841420046849120, 1e-12));
    CHECK_THAT(phi.cdf(12.0), WithinRel(0.85869006052700974, 1e-12));
  }

  SECTION("cdf is consistent across the poisson/asymptotic switch") {
    // cdf(b) - cdf(a) must equal the integral of the density over [a, b]
    // when a and b straddle the internal switch point
    const eigen::PhiFunction phi(unit_drift, 0.5);
    const double u_switch = std::sqrt(2500.0);
    const double a = u_switch * 0.99, b = u_switch * 1.01;
    const auto r = quad::integrate_adaptive([&](double v) { return phi(v); }, a, b,
                                            quad::QuadratureSpec(1e-13, 50));
    CHECK_THAT(phi.cdf_unnormalized(b) - phi.cdf_unnormalized(a), WithinAbs(r.value, 1e-10));
  }

  SECTION("cdf matches quadrature of the density") {
    const eigen::PhiFunction phi(unit_drift, 0.7);
    for (double u : {0.5, 2.0, 8.0}) {
      const auto r = quad::integrate_adaptive([&](double v) { return phi(v); }, 0.0, u,
                                              quad::QuadratureSpec(1e-12, 50));
      CHECK_THAT(phi.cdf_unnormalized(u), WithinAbs(r.value, 1e-10));
    }
  }

  SECTION("quantile inverts the cdf over many scales") {
    const eigen::PhiFunction phi(unit_drift, 0.5);
    for (double p : {1e-4, 0.1, 0.5, 0.9, 0.99, 1.0 - 1e-5, 1.0 - 1e-9}) {
      const double y = phi.quantile(p);
      CHECK_THAT(phi.cdf(y), WithinAbs(p, 1e-11));
    }
  }

  CHECK_THROWS_AS(eigen::PhiFunction(unit_drift, 1.5), std::domain_error);
  CHECK_THROWS_AS(eigen::PhiFunction(unit_drift, 0.0), std::domain_error);
}

TEST_CASE("qsd distribution") {
  SECTION("minimal QSD closed form, several drift rates") {
    for (double a : {0.5, 1.0, 2.0}) {
      const auto dist = eigen::build_qsd(kernels::OUParams(a), a, 6.0);
      double worst = 0.0;
      for (double y = 0.0; y <= 6.0 + 1e-12; y += 0.01)
        worst = std::max(worst,
                         std::fabs(dist.density(y) - 2.0 * a * y * std::exp(-a * y * y)));
      CHECK(worst <= 1e-8);
      CHECK_THAT(dist.cdf(1.0), WithinRel(1.0 - std::exp(-a), 1e-12));
    }
  }

  SECTION("median of the minimal QSD at a = 1") {
    const auto dist = eigen::build_qsd(unit_drift, 1.0, 6.0);
    CHECK_THAT(dist.median(), WithinAbs(std::sqrt(std::log(2.0)), 1e-9));
  }

  SECTION("density and mass structure for lambda < a") {
    const auto dist = eigen::build_qsd(unit_drift, 0.5, 12.0);
    CHECK(dist.density(0.0) == 0.0);
    for (double y : {0.05, 0.5, 3.0, 11.5}) CHECK(dist.density(y) > 0.0);
    CHECK_THAT(dist.mass_c(), WithinRel(1.0, 1e-13));
    CHECK_THAT(dist.density(0.5), WithinRel(0.40669634639183527, 1e-11));
    CHECK_THAT(dist.density(1.0), WithinRel(0.44850432368017723, 1e-11));
    CHECK_THAT(dist.density(2.0), WithinRel(0.13991572709527479, 1e-11));
    CHECK_THAT(dist.density(4.0), WithinRel(0.032621981337161388, 1e-11));
    CHECK_THAT(dist.median(), WithinAbs(1.4127035248879859, 1e-8));
  }

  SECTION("a = 2, lambda = 0.6 frozen values") {
    const auto dist = eigen::build_qsd(kernels::OUParams(2.0), 0.6, 8.0);
    CHECK_THAT(dist.mass_c(), WithinRel(1.0 / 1.2, 1e-13));
    CHECK_THAT(dist.density(1.0), WithinRel(0.30718370079059800, 1e-11));
    CHECK_THAT(dist.cdf(1.0), WithinRel(0.31813894652422374, 1e-11));
  }

  SECTION("cdf table runs from 0 to 1 through the heavy tail") {
    const auto dist = eigen::build_qsd(unit_drift, 0.5, 12.0);
    const auto& table = dist.cdf_table();
    CHECK(table.front().first == 0.0);
    CHECK(table.front().second == 0.0);
    double prev = -1.0;
    for (const auto& [y, c] : table) {
      CHECK(c >= prev);
      prev = c;
    }
    CHECK(table.back().second >= 1.0 - 1e-8);
  }

  SECTION("density integrates to 1 with the analytic tail") {
    const auto dist = eigen::build_qsd(unit_drift, 0.5, 12.0);
    const auto body =
        quad::integrate_segments([&](double y) { return dist.density(y); },
                                 {0.0, 1.0, 4.0, 12.0}, quad::QuadratureSpec(1e-11, 50));
    const double tail = dist.phi().tail_integral(12.0) / dist.mass_c();
    CHECK_THAT(body.value + tail, WithinAbs(1.0, 1e-8));
  }

  SECTION("quantile round trip") {
    for (double lam : {0.5, 1.0}) {
      const auto dist = eigen::build_qsd(unit_drift, lam, 12.0);
      for (double y : {0.2, 1.0, 2.5})
        CHECK_THAT(dist.quantile(dist.cdf(y)), WithinAbs(y, 1e-6));
    }
  }

  CHECK_THROWS_AS(eigen::build_qsd(unit_drift, 1.2, 12.0), std::domain_error);
  CHECK_THROWS_AS(eigen::build_qsd(unit_drift, 0.0, 12.0), std::domain_error);
}

TEST_CASE("first sign change") {
  SECTION("no zero at or below the spectral bottom") {
    for (double lam : {0.25, 0.5, 1.0}) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-12, 10.0);
      CHECK_FALSE(eigen::first_sign_change(s, 10.0).has_value());
    }
  }

  SECTION("zeros above the bottom, cross-validated by the ODE oracle") {
    // independent references: mpmath root-finding on the Kummer form
    const double refs[3][2] = {
        {1.2, 2.0948160448384005}, {1.5, 1.7709108644295266}, {2.5, 1.3396934186621786}};
    for (const auto& [lam, ref] : refs) {
      const auto s = eigen::spectral_coefficients(unit_drift, lam, 1e-13, 10.0);
      const auto zero = eigen::first_sign_change(s, 10.0);
      REQUIRE(zero.has_value());
      CHECK_THAT(*zero, WithinAbs(ref, 1e-8));
      const testoracle::PsiOde ode{1.0, lam};
      CHECK_THAT(*zero, WithinAbs(ode.first_zero(10.0), 1e-8));
    }
  }

  SECTION("scan range guard") {
    const auto s = eigen::spectral_coefficients(unit_drift, 1.5, 1e-12, 10.0);
    CHECK_THROWS_AS(eigen::first_sign_change(s, 11.0), std::domain_error);
  }
}

TEST_CASE("generator residual by central differences") {
  const double h = 1e-4;
  for (double lam : {0.3, 0.6, 1.0}) {
    const eigen::PhiFunction phi(unit_drift, lam);
    for (double u : {0.5, 1.0, 2.0}) {
      const double p0 = phi(u), pp = phi(u + h), pm = phi(u - h);
      const double second = (pp - 2.0 * p0 + pm) / (h * h);
      const double drift = ((u + h) * pp - (u - h) * pm) / (2.0 * h);
      CHECK(std::fabs(0.5 * second + drift + lam * p0) <= 1e-5);
    }
  }
}
