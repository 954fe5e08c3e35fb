#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ouqsd/errors.hpp"

// Adaptive composite Simpson integration with Richardson error control.

namespace ouqsd::quad {

struct QuadratureSpec {
  double abs_tol = 1e-9;
  int max_depth = 48;
  double domain_cut = 50.0;  // default upper truncation for improper integrals

  QuadratureSpec() = default;
  QuadratureSpec(double tol, int depth, double cut = 50.0)
      : abs_tol(tol), max_depth(depth), domain_cut(cut) {
    validate();
  }
  void validate() const {
    if (!(abs_tol > 0.0)) throw std::domain_error("QuadratureSpec: abs_tol must be > 0");
    if (max_depth < 10) throw std::domain_error("QuadratureSpec: max_depth must be >= 10");
    if (!(domain_cut > 0.0)) throw std::domain_error("QuadratureSpec: domain_cut must be > 0");
  }
};

struct IntegralResult {
  double value;
  double error_bound;
};

namespace detail {

struct AdaptState {
  const std::function<double(double)>* fn;
  int max_depth;
  double worst_leaf_error = 0.0;
  bool depth_exhausted = false;

  double eval(double x) const {
    const double v = (*fn)(x);
    if (!std::isfinite(v)) throw std::domain_error("integrate_adaptive: integrand is not finite");
    return v;
  }

  // Returns the refined estimate; accumulates its error bound into err_out.
  double refine(double lo, double hi, double flo, double fmid, double fhi, double whole,
                double tol, int depth, double& err_out) {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid);
    const double rmid = 0.5 * (mid + hi);
    const double flm = eval(lmid);
    const double frm = eval(rmid);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    const double delta = (left + right - whole) / 15.0;
    if (std::fabs(delta) <= tol || (hi - lo) < 1e-15 * (std::fabs(lo) + std::fabs(hi))) {
      err_out += std::fabs(delta);
      return left + right + delta;
    }
    if (depth >= max_depth) {
      depth_exhausted = true;
      worst_leaf_error = std::max(worst_leaf_error, std::fabs(delta));
      err_out += std::fabs(delta);
      return left + right + delta;
    }
    double err = 0.0;
    const double l = refine(lo, mid, flo, flm, fmid, left, 0.5 * tol, depth + 1, err);
    const double r = refine(mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth + 1, err);
    err_out += err;
    return l + r;
  }
};

}  // namespace detail

/// Adaptive Simpson on [lo, hi]. Throws accuracy_error (carrying the best
/// estimate) if the requested tolerance cannot be met at max_depth.
inline IntegralResult integrate_adaptive(const std::function<double(double)>& fn, double lo,
                                         double hi, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!(lo < hi)) throw std::domain_error("integrate_adaptive: requires lo < hi");
  detail::AdaptState st{&fn, spec.max_depth};
  const double mid = 0.5 * (lo + hi);
  const double flo = st.eval(lo);
  const double fmid = st.eval(mid);
  const double fhi = st.eval(hi);
  const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  double err = 0.0;
  const double value = st.refine(lo, hi, flo, fmid, fhi, whole, spec.abs_tol, 0, err);
  if (st.depth_exhausted && err > spec.abs_tol)
    throw accuracy_error("integrate_adaptive: tolerance not met at max_depth", value, err);
  return {value, err};
}

/// Integrate across an ordered breakpoint list, splitting the error budget.
inline IntegralResult integrate_segments(const std::function<double(double)>& fn,
                                         const std::vector<double>& breakpoints,
                                         const QuadratureSpec& spec = {}) {
  if (breakpoints.size() < 2) throw std::domain_error("integrate_segments: need >= 2 breakpoints");
  QuadratureSpec local = spec;
  local.abs_tol = spec.abs_tol / static_cast<double>(breakpoints.size() - 1);
  double value = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i] < breakpoints[i + 1]))
      throw std::domain_error("integrate_segments: breakpoints must be strictly increasing");
    const IntegralResult r = integrate_adaptive(fn, breakpoints[i], breakpoints[i + 1], local);
    value += r.value;
    err += r.error_bound;
  }
  return {value, err};
}

}  // namespace ouqsd::quad
