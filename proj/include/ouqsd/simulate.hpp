#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "ouqsd/eigen.hpp"
#include "ouqsd/errors.hpp"
#include "ouqsd/heavytail.hpp"
#include "ouqsd/kernels.hpp"
#include "ouqsd/rng.hpp"

// Exact-in-distribution Monte Carlo for the absorbed OU process.
//
// Paths are simulated in the transformed clock u = g(t), where
// X_t = e^{-at}(X_0 + W_u) is a plain Brownian motion started at X_0.
// Between grid points with positive endpoint values w1, w2, the path is
// killed with the exact Brownian-bridge crossing probability
// exp(-2 w1 w2 / du). Both the marginal law and the killing are exact for
// every step size; the grid density only sets the RNG cost.

namespace ouqsd::sim {

using kernels::OUParams;

/// Degenerate initial condition, provided for validation runs.
struct PointMass {
  double x0;
  explicit PointMass(double x) : x0(x) {
    if (!(std::isfinite(x) && x > 0.0)) throw std::domain_error("PointMass: x0 must be > 0");
  }
};

using InitialLaw = std::variant<heavytail::ParetoDensity, heavytail::LogParetoDensity, PointMass>;

inline double initial_quantile(const InitialLaw& law, double u) {
  return std::visit(
      [&](const auto& f) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(f)>, PointMass>)
          return f.x0;
        else
          return f.quantile(u);
      },
      law);
}

struct SimConfig {
  OUParams params;
  InitialLaw init;
  std::vector<double> checkpoints;  // ascending, all > 0
  std::uint64_t n_paths = 1;
  std::uint64_t seed = 0;
  double dg_step = 0.01;  // step in the transformed clock g(t)

  void validate() const {
    if (checkpoints.empty()) throw config_error("SimConfig: need at least one checkpoint");
    double prev = 0.0;
    for (const double t : checkpoints) {
      if (!(std::isfinite(t) && t > prev))
        throw config_error("SimConfig: checkpoints must be ascending and > 0");
      prev = t;
    }
    if (2.0 * params.a * checkpoints.back() > 700.0)
      throw config_error("SimConfig: checkpoint beyond representable g(t) (e^{2at} overflows)");
    if (!(n_paths >= 1)) throw config_error("SimConfig: n_paths must be >= 1");
    if (!(std::isfinite(dg_step) && dg_step > 0.0))
      throw config_error("SimConfig: dg_step must be > 0");
  }
};

struct SurvivalEnsemble {
  std::uint64_t n_paths_total = 0;
  std::uint64_t seed = 0;
  std::vector<double> checkpoints;
  // survivor positions X_t at each checkpoint, in path order
  std::vector<std::vector<double>> survivor_values;

  std::size_t survivor_count(std::size_t i) const { return survivor_values.at(i).size(); }
  double survival_fraction(std::size_t i) const {
    return static_cast<double>(survivor_count(i)) / static_cast<double>(n_paths_total);
  }
  double survival_std_error(std::size_t i) const {
    const double p = survival_fraction(i);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n_paths_total));
  }
};

namespace detail {

struct GridPoint {
  double u;            // position in g-time
  int checkpoint = -1; // index into checkpoints, or -1 for a plain step
};

inline std::vector<GridPoint> build_grid(const SimConfig& cfg) {
  std::vector<GridPoint> grid;
  const double dg = cfg.dg_step;
  double g_prev = 0.0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
    const double gi = kernels::time_change(cfg.params, cfg.checkpoints[i]).g;
    const double interior = std::floor(gi / dg - 1e-9) - std::floor(g_prev / dg + 1e-9);
    total += interior > 0.0 ? static_cast<std::size_t>(interior) : 0;
    total += 1;
    if (total > 20000000)
      throw config_error("SimConfig: grid exceeds 2e7 steps per path; increase dg_step");
    g_prev = gi;
  }
  grid.reserve(total);
  g_prev = 0.0;
  for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
    const double gi = kernels::time_change(cfg.params, cfg.checkpoints[i]).g;
    long long j = static_cast<long long>(std::floor(g_prev / dg)) + 1;
    for (; static_cast<double>(j) * dg < gi * (1.0 - 1e-12); ++j) {
      const double u = static_cast<double>(j) * dg;
      if (u > g_prev * (1.0 + 1e-12)) grid.push_back({u, -1});
    }
    grid.push_back({gi, static_cast<int>(i)});
    g_prev = gi;
  }
  return grid;
}

inline unsigned resolve_worker_count() {
  if (const char* env = std::getenv("OUQSD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw config_error("OUQSD_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace detail

/// Run the ensemble. Output is a pure function of (seed, config):
/// every path owns a counter-based RNG substream keyed by its index, and
/// results are assembled in path order, so worker count cannot matter.
inline SurvivalEnsemble simulate_ensemble(const SimConfig& cfg) {
  cfg.validate();
  const auto grid = detail::build_grid(cfg);
  const std::size_t n_cp = cfg.checkpoints.size();
  std::vector<double> decay(n_cp);
  for (std::size_t i = 0; i < n_cp; ++i) decay[i] = std::exp(-cfg.params.a * cfg.checkpoints[i]);

  auto run_range = [&](std::uint64_t lo, std::uint64_t hi,
                       std::vector<std::vector<double>>& values) {
    for (auto& v : values) v.clear();
    for (std::uint64_t path = lo; path < hi; ++path) {
      const auto d0 = rng::draw(cfg.seed, path, 0);
      const double x0 = initial_quantile(cfg.init, rng::to_unit_open(d0.a));
      double w_prev = x0;
      double brownian = 0.0;
      double u_prev = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto d = rng::draw(cfg.seed, path, k + 1);
        const double du = grid[k].u - u_prev;
        brownian += std::sqrt(du) * rng::standard_normal_from(d.a);
        const double w = x0 + brownian;
        if (w <= 0.0) break;
        if (rng::to_unit_open(d.b) < std::exp(-2.0 * w_prev * w / du)) break;
        if (grid[k].checkpoint >= 0)
          values[static_cast<std::size_t>(grid[k].checkpoint)].push_back(
              decay[static_cast<std::size_t>(grid[k].checkpoint)] * w);
        w_prev = w;
        u_prev = grid[k].u;
      }
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::uint64_t>(detail::resolve_worker_count(), cfg.n_paths));
  std::vector<std::vector<std::vector<double>>> partial(
      workers, std::vector<std::vector<double>>(n_cp));
  if (workers <= 1) {
    run_range(0, cfg.n_paths, partial[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (cfg.n_paths + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t lo = static_cast<std::uint64_t>(w) * chunk;
      const std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, cfg.n_paths);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi, w] { run_range(lo, hi, partial[w]); });
    }
    for (auto& th : pool) th.join();
  }

  SurvivalEnsemble out;
  out.n_paths_total = cfg.n_paths;
  out.seed = cfg.seed;
  out.checkpoints = cfg.checkpoints;
  out.survivor_values.assign(n_cp, {});
  // contiguous ascending chunks: concatenation preserves path order
  for (std::size_t i = 0; i < n_cp; ++i) {
    std::size_t total = 0;
    for (const auto& part : partial) total += part[i].size();
    out.survivor_values[i].reserve(total);
    for (const auto& part : partial)
      out.survivor_values[i].insert(out.survivor_values[i].end(), part[i].begin(), part[i].end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics on the conditioned ensemble.

/// Right-continuous empirical CDF over a survivor sample.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::domain_error("Ecdf: empty sample");
    std::sort(values_.begin(), values_.end());
  }

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& points() const { return values_; }

  double operator()(double y) const {
    const auto it = std::upper_bound(values_.begin(), values_.end(), y);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
  }

 private:
  std::vector<double> values_;
};

inline Ecdf conditional_ecdf(const SurvivalEnsemble& ens, std::size_t checkpoint_index) {
  const auto& vals = ens.survivor_values.at(checkpoint_index);
  if (vals.empty())
    throw std::domain_error("conditional_ecdf: no survivors at this checkpoint (empty conditioning)");
  return Ecdf(vals);
}

/// sup over jump points of |ECDF(y) - F(y)|, evaluated one-sided (the
/// right-continuous ECDF value) at each jump. Two identical step functions
/// are at distance zero under this convention.
inline double ks_distance(const Ecdf& ecdf, const std::function<double(double)>& cdf) {
  const auto& v = ecdf.points();
  const double n = static_cast<double>(v.size());
  double sup = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;  // tied block: ECDF(v) = j/n
    sup = std::max(sup, std::fabs(static_cast<double>(j) / n - cdf(v[i])));
    i = j;
  }
  return sup;
}

inline double ks_distance(const Ecdf& ecdf, const eigen::QsdDistribution& dist) {
  return ks_distance(ecdf, [&dist](double y) { return dist.cdf(y); });
}

/// Least-squares slope of -ln P(T>t) over checkpoints inside the window;
/// consistent for the decay rate lambda* = a eta.
inline double decay_rate(const std::vector<std::pair<double, double>>& survival_curve,
                         std::pair<double, double> window) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, p] : survival_curve) {
    if (t < window.first || t > window.second) continue;
    if (!(p > 0.0)) throw std::domain_error("decay_rate: survival values must be > 0");
    pts.emplace_back(t, -std::log(p));
  }
  if (pts.size() < 2)
    throw std::invalid_argument("decay_rate: fewer than 2 usable points in window");
  double st = 0.0, sy = 0.0;
  for (const auto& [t, y] : pts) {
    st += t;
    sy += y;
  }
  const double tbar = st / pts.size(), ybar = sy / pts.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [t, y] : pts) {
    sxx += (t - tbar) * (t - tbar);
    sxy += (t - tbar) * (y - ybar);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("decay_rate: degenerate time window");
  return sxy / sxx;
}

/// Sample mean of X^gamma over survivors (tightness diagnostic).
inline double conditional_moment(const SurvivalEnsemble& ens, std::size_t checkpoint_index,
                                 double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::domain_error("conditional_moment: gamma must be in (0,1]");
  const auto& vals = ens.survivor_values.at(checkpoint_index);
  if (vals.empty())
    throw std::domain_error("conditional_moment: no survivors at this checkpoint (empty conditioning)");
  double s = 0.0;
  for (const double v : vals) s += std::pow(v, gamma);
  return s / static_cast<double>(vals.size());
}

}  // namespace ouqsd::sim
