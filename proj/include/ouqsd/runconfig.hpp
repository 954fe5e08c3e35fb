#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ouqsd/errors.hpp"
#include "ouqsd/kernels.hpp"

// Flat JSON run configuration. Unknown keys are a hard error: a typo in a
// scientific config must fail the run, not silently fall back to a default.

namespace ouqsd::cli {

struct RunConfig {
  double a = 1.0;
  double eta = 0.5;
  double x_m = 1.0;
  std::optional<double> lambda;  // defaults to a * eta
  std::vector<double> checkpoints = {2.0, 4.0, 6.0, 8.0};
  std::uint64_t n_paths = 100000;
  std::uint64_t seed = 0;
  double dg_step = 0.0;  // 0 = derive the default 0.01 * min(1, g(t_1))
  double quad_tol = 1e-9;
  double series_tol = 1e-12;
  double u_max = 12.0;
  std::string output_dir = ".";

  double lambda_or_default() const { return lambda ? *lambda : a * eta; }

  double dg_step_or_default() const {
    if (dg_step > 0.0) return dg_step;
    const double g1 = kernels::time_change(kernels::OUParams(a), checkpoints.front()).g;
    return 0.01 * std::min(1.0, g1);
  }

  void validate() const {
    if (!(std::isfinite(a) && a > 0.0)) throw config_error("config: a must be > 0");
    if (!(std::isfinite(eta) && eta > 0.0)) throw config_error("config: eta must be > 0");
    if (!(std::isfinite(x_m) && x_m > 0.0)) throw config_error("config: x_m must be > 0");
    if (lambda && !(*lambda > 0.0 && *lambda <= a))
      throw config_error("config: lambda must lie in (0, a]");
    if (checkpoints.empty()) throw config_error("config: checkpoints must be nonempty");
    double prev = 0.0;
    for (const double t : checkpoints) {
      if (!(std::isfinite(t) && t > prev))
        throw config_error("config: checkpoints must be ascending and > 0");
      prev = t;
    }
    if (n_paths < 1) throw config_error("config: n_paths must be >= 1");
    if (!(dg_step >= 0.0)) throw config_error("config: dg_step must be >= 0");
    if (!(quad_tol > 0.0)) throw config_error("config: quad_tol must be > 0");
    if (!(series_tol > 0.0)) throw config_error("config: series_tol must be > 0");
    if (!(u_max > 0.0)) throw config_error("config: u_max must be > 0");
  }
};

namespace detail {

inline double as_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw config_error("config: key '" + key + "' must be a number");
  return v.get<double>();
}

inline std::uint64_t as_count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw config_error("config: key '" + key + "' must be a nonnegative integer");
  if (v.is_number_integer() && v.get<long long>() < 0)
    throw config_error("config: key '" + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw config_error("config: top level must be a JSON object");
  RunConfig rc;
  for (const auto& [key, value] : doc.items()) {
    if (key == "a")
      rc.a = detail::as_number(value, key);
    else if (key == "eta")
      rc.eta = detail::as_number(value, key);
    else if (key == "x_m")
      rc.x_m = detail::as_number(value, key);
    else if (key == "lambda")
      rc.lambda = detail::as_number(value, key);
    else if (key == "checkpoints") {
      if (!value.is_array()) throw config_error("config: 'checkpoints' must be an array");
      rc.checkpoints.clear();
      for (const auto& t : value) rc.checkpoints.push_back(detail::as_number(t, key));
    } else if (key == "n_paths")
      rc.n_paths = detail::as_count(value, key);
    else if (key == "seed")
      rc.seed = detail::as_count(value, key);
    else if (key == "dg_step")
      rc.dg_step = detail::as_number(value, key);
    else if (key == "quad_tol")
      rc.quad_tol = detail::as_number(value, key);
    else if (key == "series_tol")
      rc.series_tol = detail::as_number(value, key);
    else if (key == "u_max")
      rc.u_max = detail::as_number(value, key);
    else if (key == "output_dir") {
      if (!value.is_string()) throw config_error("config: 'output_dir' must be a string");
      rc.output_dir = value.get<std::string>();
    } else
      throw config_error("config: unknown key '" + key + "'");
  }
  rc.validate();
  return rc;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace ouqsd::cli
