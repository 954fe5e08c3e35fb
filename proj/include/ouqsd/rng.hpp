#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

// Counter-based random numbers for reproducible parallel Monte Carlo.
// Philox4x32-10 keyed by the run seed; the counter encodes
// (path_index, step_index), so every path owns an independent substream
// and results do not depend on scheduling or worker count.

namespace ouqsd::rng {

struct Philox4x32 {
  using ctr_t = std::array<std::uint32_t, 4>;
  using key_t = std::array<std::uint32_t, 2>;

  static ctr_t block(ctr_t c, key_t k) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }
};

/// Two 64-bit words drawn from one Philox block.
struct Draw64x2 {
  std::uint64_t a;
  std::uint64_t b;
};

inline Draw64x2 draw(std::uint64_t seed, std::uint64_t path, std::uint64_t step) {
  const Philox4x32::key_t key = {static_cast<std::uint32_t>(seed),
                                 static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::ctr_t ctr = {
      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  const auto out = Philox4x32::block(ctr, key);
  return {(static_cast<std::uint64_t>(out[0]) << 32) | out[1],
          (static_cast<std::uint64_t>(out[2]) << 32) | out[3]};
}

/// Map a 64-bit word to the open interval (0,1). The half offset keeps the
/// value away from both endpoints, which the normal inverse CDF needs; with
/// 52 mantissa bits the sum below is exactly representable, so the product
/// can never round up to 1.
inline double to_unit_open(std::uint64_t u) {
  return (static_cast<double>(u >> 12) + 0.5) * 0x1.0p-52;
}

/// Wichura's AS241 (PPND16) inverse of the standard normal CDF,
/// accurate to about 1e-16 relative over (0,1).
inline double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("standard_normal_quantile: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

inline double standard_normal_from(std::uint64_t u) {
  return standard_normal_quantile(to_unit_open(u));
}

}  // namespace ouqsd::rng
