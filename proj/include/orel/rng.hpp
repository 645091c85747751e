#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "orel/so3.hpp"

namespace orel {

/// Seeded random stream with portable draws: the standard library's
/// distribution objects are implementation-defined, so uniform and gaussian
/// variates are derived from raw mt19937_64 output directly.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  Vec3 gaussian3() {
    const double a = gaussian(), b = gaussian(), c = gaussian();
    return Vec3(a, b, c);
  }

  /// Uniformly distributed unit vector.
  Vec3 unit_vector() {
    Vec3 v;
    do {
      v = gaussian3();
    } while (v.norm() < 1e-12);
    return v.normalized();
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace orel
