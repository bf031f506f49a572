#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pmflow {

// Neumaier-compensated accumulator. All grid reductions in this project go
// through this type in a fixed cell order so results are reproducible
// bit-for-bit; a parallel implementation must reproduce the sequential order.
struct KahanAccumulator {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }

  double value() const { return sum + comp; }
};

double det_sum(std::span<const double> values);
double det_dot(std::span<const double> a, std::span<const double> b);

// Bit-exact double <-> text, used by checkpoints and manifests.
std::string double_to_hex(double v);
double hex_to_double(const std::string& s);

// FNV-1a, used to fingerprint rendered configs in checkpoint manifests.
std::uint64_t fnv1a64(const std::string& data);

}  // namespace pmflow
