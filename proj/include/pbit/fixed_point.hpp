#pragma once

#include <cmath>
#include <cstdint>

namespace pbit {

// s{6}{6}: sign bit, 6 integer bits, 6 fraction bits. Stored as a signed
// count of 1/64 steps.
struct FixedPointWeight {
  static constexpr int kFractionBits = 6;
  static constexpr int kIntegerBits = 6;
  static constexpr std::int32_t kScale = 1 << kFractionBits;
  static constexpr std::int32_t kMaxRaw = (1 << (kIntegerBits + kFractionBits)) - 1;  // 63 + 63/64

  std::int32_t raw = 0;

  constexpr double value() const noexcept { return static_cast<double>(raw) / kScale; }
  static constexpr double max_value() noexcept { return static_cast<double>(kMaxRaw) / kScale; }

  // Round to nearest, ties to even; out-of-range values saturate and set
  // *saturated.
  static FixedPointWeight quantize(double v, bool* saturated = nullptr) noexcept {
    const double scaled = std::nearbyint(v * kScale);
    bool sat = false;
    std::int32_t r;
    if (!(scaled <= kMaxRaw)) {
      r = kMaxRaw;
      sat = true;
    } else if (!(scaled >= -kMaxRaw)) {
      r = -kMaxRaw;
      sat = true;
    } else {
      r = static_cast<std::int32_t>(scaled);
    }
    if (saturated) *saturated = sat;
    return FixedPointWeight{r};
  }

  friend constexpr bool operator==(FixedPointWeight, FixedPointWeight) = default;
};

}  // namespace pbit
