#pragma once

namespace nvsim {

struct PhysicalConstants {
  // Bohr magneton over Planck's constant, MHz per gauss.
  static constexpr double bohr_magneton_over_h = 1.3996245;
};

inline constexpr double kBohrMhzPerGauss = PhysicalConstants::bohr_magneton_over_h;
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace nvsim
