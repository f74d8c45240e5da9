#pragma once

#include <numbers>

namespace levem {

// CODATA 2018 exact / recommended values, SI.
inline constexpr double kBoltzmann = 1.380649e-23;         // J/K
inline constexpr double kHbar = 1.054571817e-34;           // J s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr double kPascalPerMillibar = 100.0;

inline constexpr double hz_to_rad(double f) { return kTwoPi * f; }
inline constexpr double rad_to_hz(double w) { return w / kTwoPi; }
inline constexpr double mbar_to_pa(double p) { return p * kPascalPerMillibar; }
inline constexpr double kg_to_amu(double m) { return m / kAtomicMassUnit; }
inline constexpr double amu_to_kg(double m) { return m * kAtomicMassUnit; }

}  // namespace levem
