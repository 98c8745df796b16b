#ifndef ACOUSTWIN_PHYSICS_HPP
#define ACOUSTWIN_PHYSICS_HPP

#include <cmath>

namespace acoustwin {

/// Thorp volume absorption in dB/km, frequency in kHz.
inline double thorp_alpha(double f_khz) {
  const double f2 = f_khz * f_khz;
  return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
}

/// Geometric spreading loss A log10(R), R in metres (dB re 1 m).
inline double spreading_db(double range_m, double coeff) {
  return coeff * std::log10(range_m);
}

/// Learnable scale factors of the analytic mean. A = 20 is spherical
/// spreading; B scales Thorp absorption.
struct PhysicsMeanParams {
  double A = 20.0;
  double B = 1.0;
};

/// A log10(R) + B alpha(f) R_km. Absorption uses kilometres because Thorp
/// is expressed in dB/km.
inline double physics_mean_tl(double range_m, double f_khz,
                              const PhysicsMeanParams& p) {
  return spreading_db(range_m, p.A) + p.B * thorp_alpha(f_khz) * (range_m / 1000.0);
}

/// JOMOPANS-ECHO design constants.
struct SourceSpec {
  double vessel_length_m = 200.0;

  static constexpr double kDesignSpeedKnots = 13.9;  // V_C
  static constexpr double kLevel = 191.0;            // K
  static constexpr double kDamping = 3.0;            // D
  static constexpr double kReferenceLength = 100.0;  // l_0
};

/// Near-field one-third-octave source level in dB re 1 uPa @ 1 m, with the
/// frequency in Hz and the speed in knots.
inline double jomopans_echo_sl(double f_hz, double speed_knots, double length_m) {
  constexpr double vc = SourceSpec::kDesignSpeedKnots;
  constexpr double d = SourceSpec::kDamping;
  const double f_peak = 480.0 / vc;
  const double detune = 1.0 - f_hz / f_peak;
  return SourceSpec::kLevel - 20.0 * std::log10(f_peak) -
         10.0 * std::log10(detune * detune + d * d) +
         60.0 * std::log10(speed_knots / vc) +
         20.0 * std::log10(length_m / SourceSpec::kReferenceLength) +
         10.0 * std::log10(0.231 * f_hz);
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_PHYSICS_HPP
