#pragma once

// Empirical constants.  The defaults are the frozen values from the
// calibration runs; a JSON sidecar may override them (see io/json.hpp).

namespace sqdf {

struct CalibrationConstants {
    /// minor-arc decay: sup |S| <= c1 * eta off the major arcs (max observed 0.997)
    double c1 = 1.0;
    /// telescoping bound for nested hats
    double c2 = 1.0;
    /// exponent constant in eta_eps = exp(-c_eta eps^-1 log eps^-1)
    double c_eta = 1.0;
    /// translation flatness: flatness(t) <= c_flat * eta^2 for t <= 2 eta L1 (max observed 6.19)
    double c_flat = 7.0;
    /// strengthened count: #{t} >= (c_strength eps / q) mu
    double c_strength = 0.25;
};

inline CalibrationConstants frozen_calibration() { return CalibrationConstants{}; }

}  // namespace sqdf
