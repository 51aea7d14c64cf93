#pragma once

#include <utility>
#include <vector>

#include "atomchip/field.hpp"

namespace atomchip {

/// Drive phase as a function of time.
struct PhaseProfile {
    enum class Kind { Linear, Smoothstep, Piecewise };

    Kind kind = Kind::Linear;
    double omega = 0.0;        // rad/s, linear only
    double duration = 0.0;     // s
    double total_phase = 0.0;  // rad, smoothstep only
    std::vector<std::pair<double, double>> knots;  // (t, phase), piecewise only

    static PhaseProfile linear(double omega, double duration);
    static PhaseProfile smoothstep(double total_phase, double duration);
    static PhaseProfile piecewise(std::vector<std::pair<double, double>> knots);

    void validate() const;
};

const char* to_string(PhaseProfile::Kind k);

/// Coefficients of I_H2 = c0 + c1 sin(phi + p1) - c2 sin(2 phi + p2), in A and rad.
struct H2Coefficients {
    double c0 = 0.462;
    double c1 = 0.255;
    double p1 = 0.493;
    double c2 = 0.088;
    double p2 = -1.482;
};

/// Current program of the conveyor. The H2 wire's current flows along its
/// geometric direction, which the built-in layout points along -y; the
/// waveform value is therefore the magnitude of a -y current.
struct DriveConfig {
    double I0 = 2.0;
    double IM_amplitude = 1.0;
    H2Coefficients h2;
    bool h2_enabled = false;

    void validate() const;
    [[nodiscard]] CurrentSet currents(double phase) const;
};

/// (I_M1, I_M2) = amplitude (cos phi, -sin phi).
std::pair<double, double> conveyor_currents(double phase, double amplitude);

double h2_current(double phase, const H2Coefficients& coeffs = {});

/// Phase at time t; throws DomainError outside [0, duration].
double phase_at(const PhaseProfile& profile, double t);

/// Phase at time t, held at the end values outside [0, duration].
double phase_held(const PhaseProfile& profile, double t);

/// d(phase)/dt at time t (analytic for linear and smoothstep).
double phase_rate(const PhaseProfile& profile, double t);

/// Largest well velocity: modulation_period / (2 pi) * max dphi/dt.
double max_well_velocity(const PhaseProfile& profile, double modulation_period);

/// Smoothstep ramp covering `distance` with peak well speed `v_max`.
PhaseProfile transport_profile(double distance, double v_max, double modulation_period);

/// Quintic ramp 6u^5 - 15u^4 + 10u^3 and its derivative.
double smoothstep5(double u);
double smoothstep5_rate(double u);

}  // namespace atomchip
