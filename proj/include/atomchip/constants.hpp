#pragma once

#include <Eigen/Dense>

namespace atomchip {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// CODATA 2018 values; everything inside the library is SI.
struct PhysicalConstants {
    static constexpr double mu0 = 1.25663706212e-6;       // T m / A
    static constexpr double muB = 9.2740100783e-24;       // J / T
    static constexpr double h = 6.62607015e-34;           // J s
    static constexpr double hbar = 1.054571817e-34;       // J s
    static constexpr double kB = 1.380649e-23;            // J / K
    static constexpr double g_earth = 9.80665;            // m / s^2
    static constexpr double mRb87 = 1.4431606480e-25;     // kg (86.909180527 u)
    static constexpr double lambdaD2 = 780.241209686e-9;  // m
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Internal magnetic state of the trapped atom. The default is |F=2, mF=2> of 87Rb
/// (gF = 1/2, mF = 2), a weak-field seeker.
struct AtomState {
    double gf_mf = 1.0;
    double mass = PhysicalConstants::mRb87;

    /// Magnetic moment projection gF mF muB (J/T).
    [[nodiscard]] double moment() const { return gf_mf * PhysicalConstants::muB; }
    void validate() const;
};

namespace units {

// Division by an exactly representable power of ten keeps the round trip
// within one ulp.
constexpr double gauss_to_tesla(double g) { return g / 1e4; }
constexpr double tesla_to_gauss(double t) { return t * 1e4; }
constexpr double um_to_m(double um) { return um / 1e6; }
constexpr double m_to_um(double m) { return m * 1e6; }
constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }
constexpr double uK_to_K(double uk) { return uk / 1e6; }
constexpr double K_to_uK(double k) { return k * 1e6; }

}  // namespace units

/// Photon recoil frequency h / (2 m lambda^2) in Hz.
double recoil_frequency(const AtomState& atom, double wavelength);

}  // namespace atomchip
