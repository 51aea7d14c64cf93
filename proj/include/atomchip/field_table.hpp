#pragma once

#include <array>
#include <vector>

#include "atomchip/field.hpp"
#include "atomchip/waveforms.hpp"

namespace atomchip {

/// Axis-aligned region of space (m).
struct Box {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();

    [[nodiscard]] bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
};

/// Field and Jacobian J(i, j) = dB_i / dx_j at a point.
struct FieldGradient {
    Vec3 B = Vec3::Zero();
    Mat3 J = Mat3::Zero();
};

/// Tricubic B-spline interpolation of the scene's field over a box, for fast
/// repeated evaluation in ensemble dynamics. Four channels are tabulated: the
/// static part (bias, I0 at the drive's value, constant conductors) and the
/// M1, M2, H2 fields per ampere. Interpolating the field vector rather than
/// |B| keeps the table accurate near small field minima. The interpolant is
/// twice continuously differentiable and its gradient is evaluated
/// analytically, so forces are exact derivatives of the tabulated energy.
class FieldTable {
public:
    FieldTable(const FieldEngine& engine, const DriveConfig& drive, const Box& box, double spacing,
               int threads = 0);

    [[nodiscard]] const Box& box() const { return box_; }
    [[nodiscard]] double spacing() const { return h_; }
    [[nodiscard]] std::array<int, 3> shape() const { return n_; }

    /// Field of the drive at the given M1, M2, H2 currents. Throws
    /// SingularityError outside the box.
    [[nodiscard]] FieldGradient field(double IM1, double IM2, double IH2, const Vec3& p) const;
    [[nodiscard]] Vec3 field_only(double IM1, double IM2, double IH2, const Vec3& p) const;

private:
    template <bool WithGradient>
    void evaluate(double IM1, double IM2, double IH2, const Vec3& p, FieldGradient& out) const;

    static constexpr int kComps = 12;
    Box box_;
    double h_;
    Vec3 origin_;  // position of node (0, 0, 0)
    std::array<int, 3> n_{};
    std::vector<double> coef_;  // kComps values per node, z fastest
};

}  // namespace atomchip
