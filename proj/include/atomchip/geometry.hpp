#pragma once

#include <string>
#include <vector>

#include "atomchip/constants.hpp"

namespace atomchip {

/// Waveform channel that supplies a conductor's current.
enum class Channel { I0, M1, M2, H2, Constant };
inline constexpr std::size_t kChannelCount = 5;

const char* to_string(Channel c);
Channel channel_from_string(const std::string& name);

/// Straight piece of a flat conductor lying in the chip plane z = 0.
struct RibbonSegment {
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
    double width = 50e-6;
    double thickness = 7e-6;  // stored, not modelled
    std::string conductor_id;

    [[nodiscard]] double length() const { return (end - start).norm(); }
    [[nodiscard]] Vec3 direction() const { return (end - start) / length(); }
};

/// Thin straight wire carrying `current_fraction` of its parent ribbon's current.
struct Filament {
    Vec3 start = Vec3::Zero();
    Vec3 end = Vec3::Zero();
    double current_fraction = 1.0;
};

struct Conductor {
    std::string id;
    std::vector<RibbonSegment> path;
    Channel channel = Channel::Constant;
};

/// Conductor pattern of a chip. Current flows from each segment's start to its end.
struct ChipLayout {
    std::vector<Conductor> conductors;
    double center_wire_length = 5.5e-3;
    double modulation_period = 402e-6;

    /// Throws DomainError when an invariant is violated.
    void validate() const;

    /// Applies x -> R x + t to every segment.
    [[nodiscard]] ChipLayout transformed(const Mat3& rotation, const Vec3& translation) const;

    /// x coordinates where well-forming M1 wires cross the center wire.
    [[nodiscard]] std::vector<double> m1_well_crossings() const;
    /// Crossing x coordinates of all modulation wires, sorted.
    [[nodiscard]] std::vector<double> modulation_crossings() const;
    [[nodiscard]] const Conductor* find(const std::string& id) const;
    [[nodiscard]] const Conductor& h2() const;
};

/// Knobs for the built-in conveyor layout. Anything the original chip drawing
/// leaves open lives here.
struct LayoutParams {
    double modulation_period = 402e-6;
    int n_periods = 6;
    double wire_width = 50e-6;
    double thickness = 7e-6;
    double center_wire_length = 5.5e-3;
    double modulation_wire_length = 2e-3;
    double pattern_center_x = 0.0;
    /// Distance of the H2 wire beyond the last modulation wire.
    double h2_offset = 300e-6;
    /// Length of the last M1 and last M2 wire at the +x end. Shorter end wires
    /// soften the uncompensated field of the truncated pattern; 0 gives them the
    /// full modulation_wire_length.
    double end_wire_length = 450e-6;

    void validate() const;
};

/// Conveyor layout: center wire along +x, modulation wires crossing it every
/// period/4 alternately bound to M1 and M2, and one H2 wire (current along -y)
/// beyond the +x end of the modulation pattern.
ChipLayout conveyor_layout(const LayoutParams& params);
ChipLayout conveyor_layout(double modulation_period, int n_periods);

/// Splits a ribbon into `n_filaments` evenly spaced thin wires across its width.
std::vector<Filament> decompose_ribbon(const RibbonSegment& segment, int n_filaments);

}  // namespace atomchip
