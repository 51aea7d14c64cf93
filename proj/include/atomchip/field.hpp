#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "atomchip/constants.hpp"
#include "atomchip/geometry.hpp"

namespace atomchip {

/// Uniform external field (tesla).
struct BiasField {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] Vec3 vector() const { return {x, y, z}; }
    static BiasField from_gauss(double gx, double gy, double gz);
};

/// Instantaneous channel currents (ampere).
struct CurrentSet {
    double I0 = 0.0;
    double IM1 = 0.0;
    double IM2 = 0.0;
    double IH2 = 0.0;
    std::map<std::string, double> extra;  // currents of Channel::Constant conductors, by id

    [[nodiscard]] double for_conductor(const Conductor& c) const;
    [[nodiscard]] CurrentSet scaled(double s) const;
    friend CurrentSet operator+(const CurrentSet& a, const CurrentSet& b);
};

/// Everything needed to evaluate the static field landscape.
struct ChipScene {
    ChipLayout layout;
    BiasField bias;
    AtomState atom;
    int n_filaments = 32;
    bool include_gravity = false;
    /// Finite-difference step for gradients and Hessians (m).
    double fd_step = 0.05e-6;

    void validate() const;
    [[nodiscard]] ChipScene transformed(const Mat3& rotation, const Vec3& translation) const;
};

struct FieldSample {
    Vec3 B = Vec3::Zero();
    double magnitude = 0.0;
};

/// Singularity exclusion radius around a ribbon: half the width plus 1 um.
double exclusion_radius(const RibbonSegment& segment);

/// Closed-form field of a straight finite filament (Biot-Savart), written in a
/// form that stays accurate for segments much longer than the distance.
Vec3 filament_field(const Filament& filament, double current, const Vec3& point);

/// Same as `filament_field` but throws SingularityError within `exclusion` of the segment.
Vec3 filament_field(const Filament& filament, double current, const Vec3& point, double exclusion);

/// Precomputed filament decomposition of a scene. Evaluation is const and
/// reentrant.
class FieldEngine {
public:
    explicit FieldEngine(ChipScene scene);

    [[nodiscard]] const ChipScene& scene() const { return scene_; }
    [[nodiscard]] const AtomState& atom() const { return scene_.atom; }

    /// Bias plus all conductors. Throws SingularityError inside an exclusion zone.
    [[nodiscard]] FieldSample total_field(const CurrentSet& currents, const Vec3& point) const;

    /// Field of one channel per ampere (no bias). Constant conductors are
    /// grouped under Channel::Constant with their own currents from `extra`.
    [[nodiscard]] Vec3 channel_field(Channel channel, const Vec3& point,
                                     const std::map<std::string, double>& extra = {}) const;

    /// Per-ampere fields of all channels in one pass, indexed by Channel
    /// (constant conductors scaled by their currents in `extra`).
    [[nodiscard]] std::array<Vec3, kChannelCount> channel_fields(const Vec3& point,
                                                               const std::map<std::string, double>& extra = {}) const;

    /// Trapping energy gF mF muB |B| plus the gravitational term when enabled (J).
    [[nodiscard]] double potential(const CurrentSet& currents, const Vec3& point) const;

    /// Gravitational energy -m g z. Atoms sit on the +z side of the chip, which
    /// is mounted upside down, so +z points down in the lab.
    [[nodiscard]] double gravity_energy(const Vec3& point) const;

    [[nodiscard]] bool in_exclusion(const Vec3& point) const;

    [[nodiscard]] std::size_t filament_count() const;

private:
    struct Block {
        Channel channel;
        std::string conductor_id;
        // structure of arrays over filaments
        std::vector<double> ax, ay, az;  // start
        std::vector<double> ux, uy, uz;  // unit direction
        std::vector<double> len, frac;
    };
    struct Guard {
        Vec3 start, end;
        double radius;
        std::string conductor_id;
    };

    void check_exclusion(const Vec3& point) const;
    static Vec3 block_field(const Block& b, const Vec3& point);

    ChipScene scene_;
    std::vector<Block> blocks_;
    std::vector<Guard> guards_;
};

// Convenience wrappers; they rebuild the filament decomposition on each call.
FieldSample total_field(const ChipScene& scene, const CurrentSet& currents, const Vec3& point);
double potential(const ChipScene& scene, const CurrentSet& currents, const Vec3& point);

struct GuideEstimate {
    double r0 = 0.0;    // trap distance from the wire (m)
    double Bmin = 0.0;  // field at the bottom (T)
};

/// Thin-wire design estimates of the side guide: r0 = mu0 I0 / (2 pi B0y), Bmin = B0x.
GuideEstimate guide_estimates(double I0, double B0y, double B0x);

}  // namespace atomchip
