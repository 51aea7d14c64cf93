#include "atomchip/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "atomchip/errors.hpp"

namespace atomchip {

const char* to_string(Channel c) {
    switch (c) {
        case Channel::I0: return "I0";
        case Channel::M1: return "M1";
        case Channel::M2: return "M2";
        case Channel::H2: return "H2";
        case Channel::Constant: return "constant";
    }
    return "?";
}

Channel channel_from_string(const std::string& name) {
    if (name == "I0") return Channel::I0;
    if (name == "M1") return Channel::M1;
    if (name == "M2") return Channel::M2;
    if (name == "H2") return Channel::H2;
    if (name == "constant") return Channel::Constant;
    throw DomainError("unknown current channel '" + name + "'");
}

void ChipLayout::validate() const {
    if (!(modulation_period > 0.0)) {
        throw DomainError("layout: modulation_period must be positive");
    }
    std::map<Channel, int> counts;
    for (const auto& c : conductors) {
        if (c.path.empty()) {
            throw DomainError("layout: conductor '" + c.id + "' has no segments");
        }
        ++counts[c.channel];
        for (std::size_t i = 0; i < c.path.size(); ++i) {
            const auto& s = c.path[i];
            if (!(s.length() > 0.0)) {
                throw DomainError("layout: conductor '" + c.id + "' has a zero-length segment");
            }
            if (!(s.width >= 0.0)) {
                throw DomainError("layout: conductor '" + c.id + "' has negative width");
            }
            if (std::abs(s.start.z()) > 1e-12 || std::abs(s.end.z()) > 1e-12) {
                throw DomainError("layout: conductor '" + c.id + "' leaves the chip plane z = 0");
            }
            if (i > 0 && (c.path[i - 1].end - s.start).norm() > 1e-12) {
                throw DomainError("layout: conductor '" + c.id + "' is not a connected path");
            }
        }
    }
    if (counts[Channel::I0] != 1) {
        throw DomainError("layout: exactly one conductor must be bound to I0");
    }
    if (counts[Channel::H2] != 1) {
        throw DomainError("layout: exactly one conductor must be bound to H2");
    }
    if (counts[Channel::M1] < 1 || counts[Channel::M2] < 1) {
        throw DomainError("layout: M1 and M2 each need at least one conductor");
    }
}

ChipLayout ChipLayout::transformed(const Mat3& rotation, const Vec3& translation) const {
    ChipLayout out = *this;
    for (auto& c : out.conductors) {
        for (auto& s : c.path) {
            s.start = rotation * s.start + translation;
            s.end = rotation * s.end + translation;
        }
    }
    return out;
}

namespace {

// Crossing of a y-directed wire with the center line y = 0.
double crossing_x(const Conductor& c) { return 0.5 * (c.path.front().start.x() + c.path.back().end.x()); }

}  // namespace

std::vector<double> ChipLayout::m1_well_crossings() const {
    // A wire with current along -y lowers B_x on the atom side (+z), so it
    // pins a well when its channel current is positive.
    std::vector<double> xs;
    for (const auto& c : conductors) {
        if (c.channel != Channel::M1) continue;
        const Vec3 d = c.path.front().direction();
        if (d.y() < 0.0) xs.push_back(crossing_x(c));
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

std::vector<double> ChipLayout::modulation_crossings() const {
    std::vector<double> xs;
    for (const auto& c : conductors) {
        if (c.channel == Channel::M1 || c.channel == Channel::M2) xs.push_back(crossing_x(c));
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

const Conductor* ChipLayout::find(const std::string& id) const {
    for (const auto& c : conductors) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

const Conductor& ChipLayout::h2() const {
    for (const auto& c : conductors) {
        if (c.channel == Channel::H2) return c;
    }
    throw DomainError("layout has no H2 conductor");
}

void LayoutParams::validate() const {
    if (!(modulation_period > 0.0)) throw DomainError("conveyor_layout: modulation period must be positive");
    if (n_periods < 1) throw DomainError("conveyor_layout: need at least one period");
    if (!(wire_width >= 0.0)) throw DomainError("conveyor_layout: wire width must be non-negative");
    if (!(center_wire_length > 0.0)) throw DomainError("conveyor_layout: center wire length must be positive");
    if (!(modulation_wire_length > 0.0)) throw DomainError("conveyor_layout: modulation wire length must be positive");
    if (!(h2_offset > 0.0)) throw DomainError("conveyor_layout: h2 offset must be positive");
    if (!(end_wire_length >= 0.0)) throw DomainError("conveyor_layout: end wire length must be non-negative");
}

ChipLayout conveyor_layout(const LayoutParams& p) {
    p.validate();
    ChipLayout layout;
    layout.center_wire_length = p.center_wire_length;
    layout.modulation_period = p.modulation_period;

    auto ribbon = [&](Vec3 a, Vec3 b, const std::string& id) {
        RibbonSegment s;
        s.start = a;
        s.end = b;
        s.width = p.wire_width;
        s.thickness = p.thickness;
        s.conductor_id = id;
        return s;
    };

    const double half = 0.5 * p.center_wire_length;
    layout.conductors.push_back(
        {"center", {ribbon({-half, 0, 0}, {half, 0, 0}, "center")}, Channel::I0});

    // Wires at spacing P/4, channels M1, M2, M1, M2, ... Within one period the
    // current directions are (M1: -y, M2: +y, M1: +y, M2: -y). With
    // (I_M1, I_M2) = (cos phi, -sin phi) the B_x modulation is proportional to
    // -cos(k (x - x0) - phi), so the wells move toward +x as phi grows.
    const int n_wires = 4 * p.n_periods;
    const double step = p.modulation_period / 4.0;
    const double x_first = p.pattern_center_x - 0.5 * (n_wires - 1) * step;
    const double hl = 0.5 * p.modulation_wire_length;
    for (int j = 0; j < n_wires; ++j) {
        const double x = x_first + j * step;
        const bool m1 = (j % 2 == 0);
        const bool minus_y = (j % 4 == 0) || (j % 4 == 3);
        const std::string id = std::string(m1 ? "M1_" : "M2_") + std::to_string(j / 2);
        const bool end_wire = j >= n_wires - 2 && p.end_wire_length > 0.0;
        const double h = end_wire ? 0.5 * p.end_wire_length : hl;
        const Vec3 a{x, minus_y ? h : -h, 0.0};
        const Vec3 b{x, minus_y ? -h : h, 0.0};
        layout.conductors.push_back({id, {ribbon(a, b, id)}, m1 ? Channel::M1 : Channel::M2});
    }

    const double x_h2 = x_first + (n_wires - 1) * step + p.h2_offset;
    layout.conductors.push_back({"H2", {ribbon({x_h2, hl, 0.0}, {x_h2, -hl, 0.0}, "H2")}, Channel::H2});

    layout.validate();
    return layout;
}

ChipLayout conveyor_layout(double modulation_period, int n_periods) {
    LayoutParams p;
    p.modulation_period = modulation_period;
    p.n_periods = n_periods;
    return conveyor_layout(p);
}

std::vector<Filament> decompose_ribbon(const RibbonSegment& segment, int n_filaments) {
    if (n_filaments < 1) {
        throw DomainError("decompose_ribbon: need at least one filament");
    }
    const Vec3 along = segment.end - segment.start;
    if (!(along.norm() > 0.0)) {
        throw DomainError("decompose_ribbon: degenerate segment");
    }
    Vec3 across = Vec3::UnitZ().cross(along);
    const double n = across.norm();
    // A segment along z has no in-plane width direction; treat it as a thin wire.
    if (n > 0.0) across /= n;

    std::vector<Filament> out;
    out.reserve(static_cast<std::size_t>(n_filaments));
    const double frac = 1.0 / n_filaments;
    double assigned = 0.0;
    for (int i = 0; i < n_filaments; ++i) {
        const double offset = ((i + 0.5) / n_filaments - 0.5) * segment.width;
        // The last share absorbs rounding so the fractions sum to exactly 1.
        const double share = (i + 1 == n_filaments) ? 1.0 - assigned : frac;
        assigned += share;
        out.push_back({segment.start + offset * across, segment.end + offset * across, share});
    }
    return out;
}

}  // namespace atomchip
