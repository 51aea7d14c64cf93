#include "atomchip/field.hpp"

#include <algorithm>
#include <cmath>

#include "atomchip/errors.hpp"

namespace atomchip {

namespace {

constexpr double kMu0Over4Pi = PhysicalConstants::mu0 / (4.0 * kPi);

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& p) {
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

// (f(t1) - f(t2)) / d^2 with f(t) = t / sqrt(t^2 + d^2), evaluated without
// cancellation. t1 > t2 always (t2 = t1 - length).
inline double axial_factor(double t1, double t2, double d2) {
    const double r1 = std::sqrt(t1 * t1 + d2);
    const double r2 = std::sqrt(t2 * t2 + d2);
    const double q1 = 1.0 / (r1 * (r1 + std::abs(t1)));
    const double q2 = 1.0 / (r2 * (r2 + std::abs(t2)));
    if (t2 >= 0.0) return q2 - q1;
    if (t1 < 0.0) return q1 - q2;
    return (2.0 - d2 * (q1 + q2)) / d2;
}

}  // namespace

BiasField BiasField::from_gauss(double gx, double gy, double gz) {
    return {units::gauss_to_tesla(gx), units::gauss_to_tesla(gy), units::gauss_to_tesla(gz)};
}

double CurrentSet::for_conductor(const Conductor& c) const {
    switch (c.channel) {
        case Channel::I0: return I0;
        case Channel::M1: return IM1;
        case Channel::M2: return IM2;
        case Channel::H2: return IH2;
        case Channel::Constant: {
            auto it = extra.find(c.id);
            return it == extra.end() ? 0.0 : it->second;
        }
    }
    return 0.0;
}

CurrentSet CurrentSet::scaled(double s) const {
    CurrentSet out{I0 * s, IM1 * s, IM2 * s, IH2 * s, extra};
    for (auto& [k, v] : out.extra) v *= s;
    return out;
}

CurrentSet operator+(const CurrentSet& a, const CurrentSet& b) {
    CurrentSet out{a.I0 + b.I0, a.IM1 + b.IM1, a.IM2 + b.IM2, a.IH2 + b.IH2, a.extra};
    for (const auto& [k, v] : b.extra) out.extra[k] += v;
    return out;
}

void ChipScene::validate() const {
    layout.validate();
    atom.validate();
    if (n_filaments < 1) throw DomainError("scene: n_filaments must be >= 1");
    if (!(fd_step > 0.0)) throw DomainError("scene: fd_step must be positive");
    if (!std::isfinite(bias.x) || !std::isfinite(bias.y) || !std::isfinite(bias.z)) {
        throw DomainError("scene: bias field must be finite");
    }
}

ChipScene ChipScene::transformed(const Mat3& rotation, const Vec3& translation) const {
    ChipScene out = *this;
    out.layout = layout.transformed(rotation, translation);
    const Vec3 b = rotation * bias.vector();
    out.bias = {b.x(), b.y(), b.z()};
    return out;
}

double exclusion_radius(const RibbonSegment& segment) { return 0.5 * segment.width + 1e-6; }

Vec3 filament_field(const Filament& f, double current, const Vec3& point) {
    const Vec3 along = f.end - f.start;
    const double len = along.norm();
    const Vec3 u = along / len;
    const Vec3 r = point - f.start;
    const double t1 = r.dot(u);
    const Vec3 rho = r - t1 * u;
    const double d2 = rho.squaredNorm();
    if (d2 == 0.0) return Vec3::Zero();  // on the axis: dl x r = 0
    const double k = kMu0Over4Pi * current * f.current_fraction * axial_factor(t1, t1 - len, d2);
    return k * u.cross(rho);
}

Vec3 filament_field(const Filament& f, double current, const Vec3& point, double exclusion) {
    if (segment_distance(f.start, f.end, point) <= exclusion) {
        throw SingularityError("field point within the exclusion radius of a filament");
    }
    return filament_field(f, current, point);
}

FieldEngine::FieldEngine(ChipScene scene) : scene_(std::move(scene)) {
    scene_.validate();
    for (const auto& c : scene_.layout.conductors) {
        Block b;
        b.channel = c.channel;
        b.conductor_id = c.id;
        for (const auto& seg : c.path) {
            guards_.push_back({seg.start, seg.end, exclusion_radius(seg), c.id});
            const int n = seg.width > 0.0 ? scene_.n_filaments : 1;
            for (const auto& f : decompose_ribbon(seg, n)) {
                const Vec3 along = f.end - f.start;
                const double len = along.norm();
                const Vec3 u = along / len;
                b.ax.push_back(f.start.x());
                b.ay.push_back(f.start.y());
                b.az.push_back(f.start.z());
                b.ux.push_back(u.x());
                b.uy.push_back(u.y());
                b.uz.push_back(u.z());
                b.len.push_back(len);
                b.frac.push_back(f.current_fraction);
            }
        }
        blocks_.push_back(std::move(b));
    }
}

std::size_t FieldEngine::filament_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.len.size();
    return n;
}

Vec3 FieldEngine::block_field(const Block& b, const Vec3& p) {
    double bx = 0.0, by = 0.0, bz = 0.0;
    const std::size_t n = b.len.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double rx = p.x() - b.ax[i];
        const double ry = p.y() - b.ay[i];
        const double rz = p.z() - b.az[i];
        const double t1 = rx * b.ux[i] + ry * b.uy[i] + rz * b.uz[i];
        const double px = rx - t1 * b.ux[i];
        const double py = ry - t1 * b.uy[i];
        const double pz = rz - t1 * b.uz[i];
        const double d2 = px * px + py * py + pz * pz;
        if (d2 == 0.0) continue;
        const double k = b.frac[i] * axial_factor(t1, t1 - b.len[i], d2);
        bx += k * (b.uy[i] * pz - b.uz[i] * py);
        by += k * (b.uz[i] * px - b.ux[i] * pz);
        bz += k * (b.ux[i] * py - b.uy[i] * px);
    }
    return kMu0Over4Pi * Vec3{bx, by, bz};
}

bool FieldEngine::in_exclusion(const Vec3& point) const {
    for (const auto& g : guards_) {
        if (segment_distance(g.start, g.end, point) <= g.radius) return true;
    }
    return false;
}

void FieldEngine::check_exclusion(const Vec3& point) const {
    for (const auto& g : guards_) {
        if (segment_distance(g.start, g.end, point) <= g.radius) {
            throw SingularityError("point inside the exclusion zone of conductor '" + g.conductor_id + "'");
        }
    }
}

FieldSample FieldEngine::total_field(const CurrentSet& currents, const Vec3& point) const {
    check_exclusion(point);
    Vec3 B = scene_.bias.vector();
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const double I = currents.for_conductor(scene_.layout.conductors[i]);
        if (I != 0.0) B += I * block_field(blocks_[i], point);
    }
    return {B, B.norm()};
}

Vec3 FieldEngine::channel_field(Channel channel, const Vec3& point,
                                const std::map<std::string, double>& extra) const {
    check_exclusion(point);
    Vec3 B = Vec3::Zero();
    for (const auto& b : blocks_) {
        if (b.channel != channel) continue;
        double scale = 1.0;
        if (channel == Channel::Constant) {
            auto it = extra.find(b.conductor_id);
            scale = it == extra.end() ? 0.0 : it->second;
            if (scale == 0.0) continue;
        }
        B += scale * block_field(b, point);
    }
    return B;
}

std::array<Vec3, kChannelCount> FieldEngine::channel_fields(const Vec3& point,
                                                           const std::map<std::string, double>& extra) const {
    check_exclusion(point);
    std::array<Vec3, kChannelCount> out;
    out.fill(Vec3::Zero());
    for (const auto& b : blocks_) {
        double scale = 1.0;
        if (b.channel == Channel::Constant) {
            auto it = extra.find(b.conductor_id);
            scale = it == extra.end() ? 0.0 : it->second;
            if (scale == 0.0) continue;
        }
        out[static_cast<std::size_t>(b.channel)] += scale * block_field(b, point);
    }
    return out;
}

double FieldEngine::gravity_energy(const Vec3& point) const {
    if (!scene_.include_gravity) return 0.0;
    return -scene_.atom.mass * PhysicalConstants::g_earth * point.z();
}

double FieldEngine::potential(const CurrentSet& currents, const Vec3& point) const {
    return scene_.atom.moment() * total_field(currents, point).magnitude + gravity_energy(point);
}

FieldSample total_field(const ChipScene& scene, const CurrentSet& currents, const Vec3& point) {
    return FieldEngine(scene).total_field(currents, point);
}

double potential(const ChipScene& scene, const CurrentSet& currents, const Vec3& point) {
    return FieldEngine(scene).potential(currents, point);
}

GuideEstimate guide_estimates(double I0, double B0y, double B0x) {
    if (!(I0 > 0.0) || !(B0y > 0.0)) {
        throw DomainError("guide_estimates: I0 and B0y must be positive");
    }
    if (!(B0x >= 0.0)) {
        throw DomainError("guide_estimates: B0x must be non-negative");
    }
    return {PhysicalConstants::mu0 / kTwoPi * I0 / B0y, B0x};
}

}  // namespace atomchip
