#include "atomchip/waveforms.hpp"

#include <algorithm>
#include <cmath>

#include "atomchip/errors.hpp"

namespace atomchip {

namespace {

struct HermiteSpan {
    double t0, t1, p0, p1, d0, d1;
};

// Fritsch-Carlson / Butland slopes for a monotone piecewise cubic.
std::vector<double> pchip_slopes(const std::vector<std::pair<double, double>>& k) {
    const std::size_t n = k.size();
    std::vector<double> h(n - 1), delta(n - 1), d(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = k[i + 1].first - k[i].first;
        delta[i] = (k[i + 1].second - k[i].second) / h[i];
    }
    if (n == 2) {
        d[0] = d[1] = delta[0];
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            d[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto end_slope = [](double h0, double h1, double del0, double del1) {
        double s = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
        if (s * del0 <= 0.0) return 0.0;
        if (del0 * del1 <= 0.0 && std::abs(s) > std::abs(3.0 * del0)) return 3.0 * del0;
        return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

HermiteSpan locate(const PhaseProfile& p, double t) {
    const auto& k = p.knots;
    const auto d = pchip_slopes(k);
    std::size_t i = 0;
    while (i + 2 < k.size() && t > k[i + 1].first) ++i;
    return {k[i].first, k[i + 1].first, k[i].second, k[i + 1].second, d[i], d[i + 1]};
}

double hermite_value(const HermiteSpan& s, double t) {
    const double h = s.t1 - s.t0;
    const double u = (t - s.t0) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * s.p0 + (u3 - 2 * u2 + u) * h * s.d0 + (-2 * u3 + 3 * u2) * s.p1 +
           (u3 - u2) * h * s.d1;
}

double hermite_rate(const HermiteSpan& s, double t) {
    const double h = s.t1 - s.t0;
    const double u = (t - s.t0) / h;
    const double u2 = u * u;
    return ((6 * u2 - 6 * u) * s.p0 + (-6 * u2 + 6 * u) * s.p1) / h + (3 * u2 - 4 * u + 1) * s.d0 +
           (3 * u2 - 2 * u) * s.d1;
}

}  // namespace

const char* to_string(PhaseProfile::Kind k) {
    switch (k) {
        case PhaseProfile::Kind::Linear: return "linear";
        case PhaseProfile::Kind::Smoothstep: return "smoothstep";
        case PhaseProfile::Kind::Piecewise: return "piecewise";
    }
    return "?";
}

PhaseProfile PhaseProfile::linear(double omega, double duration) {
    PhaseProfile p;
    p.kind = Kind::Linear;
    p.omega = omega;
    p.duration = duration;
    p.total_phase = omega * duration;
    p.validate();
    return p;
}

PhaseProfile PhaseProfile::smoothstep(double total_phase, double duration) {
    PhaseProfile p;
    p.kind = Kind::Smoothstep;
    p.total_phase = total_phase;
    p.duration = duration;
    p.validate();
    return p;
}

PhaseProfile PhaseProfile::piecewise(std::vector<std::pair<double, double>> knots) {
    PhaseProfile p;
    p.kind = Kind::Piecewise;
    p.knots = std::move(knots);
    if (!p.knots.empty()) {
        p.duration = p.knots.back().first - p.knots.front().first;
        p.total_phase = p.knots.back().second - p.knots.front().second;
    }
    p.validate();
    return p;
}

void PhaseProfile::validate() const {
    switch (kind) {
        case Kind::Linear:
            if (!(omega >= 0.0)) throw DomainError("linear profile: omega must be non-negative");
            if (!(duration > 0.0)) throw DomainError("linear profile: duration must be positive");
            break;
        case Kind::Smoothstep:
            if (!(total_phase >= 0.0)) throw DomainError("smoothstep profile: total phase must be non-negative");
            if (!(duration > 0.0)) throw DomainError("smoothstep profile: duration must be positive");
            break;
        case Kind::Piecewise:
            if (knots.size() < 2) throw DomainError("piecewise profile: need at least two knots");
            if (knots.front().first != 0.0) throw DomainError("piecewise profile: first knot must be at t = 0");
            for (std::size_t i = 1; i < knots.size(); ++i) {
                if (!(knots[i].first > knots[i - 1].first)) {
                    throw DomainError("piecewise profile: knot times must increase");
                }
                if (knots[i].second < knots[i - 1].second) {
                    throw DomainError("piecewise profile: phase knots must be non-decreasing");
                }
            }
            break;
    }
}

void DriveConfig::validate() const {
    if (!(IM_amplitude >= 0.0)) throw DomainError("drive: modulation amplitude must be non-negative");
    if (!std::isfinite(I0)) throw DomainError("drive: I0 must be finite");
}

CurrentSet DriveConfig::currents(double phase) const {
    CurrentSet c;
    c.I0 = I0;
    std::tie(c.IM1, c.IM2) = conveyor_currents(phase, IM_amplitude);
    c.IH2 = h2_enabled ? h2_current(phase, h2) : 0.0;
    return c;
}

std::pair<double, double> conveyor_currents(double phase, double amplitude) {
    return {amplitude * std::cos(phase), -amplitude * std::sin(phase)};
}

double h2_current(double phase, const H2Coefficients& c) {
    return c.c0 + c.c1 * std::sin(phase + c.p1) - c.c2 * std::sin(2.0 * phase + c.p2);
}

double smoothstep5(double u) { return u * u * u * (u * (6.0 * u - 15.0) + 10.0); }

double smoothstep5_rate(double u) { return 30.0 * u * u * (u - 1.0) * (u - 1.0); }

double phase_at(const PhaseProfile& p, double t) {
    if (!(t >= 0.0) || t > p.duration) {
        throw DomainError("phase_at: t outside [0, duration]");
    }
    switch (p.kind) {
        case PhaseProfile::Kind::Linear: return p.omega * t;
        case PhaseProfile::Kind::Smoothstep: return p.total_phase * smoothstep5(t / p.duration);
        case PhaseProfile::Kind::Piecewise: return hermite_value(locate(p, t), t);
    }
    return 0.0;
}

double phase_held(const PhaseProfile& p, double t) { return phase_at(p, std::clamp(t, 0.0, p.duration)); }

double phase_rate(const PhaseProfile& p, double t) {
    if (t < 0.0 || t > p.duration) return 0.0;
    switch (p.kind) {
        case PhaseProfile::Kind::Linear: return p.omega;
        case PhaseProfile::Kind::Smoothstep: return p.total_phase / p.duration * smoothstep5_rate(t / p.duration);
        case PhaseProfile::Kind::Piecewise: return hermite_rate(locate(p, t), t);
    }
    return 0.0;
}

double max_well_velocity(const PhaseProfile& p, double modulation_period) {
    p.validate();
    double rate = 0.0;
    switch (p.kind) {
        case PhaseProfile::Kind::Linear: rate = p.omega; break;
        case PhaseProfile::Kind::Smoothstep: rate = p.total_phase / p.duration * smoothstep5_rate(0.5); break;
        case PhaseProfile::Kind::Piecewise: {
            constexpr int kSamples = 20000;
            const double dt = p.duration / kSamples;
            for (int i = 0; i < kSamples; ++i) {
                const double r = (phase_at(p, (i + 1) * dt) - phase_at(p, i * dt)) / dt;
                rate = std::max(rate, r);
            }
            break;
        }
    }
    return modulation_period / kTwoPi * rate;
}

PhaseProfile transport_profile(double distance, double v_max, double modulation_period) {
    if (!(v_max > 0.0)) throw DomainError("transport profile: v_max must be positive");
    if (!(distance > 0.0)) throw DomainError("transport profile: distance must be positive");
    const double total_phase = kTwoPi * distance / modulation_period;
    // peak of the quintic ramp's rate is 15/8 of the mean
    const double duration = smoothstep5_rate(0.5) * distance / v_max;
    return PhaseProfile::smoothstep(total_phase, duration);
}

}  // namespace atomchip
