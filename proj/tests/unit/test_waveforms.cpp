#include "atomchip/errors.hpp"
#include "atomchip/waveforms.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace atomchip;

TEST_CASE("conveyor currents are cos and -sin") {
    for (double phi : {0.0, 0.3, 1.7, 4.0}) {
        const auto [m1, m2] = conveyor_currents(phi, 1.5);
        CHECK(m1 == doctest::Approx(1.5 * std::cos(phi)));
        CHECK(m2 == doctest::Approx(-1.5 * std::sin(phi)));
    }
}

TEST_CASE("H2 waveform") {
    const H2Coefficients c;
    for (double phi : {0.0, 1.0, 3.0, 5.5}) {
        const double expected = 0.462 + 0.255 * std::sin(phi + 0.493) - 0.088 * std::sin(2 * phi - 1.482);
        CHECK(h2_current(phi, c) == doctest::Approx(expected).epsilon(1e-14));
    }
    DriveConfig d;
    CHECK(d.currents(1.0).IH2 == 0.0);
    d.h2_enabled = true;
    CHECK(d.currents(1.0).IH2 == doctest::Approx(h2_current(1.0)));
    CHECK(d.currents(1.0).I0 == 2.0);
}

TEST_CASE("linear profile") {
    const auto p = PhaseProfile::linear(2.0, 3.0);
    CHECK(phase_at(p, 1.5) == doctest::Approx(3.0));
    CHECK(phase_rate(p, 0.2) == doctest::Approx(2.0));
    CHECK_THROWS_AS(phase_at(p, 3.5), DomainError);
    CHECK(phase_held(p, 3.5) == doctest::Approx(6.0));
    CHECK(phase_held(p, -1.0) == 0.0);
}

TEST_CASE("quintic smoothstep") {
    CHECK(smoothstep5(0.0) == 0.0);
    CHECK(smoothstep5(1.0) == doctest::Approx(1.0));
    CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
    CHECK(smoothstep5_rate(0.0) == 0.0);
    CHECK(smoothstep5_rate(1.0) == doctest::Approx(0.0).scale(1e-12));
    CHECK(smoothstep5_rate(0.5) == doctest::Approx(15.0 / 8.0));
    const auto p = PhaseProfile::smoothstep(oracle::pi, 2.0);
    CHECK(phase_at(p, 1.0) == doctest::Approx(oracle::pi / 2));
    CHECK(phase_rate(p, 1.0) == doctest::Approx(oracle::pi / 2.0 * 15.0 / 8.0));
}

TEST_CASE("transport profile hits the requested peak speed") {
    const double P = 402e-6;
    for (double v : {0.005, 0.02, 0.08}) {
        const auto p = transport_profile(P, v, P);
        CHECK(max_well_velocity(p, P) == doctest::Approx(v).epsilon(1e-12));
        CHECK(phase_at(p, p.duration) == doctest::Approx(2.0 * oracle::pi));
    }
}

TEST_CASE("piecewise profile: monotone cubic through the knots") {
    // two knots degenerate to the linear ramp
    const auto two = PhaseProfile::piecewise({{0.0, 0.0}, {1.0, 2 * oracle::pi}});
    for (double t : {0.0, 0.13, 0.37, 0.5, 0.99}) {
        CHECK(std::abs(phase_at(two, t) - 2 * oracle::pi * t) < 1e-12);
    }
    const auto p = PhaseProfile::piecewise({{0.0, 0.0}, {1.0, 2.0}, {3.0, 2.0}, {4.0, 5.0}});
    CHECK(phase_at(p, 1.0) == doctest::Approx(2.0));
    // a flat stretch between equal knots stays flat
    CHECK(phase_at(p, 2.0) == doctest::Approx(2.0));
    double prev = -1.0;
    for (int i = 0; i <= 400; ++i) {
        const double v = phase_at(p, 4.0 * i / 400.0);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    CHECK_THROWS_AS(PhaseProfile::piecewise({{0.0, 1.0}, {1.0, 0.5}}).validate(), DomainError);
    CHECK_THROWS_AS(PhaseProfile::piecewise({{0.0, 0.0}}).validate(), DomainError);
    CHECK_THROWS_AS(PhaseProfile::linear(1.0, 0.0).validate(), DomainError);
}
