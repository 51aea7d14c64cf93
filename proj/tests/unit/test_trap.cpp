#include "atomchip/errors.hpp"
#include "atomchip/scene.hpp"
#include "atomchip/trap.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace atomchip;

namespace {

// U = sum_i m (2 pi f_i)^2 (x_i - c_i)^2 / 2
FunctionLandscape harmonic(const std::array<double, 3>& f, const Vec3& c) {
    const double m = oracle::rb87;
    return FunctionLandscape(
        [=](const Vec3& p) {
            double u = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double w = 2 * oracle::pi * f[static_cast<std::size_t>(i)];
                u += 0.5 * m * w * w * (p[i] - c[i]) * (p[i] - c[i]);
            }
            return u;
        },
        m);
}

}  // namespace

TEST_CASE("harmonic trap: position and frequencies") {
    const Vec3 c(12e-6, -3e-6, 150e-6);
    const auto land = harmonic({120.0, 450.0, 800.0}, c);
    const auto t = find_minimum(land, c + Vec3(5e-6, 4e-6, -6e-6));
    CHECK((t.position - c).norm() < 1e-9);
    CHECK(t.frequencies[0] == doctest::Approx(120.0).epsilon(1e-5));
    CHECK(t.frequencies[1] == doctest::Approx(450.0).epsilon(1e-5));
    CHECK(t.frequencies[2] == doctest::Approx(800.0).epsilon(1e-5));
    // eigenvector of the weakest axis is x
    CHECK(std::abs(t.hessian_eigvecs(0, 0)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("trap frequencies from a Hessian") {
    const double m = oracle::rb87;
    Mat3 H = Mat3::Zero();
    H.diagonal() << m * std::pow(2 * oracle::pi * 300, 2), m * std::pow(2 * oracle::pi * 100, 2),
        m * std::pow(2 * oracle::pi * 200, 2);
    const auto [f, v] = trap_frequencies(H, m);
    CHECK(f[0] == doctest::Approx(100.0));
    CHECK(f[1] == doctest::Approx(200.0));
    CHECK(f[2] == doctest::Approx(300.0));
    H(0, 0) = -H(0, 0);
    CHECK_THROWS_AS(trap_frequencies(H, m), SaddleError);
}

TEST_CASE("finite-difference Hessian converges at second order") {
    const double k = 1e-18, L = 30e-6;
    const FunctionLandscape land(
        [=](const Vec3& p) { return k * L * L * (std::cos(p.x() / L) * std::cosh(p.y() / L) + std::sin(p.z() / L)); },
        oracle::rb87);
    const Vec3 p(5e-6, 7e-6, 3e-6);
    Mat3 exact;
    const double cx = std::cos(p.x() / L), sx = std::sin(p.x() / L), ch = std::cosh(p.y() / L),
                 sh = std::sinh(p.y() / L);
    exact << -k * cx * ch, -k * sx * sh, 0, -k * sx * sh, k * cx * ch, 0, 0, 0, -k * std::sin(p.z() / L);
    const double e1 = (hessian_of_potential(land, p, 2e-6) - exact).norm();
    const double e2 = (hessian_of_potential(land, p, 1e-6) - exact).norm();
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("ground-state FWHM and Lamb-Dicke") {
    const double w = 2 * oracle::pi * 800.0;
    const double expected = 2.0 * std::sqrt(2.0 * std::log(2.0)) * std::sqrt(oracle::hbar / (oracle::rb87 * w));
    CHECK(ground_state_fwhm(800.0, oracle::rb87) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.898e-6).epsilon(1e-3));
    const double nu_r = oracle::h / (2.0 * oracle::rb87 * std::pow(780.241209686e-9, 2));
    CHECK(lamb_dicke(29e3, AtomState{}, 780.241209686e-9) == doctest::Approx(std::sqrt(nu_r / 29e3)).epsilon(1e-12));
    CHECK_THROWS_AS(ground_state_fwhm(0.0, oracle::rb87), DomainError);
}

TEST_CASE("well chain of a sinusoidal corrugation") {
    // U = A (1 - cos(2 pi x / lambda)) + transverse harmonic confinement
    const double A = 0.5 * 2.5e-4 * oracle::muB, lambda = 400e-6, m = oracle::rb87;
    const double wt = 2 * oracle::pi * 500.0;
    const FunctionLandscape land(
        [=](const Vec3& p) {
            return A * (1.0 - std::cos(2 * oracle::pi * p.x() / lambda)) +
                   0.5 * m * wt * wt * (p.y() * p.y() + (p.z() - 200e-6) * (p.z() - 200e-6));
        },
        m);
    WellChainOptions o;
    o.line.z_seed = 200e-6;
    const WellChain chain = well_chain(land, -500e-6, 500e-6, o);
    REQUIRE(chain.wells.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(chain.wells[i].position.x() == doctest::Approx((static_cast<double>(i) - 1.0) * lambda).scale(1e-6));
    }
    const auto& mid = chain.wells[1];
    REQUIRE(mid.depth_to_saddle);
    CHECK(*mid.depth_to_saddle == doctest::Approx(2.5e-4).epsilon(1e-6));
    const double f_long = std::sqrt(A * std::pow(2 * oracle::pi / lambda, 2) / m) / (2 * oracle::pi);
    CHECK(mid.frequencies[0] == doctest::Approx(f_long).epsilon(1e-4));
    CHECK(mid.frequencies[2] == doctest::Approx(500.0).epsilon(1e-4));
    CHECK(chain.saddles.size() == 2);
}

TEST_CASE("profile extrema drop shallow wiggles") {
    std::vector<LineSample> prof;
    for (int i = 0; i <= 400; ++i) {
        const double x = i / 400.0;
        prof.push_back({x, std::cos(4 * oracle::pi * x) + 2e-2 * std::sin(60 * oracle::pi * x), 0, 0});
    }
    const auto coarse = profile_extrema(prof, 0.1);
    // minima at x = 0.25 and 0.75 with a maximum at 0.5 in between
    REQUIRE(coarse.size() == 3);
    CHECK(coarse[0].second);
    CHECK_FALSE(coarse[1].second);
    CHECK(coarse[2].second);
    CHECK(profile_extrema(prof, 0.0).size() > 3);
}

TEST_CASE("guide cross section of the guide preset") {
    const Scene s = load_scene("guide_example");
    Scene thin = s;
    thin.chip.n_filaments = 1;
    const FieldEngine e(thin.chip);
    const SceneLandscape land(e, thin.drive.currents(0.0));
    const GuideSection g = guide_section(land, 0.0, LineSample{0.0, 0.0, 0.0, 45e-6});
    const double r0 = oracle::mu0 * 2.0 / (2.0 * oracle::pi * 80e-4);
    CHECK(g.position.z() == doctest::Approx(r0).epsilon(1e-3));
    CHECK(g.Bmin == doctest::Approx(0.42e-4).epsilon(1e-3));
    // thin wire, Ioffe field B0x: w = (B0y / r0) sqrt(moment / (m B0x))
    const double grad = 80e-4 / r0;
    const double f = grad * std::sqrt(oracle::muB / (oracle::rb87 * 0.42e-4)) / (2 * oracle::pi);
    CHECK(g.transverse_frequencies[0] == doctest::Approx(f).epsilon(0.01));
    CHECK(g.transverse_frequencies[1] == doctest::Approx(f).epsilon(0.01));
    CHECK(std::abs(g.longitudinal_curvature) < 1e-3 * g.hessian(2, 2));
}

TEST_CASE("a well of the conveyor advances by one period per cycle") {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine e(s.chip);
    const auto seeds = conveyor_seeds(s.chip, s.drive.I0);
    REQUIRE(seeds.size() == 6);
    std::vector<double> phases;
    for (int k = 0; k <= 24; ++k) phases.push_back(2 * oracle::pi * k / 24.0);
    const auto track = track_well(e, s.drive, phases, seeds[3]);
    const double P = s.chip.layout.modulation_period;
    CHECK(track.back().trap.position.x() - track.front().trap.position.x() == doctest::Approx(P).epsilon(0.01));
}
