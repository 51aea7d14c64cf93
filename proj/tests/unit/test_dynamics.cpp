#include <cmath>

#include "atomchip/dynamics.hpp"
#include "atomchip/errors.hpp"
#include "atomchip/scene.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace atomchip;

namespace {

constexpr double kFreq = 300.0;

FunctionModel harmonic_model() {
    const double m = oracle::rb87, k = m * std::pow(2 * oracle::pi * kFreq, 2);
    return FunctionModel([k](double, const Vec3& p) { return 0.5 * k * p.squaredNorm(); }, m,
                         [k](double, const Vec3& p) -> Vec3 { return -k * p; });
}

TrapCharacterization bottom_of(const DynamicsModel& model) {
    return find_minimum(PhaseLandscape(model, 0.0), Vec3(1e-7, 1e-7, 1e-7));
}

const PhaseProfile kFrozen = PhaseProfile::piecewise({{0.0, 0.0}, {10.0, 0.0}});

}  // namespace

TEST_CASE("Verlet follows a harmonic orbit") {
    const auto model = harmonic_model();
    Ensemble e;
    e.positions = {Vec3(10e-6, 0, 0)};
    e.velocities = {Vec3::Zero()};
    e.lost = {0};
    IntegrateOptions io;
    const double period = 1.0 / kFreq;
    io.dt = period / 200.0;
    integrate(e, model, kFrozen, 0.25 * period, io);
    // a quarter period later the atom crosses the center at full speed
    CHECK(std::abs(e.positions[0].x()) < 1e-7);
    CHECK(e.velocities[0].x() == doctest::Approx(-10e-6 * 2 * oracle::pi * kFreq).epsilon(1e-3));
    CHECK(e.time == doctest::Approx(0.25 * period));
}

TEST_CASE("time step limit and bad arguments") {
    const auto model = harmonic_model();
    Ensemble e;
    e.positions = {Vec3::Zero()};
    e.velocities = {Vec3::Zero()};
    e.lost = {0};
    IntegrateOptions io;
    io.dt = 1.0 / (10.0 * kFreq);
    io.nu_max = kFreq;
    CHECK_THROWS_AS(integrate(e, model, kFrozen, 0.01, io), ConfigError);
    io.dt = 0.0;
    CHECK_THROWS_AS(integrate(e, model, kFrozen, 0.01, io), ConfigError);
}

TEST_CASE("atoms leaving the domain are flagged lost") {
    const FunctionModel free_flight([](double, const Vec3&) { return 0.0; }, oracle::rb87,
                                    [](double, const Vec3&) { return Vec3::Zero(); });
    Ensemble e;
    e.positions = {Vec3::Zero(), Vec3::Zero()};
    e.velocities = {Vec3(1e-3, 0, 0), Vec3(1e-5, 0, 0)};
    e.lost = {0, 0};
    IntegrateOptions io;
    io.dt = 1e-4;
    io.domain = Box{Vec3(-1e-6, -1e-6, -1e-6), Vec3(1e-6, 1e-6, 1e-6)};
    integrate(e, free_flight, kFrozen, 0.05, io);
    CHECK(e.lost[0] == 1);
    CHECK(e.lost[1] == 0);
    CHECK(e.survivors() == 1);
}

TEST_CASE("kinetic temperature of a known velocity set") {
    Ensemble e;
    e.atom = AtomState{};
    const double v = 0.05;
    // +-v along each axis: <v^2> = v^2 per atom, T = m v^2 / (3 kB)
    for (int i = 0; i < 3; ++i) {
        for (double s : {1.0, -1.0}) {
            Vec3 u = Vec3::Zero();
            u[i] = s * v;
            e.positions.push_back(Vec3::Zero());
            e.velocities.push_back(u + Vec3(0.2, 0, 0));  // common drift is removed
            e.lost.push_back(0);
        }
    }
    CHECK(temperature(e) == doctest::Approx(oracle::rb87 * v * v / (3.0 * oracle::kB)).epsilon(1e-12));
    const auto axes = axis_temperatures(e);
    CHECK(axes[0] == doctest::Approx(oracle::rb87 * v * v / 3.0 / oracle::kB).epsilon(1e-12));
    e.lost.assign(e.size(), 1);
    e.lost[0] = 0;
    CHECK_THROWS_AS(temperature(e), StatisticsError);
}

TEST_CASE("thermal sampling: equipartition and reproducibility") {
    const auto model = harmonic_model();
    const auto well = bottom_of(model);
    const double T = 10e-6;
    const std::size_t N = 4000;
    const Ensemble a = sample_thermal(model, 0.0, well, T, N, 42);
    const Ensemble b = sample_thermal(model, 0.0, well, T, N, 42);
    const Ensemble c = sample_thermal(model, 0.0, well, T, N, 43);
    CHECK(a.positions == b.positions);
    CHECK(a.velocities == b.velocities);
    CHECK(a.positions != c.positions);

    const double k = oracle::rb87 * std::pow(2 * oracle::pi * kFreq, 2);
    double pot = 0.0;
    for (const auto& p : a.positions) pot += 0.5 * k * p.squaredNorm();
    pot /= static_cast<double>(N);
    const double sigma = 1.5 * oracle::kB * T * std::sqrt(2.0 / (3.0 * N));
    CHECK(std::abs(pot - 1.5 * oracle::kB * T) < 5 * sigma);
    CHECK(temperature(a) == doctest::Approx(T).epsilon(0.05));
}

TEST_CASE("total energy cap keeps the bound part") {
    const auto model = harmonic_model();
    const auto well = bottom_of(model);
    const double T = 10e-6, cap = 2.0 * oracle::kB * T;
    SamplingOptions so;
    so.total_energy_cap = cap;
    const Ensemble e = sample_thermal(model, 0.0, well, T, 500, 5, so);
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double E = model.energy(0.0, e.positions[i]) + 0.5 * oracle::rb87 * e.velocities[i].squaredNorm();
        CHECK(E <= cap);
    }
}

TEST_CASE("mean flux is atoms per well times drive frequency") {
    CHECK(mean_flux(1.5e5, PhaseProfile::linear(2 * oracle::pi / 0.150, 0.3)) == doctest::Approx(1e6).epsilon(1e-12));
    CHECK_THROWS_AS(mean_flux(1.0, PhaseProfile::smoothstep(1.0, 1.0)), DomainError);
}

TEST_CASE("field table reproduces the direct field") {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine e(s.chip);
    const Box box{Vec3(0, -30e-6, 190e-6), Vec3(100e-6, 30e-6, 250e-6)};
    const FieldTable table(e, s.drive, box, 5e-6);
    for (const Vec3& p : {Vec3(50e-6, 0, 222e-6), Vec3(13e-6, -17e-6, 201e-6), Vec3(88e-6, 22e-6, 243e-6)}) {
        for (double phi : {0.0, 1.1, 4.0}) {
            const CurrentSet c = s.drive.currents(phi);
            const Vec3 direct = e.total_field(c, p).B;
            const FieldGradient tab = table.field(c.IM1, c.IM2, c.IH2, p);
            CHECK((tab.B - direct).norm() < 2e-8);  // 2e-4 G, 1e-4 of the well depth
            // analytic Jacobian against central differences of the table
            Mat3 J;
            const double h = 1e-7;
            for (int j = 0; j < 3; ++j) {
                Vec3 d = Vec3::Zero();
                d[j] = h;
                J.col(j) = (table.field_only(c.IM1, c.IM2, c.IH2, p + d) -
                            table.field_only(c.IM1, c.IM2, c.IH2, p - d)) / (2 * h);
            }
            CHECK((J - tab.J).norm() < 1e-6 * tab.J.norm());
        }
    }
    CHECK_THROWS_AS((void)table.field(0, 0, 0, Vec3(0, 0, 0)), SingularityError);
}

TEST_CASE("table model forces are gradients of its energy") {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine e(s.chip);
    const Box box{Vec3(0, -30e-6, 190e-6), Vec3(100e-6, 30e-6, 250e-6)};
    auto table = std::make_shared<const FieldTable>(e, s.drive, box, 5e-6);
    const TableModel model(table, s.drive, AtomState{}, true);
    const Vec3 p(40e-6, 3e-6, 220e-6);
    const double h = 1e-8;
    Vec3 fd;
    for (int j = 0; j < 3; ++j) {
        Vec3 d = Vec3::Zero();
        d[j] = h;
        fd[j] = -(model.energy(0.4, p + d) - model.energy(0.4, p - d)) / (2 * h);
    }
    CHECK((model.force(0.4, p) - fd).norm() < 1e-5 * fd.norm());
}
