// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. `acceptance 4 7` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "atomchip/calibration.hpp"
#include "atomchip/dynamics.hpp"
#include "atomchip/errors.hpp"
#include "atomchip/merge.hpp"
#include "atomchip/parallel.hpp"
#include "atomchip/scene.hpp"

using namespace atomchip;

namespace {

// Independent reference values, written out from textbook formulas.
constexpr double kMu0 = 4e-7 * 3.14159265358979323846 * (1.0 + 5.5e-10);  // CODATA 2018 mu0
constexpr double kH = 6.62607015e-34;
constexpr double kHbar = kH / (2.0 * 3.14159265358979323846);
constexpr double kBoltz = 1.380649e-23;
constexpr double kRbMass = 86.909180527 * 1.66053906660e-27;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

Vec3 central_seed(const Scene& s) { return atomchip::central_seed(s.chip, s.drive.I0); }

// ---------------------------------------------------------------------------

Outcome infinite_wire_limit() {
    const double r = 50e-6, I = 2.0, L = 1e6 * r;
    const Filament f{Vec3(-L / 2, 0, 0), Vec3(L / 2, 0, 0), 1.0};
    const double B = filament_field(f, I, Vec3(0, 0, r)).norm();
    const double expected = kMu0 * I / (2.0 * 3.14159265358979323846 * r);
    const double rel = std::abs(B / expected - 1.0);
    return {rel < 1e-6 && std::abs(expected * 1e4 - 80.0) < 1e-6,
            "B = " + num(B * 1e4, 10) + " G vs " + num(expected * 1e4, 10) + " G, rel " + num(rel, 2)};
}

GuideSection guide_at_center(int n_filaments) {
    Scene s = load_scene("guide_example");
    s.chip.n_filaments = n_filaments;
    const FieldEngine engine(s.chip);
    const SceneLandscape land(engine, s.drive.currents(0.0));
    const double x = pattern_center(s.chip.layout);
    return guide_section(land, x, LineSample{x, 0.0, 0.0, 50e-6});
}

Outcome guide_geometry() {
    const Scene s = load_scene("guide_example");
    const double r0 = kMu0 * s.drive.I0 / (2.0 * 3.14159265358979323846 * s.chip.bias.y);
    const double thin = guide_at_center(1).position.z();
    const double wide = guide_at_center(32).position.z();
    const bool ok = std::abs(r0 - 50e-6) < 0.5e-6 && std::abs(thin - r0) < 0.5e-6 && within(wide, 36e-6, 48e-6);
    return {ok, "thin wire " + num(thin * 1e6) + " um (formula " + num(r0 * 1e6) + "), 32 filaments " +
                    num(wide * 1e6) + " um"};
}

Outcome guide_frequency() {
    const GuideSection g = guide_at_center(32);
    const double nu_recoil = kH / (2.0 * kRbMass * std::pow(780.241209686e-9, 2));
    bool ok = true;
    for (double f : g.transverse_frequencies) ok = ok && within(f, 20e3, 38e3);
    const double eta = std::sqrt(nu_recoil / g.transverse_frequencies[1]);
    ok = ok && within(eta, 0.30, 0.44);
    return {ok, "nu_perp " + num(g.transverse_frequencies[0] / 1e3) + ", " + num(g.transverse_frequencies[1] / 1e3) +
                    " kHz, Lamb-Dicke " + num(eta, 3)};
}

Outcome conveyor_landscape() {
    Scene s = load_scene("fig2_conveyor");
    const CalibrationResult cal = calibrate_period(s.chip, *s.layout_params, s.drive);
    LayoutParams p = *s.layout_params;
    p.modulation_period = cal.period;
    s.chip.layout = conveyor_layout(p);
    const FieldEngine engine(s.chip);
    const ConveyorSurvey sv = survey_conveyor(engine, s.drive);

    double ft_min = 1e300, ft_max = 0.0, c_min = 1e300, c_max = 0.0, r_min = 1e300, r_max = 0.0, r_sum = 0.0;
    for (const auto& w : sv.wells) {
        const auto curv = w.curvatures(engine.atom().moment());
        double f_long = 0.0;
        std::vector<double> f_t;
        for (int k = 0; k < 3; ++k) {
            Eigen::Index axis = 0;
            w.hessian_eigvecs.col(k).cwiseAbs().maxCoeff(&axis);
            const auto kk = static_cast<std::size_t>(k);
            if (axis == 0) {
                f_long = w.frequencies[kk];
            } else {
                f_t.push_back(w.frequencies[kk]);
                // T/m^2 and G/cm^2 coincide numerically
                c_min = std::min(c_min, curv[kk]);
                c_max = std::max(c_max, curv[kk]);
            }
        }
        for (double f : f_t) {
            ft_min = std::min(ft_min, f);
            ft_max = std::max(ft_max, f);
        }
        const double r = f_long / std::sqrt(f_t.at(0) * f_t.at(1));
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
        r_sum += r;
    }
    const double r_mean = r_sum / static_cast<double>(sv.wells.size());
    const double depth = sv.mean_depth * 1e4;
    const bool ok = !sv.wells.empty() && within(depth, 2.5 * 0.7, 2.5 * 1.3) && ft_min >= 140.0 && ft_max <= 1040.0 &&
                    within(r_mean, 1.0 / 8.0, 0.5) && c_max >= 2.5e4 && c_min <= 4e5;
    return {ok, "P " + num(cal.period * 1e6) + " um, mean depth " + num(depth, 3) + " G, nu_t " + num(ft_min, 3) +
                    "-" + num(ft_max, 3) + " Hz, long/trans mean " + num(r_mean, 3) + " (" + num(r_min, 3) + "-" +
                    num(r_max, 3) + "), curvature " + num(c_min, 3) + "-" + num(c_max, 3) + " G/cm2, " +
                    std::to_string(sv.wells.size()) + " wells"};
}

Outcome conveyor_kinematics() {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine engine(s.chip);
    std::vector<double> phases;
    for (int k = 0; k <= 72; ++k) phases.push_back(kTwoPi * k / 72.0);
    const auto track = track_well(engine, s.drive, phases, central_seed(s));
    bool monotone = true;
    for (std::size_t i = 1; i < track.size(); ++i) {
        monotone = monotone && track[i].trap.position.x() > track[i - 1].trap.position.x();
    }
    const double P = s.chip.layout.modulation_period;
    const double advance = track.back().trap.position.x() - track.front().trap.position.x();

    // same depths one full period later
    const double c = pattern_center(s.chip.layout);
    double worst = 0.0;
    for (double phi : {0.0, 0.9, 2.3}) {
        const SceneLandscape a(engine, s.drive.currents(phi)), b(engine, s.drive.currents(phi + kTwoPi));
        const auto wa = well_chain(a, c - 2 * P, c + 2 * P).wells;
        const auto wb = well_chain(b, c - 2 * P, c + 2 * P).wells;
        if (wa.size() != wb.size()) return {false, "well count changes after 2 pi"};
        for (std::size_t i = 0; i < wa.size(); ++i) {
            if (!wa[i].depth_to_saddle || !wb[i].depth_to_saddle) continue;
            worst = std::max(worst, std::abs(*wb[i].depth_to_saddle / *wa[i].depth_to_saddle - 1.0));
        }
    }
    const bool ok = monotone && std::abs(advance / P - 1.0) < 0.01 && worst < 1e-6;
    return {ok, "advance " + num(advance * 1e6, 6) + " um per 2 pi (P " + num(P * 1e6, 6) + "), monotone " +
                    (monotone ? "yes" : "no") + ", depth periodicity " + num(worst, 2)};
}

Outcome integrator_quality() {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine engine(s.chip);
    RigOptions ro;
    ro.gravity = false;
    const TransportRig rig = make_transport_rig(engine, s.drive, central_seed(s), 0.25 * s.chip.layout.modulation_period, ro);
    const DynamicsModel& model = *rig.model;
    Ensemble e = sample_thermal(model, 0.0, rig.well, 20e-6, 16, 7);
    const double U0 = rig.well.energy;
    const PhaseProfile frozen = PhaseProfile::piecewise({{0.0, 0.0}, {1.0, 0.0}});
    IntegrateOptions io;
    io.dt = 1.0 / (40.0 * rig.nu_fastest);
    Snapshots snaps;
    io.snapshots = &snaps;
    io.snapshot_every = 10;
    integrate(e, model, frozen, 1e5 * io.dt, io);
    // Verlet energy oscillates by ~(w dt)^2 without drifting; compare window
    // averages over the first and last 10% of the run
    const std::size_t n_snap = snaps.times.size(), win = n_snap / 10;
    double drift = 0.0, drift_above = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        auto energy_at = [&](std::size_t k) {
            return model.energy(0.0, snaps.positions[k][i]) + 0.5 * model.mass() * snaps.velocities[k][i].squaredNorm();
        };
        double first = 0.0, last = 0.0;
        for (std::size_t k = 0; k < win; ++k) {
            first += energy_at(k) / static_cast<double>(win);
            last += energy_at(n_snap - 1 - k) / static_cast<double>(win);
        }
        // U = moment |B| has a physical zero (B = 0), so E is an absolute scale
        drift = std::max(drift, std::abs(last - first) / first);
        drift_above = std::max(drift_above, std::abs(last - first) / (first - U0));
    }

    Ensemble r = sample_thermal(model, 0.0, rig.well, 20e-6, 16, 8);
    const auto start = r.positions;
    IntegrateOptions io2 = io;
    integrate(r, model, frozen, r.time + 1e3 * io.dt, io2);
    for (auto& v : r.velocities) v = -v;
    integrate(r, model, frozen, r.time + 1e3 * io.dt, io2);
    double back = 0.0;
    for (std::size_t i = 0; i < start.size(); ++i) back = std::max(back, (r.positions[i] - start[i]).norm());

    const bool lost = e.survivors() != e.size() || r.survivors() != r.size();
    return {!lost && drift < 1e-4 && back < 1e-6,
            "max energy drift " + num(drift, 2) + " over 1e5 steps (" + num(drift_above, 2) +
                " of the energy above the bottom), time reversal error " + num(back, 2) + " m"};
}

Outcome adiabatic_transport() {
    const Scene s = load_scene("fig2_conveyor");
    const FieldEngine engine(s.chip);
    RigOptions ro;
    ro.spacing = s.sim.table_spacing;
    ro.gravity = s.sim.gravity;
    const TransportRig rig = make_transport_rig(engine, s.drive, central_seed(s), s.chip.layout.modulation_period, ro);
    std::vector<double> means;
    std::string text;
    for (double v : {0.005, 0.02, 0.08}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            sum += transport_experiment(rig, v, s.sim.T0, 2000, seed).deltaT;
        }
        means.push_back(sum / 5.0);
        text += (text.empty() ? "" : ", ") + std::string("dT(") + num(v * 100, 2) + " cm/s) " +
                num(means.back() * 1e6, 3) + " uK";
    }
    const bool ok = std::abs(means[0]) <= 2e-6 && means[0] < means[1] && means[1] < means[2];
    return {ok, text};
}

Outcome flux_arithmetic() {
    const double flux = mean_flux(1.5e5, PhaseProfile::linear(kTwoPi / 0.150, 0.150));
    const double exact = 1.5e5 / 0.150;
    const bool ok = std::abs(flux / exact - 1.0) < 1e-12 && std::abs(flux / 9.4e5 - 1.0) < 0.15;
    return {ok, "flux " + num(flux, 12) + " /s (vs 9.4e5: " + num(100 * (flux / 9.4e5 - 1.0), 3) + "%)"};
}

Outcome ground_state_size() {
    const double fwhm = ground_state_fwhm(800.0, kRbMass);
    const double oracle = 2.0 * std::sqrt(2.0 * std::log(2.0)) * std::sqrt(kHbar / (kRbMass * 2.0 * 3.14159265358979323846 * 800.0));
    return {std::abs(fwhm - 0.90e-6) <= 0.02e-6 && std::abs(fwhm / oracle - 1.0) < 1e-9,
            "FWHM " + num(fwhm * 1e6, 4) + " um"};
}

Outcome merge_milestones() {
    const Scene s = load_scene("fig5_merge");
    const FieldEngine engine(s.chip);
    const MergePhaseMap m = merge_phase_map(engine, s.drive, phase_grid_deg(1.0));
    const auto deg = [](double rad) { return units::rad_to_deg(rad); };
    const auto at = [&](double d) {
        const auto it = std::min_element(m.phases.begin(), m.phases.end(), [&](double a, double b) {
            return std::abs(deg(a) - d) < std::abs(deg(b) - d);
        });
        return m.minima_counts[static_cast<std::size_t>(it - m.phases.begin())];
    };
    const bool ok = at(100.0) == 2 && m.merged_at && deg(*m.merged_at) <= 225.0 && m.compressed_at &&
                    std::abs(deg(*m.compressed_at) - 350.0) <= 20.0;
    auto show = [&](const std::optional<double>& p) { return p ? num(deg(*p), 4) + " deg" : std::string("none"); };
    return {ok, "count(100 deg) " + std::to_string(at(100.0)) + ", merged at " + show(m.merged_at) +
                    ", compressed at " + show(m.compressed_at)};
}

Outcome septum_thermodynamics() {
    const std::array<double, 3> f{150.0, 400.0, 420.0};
    const double T = 30e-6;
    const SeptumResult equal = septum_prediction(1000, T, 1000, T, f, f);
    const SeptumResult empty = septum_prediction(1000, T, 0, 0, f, f);
    bool ok = std::abs(equal.psd_ratio - 1.0) <= 1e-6 && std::abs(equal.T_final - std::cbrt(2.0) * T) <= 1e-6 * T &&
              std::abs(empty.psd_ratio - 0.5) <= 1e-6;

    const Scene s = load_scene("fig5_merge");
    const FieldEngine engine(s.chip);
    MergeSimOptions mo;
    mo.cycle_duration = kTwoPi / s.profile.omega;
    const auto left = merge_simulate(engine, s.drive, Populate::LeftOnly, s.sim.N, s.sim.T0, s.sim.seed, mo);
    const auto both = merge_simulate(engine, s.drive, Populate::Both, s.sim.N, s.sim.T0, s.sim.seed, mo);
    ok = ok && within(left.psd_ratio, 0.4, 0.7) && within(both.psd_ratio, 0.8, 1.1);
    return {ok, "closed form " + num(equal.psd_ratio, 8) + " / " + num(empty.psd_ratio, 8) + ", T_f/T " +
                    num(equal.T_final / T, 8) + "; Monte Carlo left_only " + num(left.psd_ratio, 3) + ", both " +
                    num(both.psd_ratio, 3)};
}

Outcome property_suites() {
    std::vector<std::string> failed;
    const Scene s = load_scene("fig5_merge");
    const FieldEngine engine(s.chip);
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ux(-1500e-6, 1800e-6), uy(-400e-6, 400e-6), uz(20e-6, 400e-6);
    std::vector<Vec3> points;
    while (points.size() < 100) {
        const Vec3 p(ux(rng), uy(rng), uz(rng));
        if (!engine.in_exclusion(p)) points.push_back(p);
    }

    // linearity and superposition of the conductor field
    const CurrentSet a{1.3, 0.7, -0.4, 0.5, {}}, b{-0.2, 0.3, 0.9, -1.1, {}};
    const Vec3 bias = engine.scene().bias.vector();
    double lin = 0.0;
    for (const auto& p : points) {
        const Vec3 Ba = engine.total_field(a, p).B - bias, Bb = engine.total_field(b, p).B - bias;
        const Vec3 Bab = engine.total_field(a + b, p).B - bias;
        const Vec3 B3 = engine.total_field(a.scaled(3.0), p).B - bias;
        const double scale = Ba.norm() + Bb.norm();
        lin = std::max({lin, (Bab - Ba - Bb).norm() / scale, (B3 - 3.0 * Ba).norm() / (3.0 * Ba.norm())});
    }
    if (lin > 1e-12) failed.push_back("superposition " + num(lin, 2));

    // divergence by central differences
    const double h = 0.1e-6;
    const CurrentSet cur = s.drive.currents(1.0);
    double div_worst = 0.0;
    for (const auto& p : points) {
        double div = 0.0;
        for (int i = 0; i < 3; ++i) {
            Vec3 d = Vec3::Zero();
            d[i] = h;
            div += (engine.total_field(cur, p + d).B[i] - engine.total_field(cur, p - d).B[i]) / (2 * h);
        }
        div_worst = std::max(div_worst, std::abs(div) / (engine.total_field(cur, p).magnitude / h));
    }
    if (div_worst >= 1e-6) failed.push_back("divergence " + num(div_worst, 2));

    // second-order convergence of the finite-difference Hessian at a trap bottom
    const Scene conv = load_scene("fig2_conveyor");
    const FieldEngine ce(conv.chip);
    const SceneLandscape land(ce, conv.drive.currents(0.0));
    const TrapCharacterization w = find_minimum(land, central_seed(conv));
    std::vector<double> hs{8e-6, 4e-6, 2e-6, 1e-6}, errs;
    for (double hh : hs) errs.push_back((hessian_of_potential(land, w.position, hh) -
                                         hessian_of_potential(land, w.position, hh / 2)).norm());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        const double x = std::log(hs[i]), y = std::log(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(hs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (std::abs(slope - 2.0) > 0.2) failed.push_back("Hessian slope " + num(slope, 3));

    // equipartition in a harmonic well, N = 1e4
    const std::array<double, 3> k{2e-20, 5e-20, 9e-20};  // J/m^2
    const FunctionModel harm(
        [k](double, const Vec3& p) { return 0.5 * (k[0] * p.x() * p.x() + k[1] * p.y() * p.y() + k[2] * p.z() * p.z()); },
        kRbMass, [k](double, const Vec3& p) { return Vec3(-k[0] * p.x(), -k[1] * p.y(), -k[2] * p.z()); });
    const PhaseLandscape hl(harm, 0.0);
    const TrapCharacterization hw = find_minimum(hl, Vec3(1e-7, -1e-7, 1e-7));
    const double T = 20e-6;
    const std::size_t N = 10000;
    const Ensemble e = sample_thermal(harm, 0.0, hw, T, N, 99);
    double eq_worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        double pot = 0.0, kin = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            pot += 0.5 * k[static_cast<std::size_t>(i)] * e.positions[j][i] * e.positions[j][i];
            kin += 0.5 * kRbMass * e.velocities[j][i] * e.velocities[j][i];
        }
        // each quadratic term is kT/2 with standard deviation kT/sqrt(2) per sample
        const double sigma = 0.5 * kBoltz * T * std::sqrt(2.0 / static_cast<double>(N));
        eq_worst = std::max({eq_worst, std::abs(pot / N - 0.5 * kBoltz * T) / sigma,
                             std::abs(kin / N - 0.5 * kBoltz * T) / sigma});
    }
    if (eq_worst > 4.0) failed.push_back("equipartition " + num(eq_worst, 3) + " sigma");

    // identical results for any thread count
    RigOptions ro;
    ro.threads = 1;
    const TransportRig rig1 = make_transport_rig(ce, conv.drive, central_seed(conv), 0.25 * conv.chip.layout.modulation_period, ro);
    ro.threads = 3;
    const TransportRig rig3 = make_transport_rig(ce, conv.drive, central_seed(conv), 0.25 * conv.chip.layout.modulation_period, ro);
    TransportOptions to;
    to.hold_periods = 3.0;
    to.threads = 1;
    to.sampling.threads = 1;
    const auto r1 = transport_experiment(rig1, 0.02, 30e-6, 200, 5, to);
    to.threads = 3;
    to.sampling.threads = 3;
    const auto r3 = transport_experiment(rig3, 0.02, 30e-6, 200, 5, to);
    bool same = r1.T_final == r3.T_final && r1.T_initial == r3.T_initial && r1.survival_fraction == r3.survival_fraction &&
                r1.com_trajectory.size() == r3.com_trajectory.size();
    for (std::size_t i = 0; same && i < r1.com_trajectory.size(); ++i) {
        same = r1.com_trajectory[i].second == r3.com_trajectory[i].second;
    }
    if (!same) failed.push_back("thread-count determinism");

    std::string text = "superposition " + num(lin, 2) + ", div " + num(div_worst, 2) + ", Hessian slope " +
                       num(slope, 3) + ", equipartition " + num(eq_worst, 3) + " sigma, threads 1 vs 3 " +
                       (same ? "identical" : "differ");
    if (!failed.empty()) {
        text += " | failed:";
        for (const auto& f : failed) text += " " + f;
    }
    return {failed.empty(), text};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "infinite-wire limit", infinite_wire_limit},
        {2, "guide geometry", guide_geometry},
        {3, "guide frequency and Lamb-Dicke", guide_frequency},
        {4, "conveyor landscape", conveyor_landscape},
        {5, "conveyor kinematics", conveyor_kinematics},
        {6, "integrator quality", integrator_quality},
        {7, "adiabatic transport", adiabatic_transport},
        {8, "flux arithmetic", flux_arithmetic},
        {9, "ground-state size", ground_state_size},
        {10, "merge milestones", merge_milestones},
        {11, "septum thermodynamics", septum_thermodynamics},
        {12, "property suites", property_suites},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
