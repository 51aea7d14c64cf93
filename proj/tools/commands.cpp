#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include "atomchip/calibration.hpp"
#include "atomchip/dynamics.hpp"
#include "atomchip/errors.hpp"
#include "atomchip/merge.hpp"
#include "cli_util.hpp"

namespace atomchip::cli {

namespace {

const std::map<std::string, double> kSpeedUnits = {{"cm_s", 1e-2}, {"mm_s", 1e-3}, {"m_s", 1.0}};
const std::map<std::string, double> kFieldUnits = {{"G", 1e-4}, {"T", 1.0}};
const std::map<std::string, double> kLengthUnits = {{"um", 1e-6}, {"mm", 1e-3}};

double G(double tesla) { return units::tesla_to_gauss(tesla); }
double um(double m) { return units::m_to_um(m); }
double uK(double K) { return units::K_to_uK(K); }

/// Conveyor seed closest to the middle of the modulation pattern.
Vec3 central_seed(const Scene& s) { return atomchip::central_seed(s.chip, s.drive.I0); }

/// Lab axis (0, 1, 2) each principal axis mostly points along.
std::array<double, 3> lab_frequencies(const TrapCharacterization& t) {
    std::array<double, 3> f{NAN, NAN, NAN};
    for (int k = 0; k < 3; ++k) {
        Eigen::Index axis = 0;
        t.hessian_eigvecs.col(k).cwiseAbs().maxCoeff(&axis);
        f[static_cast<std::size_t>(axis)] = t.frequencies[static_cast<std::size_t>(k)];
    }
    return f;
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------- scene

void scene_commands(CLI::App& app) {
    auto* scene = app.add_subcommand("scene", "Scene files and presets");
    scene->require_subcommand(1);

    auto* validate = scene->add_subcommand("validate", "Parse and check a scene; prints its hash");
    struct Flags1 {
        std::string target;
        bool print = false;
    };
    const auto flags1 = std::make_shared<Flags1>();
    auto& [target, print] = *flags1;
    validate->add_option("scene", target, "Preset name or scene file")->required();
    validate->add_flag("--print", print, "Print the resolved scene with all defaults");
    validate->callback([flags1] {
        auto& [target, print] = *flags1;
        const Scene s = load_scene(target);
        std::cout << "valid: " << s.name << " (hash " << scene_hash(s) << ")\n";
        if (print) std::cout << scene_to_json(s);
    });

    auto* presets = scene->add_subcommand("presets", "List the shipped presets");
    presets->callback([] {
        for (const auto& n : preset_names()) std::cout << n << "\n";
    });
}

// ---------------------------------------------------------------- field

void field_commands(CLI::App& app) {
    auto* field = app.add_subcommand("field", "Field evaluation");
    field->require_subcommand(1);
    auto* sample = field->add_subcommand("sample", "Sample B and U on a line or grid");
    struct Flags2 {
        Common c;
        double phase_deg = 0.0;
        std::string from = "-500,0,200";
        std::string to = "500,0,200";
        std::string counts = "201";
    };
    const auto flags2 = std::make_shared<Flags2>();
    auto& [c, phase_deg, from, to, counts] = *flags2;
    add_common(*sample, c, "fig2_conveyor");
    sample->add_option("--phase-deg,--phase", phase_deg, "Drive phase in degrees")->capture_default_str();
    sample->add_option("--from", from, "Grid corner x,y,z (um)")->capture_default_str();
    sample->add_option("--to", to, "Opposite corner x,y,z (um)")->capture_default_str();
    sample->add_option("--n", counts, "Points per axis: n (along the line) or nx,ny,nz")->capture_default_str();
    sample->callback([sample, flags2] {
        auto& [c, phase_deg, from, to, counts] = *flags2;
        Run run("field sample", c, *sample);
        const Vec3 a = parse_um_triple(from, "--from"), b = parse_um_triple(to, "--to");
        std::array<int, 3> n{1, 1, 1};
        const auto parts = split(counts, ',');
        if (parts.size() == 1) {
            // a single count samples the straight line between the corners
            n = {std::stoi(parts[0]), 1, 1};
        } else if (parts.size() == 3) {
            for (int i = 0; i < 3; ++i) n[static_cast<std::size_t>(i)] = std::stoi(parts[static_cast<std::size_t>(i)]);
        } else {
            throw CLI::ValidationError("--n", "expected n or nx,ny,nz");
        }
        for (int k : n) {
            if (k < 1) throw CLI::ValidationError("--n", "counts must be positive");
        }
        const bool line = parts.size() == 1;

        const FieldEngine engine(run.scene().chip);
        const CurrentSet cur = run.scene().drive.currents(units::deg_to_rad(phase_deg));
        auto lerp = [](double lo, double hi, int i, int m) { return m == 1 ? lo : lo + (hi - lo) * i / (m - 1); };

        auto csv = run.csv("field_sample.csv", {"x_um", "y_um", "z_um", "Bx_G", "By_G", "Bz_G", "Bmag_G", "U_uK"});
        std::vector<double> axis, values;
        for (int k = 0; k < n[2]; ++k) {
            for (int j = 0; j < n[1]; ++j) {
                for (int i = 0; i < n[0]; ++i) {
                    Vec3 p;
                    if (line) {
                        p = a + (b - a) * (n[0] == 1 ? 0.0 : static_cast<double>(i) / (n[0] - 1));
                    } else {
                        p = Vec3(lerp(a.x(), b.x(), i, n[0]), lerp(a.y(), b.y(), j, n[1]), lerp(a.z(), b.z(), k, n[2]));
                    }
                    csv.cell(um(p.x())).cell(um(p.y())).cell(um(p.z()));
                    if (engine.in_exclusion(p)) {
                        for (int q = 0; q < 5; ++q) csv.cell(NAN);
                        values.push_back(NAN);
                    } else {
                        const FieldSample f = engine.total_field(cur, p);
                        const double U = engine.potential(cur, p);
                        csv.cell(G(f.B.x())).cell(G(f.B.y())).cell(G(f.B.z())).cell(G(f.magnitude));
                        csv.cell(uK(U / PhysicalConstants::kB));
                        values.push_back(G(f.magnitude));
                    }
                    csv.end_row();
                    axis.push_back(line ? um((p - a).norm()) : 0.0);
                }
            }
        }
        if (run.plot()) {
            std::vector<int> active;
            for (int d = 0; d < 3; ++d) {
                if (n[static_cast<std::size_t>(d)] > 1) active.push_back(d);
            }
            const char* names[] = {"x (um)", "y (um)", "z (um)"};
            if (line || active.size() == 1) {
                LinePlot lp{"|B| along the sample line", line ? "distance from --from (um)" : names[active[0]],
                            "|B| (G)", {}};
                if (!line) {
                    axis.clear();
                    const int d = active[0];
                    for (int i = 0; i < n[static_cast<std::size_t>(d)]; ++i) {
                        axis.push_back(lerp(um(a[d]), um(b[d]), i, n[static_cast<std::size_t>(d)]));
                    }
                }
                lp.series.push_back({"|B|", axis, values, false});
                run.svg("field_sample.svg", render_svg(lp));
            } else if (active.size() == 2) {
                const int d0 = active[0], d1 = active[1];
                HeatMap hm{"|B| slice", names[d0], names[d1], "|B| (G)",
                           um(a[d0]), um(b[d0]), um(a[d1]), um(b[d1]),
                           static_cast<std::size_t>(n[static_cast<std::size_t>(d0)]),
                           static_cast<std::size_t>(n[static_cast<std::size_t>(d1)]), values};
                run.svg("field_sample.svg", render_svg(hm));
            }
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- trap

void trap_commands(CLI::App& app) {
    auto* trap = app.add_subcommand("trap", "Trap analysis");
    trap->require_subcommand(1);

    auto* analyze = trap->add_subcommand("analyze", "Locate and characterize traps at one phase");
    struct Flags3 {
        Common ca;
        double phase_deg = 0.0;
        std::string seed_um;
        double x_um = NAN;
    };
    const auto flags3 = std::make_shared<Flags3>();
    auto& [ca, phase_deg, seed_um, x_um] = *flags3;
    add_common(*analyze, ca, "fig2_conveyor");
    analyze->add_option("--phase-deg,--phase", phase_deg, "Drive phase in degrees")->capture_default_str();
    analyze->add_option("--seed-um", seed_um, "Start point x,y,z for a single 3D minimum search");
    analyze->add_option("--x-um", x_um, "Cross-section position for guides (default: pattern center)");
    analyze->callback([analyze, flags3] {
        auto& [ca, phase_deg, seed_um, x_um] = *flags3;
        Run run("trap analyze", ca, *analyze);
        const Scene& s = run.scene();
        const FieldEngine engine(s.chip);
        const SceneLandscape land(engine, s.drive.currents(units::deg_to_rad(phase_deg)));
        const double moment = engine.atom().moment();
        auto csv = run.csv("trap_analyze.csv", {"well_index", "x_um", "y_um", "z_um", "Bmin_G", "depth_G", "f1_Hz",
                                                "f2_Hz", "f3_Hz", "curvature_max_G_cm2", "lamb_dicke",
                                                "ground_fwhm_um"});
        std::cout << "scene " << s.name << ", phase " << phase_deg << " deg\n";

        if (s.drive.IM_amplitude == 0.0 && seed_um.empty()) {
            // a guide has no longitudinal confinement: analyze its cross section
            const double x = std::isnan(x_um) ? pattern_center(s.chip.layout) : units::um_to_m(x_um);
            const auto est = guide_estimates(std::abs(s.drive.I0), std::abs(s.chip.bias.y), std::abs(s.chip.bias.x));
            const GuideSection g = guide_section(land, x, LineSample{x, 0.0, 0.0, est.r0});
            const double f_hi = g.transverse_frequencies[1];
            const double ld = lamb_dicke(f_hi, s.chip.atom, PhysicalConstants::lambdaD2);
            const double fwhm = ground_state_fwhm(f_hi, s.chip.atom.mass);
            const double curv = G(g.hessian.block<2, 2>(1, 1).eigenvalues().real().maxCoeff() / moment) * 1e-4;
            std::cout << "guide cross section at x = " << fixed(um(x), 1) << " um\n"
                      << "  height above conductor plane  " << fixed(um(g.position.z()), 2) << " um"
                      << " (thin-wire estimate " << fixed(um(est.r0), 2) << " um)\n"
                      << "  lateral offset                " << fixed(um(g.position.y()), 2) << " um\n"
                      << "  |B| at the bottom             " << fixed(G(g.Bmin), 4) << " G\n"
                      << "  transverse frequencies        " << fixed(g.transverse_frequencies[0], 0) << ", "
                      << fixed(f_hi, 0) << " Hz\n"
                      << "  Lamb-Dicke parameter          " << fixed(ld, 3) << "\n"
                      << "  ground-state FWHM             " << fixed(um(fwhm), 3) << " um\n";
            csv.cell(0LL).cell(um(g.position.x())).cell(um(g.position.y())).cell(um(g.position.z()));
            csv.cell(G(g.Bmin)).blank().blank().cell(g.transverse_frequencies[0]).cell(f_hi).cell(curv);
            csv.cell(ld).cell(um(fwhm));
            csv.end_row();
        } else {
            std::vector<TrapCharacterization> wells;
            if (!seed_um.empty()) {
                wells.push_back(find_minimum(land, parse_um_triple(seed_um, "--seed-um")));
            } else {
                const double c = pattern_center(s.chip.layout);
                const double half = 2.0 * s.chip.layout.modulation_period;
                wells = well_chain(land, c - half, c + half).wells;
            }
            for (std::size_t i = 0; i < wells.size(); ++i) {
                const auto& w = wells[i];
                const auto curv = w.curvatures(moment);
                const double cmax = G(*std::max_element(curv.begin(), curv.end())) * 1e-4;
                const double ld = lamb_dicke(w.frequencies[2], s.chip.atom, PhysicalConstants::lambdaD2);
                const double fwhm = ground_state_fwhm(w.frequencies[2], s.chip.atom.mass);
                std::cout << "well " << i << ": x " << fixed(um(w.position.x()), 1) << " um, height "
                          << fixed(um(w.position.z()), 1) << " um, |B|min " << fixed(G(w.Bmin), 3) << " G, depth "
                          << (w.depth_to_saddle ? fixed(G(*w.depth_to_saddle), 3) + " G" : std::string("n/a"))
                          << ", nu " << fixed(w.frequencies[0], 0) << " / " << fixed(w.frequencies[1], 0) << " / "
                          << fixed(w.frequencies[2], 0) << " Hz\n";
                csv.cell(static_cast<long long>(i)).cell(um(w.position.x())).cell(um(w.position.y()));
                csv.cell(um(w.position.z())).cell(G(w.Bmin));
                if (w.depth_to_saddle) {
                    csv.cell(G(*w.depth_to_saddle));
                } else {
                    csv.blank();
                }
                csv.cell(w.frequencies[0]).cell(w.frequencies[1]).cell(w.frequencies[2]).cell(cmax);
                csv.cell(ld).cell(um(fwhm));
                csv.end_row();
            }
            if (wells.empty()) throw SearchError("trap analyze: no well found");
        }
        run.finish();
    });

    auto* scan = trap->add_subcommand("scan-phase", "Wells of the conveyor over one drive period");
    struct Flags4 {
        Common cs;
        double step_deg = 15.0;
    };
    const auto flags4 = std::make_shared<Flags4>();
    auto& [cs, step_deg] = *flags4;
    add_common(*scan, cs, "fig2_conveyor");
    scan->add_option("--step-deg", step_deg, "Phase step")->capture_default_str()->check(CLI::PositiveNumber);
    scan->callback([scan, flags4] {
        auto& [cs, step_deg] = *flags4;
        Run run("trap scan-phase", cs, *scan);
        const FieldEngine engine(run.scene().chip);
        SurveyOptions so;
        so.n_phases = std::max(1, static_cast<int>(std::lround(360.0 / step_deg)));
        so.threads = run.threads();
        const ConveyorSurvey sv = survey_conveyor(engine, run.scene().drive, so);
        auto csv = run.csv("trap_scan_phase.csv", {"phase_deg", "well_index", "x_um", "y_um", "z_um", "Bmin_G",
                                                   "depth_G", "fx_Hz", "fy_Hz", "fz_Hz"});
        std::map<std::size_t, PlotSeries> by_index;
        for (std::size_t k = 0; k < sv.chains.size(); ++k) {
            const double pd = units::rad_to_deg(sv.phases[k]);
            const auto& wells = sv.chains[k].wells;
            for (std::size_t i = 0; i < wells.size(); ++i) {
                const auto& w = wells[i];
                const auto f = lab_frequencies(w);
                csv.cell(pd).cell(static_cast<long long>(i)).cell(um(w.position.x())).cell(um(w.position.y()));
                csv.cell(um(w.position.z())).cell(G(w.Bmin));
                if (w.depth_to_saddle) {
                    csv.cell(G(*w.depth_to_saddle));
                    auto& series = by_index[i];
                    series.label = "well " + std::to_string(i);
                    series.markers = true;
                    series.x.push_back(pd);
                    series.y.push_back(G(*w.depth_to_saddle));
                } else {
                    csv.blank();
                }
                csv.cell(f[0]).cell(f[1]).cell(f[2]);
                csv.end_row();
            }
        }
        std::cout << "interior wells: mean depth " << fixed(G(sv.mean_depth), 3) << " G (min "
                  << fixed(G(sv.min_depth), 3) << ", max " << fixed(G(sv.max_depth), 3) << ")\n";
        if (run.plot()) {
            LinePlot lp{"Well depth over one drive period", "phase (deg)", "depth (G)", {}};
            for (auto& [i, series] : by_index) lp.series.push_back(series);
            run.svg("trap_scan_phase.svg", render_svg(lp));
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- transport

struct TransportFlags {
    Common c;
    std::string vmax;
    long long N = 0;
    long long seed = -1;
    int seeds = 5;
    double periods = 1.0;
    double T0_uK = 0.0;
    double hold_periods = 15.0;
};

void add_transport_flags(CLI::App& sub, TransportFlags& f, const std::string& vmax_default) {
    add_common(sub, f.c, "fig2_conveyor");
    f.vmax = vmax_default;
    sub.add_option("--vmax", f.vmax, "Peak well speed(s) with unit, e.g. 0.5,2,8cm_s")->capture_default_str();
    sub.add_option("--N", f.N, "Atoms per run (0: scene value)")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub.add_option("--seed", f.seed, "First RNG seed (-1: scene value)")->capture_default_str();
    sub.add_option("--seeds", f.seeds, "Number of seeds per speed")->capture_default_str()->check(CLI::PositiveNumber);
    sub.add_option("--periods", f.periods, "Transport distance in modulation periods")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub.add_option("--T0-uK", f.T0_uK, "Initial temperature (0: scene value)")->capture_default_str();
    sub.add_option("--hold-periods", f.hold_periods, "Averaging window, periods of the slowest trap frequency")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

struct TransportSetup {
    TransportRig rig;
    TransportOptions opts;
    double T0;
    std::size_t N;
    std::uint64_t seed0;
};

TransportSetup transport_setup(Run& run, const TransportFlags& f) {
    const Scene& s = run.scene();
    const FieldEngine engine(s.chip);
    RigOptions ro;
    ro.spacing = s.sim.table_spacing;
    ro.gravity = s.sim.gravity;
    ro.threads = run.threads();
    TransportSetup t{make_transport_rig(engine, s.drive, central_seed(s), f.periods * s.chip.layout.modulation_period, ro),
                     {},
                     f.T0_uK > 0.0 ? units::uK_to_K(f.T0_uK) : s.sim.T0,
                     f.N > 0 ? static_cast<std::size_t>(f.N) : s.sim.N,
                     f.seed >= 0 ? static_cast<std::uint64_t>(f.seed) : s.sim.seed};
    t.opts.dt = s.sim.dt;
    t.opts.hold_periods = f.hold_periods;
    t.opts.threads = run.threads();
    run.set_seed(t.seed0);
    std::cout << "start well x " << fixed(um(t.rig.well.position.x()), 1) << " um, nu "
              << fixed(t.rig.nu_slowest, 0) << "-" << fixed(t.rig.nu_fastest, 0) << " Hz, distance "
              << fixed(um(t.rig.distance), 1) << " um, N " << t.N << ", T0 " << fixed(uK(t.T0), 1) << " uK\n";
    return t;
}

void transport_commands(CLI::App& app) {
    auto* transport = app.add_subcommand("transport", "Conveyor transport experiments");
    transport->require_subcommand(1);

    auto* sim = transport->add_subcommand("simulate", "Move one well at a given peak speed");
    struct Flags5 {
        TransportFlags fs;
        bool trajectory = false;
    };
    const auto flags5 = std::make_shared<Flags5>();
    auto& [fs, trajectory] = *flags5;
    add_transport_flags(*sim, fs, "0.5cm_s");
    sim->add_flag("--trajectory", trajectory, "Write the center-of-mass trajectory of the first seed");
    sim->callback([sim, flags5] {
        auto& [fs, trajectory] = *flags5;
        Run run("transport simulate", fs.c, *sim);
        const double v = parse_quantity(fs.vmax, kSpeedUnits, "--vmax");
        const TransportSetup t = transport_setup(run, fs);
        auto csv = run.csv("transport_simulate.csv", {"v_max_cm_s", "seed", "T_initial_uK", "T_final_uK",
                                                      "deltaT_uK", "survival"});
        TransportReport first;
        for (int k = 0; k < fs.seeds; ++k) {
            const auto seed = t.seed0 + static_cast<std::uint64_t>(k);
            const TransportReport r = transport_experiment(t.rig, v, t.T0, t.N, seed, t.opts);
            if (k == 0) first = r;
            csv.cell(v * 100).cell(static_cast<long long>(seed)).cell(uK(r.T_initial)).cell(uK(r.T_final));
            csv.cell(uK(r.deltaT)).cell(r.survival_fraction);
            csv.end_row();
            std::cout << "seed " << seed << ": T " << fixed(uK(r.T_initial), 3) << " -> " << fixed(uK(r.T_final), 3)
                      << " uK, dT " << fixed(uK(r.deltaT), 3) << " uK, survival " << fixed(r.survival_fraction, 3)
                      << "\n";
        }
        if (trajectory) {
            auto tc = run.csv("transport_trajectory.csv", {"t_s", "x_com_um", "z_com_um", "T_uK", "survival"});
            for (std::size_t i = 0; i < first.com_trajectory.size(); ++i) {
                const auto& [t_s, com] = first.com_trajectory[i];
                tc.cell(t_s).cell(um(com.x())).cell(um(com.z())).cell(uK(first.temperature_trace[i].second));
                tc.cell(first.survival_trace[i].second);
                tc.end_row();
            }
            if (run.plot()) {
                PlotSeries x{"center of mass", {}, {}, false};
                for (const auto& [t_s, com] : first.com_trajectory) {
                    x.x.push_back(t_s);
                    x.y.push_back(um(com.x()));
                }
                run.svg("transport_trajectory.svg", render_svg(LinePlot{"Transport", "t (s)", "x (um)", {x}}));
            }
        }
        run.finish();
    });

    auto* sweep = transport->add_subcommand("sweep", "Heating versus peak speed");
    struct Flags6 {
        TransportFlags fw;
    };
    const auto flags6 = std::make_shared<Flags6>();
    auto& [fw] = *flags6;
    add_transport_flags(*sweep, fw, "0.25,0.5,1,2,4,8cm_s");
    sweep->callback([sweep, flags6] {
        auto& [fw] = *flags6;
        Run run("transport sweep", fw.c, *sweep);
        const auto speeds = parse_quantity_list(fw.vmax, kSpeedUnits, "--vmax");
        const TransportSetup t = transport_setup(run, fw);
        auto runs = run.csv("transport_sweep_runs.csv", {"v_max_cm_s", "seed", "T_initial_uK", "T_final_uK",
                                                         "deltaT_uK", "survival"});
        auto csv = run.csv("transport_sweep.csv", {"v_max_cm_s", "deltaT_uK", "deltaT_sem_uK", "T_initial_uK",
                                                   "T_final_uK", "survival", "n_seeds"});
        PlotSeries curve{"mean dT", {}, {}, true};
        for (double v : speeds) {
            std::vector<double> dT, Ti, Tf, surv;
            for (int k = 0; k < fw.seeds; ++k) {
                const auto seed = t.seed0 + static_cast<std::uint64_t>(k);
                const TransportReport r = transport_experiment(t.rig, v, t.T0, t.N, seed, t.opts);
                runs.cell(v * 100).cell(static_cast<long long>(seed)).cell(uK(r.T_initial)).cell(uK(r.T_final));
                runs.cell(uK(r.deltaT)).cell(r.survival_fraction);
                runs.end_row();
                dT.push_back(uK(r.deltaT));
                Ti.push_back(uK(r.T_initial));
                Tf.push_back(uK(r.T_final));
                surv.push_back(r.survival_fraction);
            }
            auto mean = [](const std::vector<double>& a) {
                return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
            };
            const double m = mean(dT);
            double var = 0.0;
            for (double d : dT) var += (d - m) * (d - m);
            const double sem = dT.size() > 1 ? std::sqrt(var / static_cast<double>(dT.size() - 1) /
                                                         static_cast<double>(dT.size()))
                                             : NAN;
            csv.cell(v * 100).cell(m).cell(sem).cell(mean(Ti)).cell(mean(Tf)).cell(mean(surv));
            csv.cell(static_cast<long long>(dT.size()));
            csv.end_row();
            curve.x.push_back(v * 100);
            curve.y.push_back(m);
            std::cout << "v_max " << fixed(v * 100, 3) << " cm/s: dT " << fixed(m, 3) << " +- " << fixed(sem, 3)
                      << " uK\n";
        }
        if (run.plot()) {
            run.svg("transport_sweep.svg",
                    render_svg(LinePlot{"Transport heating", "v_max (cm/s)", "dT (uK)", {curve}}));
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- merge

void print_milestones(const MergePhaseMap& m) {
    auto deg = [](const std::optional<double>& p) {
        return p ? fixed(units::rad_to_deg(*p), 1) + " deg" : std::string("not reached");
    };
    std::cout << "milestones:\n"
              << "  separate until  " << deg(m.separate_until) << "\n"
              << "  merged at       " << deg(m.merged_at) << "\n"
              << "  compressed at   " << deg(m.compressed_at) << "\n";
}

void merge_commands(CLI::App& app) {
    auto* merge = app.add_subcommand("merge", "Trap unification");
    merge->require_subcommand(1);

    auto* map = merge->add_subcommand("map", "Minima count, barrier and milestones versus phase");
    struct Flags7 {
        Common cm;
        double step = 1.0;
    };
    const auto flags7 = std::make_shared<Flags7>();
    auto& [cm, step] = *flags7;
    add_common(*map, cm, "fig5_merge");
    map->add_option("--step-deg", step, "Phase step")->capture_default_str()->check(CLI::PositiveNumber);
    map->callback([map, flags7] {
        auto& [cm, step] = *flags7;
        Run run("merge map", cm, *map);
        const FieldEngine engine(run.scene().chip);
        MergeMapOptions mo;
        mo.threads = run.threads();
        const MergePhaseMap m = merge_phase_map(engine, run.scene().drive, phase_grid_deg(step), mo);
        auto csv = run.csv("merge_map.csv", {"phase_deg", "minima_count", "barrier_G", "x_right_um", "f1_Hz",
                                             "f2_Hz", "f3_Hz", "volume_ratio"});
        PlotSeries count{"minima count", {}, {}, false}, barrier{"barrier (G)", {}, {}, false},
            volume{"volume / initial", {}, {}, false};
        for (std::size_t i = 0; i < m.phases.size(); ++i) {
            const double pd = units::rad_to_deg(m.phases[i]);
            csv.cell(pd).cell(static_cast<long long>(m.minima_counts[i]));
            if (m.barrier_heights[i]) {
                csv.cell(G(*m.barrier_heights[i]));
            } else {
                csv.blank();
            }
            const auto& wells = m.chains[i].wells;
            const double vr = m.frequency_products[i] > 0.0 ? m.initial_frequency_product / m.frequency_products[i]
                                                            : NAN;
            if (!wells.empty()) {
                const auto& w = wells.back();
                csv.cell(um(w.position.x())).cell(w.frequencies[0]).cell(w.frequencies[1]).cell(w.frequencies[2]);
            } else {
                csv.blank().blank().blank().blank();
            }
            csv.cell(vr);
            csv.end_row();
            count.x.push_back(pd);
            count.y.push_back(m.minima_counts[i]);
            barrier.x.push_back(pd);
            barrier.y.push_back(m.barrier_heights[i] ? G(*m.barrier_heights[i]) : NAN);
            volume.x.push_back(pd);
            volume.y.push_back(vr);
        }
        print_milestones(m);
        if (run.plot()) {
            run.svg("merge_map.svg",
                    render_svg(LinePlot{"Merge region over one drive period", "phase (deg)", "", {count, barrier, volume}}));
        }
        run.finish();
    });

    auto* sim = merge->add_subcommand("simulate", "Monte Carlo trap unification");
    struct Flags8 {
        Common cs;
        std::string populate = "left_only";
        long long N = 0;
        long long seed = -1;
        double T0_uK = 0.0;
        double map_step = 10.0;
    };
    const auto flags8 = std::make_shared<Flags8>();
    auto& [cs, populate, N, seed, T0_uK, map_step] = *flags8;
    add_common(*sim, cs, "fig5_merge");
    sim->add_option("--populate", populate, "left_only or both")
        ->capture_default_str()
        ->check(CLI::IsMember({"left_only", "both"}));
    sim->add_option("--N", N, "Atoms per populated well (0: scene value)")->capture_default_str();
    sim->add_option("--seed", seed, "RNG seed (-1: scene value)")->capture_default_str();
    sim->add_option("--T0-uK", T0_uK, "Initial temperature (0: scene value)")->capture_default_str();
    sim->add_option("--map-step-deg", map_step, "Phase step of the landscape map behind the trace")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sim->callback([sim, flags8] {
        auto& [cs, populate, N, seed, T0_uK, map_step] = *flags8;
        Run run("merge simulate", cs, *sim);
        const Scene& s = run.scene();
        if (s.profile.kind != PhaseProfile::Kind::Linear || !(s.profile.omega > 0.0)) {
            throw SceneError("constraint", "merge simulate needs a linear profile with positive omega");
        }
        const FieldEngine engine(s.chip);
        MergeSimOptions mo;
        mo.cycle_duration = kTwoPi / s.profile.omega;
        mo.spacing = s.sim.table_spacing;
        mo.gravity = s.sim.gravity;
        mo.dt = s.sim.dt;
        mo.map_step_deg = map_step;
        mo.threads = run.threads();
        const std::size_t n = N > 0 ? static_cast<std::size_t>(N) : s.sim.N;
        const std::uint64_t sd = seed >= 0 ? static_cast<std::uint64_t>(seed) : s.sim.seed;
        const double T0 = T0_uK > 0.0 ? units::uK_to_K(T0_uK) : s.sim.T0;
        run.set_seed(sd);
        const MergeSimReport r = merge_simulate(engine, s.drive, populate_from_string(populate), n, T0, sd, mo);

        auto csv = run.csv("merge_simulate.csv", {"phase_deg", "minima_count", "barrier_G", "N_left", "N_right",
                                                  "T_uK", "psd"});
        for (const auto& row : r.trace) {
            csv.cell(units::rad_to_deg(row.phase)).cell(static_cast<long long>(row.minima_count));
            if (row.barrier) {
                csv.cell(G(*row.barrier));
            } else {
                csv.blank();
            }
            csv.cell(static_cast<long long>(row.N_left)).cell(static_cast<long long>(row.N_right)).cell(uK(row.T));
            if (row.psd) {
                csv.cell(*row.psd);
            } else {
                csv.blank();
            }
            csv.end_row();
        }
        auto sum = run.csv("merge_summary.csv", {"quantity", "value"});
        auto kv = [&](const std::string& k, double v) {
            sum.cell(k).cell(v);
            sum.end_row();
        };
        kv("N_before", r.before.N);
        kv("T_before_uK", uK(r.before.T));
        kv("psd_before", r.before.psd);
        kv("N_after", r.after.N);
        kv("T_after_uK", uK(r.after.T));
        kv("psd_after", r.after.psd);
        kv("psd_ratio", r.psd_ratio);
        kv("T_ratio", r.T_ratio);
        kv("survival", r.survival_fraction);
        kv("predicted_psd_ratio", r.prediction.psd_ratio);
        kv("predicted_T_final_uK", uK(r.prediction.T_final));
        kv("cloud_depth_G", G(r.cloud_depth));
        kv("separate_until_deg", r.map.separate_until ? units::rad_to_deg(*r.map.separate_until) : NAN);
        kv("merged_at_deg", r.map.merged_at ? units::rad_to_deg(*r.map.merged_at) : NAN);
        kv("compressed_at_deg", r.map.compressed_at ? units::rad_to_deg(*r.map.compressed_at) : NAN);

        std::cout << "populate " << to_string(r.populate) << ", N " << n << " per well, T0 " << fixed(uK(T0), 1)
                  << " uK\n"
                  << "  before: N " << r.before.N << ", T " << fixed(uK(r.before.T), 2) << " uK, psd "
                  << r.before.psd << "\n"
                  << "  after:  N " << r.after.N << ", T " << fixed(uK(r.after.T), 2) << " uK, psd " << r.after.psd
                  << "\n"
                  << "  psd ratio " << fixed(r.psd_ratio, 3) << " (closed form " << fixed(r.prediction.psd_ratio, 3)
                  << "), T ratio " << fixed(r.T_ratio, 3) << ", survival " << fixed(r.survival_fraction, 3) << "\n";
        print_milestones(r.map);
        if (run.plot()) {
            PlotSeries nl{"N left", {}, {}, false}, nr{"N right", {}, {}, false};
            for (const auto& row : r.trace) {
                nl.x.push_back(units::rad_to_deg(row.phase));
                nl.y.push_back(static_cast<double>(row.N_left));
                nr.x.push_back(units::rad_to_deg(row.phase));
                nr.y.push_back(static_cast<double>(row.N_right));
            }
            run.svg("merge_simulate.svg", render_svg(LinePlot{"Populations during the merge", "phase (deg)",
                                                              "atoms", {nl, nr}}));
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- calibrate

void calibrate_commands(CLI::App& app) {
    auto* cal = app.add_subcommand("calibrate", "Calibrations of open layout parameters");
    cal->require_subcommand(1);
    auto* period = cal->add_subcommand("period", "Fit the modulation period to a mean well depth");
    struct Flags9 {
        Common c;
        std::string target = "2.5G";
        std::string lo = "300um";
        std::string hi = "600um";
        double tol_um = 0.5;
    };
    const auto flags9 = std::make_shared<Flags9>();
    auto& [c, target, lo, hi, tol_um] = *flags9;
    add_common(*period, c, "fig2_conveyor");
    period->add_option("--target", target, "Mean interior well depth")->capture_default_str();
    period->add_option("--min", lo, "Lower end of the period bracket")->capture_default_str();
    period->add_option("--max", hi, "Upper end of the period bracket")->capture_default_str();
    period->add_option("--tol-um", tol_um, "Bracket width to stop at")->capture_default_str()->check(CLI::PositiveNumber);
    period->callback([period, flags9] {
        auto& [c, target, lo, hi, tol_um] = *flags9;
        Run run("calibrate period", c, *period);
        const Scene& s = run.scene();
        if (!s.layout_params) throw SceneError("constraint", "calibrate period needs the conveyor layout preset");
        CalibrationOptions co;
        co.target_depth = parse_quantity(target, kFieldUnits, "--target");
        co.period_min = parse_quantity(lo, kLengthUnits, "--min");
        co.period_max = parse_quantity(hi, kLengthUnits, "--max");
        co.tolerance = units::um_to_m(tol_um);
        co.survey.threads = run.threads();
        const CalibrationResult r = calibrate_period(s.chip, *s.layout_params, s.drive, co);
        auto csv = run.csv("calibrate_period.csv", {"period_um", "mean_depth_G"});
        PlotSeries pts{"evaluations", {}, {}, true};
        for (const auto& [p, d] : r.history) {
            csv.cell(um(p)).cell(G(d));
            csv.end_row();
            pts.x.push_back(um(p));
            pts.y.push_back(G(d));
        }
        std::cout << "modulation period " << fixed(um(r.period), 2) << " um gives mean depth "
                  << fixed(G(r.mean_depth), 3) << " G after " << r.iterations << " evaluations\n";
        if (run.plot()) {
            run.svg("calibrate_period.svg",
                    render_svg(LinePlot{"Period calibration", "modulation period (um)", "mean depth (G)", {pts}}));
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- waveform

void waveform_commands(CLI::App& app) {
    auto* wf = app.add_subcommand("waveform", "Drive waveforms");
    wf->require_subcommand(1);
    auto* exp = wf->add_subcommand("export", "Tabulate phase and channel currents over the profile");
    struct Flags10 {
        Common c;
        double dt = 0.0;
    };
    const auto flags10 = std::make_shared<Flags10>();
    auto& [c, dt] = *flags10;
    add_common(*exp, c, "fig2_conveyor");
    exp->add_option("--dt-s", dt, "Time step (0: duration / 1000)")->capture_default_str()->check(CLI::NonNegativeNumber);
    exp->callback([exp, flags10] {
        auto& [c, dt] = *flags10;
        Run run("waveform export", c, *exp);
        const Scene& s = run.scene();
        const double duration = s.profile.kind == PhaseProfile::Kind::Piecewise ? s.profile.knots.back().first
                                                                                 : s.profile.duration;
        const double step = dt > 0.0 ? dt : duration / 1000.0;
        const auto n = static_cast<long long>(std::floor(duration / step + 1e-9));
        auto csv = run.csv("waveform.csv", {"t_s", "phase_rad", "I0_A", "IM1_A", "IM2_A", "IH2_A"});
        PlotSeries m1{"I_M1", {}, {}, false}, m2{"I_M2", {}, {}, false}, h2{"I_H2", {}, {}, false};
        for (long long i = 0; i <= n; ++i) {
            const double t = std::min(duration, static_cast<double>(i) * step);
            const double ph = phase_held(s.profile, t);
            const CurrentSet cur = s.drive.currents(ph);
            csv.row({t, ph, cur.I0, cur.IM1, cur.IM2, cur.IH2});
            m1.x.push_back(t);
            m1.y.push_back(cur.IM1);
            m2.x.push_back(t);
            m2.y.push_back(cur.IM2);
            h2.x.push_back(t);
            h2.y.push_back(cur.IH2);
        }
        if (run.plot()) {
            run.svg("waveform.svg", render_svg(LinePlot{"Drive currents", "t (s)", "current (A)", {m1, m2, h2}}));
        }
        run.finish();
    });
}

// ---------------------------------------------------------------- plot

void plot_command(CLI::App& app) {
    auto* plot = app.add_subcommand("plot", "SVG line plot of columns of a CSV file");
    struct Flags11 {
        std::string input;
        std::string x;
        std::string ys;
        std::string output;
        std::string title;
    };
    const auto flags11 = std::make_shared<Flags11>();
    auto& [input, x, ys, output, title] = *flags11;
    plot->add_option("--csv", input, "Input CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--x", x, "Column for the x axis")->required();
    plot->add_option("--y", ys, "Comma-separated columns to plot")->required();
    plot->add_option("--output", output, "SVG file to write")->required();
    plot->add_option("--title", title, "Plot title");
    plot->callback([plot, flags11] {
        auto& [input, x, ys, output, title] = *flags11;
        std::ifstream in(input);
        std::string line, manifest_ref;
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line[0] == '#') {
                if (line.rfind("# manifest: ", 0) == 0) manifest_ref = line.substr(12);
                continue;
            }
            if (header.empty()) {
                header = split(line, ',');
            } else {
                rows.push_back(split(line, ','));
            }
        }
        auto column = [&](const std::string& name) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw CLI::ValidationError("plot", "no column '" + name + "' in " + input);
            return static_cast<std::size_t>(it - header.begin());
        };
        auto value = [](const std::vector<std::string>& row, std::size_t i) {
            if (i >= row.size() || row[i].empty()) return static_cast<double>(NAN);
            try {
                return std::stod(row[i]);
            } catch (const std::exception&) {
                return static_cast<double>(NAN);
            }
        };
        const std::size_t xi = column(x);
        LinePlot lp{title.empty() ? input : title, x, split(ys, ',').size() == 1 ? ys : "", {}};
        for (const auto& y : split(ys, ',')) {
            const std::size_t yi = column(y);
            PlotSeries sr{y, {}, {}, rows.size() <= 40};
            for (const auto& row : rows) {
                sr.x.push_back(value(row, xi));
                sr.y.push_back(value(row, yi));
            }
            lp.series.push_back(std::move(sr));
        }
        const std::filesystem::path out(output);
        RunManifest m = bare_manifest("plot", *plot);
        m.parameters["source_manifest"] = manifest_ref;
        m.outputs.push_back(out.filename().string());
        std::string doc = render_svg(lp);
        doc.insert(doc.find('\n') + 1, "<!-- manifest: " + m.name + " -->\n");
        write_text(out, doc);
        m.finished_utc = utc_now();
        m.write(out.has_parent_path() ? out.parent_path() : std::filesystem::path("."));
        std::cout << "wrote " << out.string() << "\n";
    });
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Magnetic conveyor belt simulations on an atom chip", "atomchip"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough(false);
    scene_commands(app);
    field_commands(app);
    trap_commands(app);
    transport_commands(app);
    merge_commands(app);
    calibrate_commands(app);
    waveform_commands(app);
    plot_command(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);  // --help, --version
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    } catch (const SceneError& e) {
        std::cerr << "scene error: " << e.detail() << " [" << e.kind() << "]\n";
        return kSceneError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPhysicsError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPhysicsError;
    }
    return kOk;
}

}  // namespace atomchip::cli
