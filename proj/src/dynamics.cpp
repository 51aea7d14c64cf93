#include "atomchip/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "atomchip/errors.hpp"
#include "atomchip/parallel.hpp"

namespace atomchip {

std::size_t Ensemble::survivors() const {
    return static_cast<std::size_t>(std::count(lost.begin(), lost.end(), std::uint8_t{0}));
}

Vec3 Ensemble::center_of_mass() const {
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        if (lost[i]) continue;
        sum += positions[i];
        ++n;
    }
    return n ? Vec3(sum / static_cast<double>(n)) : Vec3(Vec3::Zero());
}

Vec3 DynamicsModel::force(double phase, const Vec3& p) const {
    const double h = fd_step();
    Vec3 f;
    for (int a = 0; a < 3; ++a) {
        Vec3 lo = p, hi = p;
        lo[a] -= h;
        hi[a] += h;
        f[a] = -(energy(phase, hi) - energy(phase, lo)) / (2.0 * h);
    }
    return f;
}

double EngineModel::energy(double phase, const Vec3& p) const {
    return engine_->potential(drive_.currents(phase), p);
}

double TableModel::energy(double phase, const Vec3& p) const {
    const CurrentSet c = drive_.currents(phase);
    const Vec3 B = table_->field_only(c.IM1, c.IM2, c.IH2, p);
    double u = atom_.moment() * B.norm();
    if (gravity_) u -= atom_.mass * PhysicalConstants::g_earth * p.z();
    return u;
}

Vec3 TableModel::force(double phase, const Vec3& p) const {
    const CurrentSet c = drive_.currents(phase);
    const FieldGradient fg = table_->field(c.IM1, c.IM2, c.IH2, p);
    const double b = fg.B.norm();
    if (!(b > 0.0)) throw SingularityError("field zero: force undefined");
    Vec3 f = -atom_.moment() * (fg.J.transpose() * fg.B) / b;
    if (gravity_) f.z() += atom_.mass * PhysicalConstants::g_earth;
    return f;
}

Vec3 FunctionModel::force(double phase, const Vec3& p) const {
    if (force_) return force_(phase, p);
    return DynamicsModel::force(phase, p);
}

Vec3 force(const Landscape& landscape, const Vec3& point) {
    return -gradient_of_potential(landscape, point, landscape.fd_step());
}

Ensemble sample_thermal(const DynamicsModel& model, double phase, const TrapCharacterization& well, double T,
                        std::size_t N, std::uint64_t seed, const SamplingOptions& opts) {
    if (!(T > 0.0)) throw DomainError("sample_thermal: temperature must be positive");
    if (N < 1) throw DomainError("sample_thermal: need at least one atom");
    if (opts.chains < 1 || opts.thinning < 1 || opts.burn_in < 0) throw ConfigError("sample_thermal: bad chain settings");

    const double kT = PhysicalConstants::kB * T;
    const double m = model.mass();
    // Proposal axes follow the well's principal axes, widths its thermal radii.
    Vec3 sigma;
    for (int a = 0; a < 3; ++a) {
        const double w = kTwoPi * well.frequencies[static_cast<std::size_t>(a)];
        sigma[a] = w > 0.0 ? opts.step_scale * std::sqrt(kT / m) / w : 1e-6;
    }
    const Mat3 axes = well.hessian_eigvecs;
    const double x_lo = opts.x_min.value_or(well.basin_x_min.value_or(-1e300));
    const double x_hi = opts.x_max.value_or(well.basin_x_max.value_or(1e300));
    double cap = 1e300;
    if (opts.energy_cap) cap = *opts.energy_cap;
    else if (well.depth_to_saddle) cap = well.energy + *well.depth_to_saddle * model.moment();

    auto admissible_energy = [&](const Vec3& p, double& u) {
        if (p.x() < x_lo || p.x() > x_hi) return false;
        try {
            u = model.energy(phase, p);
        } catch (const SingularityError&) {
            return false;
        }
        return std::isfinite(u) && u < cap;
    };

    Ensemble ens;
    ens.positions.resize(N);
    ens.velocities.resize(N);
    ens.lost.assign(N, 0);
    ens.seed = seed;
    ens.atom.mass = m;
    ens.atom.gf_mf = model.moment() / PhysicalConstants::muB;

    const auto chains = static_cast<std::size_t>(opts.chains);
    std::vector<std::size_t> accepted(chains, 0), proposed(chains, 0);
    parallel_for(chains, [&](std::size_t c) {
        const std::size_t lo = N * c / chains, hi = N * (c + 1) / chains;
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(c)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        Vec3 x = well.position;
        double u = 0.0;
        if (!admissible_energy(x, u)) throw SamplingError("sample_thermal: well center outside the sampling region");
        auto step = [&] {
            const Vec3 z(gauss(rng), gauss(rng), gauss(rng));
            const Vec3 y = x + axes * sigma.cwiseProduct(z);
            double uy = 0.0;
            ++proposed[c];
            if (!admissible_energy(y, uy)) return;
            if (uy <= u || unif(rng) < std::exp(-(uy - u) / kT)) {
                x = y;
                u = uy;
                ++accepted[c];
            }
        };
        for (int k = 0; k < opts.burn_in; ++k) step();
        const double sv = std::sqrt(kT / m);
        for (std::size_t i = lo; i < hi; ++i) {
            for (int attempt = 0;; ++attempt) {
                if (attempt == 100000) throw SamplingError("sample_thermal: total energy cap rejects every draw");
                for (int k = 0; k < opts.thinning; ++k) step();
                const Vec3 v = sv * Vec3(gauss(rng), gauss(rng), gauss(rng));
                if (opts.total_energy_cap && u + 0.5 * m * v.squaredNorm() >= *opts.total_energy_cap) continue;
                ens.positions[i] = x;
                ens.velocities[i] = v;
                break;
            }
        }
    }, opts.threads);

    std::size_t acc = 0, tot = 0;
    for (std::size_t c = 0; c < chains; ++c) {
        acc += accepted[c];
        tot += proposed[c];
    }
    const double rate = tot ? static_cast<double>(acc) / static_cast<double>(tot) : 0.0;
    if (rate < 0.01) {
        std::ostringstream os;
        os << "sample_thermal: acceptance rate " << rate << " below 1% (temperature does not fit the well)";
        throw SamplingError(os.str());
    }
    return ens;
}

void integrate(Ensemble& ens, const DynamicsModel& model, const PhaseProfile& profile, double t_end,
               const IntegrateOptions& opts) {
    if (!(opts.dt > 0.0)) throw ConfigError("integrate: dt must be positive");
    if (opts.nu_max > 0.0 && opts.dt > 1.0 / (20.0 * opts.nu_max) * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "integrate: dt = " << opts.dt << " s exceeds 1/(20 nu_max) = " << 1.0 / (20.0 * opts.nu_max) << " s";
        throw ConfigError(os.str());
    }
    if (!(t_end > ens.time)) throw ConfigError("integrate: t_end must be after the ensemble time");
    profile.validate();

    const double t0 = ens.time;
    const auto n_steps = static_cast<long long>(std::ceil((t_end - t0) / opts.dt - 1e-9));
    const double dt = (t_end - t0) / static_cast<double>(n_steps);
    const double m = model.mass();
    auto phase_of = [&](double t) { return opts.phase_offset + phase_held(profile, t - opts.profile_start); };

    Snapshots* snaps = opts.snapshot_every > 0 ? opts.snapshots : nullptr;
    std::size_t snap_base = 0;
    if (snaps) {
        const auto count = static_cast<std::size_t>(n_steps / opts.snapshot_every);
        snap_base = snaps->times.size();
        for (std::size_t s = 0; s < count; ++s) {
            const auto k = static_cast<long long>(s + 1) * opts.snapshot_every;
            snaps->times.push_back(t0 + static_cast<double>(k) * dt);
            snaps->positions.emplace_back(ens.size());
            snaps->velocities.emplace_back(ens.size());
            snaps->lost.emplace_back(ens.size(), std::uint8_t{1});
        }
    }

    parallel_for(ens.size(), [&](std::size_t i) {
        Vec3 x = ens.positions[i];
        Vec3 v = ens.velocities[i];
        bool lost = ens.lost[i] != 0;
        Vec3 a = Vec3::Zero();
        auto accel = [&](double t) {
            if (opts.domain && !opts.domain->contains(x)) return false;
            try {
                a = model.force(phase_of(t), x) / m;
            } catch (const SingularityError&) {
                return false;
            }
            return a.allFinite();
        };
        if (!lost && !accel(t0)) lost = true;
        Vec3 x_keep = x, v_keep = v;
        for (long long k = 1; k <= n_steps; ++k) {
            if (!lost) {
                v += 0.5 * dt * a;
                x += dt * v;
                if (!accel(t0 + static_cast<double>(k) * dt)) {
                    lost = true;
                    x = x_keep;
                    v = v_keep;
                } else {
                    v += 0.5 * dt * a;
                    x_keep = x;
                    v_keep = v;
                }
            }
            if (snaps && k % opts.snapshot_every == 0) {
                const std::size_t s = snap_base + static_cast<std::size_t>(k / opts.snapshot_every) - 1;
                snaps->positions[s][i] = x;
                snaps->velocities[s][i] = v;
                snaps->lost[s][i] = lost ? 1 : 0;
            }
        }
        ens.positions[i] = x;
        ens.velocities[i] = v;
        ens.lost[i] = lost ? 1 : 0;
    }, opts.threads);
    ens.time = t_end;
}

namespace {

std::vector<Vec3> relative_velocities(const Ensemble& e, const Vec3& frame, bool remove_com,
                                      const std::vector<std::uint8_t>* include) {
    std::vector<Vec3> w;
    w.reserve(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e.lost[i] || (include && !(*include)[i])) continue;
        w.push_back(e.velocities[i] - frame);
    }
    if (w.size() < 2) throw StatisticsError("temperature: fewer than 2 surviving atoms");
    if (remove_com) {
        Vec3 mean = Vec3::Zero();
        for (const auto& x : w) mean += x;
        mean /= static_cast<double>(w.size());
        for (auto& x : w) x -= mean;
    }
    return w;
}

}  // namespace

double temperature(const Ensemble& e, const Vec3& frame, bool remove_com, const std::vector<std::uint8_t>* include) {
    const auto w = relative_velocities(e, frame, remove_com, include);
    double s = 0.0;
    for (const auto& x : w) s += x.squaredNorm();
    return e.atom.mass * s / (3.0 * PhysicalConstants::kB * static_cast<double>(w.size()));
}

std::array<double, 3> axis_temperatures(const Ensemble& e, const Mat3& axes, bool remove_com,
                                        const std::vector<std::uint8_t>* include) {
    const auto w = relative_velocities(e, Vec3::Zero(), remove_com, include);
    std::array<double, 3> t{};
    for (int a = 0; a < 3; ++a) {
        double s = 0.0;
        for (const auto& x : w) {
            const double p = x.dot(axes.col(a));
            s += p * p;
        }
        t[static_cast<std::size_t>(a)] = e.atom.mass * s / (PhysicalConstants::kB * static_cast<double>(w.size()));
    }
    return t;
}

double mean_flux(double atoms_per_well, const PhaseProfile& profile) {
    if (profile.kind != PhaseProfile::Kind::Linear) throw DomainError("mean_flux: needs a steady linear drive");
    if (!(atoms_per_well >= 0.0)) throw DomainError("mean_flux: negative atom number");
    profile.validate();
    return atoms_per_well * profile.omega / kTwoPi;
}

TransportRig make_transport_rig(const FieldEngine& engine, const DriveConfig& drive, const Vec3& seed,
                                double distance, const RigOptions& opts) {
    if (!(distance >= 0.0)) throw DomainError("transport rig: distance must be non-negative");
    TransportRig rig;
    rig.drive = drive;
    rig.distance = distance;
    rig.modulation_period = engine.scene().layout.modulation_period;
    const double P = rig.modulation_period;

    const int n = std::max(2, opts.track_points);
    const double total = kTwoPi * distance / P;
    std::vector<double> phases;
    for (int i = 0; i < n; ++i) phases.push_back(total * i / (n - 1));
    if (total == 0.0) phases.assign(1, 0.0);
    const auto track = track_well(engine, drive, phases, seed);

    Vec3 lo = track.front().trap.position, hi = lo;
    rig.nu_fastest = 0.0;
    rig.nu_slowest = 1e300;
    for (const auto& t : track) {
        lo = lo.cwiseMin(t.trap.position);
        hi = hi.cwiseMax(t.trap.position);
        rig.nu_fastest = std::max(rig.nu_fastest, t.trap.frequencies[2]);
        rig.nu_slowest = std::min(rig.nu_slowest, t.trap.frequencies[0]);
    }
    const double wt = opts.transverse_half_width;
    Box box;
    box.lo = Vec3(lo.x() - 0.75 * P, lo.y() - wt, lo.z() - wt);
    box.hi = Vec3(hi.x() + 0.75 * P, hi.y() + wt, hi.z() + wt);
    rig.domain = box;
    rig.table = std::make_shared<const FieldTable>(engine, drive, box, opts.spacing, opts.threads);
    rig.model = std::make_shared<const TableModel>(rig.table, drive, engine.atom(), opts.gravity);

    // Basin and depth of the start well in the tabulated potential.
    const PhaseLandscape l0(*rig.model, 0.0);
    const Vec3 p0 = track.front().trap.position;
    WellChainOptions wc;
    wc.line.y_seed = p0.y();
    wc.line.z_seed = p0.z();
    const auto chain = well_chain(l0, p0.x() - 0.7 * P, p0.x() + 0.7 * P, wc);
    if (chain.wells.empty()) throw SearchError("transport rig: start well not found in the field table");
    const auto nearest = std::min_element(chain.wells.begin(), chain.wells.end(), [&](const auto& a, const auto& b) {
        return std::abs(a.position.x() - p0.x()) < std::abs(b.position.x() - p0.x());
    });
    rig.well = *nearest;

    // The cloud must stay bound at every phase, so the lowest saddle along the
    // track sets the energy ceiling.
    rig.saddle_energy = 1e300;
    for (const auto& t : track) {
        const PhaseLandscape l(*rig.model, t.phase);
        const Vec3 p = t.trap.position;
        WellChainOptions o = wc;
        o.line.y_seed = p.y();
        o.line.z_seed = p.z();
        const auto c = well_chain(l, p.x() - 0.7 * P, p.x() + 0.7 * P, o);
        for (const auto& w : c.wells) {
            if (std::abs(w.position.x() - p.x()) < 0.25 * P && w.depth_to_saddle) {
                rig.saddle_energy = std::min(rig.saddle_energy, w.energy + *w.depth_to_saddle * l.moment());
            }
        }
    }
    if (rig.saddle_energy == 1e300) throw SearchError("transport rig: no saddle found along the track");
    return rig;
}

namespace {

double mean_temperature(const Ensemble& like, const Snapshots& s, std::size_t first,
                        const std::vector<std::uint8_t>* include) {
    Ensemble e;
    e.atom = like.atom;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = first; k < s.times.size(); ++k) {
        e.positions = s.positions[k];
        e.velocities = s.velocities[k];
        e.lost = s.lost[k];
        sum += temperature(e, Vec3::Zero(), true, include);
        ++n;
    }
    if (n == 0) throw StatisticsError("transport: no snapshots in the averaging window");
    return sum / static_cast<double>(n);
}

}  // namespace

TransportReport transport_experiment(const TransportRig& rig, double v_max, double T0, std::size_t N,
                                     std::uint64_t seed, const TransportOptions& opts) {
    if (!(v_max >= 0.0)) throw DomainError("transport: v_max must be non-negative");
    if (!rig.model) throw ConfigError("transport: rig is not initialized");
    const DynamicsModel& model = *rig.model;

    TransportReport rep;
    rep.v_max = v_max;
    SamplingOptions so = opts.sampling;
    if (!so.total_energy_cap) so.total_energy_cap = rig.saddle_energy;
    Ensemble ens = sample_thermal(model, 0.0, rig.well, T0, N, seed, so);

    const double dt = opts.dt > 0.0 ? opts.dt : 1.0 / (40.0 * rig.nu_fastest);
    const double hold = opts.hold_periods / rig.nu_slowest;
    const int every = std::max(1, static_cast<int>(std::lround(hold / dt / std::max(1, opts.snapshots_per_hold))));

    IntegrateOptions io;
    io.dt = dt;
    io.nu_max = rig.nu_fastest;
    io.domain = rig.domain;
    io.snapshot_every = every;
    io.threads = opts.threads;

    Snapshots before, during, after;
    const PhaseProfile still = PhaseProfile::linear(0.0, hold);
    io.snapshots = &before;
    integrate(ens, model, still, ens.time + hold, io);

    const bool moving = v_max > 0.0 && rig.distance > 0.0;
    const PhaseProfile move = moving ? transport_profile(rig.distance, v_max, rig.modulation_period)
                                     : PhaseProfile::linear(0.0, 2.0 * hold);
    io.snapshots = &during;
    io.profile_start = ens.time;
    integrate(ens, model, move, ens.time + move.duration, io);
    const double final_phase = moving ? move.total_phase : 0.0;
    const double x_dest = rig.well.position.x() + (moving ? rig.distance : 0.0);

    io.snapshots = &after;
    io.profile_start = ens.time;
    io.phase_offset = final_phase;
    integrate(ens, model, still, ens.time + hold, io);

    std::vector<std::uint8_t> inside(ens.size(), 0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
        if (!ens.lost[i] && std::abs(ens.positions[i].x() - x_dest) < 0.5 * rig.modulation_period) {
            inside[i] = 1;
            ++kept;
        }
    }
    rep.survival_fraction = static_cast<double>(kept) / static_cast<double>(ens.size());
    // Both temperatures are taken over the atoms that arrive. Atoms spilling
    // from the rim are the hottest, and counting them only before the move
    // would read their loss as cooling.
    rep.T_initial = mean_temperature(ens, before, 0, &inside);
    rep.T_initial_all = mean_temperature(ens, before, 0, nullptr);
    rep.T_final = mean_temperature(ens, after, 0, &inside);
    rep.deltaT = rep.T_final - rep.T_initial;

    for (const Snapshots* s : {&before, &during, &after}) {
        for (std::size_t k = 0; k < s->times.size(); ++k) {
            Ensemble e;
            e.atom = ens.atom;
            e.positions = s->positions[k];
            e.velocities = s->velocities[k];
            e.lost = s->lost[k];
            rep.com_trajectory.emplace_back(s->times[k], e.center_of_mass());
            rep.temperature_trace.emplace_back(s->times[k], e.survivors() >= 2 ? temperature(e) : 0.0);
            rep.survival_trace.emplace_back(s->times[k],
                                            static_cast<double>(e.survivors()) / static_cast<double>(e.size()));
        }
    }
    return rep;
}

}  // namespace atomchip
