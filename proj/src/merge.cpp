#include "atomchip/merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "atomchip/calibration.hpp"
#include "atomchip/errors.hpp"
#include "atomchip/parallel.hpp"

namespace atomchip {

MergeRegion MergeRegion::of(const ChipLayout& layout) {
    const auto xs = layout.m1_well_crossings();
    if (xs.empty()) throw DomainError("merge region: layout has no well-forming M1 wire");
    MergeRegion r;
    r.x_conveyor = xs.back();
    const auto& path = layout.h2().path;
    r.x_h2 = 0.5 * (path.front().start.x() + path.front().end.x());
    r.period = layout.modulation_period;
    return r;
}

double MergeRegion::left(double phase) const { return x_conveyor - 0.5 * period + period * phase / kTwoPi; }

double MergeRegion::right() const { return x_h2 + 0.75 * period; }

std::vector<double> phase_grid_deg(double step_deg, double end_deg) {
    if (!(step_deg > 0.0)) throw DomainError("phase grid: step must be positive");
    std::vector<double> out;
    const auto n = static_cast<int>(std::ceil(end_deg / step_deg - 1e-9));
    for (int i = 0; i < n; ++i) out.push_back(units::deg_to_rad(i * step_deg));
    return out;
}

namespace {

double frequency_product(const TrapCharacterization& w) {
    return w.frequencies[0] * w.frequencies[1] * w.frequencies[2];
}

std::optional<double> barrier_of(const WellChain& c, double moment) {
    if (c.wells.size() != 2) return std::nullopt;
    const double xa = c.wells[0].position.x(), xb = c.wells[1].position.x();
    for (const auto& s : c.saddles) {
        if (s.x > xa && s.x < xb) return (s.energy - std::max(c.wells[0].energy, c.wells[1].energy)) / moment;
    }
    return std::nullopt;
}

WellChain chain_at(const FieldEngine& engine, const DriveConfig& drive, const MergeRegion& region, double phase,
                   const WellChainOptions& opts) {
    const SceneLandscape l(engine, drive.currents(phase));
    try {
        return well_chain(l, region.left(phase), region.right(), opts);
    } catch (const Error& e) {
        std::ostringstream os;
        os << "merge map at phase " << units::rad_to_deg(phase) << " deg: " << e.what();
        throw SearchError(os.str());
    }
}

}  // namespace

MergePhaseMap merge_phase_map(const FieldEngine& engine, const DriveConfig& drive, const std::vector<double>& phases,
                              const MergeMapOptions& opts) {
    if (!drive.h2_enabled) throw DomainError("merge map: the H2 channel must be enabled");
    if (phases.empty()) throw DomainError("merge map: empty phase grid");
    if (!std::is_sorted(phases.begin(), phases.end())) throw DomainError("merge map: phases must be sorted");
    const MergeRegion region = MergeRegion::of(engine.scene().layout);
    const double moment = engine.atom().moment();

    MergePhaseMap map;
    map.phases = phases;
    map.chains.resize(phases.size());
    parallel_for(phases.size(), [&](std::size_t i) {
        map.chains[i] = chain_at(engine, drive, region, phases[i], opts.chain);
    }, opts.threads);

    const WellChain first = phases.front() == 0.0 ? map.chains.front() : chain_at(engine, drive, region, 0.0, opts.chain);
    if (first.wells.empty()) throw SearchError("merge map: no stationary well at phase 0");
    map.initial_frequency_product = frequency_product(first.wells.back());

    for (const auto& c : map.chains) {
        map.minima_counts.push_back(static_cast<int>(c.wells.size()));
        map.barrier_heights.push_back(barrier_of(c, moment));
        map.frequency_products.push_back(c.wells.empty() ? 0.0 : frequency_product(c.wells.back()));
    }

    std::size_t merged = phases.size();
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (map.minima_counts[i] == 1) {
            merged = i;
            break;
        }
    }
    if (merged < phases.size()) {
        map.merged_at = phases[merged];
        for (std::size_t i = merged; i-- > 0;) {
            if (map.minima_counts[i] == 2) {
                map.separate_until = phases[i];
                break;
            }
        }
        const double target = map.initial_frequency_product / (1.0 + opts.volume_tolerance);
        // Compression starts where the merged well is loosest; before that
        // the product can brush the target while the well is still moving.
        std::size_t loosest = merged;
        for (std::size_t i = merged; i < phases.size() && map.minima_counts[i] == 1; ++i) {
            if (map.frequency_products[i] < map.frequency_products[loosest]) loosest = i;
        }
        for (std::size_t i = loosest; i < phases.size(); ++i) {
            if (map.minima_counts[i] == 1 && map.frequency_products[i] >= target) {
                map.compressed_at = phases[i];
                break;
            }
        }
    }
    return map;
}

const char* to_string(PsdMethod m) { return m == PsdMethod::ClosedForm ? "closed_form" : "ensemble"; }

namespace {

double geometric_mean(const std::array<double, 3>& v) { return std::cbrt(v[0] * v[1] * v[2]); }

void check_frequencies(const std::array<double, 3>& f, const char* who) {
    for (double x : f) {
        if (!(x > 0.0)) throw DomainError(std::string(who) + ": frequencies must be positive");
    }
}

}  // namespace

PsdReport psd_closed_form(double N, double T, const std::array<double, 3>& frequencies) {
    if (!(N > 0.0)) throw DomainError("psd_closed_form: N must be positive");
    if (!(T > 0.0)) throw DomainError("psd_closed_form: T must be positive");
    check_frequencies(frequencies, "psd_closed_form");
    PsdReport r;
    r.N = N;
    r.T = T;
    r.frequencies = frequencies;
    r.mean_frequency = geometric_mean(frequencies);
    const double x = PhysicalConstants::hbar * kTwoPi * r.mean_frequency / (PhysicalConstants::kB * T);
    r.psd = N * x * x * x;
    r.method = PsdMethod::ClosedForm;
    return r;
}

PsdReport psd_from_temperatures(double N, const std::array<double, 3>& axis_T, const std::array<double, 3>& freqs) {
    if (!(N > 0.0)) throw DomainError("psd: N must be positive");
    check_frequencies(freqs, "psd");
    PsdReport r;
    r.N = N;
    r.T = geometric_mean(axis_T);
    r.frequencies = freqs;
    r.mean_frequency = geometric_mean(freqs);
    double p = N;
    for (int a = 0; a < 3; ++a) {
        const auto i = static_cast<std::size_t>(a);
        if (!(axis_T[i] > 0.0)) throw DomainError("psd: axis temperatures must be positive");
        p *= PhysicalConstants::hbar * kTwoPi * freqs[i] / (PhysicalConstants::kB * axis_T[i]);
    }
    r.psd = p;
    r.method = PsdMethod::Ensemble;
    return r;
}

PsdReport psd_from_ensemble(const Ensemble& e, const TrapCharacterization& well, const std::vector<std::uint8_t>* include) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!e.lost[i] && (!include || (*include)[i])) ++n;
    }
    const auto T = axis_temperatures(e, well.hessian_eigvecs, true, include);
    return psd_from_temperatures(static_cast<double>(n), T, well.frequencies);
}

SeptumResult septum_prediction(double N1, double T1, double N2, double T2, const std::array<double, 3>& f1,
                               const std::array<double, 3>& f2, const std::array<double, 3>& ff,
                               bool expand_into_empty) {
    if (!(N1 >= 0.0) || !(N2 >= 0.0)) throw DomainError("septum: populations must be non-negative");
    if (!(N1 + N2 > 0.0)) throw DomainError("septum: both populations are zero");
    if ((N1 > 0.0 && !(T1 > 0.0)) || (N2 > 0.0 && !(T2 > 0.0))) {
        throw DomainError("septum: populated traps need a positive temperature");
    }
    check_frequencies(f1, "septum");
    check_frequencies(f2, "septum");
    check_frequencies(ff, "septum");
    const double kB = PhysicalConstants::kB, hbar = PhysicalConstants::hbar;
    // single-particle phase-space volume (kT / hbar w)^3 of a harmonic trap
    auto Z = [&](double T, const std::array<double, 3>& f) {
        const double x = kB * T / (hbar * kTwoPi * geometric_mean(f));
        return x * x * x;
    };
    const double N = N1 + N2;
    const double Tm = (N1 * T1 + N2 * T2) / N;
    double volume = 0.0;
    if (N1 > 0.0 || expand_into_empty) volume += Z(Tm, f1);
    if (N2 > 0.0 || expand_into_empty) volume += Z(Tm, f2);

    SeptumResult r;
    r.psd_final = N / volume;
    double init = 0.0;
    if (N1 > 0.0) init += N1 * (N1 / Z(T1, f1));
    if (N2 > 0.0) init += N2 * (N2 / Z(T2, f2));
    r.psd_initial = init / N;
    r.psd_ratio = r.psd_final / r.psd_initial;
    r.T_final = hbar * kTwoPi * geometric_mean(ff) * std::cbrt(volume) / kB;
    return r;
}

SeptumResult septum_prediction(double N1, double T1, double N2, double T2, const std::array<double, 3>& fi,
                               const std::array<double, 3>& ff, bool expand_into_empty) {
    return septum_prediction(N1, T1, N2, T2, fi, fi, ff, expand_into_empty);
}

const char* to_string(Populate p) { return p == Populate::LeftOnly ? "left_only" : "both"; }

Populate populate_from_string(const std::string& s) {
    if (s == "left_only" || s == "left") return Populate::LeftOnly;
    if (s == "both") return Populate::Both;
    throw DomainError("populate must be left_only or both, got '" + s + "'");
}

namespace {

/// Per-axis kinetic temperatures averaged over a window of snapshots.
std::array<double, 3> mean_axis_temperatures(const AtomState& atom, const Snapshots& s, const Mat3& axes,
                                             const std::vector<std::uint8_t>& include) {
    std::array<double, 3> sum{};
    Ensemble e;
    e.atom = atom;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        e.positions = s.positions[k];
        e.velocities = s.velocities[k];
        e.lost = s.lost[k];
        const auto t = axis_temperatures(e, axes, true, &include);
        for (std::size_t a = 0; a < 3; ++a) sum[a] += t[a];
    }
    if (s.times.empty()) throw StatisticsError("merge: empty averaging window");
    for (auto& x : sum) x /= static_cast<double>(s.times.size());
    return sum;
}

std::size_t nearest_index(const std::vector<double>& phases, double phase) {
    const double p = std::fmod(std::fmod(phase, kTwoPi) + kTwoPi, kTwoPi);
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        double d = std::abs(phases[i] - p);
        d = std::min(d, kTwoPi - d);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

MergeSimReport merge_simulate(const FieldEngine& engine, const DriveConfig& drive, Populate populate,
                              std::size_t N_per_well, double T0, std::uint64_t seed, const MergeSimOptions& opts) {
    if (!drive.h2_enabled) throw DomainError("merge_simulate: the H2 channel must be enabled");
    if (!(T0 > 0.0)) throw DomainError("merge_simulate: T0 must be positive");
    if (N_per_well < 2) throw DomainError("merge_simulate: need at least two atoms per well");
    if (!(opts.cycle_duration > 0.0)) throw DomainError("merge_simulate: cycle duration must be positive");

    MergeSimReport rep;
    rep.populate = populate;
    const MergeRegion region = MergeRegion::of(engine.scene().layout);
    const double P = region.period;

    MergeMapOptions mo;
    mo.threads = opts.threads;
    rep.map = merge_phase_map(engine, drive, phase_grid_deg(opts.map_step_deg), mo);
    double nu_max = 0.0, nu_min = 1e300;
    Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
    for (const auto& c : rep.map.chains) {
        for (const auto& w : c.wells) {
            nu_max = std::max(nu_max, w.frequencies[2]);
            nu_min = std::min(nu_min, w.frequencies[0]);
            lo = lo.cwiseMin(w.position);
            hi = hi.cwiseMax(w.position);
        }
    }
    if (nu_max == 0.0) throw SearchError("merge_simulate: no wells in the merge region");

    const double wt = opts.transverse_half_width;
    Box box;
    box.lo = Vec3(region.left(0.0) - 0.75 * P, lo.y() - wt, lo.z() - wt);
    box.hi = Vec3(region.right() + 0.25 * P, hi.y() + wt, hi.z() + wt);
    auto table = std::make_shared<const FieldTable>(engine, drive, box, opts.spacing, opts.threads);
    const TableModel model(table, drive, engine.atom(), opts.gravity);

    // Wells at phase 0 in the tabulated potential; the wider window catches
    // the conveyor well's left saddle.
    const PhaseLandscape l0(model, 0.0);
    WellChainOptions wc;
    wc.line.y_seed = rep.map.chains.front().wells.front().position.y();
    wc.line.z_seed = rep.map.chains.front().wells.front().position.z();
    const auto chain0 = well_chain(l0, region.left(0.0) - 0.5 * P, region.right(), wc);
    if (chain0.wells.size() < 2) throw SearchError("merge_simulate: expected two wells at phase 0");
    rep.stationary_well = chain0.wells.back();
    rep.conveyor_well = chain0.wells[chain0.wells.size() - 2];

    // Both clouds arrive through the conveyor, which only holds what lies
    // below its shallowest barrier.
    const double cloud_depth = opts.cloud_depth ? *opts.cloud_depth : [&] {
        SurveyOptions so;
        so.threads = opts.threads;
        return survey_conveyor(engine, drive, so).min_depth;
    }();
    rep.cloud_depth = cloud_depth;

    std::vector<const TrapCharacterization*> wells{&rep.conveyor_well};
    if (populate == Populate::Both) wells.push_back(&rep.stationary_well);

    Ensemble ens;
    std::vector<std::vector<std::uint8_t>> member;
    for (std::size_t k = 0; k < wells.size(); ++k) {
        const auto& w = *wells[k];
        SamplingOptions so = opts.sampling;
        so.threads = opts.threads;
        if (!so.total_energy_cap) so.total_energy_cap = w.energy + cloud_depth * model.moment();
        const Ensemble part = sample_thermal(model, 0.0, w, T0, N_per_well, seed + 7919 * k, so);
        if (k == 0) {
            ens = part;
        } else {
            ens.positions.insert(ens.positions.end(), part.positions.begin(), part.positions.end());
            ens.velocities.insert(ens.velocities.end(), part.velocities.begin(), part.velocities.end());
            ens.lost.insert(ens.lost.end(), part.lost.begin(), part.lost.end());
        }
    }
    const std::size_t N = ens.size();
    for (std::size_t k = 0; k < wells.size(); ++k) {
        std::vector<std::uint8_t> m(N, 0);
        for (std::size_t i = k * N_per_well; i < (k + 1) * N_per_well; ++i) m[i] = 1;
        member.push_back(std::move(m));
    }

    const double dt = opts.dt > 0.0 ? opts.dt : 1.0 / (40.0 * nu_max);
    const double hold = opts.hold_periods / nu_min;
    IntegrateOptions io;
    io.dt = dt;
    io.nu_max = nu_max;
    io.domain = box;
    io.threads = opts.threads;
    io.snapshot_every = std::max(1, static_cast<int>(std::lround(hold / dt / std::max(1, opts.snapshots_per_hold))));

    // Reference window at phase 0.
    Snapshots before;
    io.snapshots = &before;
    const PhaseProfile still = PhaseProfile::linear(0.0, hold);
    integrate(ens, model, still, ens.time + hold, io);
    double psd_sum = 0.0, T_sum = 0.0;
    std::array<double, 3> Tw[2]{};
    for (std::size_t k = 0; k < wells.size(); ++k) {
        Tw[k] = mean_axis_temperatures(ens.atom, before, wells[k]->hessian_eigvecs, member[k]);
        const auto r = psd_from_temperatures(static_cast<double>(N_per_well), Tw[k], wells[k]->frequencies);
        rep.before_per_trap.push_back(r);
        psd_sum += r.N * r.psd;
        T_sum += r.N * r.T;
    }
    rep.before = rep.before_per_trap.front();
    rep.before.N = static_cast<double>(N);
    rep.before.psd = psd_sum / static_cast<double>(N);
    rep.before.T = T_sum / static_cast<double>(N);

    // One drive cycle.
    Snapshots cycle;
    IntegrateOptions ic = io;
    ic.snapshots = &cycle;
    const auto cycle_steps = static_cast<long long>(std::ceil(opts.cycle_duration / dt - 1e-9));
    ic.snapshot_every = std::max(1, static_cast<int>(cycle_steps / std::max(1, opts.trace_points)));
    ic.profile_start = ens.time;
    const double omega = kTwoPi / opts.cycle_duration;
    integrate(ens, model, PhaseProfile::linear(omega, opts.cycle_duration), ens.time + opts.cycle_duration, ic);

    for (std::size_t k = 0; k < cycle.times.size(); ++k) {
        const double phase = omega * (cycle.times[k] - ic.profile_start);
        const std::size_t j = nearest_index(rep.map.phases, phase);
        const WellChain& c = rep.map.chains[j];
        MergeSample s;
        s.phase = phase;
        s.minima_count = rep.map.minima_counts[j];
        s.barrier = rep.map.barrier_heights[j];
        double split = -1e300;
        if (c.wells.size() == 2) {
            for (const auto& sd : c.saddles) {
                if (sd.x > c.wells[0].position.x() && sd.x < c.wells[1].position.x()) split = sd.x;
            }
        }
        const double xl = region.left(std::min(phase, kTwoPi)), xr = region.right();
        Ensemble e;
        e.atom = ens.atom;
        e.positions = cycle.positions[k];
        e.velocities = cycle.velocities[k];
        e.lost = cycle.lost[k];
        std::vector<std::uint8_t> in_region(N, 0), right(N, 0);
        for (std::size_t i = 0; i < N; ++i) {
            if (e.lost[i]) continue;
            const double x = e.positions[i].x();
            if (x < xl || x > xr) continue;
            in_region[i] = 1;
            if (x < split) {
                ++s.N_left;
            } else {
                ++s.N_right;
                right[i] = 1;
            }
        }
        if (s.N_left + s.N_right >= 2) s.T = temperature(e, Vec3::Zero(), true, &in_region);
        if (s.N_right >= 2 && !c.wells.empty()) s.psd = psd_from_ensemble(e, c.wells.back(), &right).psd;
        rep.trace.push_back(s);
    }

    // Final window, back at phase 0 (one full period later).
    Snapshots after;
    io.snapshots = &after;
    io.profile_start = ens.time;
    integrate(ens, model, still, ens.time + hold, io);

    const auto& fw = rep.stationary_well;
    const double bx_lo = fw.basin_x_min.value_or(fw.position.x() - 0.5 * P);
    const double bx_hi = fw.basin_x_max.value_or(fw.position.x() + 0.5 * P);
    std::vector<std::uint8_t> inside(N, 0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const double x = ens.positions[i].x();
        if (!ens.lost[i] && x > bx_lo && x < bx_hi) {
            inside[i] = 1;
            ++kept;
        }
    }
    rep.survival_fraction = static_cast<double>(kept) / static_cast<double>(N);
    if (kept < 2) throw StatisticsError("merge_simulate: fewer than two atoms in the final well");
    const auto Tf = mean_axis_temperatures(ens.atom, after, fw.hessian_eigvecs, inside);
    rep.after = psd_from_temperatures(static_cast<double>(kept), Tf, fw.frequencies);
    rep.psd_ratio = rep.after.psd / rep.before.psd;
    rep.T_ratio = rep.after.T / rep.before.T;

    const double Tl = rep.before_per_trap[0].T;
    const double Tr = wells.size() > 1 ? rep.before_per_trap[1].T : Tl;
    const double Nr = wells.size() > 1 ? static_cast<double>(N_per_well) : 0.0;
    rep.prediction = septum_prediction(static_cast<double>(N_per_well), Tl, Nr, Tr, rep.conveyor_well.frequencies,
                                       rep.stationary_well.frequencies, fw.frequencies);
    return rep;
}

}  // namespace atomchip
