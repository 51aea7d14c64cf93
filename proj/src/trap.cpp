#include "atomchip/trap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "atomchip/errors.hpp"
#include "minimize.hpp"

namespace atomchip {

namespace {

detail::MinimizeSettings settings_for(const Landscape& l, const SearchOptions& o) {
    return {l.fd_step(), o.grad_tol, o.step_tol, o.max_iters, o.max_step};
}

double guide_height_guess(const Landscape& l) {
    if (const auto* s = dynamic_cast<const SceneLandscape*>(&l)) {
        const double b0y = std::abs(s->engine().scene().bias.y);
        const double i0 = std::abs(s->currents().I0);
        if (b0y > 0.0 && i0 > 0.0) return guide_estimates(i0, b0y, 0.0).r0;
    }
    throw DomainError("line_profile: no z seed given and the landscape has no guide estimate");
}

std::string fmt_um(double x) {
    std::ostringstream os;
    os << units::m_to_um(x) << " um";
    return os.str();
}

}  // namespace

std::array<double, 3> TrapCharacterization::curvatures(double moment) const {
    Eigen::SelfAdjointEigenSolver<Mat3> es(hessian);
    return {es.eigenvalues()[0] / moment, es.eigenvalues()[1] / moment, es.eigenvalues()[2] / moment};
}

Vec3 gradient_of_potential(const Landscape& l, const Vec3& p, double h) {
    auto f = [&](const Vec3& q) { return l.energy(q); };
    try {
        return detail::fd_gradient<3>(f, p, h);
    } catch (const SingularityError& e) {
        throw DomainError(std::string("gradient stencil enters an exclusion zone: ") + e.what());
    }
}

Mat3 hessian_of_potential(const Landscape& l, const Vec3& p, double h) {
    if (!(h > 0.0)) throw DomainError("hessian: step must be positive");
    auto f = [&](const Vec3& q) { return l.energy(q); };
    try {
        return detail::fd_hessian<3>(f, p, h);
    } catch (const SingularityError& e) {
        throw DomainError(std::string("Hessian stencil enters an exclusion zone: ") + e.what());
    }
}

Mat3 hessian_of_potential(const Landscape& l, const Vec3& p) { return hessian_of_potential(l, p, l.fd_step()); }

std::pair<std::array<double, 3>, Mat3> trap_frequencies(const Mat3& hessian, double mass) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(hessian);
    const Vec3 ev = es.eigenvalues();
    if (!(ev[0] > 0.0)) {
        std::ostringstream os;
        os << "stationary point is not a minimum (Hessian eigenvalue " << ev[0] << " J/m^2)";
        throw SaddleError(os.str());
    }
    std::array<double, 3> nu{};
    for (int i = 0; i < 3; ++i) nu[i] = std::sqrt(ev[i] / mass) / kTwoPi;
    return {nu, es.eigenvectors()};
}

TrapCharacterization find_minimum(const Landscape& l, const Vec3& seed, const SearchOptions& opts) {
    auto f = [&](const Vec3& q) { return l.energy(q); };
    l.energy(seed);  // surfaces SingularityError for seeds inside a wire
    const auto r = detail::bfgs_minimize<3>(f, seed, settings_for(l, opts));
    if (!r.converged) {
        std::ostringstream os;
        os << "find_minimum did not converge from seed (" << fmt_um(seed.x()) << ", " << fmt_um(seed.y()) << ", "
           << fmt_um(seed.z()) << "); |grad U| = " << r.grad.norm() << " J/m";
        throw SearchError(os.str());
    }
    TrapCharacterization t;
    t.position = r.x;
    t.energy = r.f;
    t.Bmin = l.field_magnitude(r.x);
    t.hessian = hessian_of_potential(l, r.x);
    std::tie(t.frequencies, t.hessian_eigvecs) = trap_frequencies(t.hessian, l.mass());
    return t;
}

LineSample transverse_minimum(const Landscape& l, double x, const LineSample& guess, const SearchOptions& opts) {
    auto f = [&](const detail::VecN<2>& q) { return l.energy(Vec3{x, q[0], q[1]}); };
    const detail::VecN<2> start{guess.y, guess.z};
    const auto r = detail::bfgs_minimize<2>(f, start, settings_for(l, opts));
    if (r.converged) return {x, r.f, r.x[0], r.x[1]};
    // Near a field zero |B| has a cusp and gradients never settle; a collapsed
    // simplex still pins the minimum.
    const auto q = detail::nelder_mead<2>(f, r.x, 0.5e-6, 1e-12, 20000);
    const double fq = detail::safe_eval<decltype(f), 2>(f, q);
    if (!std::isfinite(fq) && !std::isfinite(r.f)) {
        throw SearchError("transverse minimization failed at x = " + fmt_um(x));
    }
    return {x, std::min(fq, r.f), fq <= r.f ? q[0] : r.x[0], fq <= r.f ? q[1] : r.x[1]};
}

GuideSection guide_section(const Landscape& l, double x, const LineSample& guess, const SearchOptions& opts) {
    const LineSample m = transverse_minimum(l, x, guess, opts);
    GuideSection g;
    g.position = Vec3{x, m.y, m.z};
    g.energy = m.energy;
    g.Bmin = l.field_magnitude(g.position);
    g.hessian = hessian_of_potential(l, g.position);
    g.longitudinal_curvature = g.hessian(0, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(g.hessian.block<2, 2>(1, 1));
    const Eigen::Vector2d ev = es.eigenvalues();
    if (!(ev[0] > 0.0)) throw SaddleError("guide_section: transverse curvature is not positive at x = " + fmt_um(x));
    for (int i = 0; i < 2; ++i) g.transverse_frequencies[i] = std::sqrt(ev[i] / l.mass()) / kTwoPi;
    return g;
}

std::vector<LineSample> line_profile(const Landscape& l, double x_min, double x_max, int n_samples,
                                     const LineProfileOptions& opts) {
    if (n_samples < 16) throw DomainError("line_profile: need at least 16 samples");
    if (!(x_max > x_min)) throw DomainError("line_profile: empty x range");
    LineSample guess{x_min, 0.0, opts.y_seed, opts.z_seed > 0.0 ? opts.z_seed : guide_height_guess(l)};
    std::vector<LineSample> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const double x = x_min + (x_max - x_min) * i / (n_samples - 1);
        guess = transverse_minimum(l, x, guess, opts.search);
        out.push_back(guess);
    }
    return out;
}

std::vector<std::pair<std::size_t, bool>> profile_extrema(const std::vector<LineSample>& p, double thr) {
    std::vector<std::pair<std::size_t, bool>> ex;
    auto push = [&](std::size_t i, bool is_min) {
        if (!ex.empty() && ex.back().second == is_min) {
            const double prev = p[ex.back().first].energy;
            const bool keep_new = is_min ? p[i].energy < prev : p[i].energy > prev;
            if (keep_new) ex.back().first = i;
            return;
        }
        ex.emplace_back(i, is_min);
    };
    for (std::size_t i = 1; i + 1 < p.size(); ++i) {
        const double a = p[i - 1].energy, b = p[i].energy, c = p[i + 1].energy;
        if (b < a && b <= c) push(i, true);
        if (b > a && b >= c) push(i, false);
    }
    // Drop the least prominent adjacent pair until every pair clears the threshold.
    for (;;) {
        std::size_t best = ex.size();
        double best_diff = thr;
        for (std::size_t k = 0; k + 1 < ex.size(); ++k) {
            const double d = std::abs(p[ex[k].first].energy - p[ex[k + 1].first].energy);
            if (d < best_diff) {
                best_diff = d;
                best = k;
            }
        }
        if (best == ex.size()) break;
        ex.erase(ex.begin() + static_cast<std::ptrdiff_t>(best), ex.begin() + static_cast<std::ptrdiff_t>(best) + 2);
        // re-merge neighbours of equal type
        std::vector<std::pair<std::size_t, bool>> merged;
        for (const auto& e : ex) {
            if (!merged.empty() && merged.back().second == e.second) {
                const double prev = p[merged.back().first].energy;
                const bool keep_new = e.second ? p[e.first].energy < prev : p[e.first].energy > prev;
                if (keep_new) merged.back().first = e.first;
            } else {
                merged.push_back(e);
            }
        }
        ex = std::move(merged);
    }
    // Edge extrema that barely differ from the profile end carry no structure.
    while (!ex.empty() && std::abs(p[ex.front().first].energy - p.front().energy) < thr) ex.erase(ex.begin());
    while (!ex.empty() && std::abs(p[ex.back().first].energy - p.back().energy) < thr) ex.pop_back();
    return ex;
}

namespace {

Saddle refine_saddle(const Landscape& l, const std::vector<LineSample>& prof, std::size_t i,
                     const SearchOptions& search) {
    const std::size_t lo = i > 0 ? i - 1 : i;
    const std::size_t hi = std::min(i + 1, prof.size() - 1);
    double a = prof[lo].x, b = prof[hi].x;
    LineSample guess = prof[i];
    auto g = [&](double x) {
        guess = transverse_minimum(l, x, guess, search);
        return guess.energy;
    };
    // golden-section maximization
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = g(c), fd = g(d);
    while (b - a > 1e-10) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = g(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = g(d);
        }
    }
    const double xs = 0.5 * (a + b);
    const LineSample s = transverse_minimum(l, xs, guess, search);
    return {xs, s.energy, s};
}

}  // namespace

WellChain well_chain(const Landscape& l, double x_min, double x_max, const WellChainOptions& opts) {
    WellChain chain;
    chain.line_profile = line_profile(l, x_min, x_max, opts.n_samples, opts.line);
    const auto& prof = chain.line_profile;
    const auto ex = profile_extrema(prof, opts.min_prominence * l.moment());

    for (const auto& [idx, is_min] : ex) {
        if (is_min) {
            const LineSample& s = prof[idx];
            chain.wells.push_back(find_minimum(l, Vec3{s.x, s.y, s.z}, opts.search));
        } else {
            chain.saddles.push_back(refine_saddle(l, prof, idx, opts.line.search));
        }
    }
    for (auto& w : chain.wells) {
        const double x = w.position.x();
        std::optional<double> left, right;
        for (const auto& s : chain.saddles) {
            if (s.x < x) {
                left = s.energy;
                w.basin_x_min = s.x;
            } else if (!right) {
                right = s.energy;
                w.basin_x_max = s.x;
            }
        }
        std::optional<double> barrier;
        if (left && right) barrier = std::min(*left, *right);
        else if (left) barrier = left;
        else if (right) barrier = right;
        if (barrier) w.depth_to_saddle = (*barrier - w.energy) / l.moment();
    }
    return chain;
}

std::vector<Vec3> conveyor_seeds(const ChipScene& scene, double I0) {
    const double r0 = guide_estimates(std::abs(I0), std::abs(scene.bias.y), std::abs(scene.bias.x)).r0;
    std::vector<Vec3> seeds;
    for (double x : scene.layout.m1_well_crossings()) seeds.emplace_back(x, 0.0, r0);
    return seeds;
}

double pattern_center(const ChipLayout& layout) {
    const auto c = layout.modulation_crossings();
    return c.empty() ? 0.0 : 0.5 * (c.front() + c.back());
}

Vec3 central_seed(const ChipScene& scene, double I0) {
    const auto seeds = conveyor_seeds(scene, I0);
    if (seeds.empty()) throw DomainError("the layout has no well-forming modulation wires");
    const double c = pattern_center(scene.layout);
    return *std::min_element(seeds.begin(), seeds.end(), [&](const Vec3& a, const Vec3& b) {
        return std::abs(a.x() - c) < std::abs(b.x() - c);
    });
}

std::vector<TrackedWell> track_well(const FieldEngine& engine, const DriveConfig& drive,
                                    const std::vector<double>& phases, const Vec3& seed, const SearchOptions& opts) {
    if (!std::is_sorted(phases.begin(), phases.end())) throw DomainError("track_well: phases must be sorted");
    const double period = engine.scene().layout.modulation_period;
    std::vector<TrackedWell> out;
    Vec3 guess = seed;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (out.size() >= 2) {
            const auto& a = out[out.size() - 2];
            const auto& b = out.back();
            const double dphi = b.phase - a.phase;
            if (dphi > 0.0) {
                guess = b.trap.position + (phases[i] - b.phase) / dphi * (b.trap.position - a.trap.position);
            } else {
                guess = b.trap.position;
            }
        } else if (!out.empty()) {
            guess = out.back().trap.position;
        }
        SceneLandscape l(engine, drive.currents(phases[i]));
        TrapCharacterization t = find_minimum(l, guess, opts);
        t.phase = phases[i];
        if (!out.empty()) {
            const double jump = (t.position - out.back().trap.position).norm();
            if (jump > 0.25 * period) {
                std::ostringstream os;
                os << "tracked well jumped by " << units::m_to_um(jump) << " um between phases "
                   << out.back().phase << " and " << phases[i] << " rad";
                throw TrackingError(os.str());
            }
        }
        out.push_back({phases[i], t});
    }
    return out;
}

double ground_state_fwhm(double frequency, double mass) {
    if (!(frequency > 0.0)) throw DomainError("ground_state_fwhm: frequency must be positive");
    if (!(mass > 0.0)) throw DomainError("ground_state_fwhm: mass must be positive");
    const double omega = kTwoPi * frequency;
    return 2.0 * std::sqrt(2.0 * std::log(2.0)) * std::sqrt(PhysicalConstants::hbar / (mass * omega));
}

double lamb_dicke(double frequency, const AtomState& atom, double wavelength) {
    if (!(frequency > 0.0)) throw DomainError("lamb_dicke: frequency must be positive");
    return std::sqrt(recoil_frequency(atom, wavelength) / frequency);
}

}  // namespace atomchip
