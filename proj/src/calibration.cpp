#include "atomchip/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atomchip/errors.hpp"
#include "atomchip/parallel.hpp"

namespace atomchip {

ConveyorSurvey survey_conveyor(const FieldEngine& engine, const DriveConfig& drive, const SurveyOptions& opts) {
    if (opts.n_phases < 1) throw DomainError("survey_conveyor: need at least one phase");
    if (!(opts.half_width_periods > 0.0)) throw DomainError("survey_conveyor: half width must be positive");
    const auto& layout = engine.scene().layout;
    const auto crossings = layout.modulation_crossings();
    if (crossings.empty()) throw DomainError("survey_conveyor: layout has no modulation wires");
    const double center = 0.5 * (crossings.front() + crossings.back());
    const double half = opts.half_width_periods * layout.modulation_period;

    ConveyorSurvey s;
    for (int k = 0; k < opts.n_phases; ++k) s.phases.push_back(kTwoPi * k / opts.n_phases);
    s.chains.resize(s.phases.size());
    parallel_for(s.phases.size(), [&](std::size_t i) {
        const SceneLandscape land(engine, drive.currents(s.phases[i]));
        s.chains[i] = well_chain(land, center - half, center + half, opts.chain);
        s.chains[i].phase = s.phases[i];
    }, opts.threads);

    double sum = 0.0;
    s.min_depth = INFINITY;
    s.max_depth = -INFINITY;
    for (const auto& c : s.chains) {
        for (const auto& w : c.wells) {
            if (!w.basin_x_min || !w.basin_x_max || !w.depth_to_saddle) continue;
            s.wells.push_back(w);
            sum += *w.depth_to_saddle;
            s.min_depth = std::min(s.min_depth, *w.depth_to_saddle);
            s.max_depth = std::max(s.max_depth, *w.depth_to_saddle);
        }
    }
    if (s.wells.empty()) throw SearchError("survey_conveyor: no interior well found");
    s.mean_depth = sum / static_cast<double>(s.wells.size());
    return s;
}

namespace {

double mean_depth_at(const ChipScene& base, LayoutParams params, const DriveConfig& drive, double period,
                     const SurveyOptions& opts) {
    params.modulation_period = period;
    ChipScene scene = base;
    scene.layout = conveyor_layout(params);
    const FieldEngine engine(scene);
    return survey_conveyor(engine, drive, opts).mean_depth;
}

}  // namespace

CalibrationResult calibrate_period(const ChipScene& scene, const LayoutParams& params, const DriveConfig& drive,
                                   const CalibrationOptions& opts) {
    if (!(opts.period_min > 0.0 && opts.period_max > opts.period_min)) {
        throw DomainError("calibrate_period: need 0 < period_min < period_max");
    }
    if (!(opts.target_depth > 0.0)) throw DomainError("calibrate_period: target depth must be positive");
    CalibrationResult r;
    auto eval = [&](double p) {
        const double d = mean_depth_at(scene, params, drive, p, opts.survey);
        r.history.emplace_back(p, d);
        return d - opts.target_depth;
    };
    double lo = opts.period_min, hi = opts.period_max;
    double flo = eval(lo), fhi = eval(hi);
    if (flo * fhi > 0.0) {
        throw SearchError("calibrate_period: mean depth does not cross the target between " +
                          std::to_string(lo * 1e6) + " and " + std::to_string(hi * 1e6) + " um");
    }
    r.iterations = 2;
    while (hi - lo > opts.tolerance && r.iterations < opts.max_iterations) {
        const double mid = 0.5 * (lo + hi);
        const double fm = eval(mid);
        ++r.iterations;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // linear interpolation inside the final bracket
    r.period = fhi != flo ? lo - flo * (hi - lo) / (fhi - flo) : 0.5 * (lo + hi);
    r.mean_depth = opts.target_depth + (flo + (r.period - lo) / (hi - lo) * (fhi - flo));
    return r;
}

}  // namespace atomchip
