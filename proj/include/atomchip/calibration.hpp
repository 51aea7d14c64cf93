#pragma once

#include <utility>
#include <vector>

#include "atomchip/trap.hpp"

namespace atomchip {

struct SurveyOptions {
    int n_phases = 12;  // evenly spaced over one drive period
    /// Half width of the surveyed x window around the pattern center, in
    /// modulation periods. Wells at the pattern ends feel the truncation and
    /// are not representative of the conveyor.
    double half_width_periods = 2.0;
    WellChainOptions chain;
    int threads = 0;
};

/// Interior conveyor wells sampled over one drive period.
struct ConveyorSurvey {
    std::vector<double> phases;
    std::vector<WellChain> chains;
    /// Wells with a saddle on both sides, in phase order then x order.
    std::vector<TrapCharacterization> wells;
    double mean_depth = 0.0;  // T
    double min_depth = 0.0;
    double max_depth = 0.0;
};

ConveyorSurvey survey_conveyor(const FieldEngine& engine, const DriveConfig& drive, const SurveyOptions& opts = {});

struct CalibrationOptions {
    double target_depth = 2.5e-4;  // T
    double period_min = 300e-6;
    double period_max = 600e-6;
    double tolerance = 0.5e-6;  // on the period (m)
    int max_iterations = 40;
    SurveyOptions survey;
};

struct CalibrationResult {
    double period = 0.0;
    double mean_depth = 0.0;
    int iterations = 0;
    std::vector<std::pair<double, double>> history;  // (period, mean depth)
};

/// Bisects the modulation period of the conveyor layout until the mean
/// interior well depth matches the target. `scene` supplies everything but the
/// layout; throws SearchError when the bracket does not straddle the target.
CalibrationResult calibrate_period(const ChipScene& scene, const LayoutParams& params, const DriveConfig& drive,
                                   const CalibrationOptions& opts = {});

}  // namespace atomchip
