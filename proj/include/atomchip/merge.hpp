#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atomchip/dynamics.hpp"

namespace atomchip {

/// x window around the H2 wire where the arriving conveyor well and the
/// stationary well meet. The left edge travels with the conveyor so the
/// next conveyor well never enters before the cycle ends.
struct MergeRegion {
    double x_conveyor = 0.0;  // last well-forming M1 crossing
    double x_h2 = 0.0;
    double period = 0.0;

    static MergeRegion of(const ChipLayout& layout);
    [[nodiscard]] double left(double phase) const;
    [[nodiscard]] double right() const;
};

struct MergeMapOptions {
    WellChainOptions chain;
    /// Compression milestone: the merged well's thermal volume proxy
    /// 1 / (nu1 nu2 nu3) is within this fraction of the stationary trap's
    /// initial value.
    double volume_tolerance = 0.10;
    int threads = 0;
};

struct MergePhaseMap {
    std::vector<double> phases;  // rad
    std::vector<int> minima_counts;
    /// Saddle minus the higher of the two minima (T) while two wells exist.
    std::vector<std::optional<double>> barrier_heights;
    /// Frequency product nu1 nu2 nu3 (Hz^3) of the stationary or merged well.
    std::vector<double> frequency_products;
    std::vector<WellChain> chains;
    double initial_frequency_product = 0.0;  // stationary well at phase 0
    /// Last phase with two minima before the first single-minimum phase.
    std::optional<double> separate_until;
    /// First phase with a single minimum.
    std::optional<double> merged_at;
    /// First phase after the merged well's largest volume (smallest
    /// frequency product) at which the volume proxy is back within tolerance
    /// of the stationary trap's initial volume.
    std::optional<double> compressed_at;
};

/// Counts the wells of the merge region at each phase (parallel over
/// phases) and extracts the milestones. Search failures are rethrown with
/// the offending phase.
MergePhaseMap merge_phase_map(const FieldEngine& engine, const DriveConfig& drive, const std::vector<double>& phases,
                              const MergeMapOptions& opts = {});

/// Phase grid [0, 2 pi) with the given step in degrees.
std::vector<double> phase_grid_deg(double step_deg, double end_deg = 360.0);

enum class PsdMethod { ClosedForm, Ensemble };
const char* to_string(PsdMethod m);

struct PsdReport {
    double N = 0.0;
    double T = 0.0;  // geometric mean of the axis temperatures for ensembles (K)
    std::array<double, 3> frequencies{};
    double mean_frequency = 0.0;  // geometric mean (Hz)
    double psd = 0.0;
    PsdMethod method = PsdMethod::ClosedForm;
};

/// N (hbar w / kB T)^3 with w the geometric mean angular frequency.
PsdReport psd_closed_form(double N, double T, const std::array<double, 3>& frequencies);

/// N prod_i hbar w_i / (kB T_i) with T_i the kinetic temperatures along the
/// well's principal axes, over surviving atoms (optionally restricted).
PsdReport psd_from_ensemble(const Ensemble& ensemble, const TrapCharacterization& well,
                            const std::vector<std::uint8_t>* include = nullptr);

/// Combines per-axis temperatures measured separately (e.g. time averages).
PsdReport psd_from_temperatures(double N, const std::array<double, 3>& axis_temperatures,
                                const std::array<double, 3>& frequencies);

struct SeptumResult {
    double T_final = 0.0;
    double psd_initial = 0.0;  // N-weighted mean over the populated traps
    double psd_final = 0.0;
    double psd_ratio = 0.0;
};

/// Merging two harmonically trapped classical gases: the partition is
/// removed at once, the gases share energy at T_m = (N1 T1 + N2 T2) / N over
/// the phase-space volume of both traps, then the union is compressed
/// isentropically into the final trap. When `expand_into_empty` is false an
/// empty trap is not opened, which describes the null process.
SeptumResult septum_prediction(double N1, double T1, double N2, double T2, const std::array<double, 3>& freqs1,
                               const std::array<double, 3>& freqs2, const std::array<double, 3>& freqs_final,
                               bool expand_into_empty = true);

/// Both traps share `freqs_init`.
SeptumResult septum_prediction(double N1, double T1, double N2, double T2, const std::array<double, 3>& freqs_init,
                               const std::array<double, 3>& freqs_final, bool expand_into_empty = true);

enum class Populate { LeftOnly, Both };
const char* to_string(Populate p);
Populate populate_from_string(const std::string& s);

struct MergeSimOptions {
    double cycle_duration = 0.600;  // one full drive period (s)
    double hold_periods = 15.0;     // averaging window before and after, slowest-trap periods
    double spacing = 5e-6;
    double transverse_half_width = 100e-6;
    bool gravity = true;
    double dt = 0.0;  // 0: 1 / (40 nu_max) over the cycle
    double map_step_deg = 10.0;
    int snapshots_per_hold = 120;
    int trace_points = 72;
    /// Sampled clouds keep total energies below bottom + cloud_depth * moment
    /// (T of |B|). Unset: the shallowest interior conveyor barrier over one
    /// period, i.e. what a conveyor well can carry.
    std::optional<double> cloud_depth;
    SamplingOptions sampling;
    int threads = 0;
};

/// One row of the merge trace.
struct MergeSample {
    double phase = 0.0;
    int minima_count = 0;
    std::optional<double> barrier;  // T
    std::size_t N_left = 0;
    std::size_t N_right = 0;
    double T = 0.0;
    std::optional<double> psd;  // of the right-hand (stationary or merged) well
};

struct MergeSimReport {
    Populate populate = Populate::LeftOnly;
    PsdReport before;  // N-weighted over the populated traps
    PsdReport after;
    std::vector<PsdReport> before_per_trap;
    double psd_ratio = 0.0;
    double T_ratio = 0.0;  // T_after / T_before
    double survival_fraction = 0.0;
    TrapCharacterization conveyor_well;
    TrapCharacterization stationary_well;
    SeptumResult prediction;  // closed form for the same traps and temperatures
    double cloud_depth = 0.0;  // T, energy cap used for sampling
    std::vector<MergeSample> trace;
    MergePhaseMap map;  // coarse map used for dt and the trace
};

/// Samples thermal clouds at T0 truncated at `cloud_depth` in the conveyor well (and
/// the stationary well for Populate::Both), runs one drive cycle, holds, and
/// compares ensemble phase-space densities before and after.
MergeSimReport merge_simulate(const FieldEngine& engine, const DriveConfig& drive, Populate populate,
                              std::size_t N_per_well, double T0, std::uint64_t seed,
                              const MergeSimOptions& opts = {});

}  // namespace atomchip
