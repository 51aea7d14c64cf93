#pragma once

#include <array>
#include <optional>
#include <vector>

#include "atomchip/landscape.hpp"
#include "atomchip/waveforms.hpp"

namespace atomchip {

struct TrapCharacterization {
    Vec3 position = Vec3::Zero();
    double energy = 0.0;  // U at the bottom (J)
    double Bmin = 0.0;    // |B| at the bottom (T); energy / moment when gravity is off
    std::array<double, 3> frequencies{};  // Hz, ascending
    Mat3 hessian = Mat3::Zero();          // J/m^2
    Mat3 hessian_eigvecs = Mat3::Identity();  // columns match `frequencies`
    std::optional<double> depth_to_saddle;    // T
    std::optional<double> basin_x_min;        // m, saddle positions bounding the well
    std::optional<double> basin_x_max;
    double phase = 0.0;

    /// Field curvature of |B| along each principal axis (T/m^2).
    [[nodiscard]] std::array<double, 3> curvatures(double moment) const;
};

struct SearchOptions {
    double grad_tol = 1e-28;  // J/m
    double step_tol = 1e-9;   // m
    int max_iters = 200;
    double max_step = 20e-6;  // trust radius of a single quasi-Newton step (m)
};

/// Local minimum of U from `seed`, with Hessian and frequencies.
TrapCharacterization find_minimum(const Landscape& landscape, const Vec3& seed, const SearchOptions& opts = {});

/// Central-difference Hessian with step h, symmetrized.
Mat3 hessian_of_potential(const Landscape& landscape, const Vec3& point, double h);
Mat3 hessian_of_potential(const Landscape& landscape, const Vec3& point);

/// Central-difference gradient.
Vec3 gradient_of_potential(const Landscape& landscape, const Vec3& point, double h);

/// Frequencies (Hz, ascending) and eigenvectors of a Hessian for a given mass.
/// Throws SaddleError when an eigenvalue is not positive.
std::pair<std::array<double, 3>, Mat3> trap_frequencies(const Mat3& hessian, double mass);

struct LineSample {
    double x = 0.0;
    double energy = 0.0;  // transverse minimum of U at this x (J)
    double y = 0.0;
    double z = 0.0;
};

struct LineProfileOptions {
    double y_seed = 0.0;
    double z_seed = 0.0;  // <= 0 means "use the thin-wire guide height estimate"
    SearchOptions search{1e-28, 1e-9, 200, 5e-6};
};

/// U minimized over (y, z) at each of n_samples evenly spaced x in [x_min, x_max].
std::vector<LineSample> line_profile(const Landscape& landscape, double x_min, double x_max, int n_samples,
                                     const LineProfileOptions& opts = {});

/// Transverse minimum at a single x, warm-started from `guess`.
LineSample transverse_minimum(const Landscape& landscape, double x, const LineSample& guess,
                              const SearchOptions& opts = {});

/// Cross section of a waveguide: the transverse minimum at fixed x and the
/// curvature there. Used where the longitudinal direction is flat.
struct GuideSection {
    Vec3 position = Vec3::Zero();
    double energy = 0.0;
    double Bmin = 0.0;
    std::array<double, 2> transverse_frequencies{};  // Hz, ascending
    Mat3 hessian = Mat3::Zero();
    /// d2U/dx2 along the guide (J/m^2); may be zero or negative.
    double longitudinal_curvature = 0.0;
};

/// Throws SaddleError when the transverse curvature is not positive.
GuideSection guide_section(const Landscape& landscape, double x, const LineSample& guess,
                           const SearchOptions& opts = {});

struct Saddle {
    double x = 0.0;
    double energy = 0.0;
    LineSample sample;
};

struct WellChain {
    double phase = 0.0;
    std::vector<TrapCharacterization> wells;  // ordered by x
    std::vector<Saddle> saddles;              // interior maxima of the line profile, ordered by x
    std::vector<LineSample> line_profile;
};

struct WellChainOptions {
    int n_samples = 161;
    /// Extrema pairs shallower than this (T) are treated as noise.
    double min_prominence = 1e-7;
    LineProfileOptions line;
    SearchOptions search;
};

/// Wells along [x_min, x_max]: minima of the line profile refined in 3D, with
/// depth = smaller of the neighbouring barrier heights, in tesla of |B|.
WellChain well_chain(const Landscape& landscape, double x_min, double x_max, const WellChainOptions& opts = {});

/// Alternating interior extrema of a sampled profile after removing pairs
/// below `min_energy_prominence` (J). Returns indices; minima flagged true.
std::vector<std::pair<std::size_t, bool>> profile_extrema(const std::vector<LineSample>& profile,
                                                          double min_energy_prominence);

struct TrackedWell {
    double phase = 0.0;
    TrapCharacterization trap;
};

/// Follows one well through `phases` (sorted) by continuation from `seed`.
/// Throws TrackingError if the position jumps by more than a quarter period.
std::vector<TrackedWell> track_well(const FieldEngine& engine, const DriveConfig& drive,
                                    const std::vector<double>& phases, const Vec3& seed,
                                    const SearchOptions& opts = {});

/// Initial well seeds: r0 below each well-forming M1 crossing.
std::vector<Vec3> conveyor_seeds(const ChipScene& scene, double I0);

/// Midpoint between the first and last modulation crossings (0 without any).
double pattern_center(const ChipLayout& layout);

/// The seed of conveyor_seeds closest to pattern_center. Throws DomainError
/// when the layout has no well-forming crossings.
Vec3 central_seed(const ChipScene& scene, double I0);

/// FWHM of the harmonic-oscillator ground-state amplitude, 2 sqrt(2 ln 2) sqrt(hbar / (m w)).
double ground_state_fwhm(double frequency, double mass);

/// sqrt(recoil frequency / trap frequency).
double lamb_dicke(double frequency, const AtomState& atom, double wavelength);

}  // namespace atomchip
