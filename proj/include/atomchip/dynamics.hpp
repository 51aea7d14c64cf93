#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "atomchip/field_table.hpp"
#include "atomchip/landscape.hpp"
#include "atomchip/trap.hpp"
#include "atomchip/waveforms.hpp"

namespace atomchip {

/// N classical atoms. Lost atoms keep their last state and are skipped by
/// every statistic.
struct Ensemble {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<std::uint8_t> lost;
    double time = 0.0;
    std::uint64_t seed = 0;
    AtomState atom;

    [[nodiscard]] std::size_t size() const { return positions.size(); }
    [[nodiscard]] std::size_t survivors() const;
    /// Mean position of surviving atoms (zero when none survive).
    [[nodiscard]] Vec3 center_of_mass() const;
};

/// Time-dependent potential seen by the atoms, parametrized by drive phase.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;

    [[nodiscard]] virtual double mass() const = 0;
    [[nodiscard]] virtual double moment() const = 0;
    /// U at the given phase (J). Throws SingularityError where undefined.
    [[nodiscard]] virtual double energy(double phase, const Vec3& p) const = 0;
    /// -grad U. The default uses central differences with fd_step().
    [[nodiscard]] virtual Vec3 force(double phase, const Vec3& p) const;
    [[nodiscard]] virtual double fd_step() const { return 0.05e-6; }
};

/// Direct Biot-Savart evaluation through a FieldEngine, forces by finite
/// differences. Gravity follows the scene's flag.
class EngineModel final : public DynamicsModel {
public:
    EngineModel(const FieldEngine& engine, DriveConfig drive) : engine_(&engine), drive_(std::move(drive)) {}

    [[nodiscard]] double mass() const override { return engine_->atom().mass; }
    [[nodiscard]] double moment() const override { return engine_->atom().moment(); }
    [[nodiscard]] double energy(double phase, const Vec3& p) const override;
    [[nodiscard]] double fd_step() const override { return engine_->scene().fd_step; }

private:
    const FieldEngine* engine_;
    DriveConfig drive_;
};

/// Interpolated field from a FieldTable with analytic forces; the table must
/// outlive the model. Leaving the table box counts as a singularity.
class TableModel final : public DynamicsModel {
public:
    TableModel(std::shared_ptr<const FieldTable> table, DriveConfig drive, AtomState atom, bool gravity)
        : table_(std::move(table)), drive_(std::move(drive)), atom_(atom), gravity_(gravity) {}

    [[nodiscard]] double mass() const override { return atom_.mass; }
    [[nodiscard]] double moment() const override { return atom_.moment(); }
    [[nodiscard]] double energy(double phase, const Vec3& p) const override;
    [[nodiscard]] Vec3 force(double phase, const Vec3& p) const override;
    [[nodiscard]] const FieldTable& table() const { return *table_; }
    [[nodiscard]] const DriveConfig& drive() const { return drive_; }
    [[nodiscard]] bool gravity() const { return gravity_; }

private:
    std::shared_ptr<const FieldTable> table_;
    DriveConfig drive_;
    AtomState atom_;
    bool gravity_;
};

/// Callable potential, for analytic test problems.
class FunctionModel final : public DynamicsModel {
public:
    using EnergyFn = std::function<double(double, const Vec3&)>;
    using ForceFn = std::function<Vec3(double, const Vec3&)>;

    FunctionModel(EnergyFn energy, double mass, ForceFn force = {}, double moment = PhysicalConstants::muB)
        : energy_(std::move(energy)), force_(std::move(force)), mass_(mass), moment_(moment) {}

    [[nodiscard]] double mass() const override { return mass_; }
    [[nodiscard]] double moment() const override { return moment_; }
    [[nodiscard]] double energy(double phase, const Vec3& p) const override { return energy_(phase, p); }
    [[nodiscard]] Vec3 force(double phase, const Vec3& p) const override;

private:
    EnergyFn energy_;
    ForceFn force_;
    double mass_;
    double moment_;
};

/// A DynamicsModel frozen at one phase, for the trap-analysis routines.
class PhaseLandscape final : public Landscape {
public:
    PhaseLandscape(const DynamicsModel& model, double phase) : model_(&model), phase_(phase) {}

    [[nodiscard]] double energy(const Vec3& p) const override { return model_->energy(phase_, p); }
    [[nodiscard]] double mass() const override { return model_->mass(); }
    [[nodiscard]] double moment() const override { return model_->moment(); }
    [[nodiscard]] double fd_step() const override { return model_->fd_step(); }

private:
    const DynamicsModel* model_;
    double phase_;
};

/// -grad U by central differences with the landscape's step.
Vec3 force(const Landscape& landscape, const Vec3& point);

struct SamplingOptions {
    int burn_in = 2000;
    int thinning = 10;
    int chains = 8;
    /// Proposal width in units of the harmonic thermal radius per axis.
    double step_scale = 0.9;
    /// Optional x window; defaults to the well's basin when known.
    std::optional<double> x_min, x_max;
    /// Optional cap on U (J); defaults to the saddle energy when the depth is known.
    std::optional<double> energy_cap;
    /// Optional cap on the total energy U + m v^2 / 2 (J). Position-velocity
    /// pairs above it are rejected, which yields the bound part of the
    /// thermal distribution.
    std::optional<double> total_energy_cap;
    int threads = 0;
};

/// Boltzmann-distributed positions in the well's basin (Metropolis, fixed
/// chain count, each chain seeded from (seed, chain index)) and Maxwell-
/// Boltzmann velocities at T. Deterministic for a given seed. Throws
/// SamplingError when the acceptance rate falls below 1%.
Ensemble sample_thermal(const DynamicsModel& model, double phase, const TrapCharacterization& well, double T,
                        std::size_t N, std::uint64_t seed, const SamplingOptions& opts = {});

/// Per-snapshot copies of the ensemble state.
struct Snapshots {
    std::vector<double> times;
    std::vector<std::vector<Vec3>> positions;
    std::vector<std::vector<Vec3>> velocities;
    std::vector<std::vector<std::uint8_t>> lost;
};

struct IntegrateOptions {
    double dt = 0.0;
    /// Highest trap frequency expected along the run (Hz); dt must not exceed
    /// 1 / (20 nu_max). Zero skips the check.
    double nu_max = 0.0;
    /// Atoms leaving this box are flagged lost. Unset means unbounded.
    std::optional<Box> domain;
    /// Phase at time t is phase_offset + phase_held(profile, t - profile_start).
    double profile_start = 0.0;
    double phase_offset = 0.0;
    Snapshots* snapshots = nullptr;
    int snapshot_every = 0;  // steps between snapshots; 0 disables
    int threads = 0;
};

/// Velocity Verlet from ensemble.time to t_end, parallel over atoms. The step
/// is shrunk so that t_end is hit exactly. Atoms whose force cannot be
/// evaluated or that leave the domain are frozen and flagged lost.
void integrate(Ensemble& ensemble, const DynamicsModel& model, const PhaseProfile& profile, double t_end,
               const IntegrateOptions& opts);

/// Kinetic temperature (1 / 3 kB) <m |v - u - <v>|^2> over surviving atoms,
/// optionally restricted by `include`. Throws StatisticsError below 2 atoms.
double temperature(const Ensemble& ensemble, const Vec3& frame_velocity = Vec3::Zero(), bool remove_com = true,
                   const std::vector<std::uint8_t>* include = nullptr);

/// Kinetic temperatures along three orthonormal axes (columns of `axes`).
std::array<double, 3> axis_temperatures(const Ensemble& ensemble, const Mat3& axes = Mat3::Identity(),
                                        bool remove_com = true, const std::vector<std::uint8_t>* include = nullptr);

/// Atoms per second delivered by a steady linear drive.
double mean_flux(double atoms_per_well, const PhaseProfile& profile);

struct TransportReport {
    double v_max = 0.0;  // m/s
    double T_initial = 0.0;      // atoms that arrive in the destination well
    double T_initial_all = 0.0;  // whole sampled cloud
    double T_final = 0.0;
    double deltaT = 0.0;
    double survival_fraction = 0.0;
    std::vector<std::pair<double, Vec3>> com_trajectory;  // (t, center of mass)
    std::vector<std::pair<double, double>> temperature_trace;  // (t, T)
    std::vector<std::pair<double, double>> survival_trace;     // (t, fraction not lost)
};

/// Shared setup for transport runs: the start well, the field table covering
/// the transport corridor and the frequency range along the way.
struct TransportRig {
    DriveConfig drive;
    double modulation_period = 0.0;
    double distance = 0.0;
    TrapCharacterization well;  // start well at phase 0
    double nu_fastest = 0.0;
    double nu_slowest = 0.0;
    /// Lowest saddle energy of the moving well along the way (J).
    double saddle_energy = 0.0;
    Box domain;
    std::shared_ptr<const FieldTable> table;
    std::shared_ptr<const TableModel> model;
};

struct RigOptions {
    double spacing = 5e-6;
    /// Half extent of the tabulated corridor in y and z around the track (m).
    double transverse_half_width = 100e-6;
    bool gravity = true;
    int track_points = 25;
    int threads = 0;
};

/// Builds a rig for moving the well nearest `seed` over `distance` (+x).
TransportRig make_transport_rig(const FieldEngine& engine, const DriveConfig& drive, const Vec3& seed,
                                double distance, const RigOptions& opts = {});

struct TransportOptions {
    /// Length of each averaging window in periods of the slowest trap
    /// frequency. Long windows average out the breathing of the cloud.
    double hold_periods = 15.0;
    double dt = 0.0;  // 0: 1 / (40 nu_fastest)
    int snapshots_per_hold = 120;
    SamplingOptions sampling;
    int threads = 0;
};

/// Samples the bound part of a thermal cloud at T0 (total energy below the
/// rig's saddle energy), holds, moves the well with a smoothstep of peak speed
/// v_max, holds again. Temperatures are time averages over the two hold
/// windows over the atoms that end inside the destination well, so that
/// spilled atoms do not bias deltaT. v_max = 0
/// keeps the drive frozen for two hold times instead of moving.
TransportReport transport_experiment(const TransportRig& rig, double v_max, double T0, std::size_t N,
                                     std::uint64_t seed, const TransportOptions& opts = {});

}  // namespace atomchip
