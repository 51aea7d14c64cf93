#pragma once

#include <functional>

#include "atomchip/field.hpp"

namespace atomchip {

/// Scalar potential energy U(r) in joules that the trap analysis works on.
class Landscape {
public:
    virtual ~Landscape() = default;

    /// Throws SingularityError where the potential is undefined.
    [[nodiscard]] virtual double energy(const Vec3& point) const = 0;
    [[nodiscard]] virtual double mass() const = 0;
    /// Energy per tesla of |B|; converts energy differences into field differences.
    [[nodiscard]] virtual double moment() const = 0;
    /// Finite-difference step (m).
    [[nodiscard]] virtual double fd_step() const = 0;
    /// |B| at a point (T). Defaults to energy / moment.
    [[nodiscard]] virtual double field_magnitude(const Vec3& point) const { return energy(point) / moment(); }
};

/// Potential of a chip scene at fixed currents.
class SceneLandscape final : public Landscape {
public:
    SceneLandscape(const FieldEngine& engine, CurrentSet currents)
        : engine_(&engine), currents_(std::move(currents)) {}

    [[nodiscard]] double energy(const Vec3& p) const override { return engine_->potential(currents_, p); }
    [[nodiscard]] double mass() const override { return engine_->atom().mass; }
    [[nodiscard]] double moment() const override { return engine_->atom().moment(); }
    [[nodiscard]] double fd_step() const override { return engine_->scene().fd_step; }
    [[nodiscard]] double field_magnitude(const Vec3& p) const override {
        return engine_->total_field(currents_, p).magnitude;
    }
    [[nodiscard]] const CurrentSet& currents() const { return currents_; }
    [[nodiscard]] const FieldEngine& engine() const { return *engine_; }

private:
    const FieldEngine* engine_;
    CurrentSet currents_;
};

/// Arbitrary potential supplied as a callable, mainly for analytic test oracles.
class FunctionLandscape final : public Landscape {
public:
    FunctionLandscape(std::function<double(const Vec3&)> fn, double mass, double moment = PhysicalConstants::muB,
                      double fd_step = 0.05e-6)
        : fn_(std::move(fn)), mass_(mass), moment_(moment), step_(fd_step) {}

    [[nodiscard]] double energy(const Vec3& p) const override { return fn_(p); }
    [[nodiscard]] double mass() const override { return mass_; }
    [[nodiscard]] double moment() const override { return moment_; }
    [[nodiscard]] double fd_step() const override { return step_; }

private:
    std::function<double(const Vec3&)> fn_;
    double mass_;
    double moment_;
    double step_;
};

}  // namespace atomchip
