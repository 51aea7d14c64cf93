#include "atomchip/constants.hpp"

#include <cmath>

#include "atomchip/errors.hpp"

namespace atomchip {

void AtomState::validate() const {
    if (!(gf_mf > 0.0) || !std::isfinite(gf_mf)) {
        throw DomainError("atom gF*mF must be positive (weak-field seeker)");
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw DomainError("atom mass must be positive");
    }
}

double recoil_frequency(const AtomState& atom, double wavelength) {
    if (!(wavelength > 0.0)) {
        throw DomainError("recoil_frequency: wavelength must be positive");
    }
    if (!(atom.mass > 0.0)) {
        throw DomainError("recoil_frequency: mass must be positive");
    }
    return PhysicalConstants::h / (2.0 * atom.mass * wavelength * wavelength);
}

}  // namespace atomchip
