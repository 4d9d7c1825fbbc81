#pragma once

#include "isac/types.hpp"

namespace isac {

enum class ArraySide { Tx, Rx };

/// Co-located monostatic ULA pair sharing one element spacing.
struct ArrayGeometry {
    int num_tx = 8;
    int num_rx = 9;
    double spacing_wavelengths = 0.5;

    void validate() const;
    int size(ArraySide side) const { return side == ArraySide::Tx ? num_tx : num_rx; }
};

/// Broadside-referenced steering vector, phase reference at element 0:
/// entry n = exp(j 2 pi d n sin(angle)). Throws DomainError unless
/// angle is in the open interval (-pi/2, pi/2).
CVector steering(const ArrayGeometry& geometry, ArraySide side, double angle);

/// d/d(angle) of steering().
CVector steering_derivative(const ArrayGeometry& geometry, ArraySide side, double angle);

/// Steering vector of an N-element ULA, independent of any geometry object.
CVector ula_steering(int elements, double spacing, double angle);
CVector ula_steering_derivative(int elements, double spacing, double angle);

}  // namespace isac
