#include "isac/array_model.hpp"

#include <cmath>

namespace isac {

namespace {

void check_angle(double angle) {
    if (!std::isfinite(angle) || !(angle > -kPi / 2) || !(angle < kPi / 2)) {
        throw DomainError("steering angle must lie in (-pi/2, pi/2), got " + std::to_string(angle));
    }
}

}  // namespace

void ArrayGeometry::validate() const {
    if (num_tx < 1 || num_rx < 1) throw ConfigError("array needs at least one tx and one rx element");
    if (!(spacing_wavelengths > 0.0) || !std::isfinite(spacing_wavelengths))
        throw ConfigError("element spacing must be positive");
}

CVector ula_steering(int elements, double spacing, double angle) {
    check_angle(angle);
    CVector a(elements);
    const double phase_step = 2.0 * kPi * spacing * std::sin(angle);
    for (int n = 0; n < elements; ++n) a(n) = std::polar(1.0, phase_step * n);
    return a;
}

CVector ula_steering_derivative(int elements, double spacing, double angle) {
    check_angle(angle);
    CVector d(elements);
    const double phase_step = 2.0 * kPi * spacing * std::sin(angle);
    const double rate = 2.0 * kPi * spacing * std::cos(angle);
    for (int n = 0; n < elements; ++n) d(n) = cplx(0.0, rate * n) * std::polar(1.0, phase_step * n);
    return d;
}

CVector steering(const ArrayGeometry& geometry, ArraySide side, double angle) {
    return ula_steering(geometry.size(side), geometry.spacing_wavelengths, angle);
}

CVector steering_derivative(const ArrayGeometry& geometry, ArraySide side, double angle) {
    return ula_steering_derivative(geometry.size(side), geometry.spacing_wavelengths, angle);
}

}  // namespace isac
