#pragma once
// Test-only reference computations, written independently of the library's
// closed forms.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "isac/radar_metrics.hpp"
#include "isac/rng.hpp"

namespace oracle {

using isac::cplx;
using isac::CMatrix;
using isac::CVector;
using isac::Matrix4;
using isac::RadarScene;

/// Noiseless echo for parameters (theta, aR, aI, FD) at sample l with input x.
inline CVector echo(const RadarScene& sc, const double xi[4], int l, const CVector& x) {
    const int nt = sc.geometry.num_tx, nr = sc.geometry.num_rx;
    const double d = sc.geometry.spacing_wavelengths;
    const double pi = 3.14159265358979323846;
    cplx ax = 0.0;
    for (int n = 0; n < nt; ++n) ax += std::exp(cplx(0.0, -2.0 * pi * d * n * std::sin(xi[0]))) * x(n);
    const cplx amp = cplx(xi[1], xi[2]) * std::exp(cplx(0.0, 2.0 * pi * xi[3] * l * sc.symbol_period)) * ax;
    CVector y(nr);
    for (int m = 0; m < nr; ++m) y(m) = amp * std::exp(cplx(0.0, 2.0 * pi * d * m * std::sin(xi[0])));
    return y;
}

/// Expectation-form FIM from finite-difference derivatives of the echo.
/// E[x x^H] = R_X is realized exactly by summing over the columns of a
/// square root of R_X (unit-power independent streams).
inline Matrix4 finite_difference_fim(const RadarScene& sc, const CMatrix& rx) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rx);
    const CMatrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const double xi0[4] = {sc.target_angle, sc.alpha.real(), sc.alpha.imag(), sc.doppler_hz};
    const double pi = 3.14159265358979323846;
    double step[4];
    step[0] = 1e-4 / (pi * std::max(sc.geometry.num_tx, sc.geometry.num_rx));
    step[1] = step[2] = 1e-3 * (1.0 + std::abs(sc.alpha));
    step[3] = 1e-3 / (2.0 * pi * sc.symbol_period * sc.block_length);
    Matrix4 f = Matrix4::Zero();
    for (int l = 1; l <= sc.block_length; ++l) {
        for (Eigen::Index k = 0; k < root.cols(); ++k) {
            const CVector x = root.col(k);
            CVector der[4];
            for (int i = 0; i < 4; ++i) {
                auto at = [&](double delta) {
                    double xi[4] = {xi0[0], xi0[1], xi0[2], xi0[3]};
                    xi[i] += delta;
                    return echo(sc, xi, l, x);
                };
                const double h = step[i];
                // fourth-order central difference
                der[i] = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
            }
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) f(i, j) += (der[i].adjoint() * der[j])(0, 0).real();
        }
    }
    return f * (2.0 / sc.noise_power);
}

inline double rel_frobenius(const Matrix4& a, const Matrix4& ref) { return (a - ref).norm() / ref.norm(); }

/// Random PSD matrix of the given rank.
inline CMatrix random_psd(int n, int rank, isac::Rng& rng, double scale = 1.0) {
    CMatrix p(n, rank);
    for (int j = 0; j < rank; ++j)
        for (int i = 0; i < n; ++i) p(i, j) = rng.complex_normal(scale);
    return p * p.adjoint();
}

/// Small random scene (Nt, Nr in 2..4, L in 4..16).
inline RadarScene random_small_scene(isac::Rng& rng) {
    RadarScene sc;
    sc.geometry.num_tx = 2 + static_cast<int>(rng.bits() % 3);
    sc.geometry.num_rx = 2 + static_cast<int>(rng.bits() % 3);
    sc.geometry.spacing_wavelengths = 0.5;
    sc.target_angle = rng.uniform(-1.2, 1.2);
    sc.alpha = std::polar(rng.uniform(0.3, 2.0), rng.uniform(0.0, 6.283));
    sc.symbol_period = 1e-6;
    sc.block_length = 4 + static_cast<int>(rng.bits() % 13);
    sc.doppler_hz = rng.uniform(-2e4, 2e4);
    sc.noise_power = rng.uniform(0.2, 3.0);
    return sc;
}

}  // namespace oracle
