#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "isac/array_model.hpp"
#include "isac/comm_metrics.hpp"
#include "isac/types.hpp"

namespace isac {

/// Point target seen by the monostatic array over one L-symbol block.
struct RadarScene {
    ArrayGeometry geometry;
    double target_angle = kPi / 4;
    cplx alpha{1.0, 0.0};
    double doppler_hz = 0.0;
    double symbol_period = 1e-6;
    int block_length = 1024;
    double noise_power = 1.0;

    void validate() const;
    /// Doppler shift 2 v f_c / c.
    static double doppler_from_velocity(double velocity, double carrier_hz) {
        return 2.0 * velocity * carrier_hz / kSpeedOfLight;
    }
};

/// Parameter order used throughout: theta, Re(alpha), Im(alpha), Doppler.
inline constexpr std::array<const char*, 4> kParameterNames{"theta", "alpha_re", "alpha_im", "doppler"};

struct FisherReport {
    Matrix4 fim = Matrix4::Zero();
    std::optional<Matrix4> crb;
    std::optional<Vector4> rcrb;
};

/// Raised when the FIM is singular or too ill-conditioned to invert.
class UnidentifiableError : public std::runtime_error {
public:
    UnidentifiableError(const std::string& what, Vector4 direction)
        : std::runtime_error(what), direction_(std::move(direction)) {}
    const Vector4& direction() const { return direction_; }

private:
    Vector4 direction_;
};

/// R_X = P P^H.
CMatrix covariance(const PrecodingMatrix& precoder);

/// The expectation-form FIM is linear in R_X: F_ij = tr(Q_ij R_X) with
/// Hermitian Q_ij. The model stores the ten upper-triangle Q_ij.
class FimModel {
public:
    explicit FimModel(const RadarScene& scene);

    const CMatrix& coefficient(int i, int j) const { return q_[index(i, j)]; }
    Matrix4 evaluate(const CMatrix& rx) const;
    int num_tx() const { return num_tx_; }

    /// Index sums S_q = sum_{l=1..L} l^q, q = 0,1,2.
    static std::array<double, 3> index_sums(int block_length);

private:
    static int index(int i, int j) {
        if (i > j) std::swap(i, j);
        return i * 4 - i * (i - 1) / 2 + (j - i);
    }
    int num_tx_;
    std::array<CMatrix, 10> q_;
};

/// Fisher information for (theta, alpha_re, alpha_im, F_D) given R_X.
/// Throws DimensionError on size mismatch and DomainError if R_X is not
/// Hermitian PSD within tolerance.
FisherReport fim(const CMatrix& rx, const RadarScene& scene);

/// Fills crb = fim^{-1} and rcrb = sqrt(diag(crb)). Throws
/// UnidentifiableError when the Jacobi-scaled FIM has condition number
/// above max_condition.
FisherReport crb(const FisherReport& report, double max_condition = 1e12);

/// Smallest eigenvalue of a symmetric 4x4 matrix.
double min_eigenvalue(const Matrix4& m);

struct BeampatternSpec {
    std::vector<double> grid;
    std::vector<double> desired;
    void validate() const;
};

double beampattern_gain(const CMatrix& rx, const ArrayGeometry& geometry, double angle);
double beampattern_mse(const CMatrix& rx, const ArrayGeometry& geometry, const BeampatternSpec& spec);

/// log2(1 + |alpha|^2 Nr a^H R_X a / sigma^2).
double rmi(const CMatrix& rx, const RadarScene& scene);
/// log2 det(I + H_r R_X H_r^H / sigma^2) evaluated as a determinant.
double rmi_determinant(const CMatrix& rx, const RadarScene& scene);

/// Effective radar channel alpha b(theta) a(theta)^H.
CMatrix radar_channel(const RadarScene& scene);

}  // namespace isac

namespace isac {

enum class Exec { Serial, Parallel };

/// FIM of one realized block (columns x[1..L] of an Nt x L matrix),
/// assembled from per-sample derivatives of the noiseless echo.
Matrix4 realized_fim(const RadarScene& scene, const CMatrix& x_block);

/// Mean realized FIM over blocks x[l] = S s[l], with s[l] i.i.d. unit-power
/// QPSK and S any square root of R_X (Nt x M). Deterministic under seed and
/// independent of the thread count.
Matrix4 monte_carlo_fim(const RadarScene& scene, const CMatrix& sqrt_rx, int realizations, std::uint64_t seed,
                        Exec exec = Exec::Parallel);

}  // namespace isac
