#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isac/comm_metrics.hpp"
#include "isac/radar_metrics.hpp"

namespace isac {

/// (K+1) x L unit-power QPSK symbols, common stream in row 0.
struct SymbolBlock {
    CMatrix symbols;
    int length() const { return static_cast<int>(symbols.cols()); }
};

SymbolBlock synth_symbols(int streams, int length, std::uint64_t seed);

/// Radar echo of one block. `transmit` keeps x[l] = P s[l] (Nt x L) so the
/// estimator can use the known waveform.
struct EchoBlock {
    CMatrix samples;
    CMatrix transmit;
    RadarScene truth;
    std::uint64_t noise_seed = 0;
};

/// y[l] = alpha e^{j 2 pi F_D l T} b a^H x[l] + m[l], l = 1..L, with
/// m[l] ~ CN(0, sigma_m^2 I).
EchoBlock synth_echo(const PrecodingMatrix& precoder, const SymbolBlock& block, const RadarScene& scene,
                     std::uint64_t seed);

struct EstimatorGrids {
    double theta_step = 0.1 * kPi / 180.0;  ///< MUSIC grid spacing (rad)
    double theta_min = -89.0 * kPi / 180.0;
    double theta_max = 89.0 * kPi / 180.0;
    int doppler_zero_pad = 8;

    void validate() const;
};

struct EstimateRecord {
    Vector4 estimate = Vector4::Zero();  ///< theta, alpha_re, alpha_im, F_D
    Vector4 error = Vector4::Zero();     ///< estimate - truth
    double snr_db = 0.0;
};

/// theta from MUSIC on the receive covariance, F_D from the zero-padded
/// periodogram of b^H y[l] (a^H x[l])^*, alpha by least squares. Each grid
/// peak is refined by golden-section search on the continuous spectrum
/// between its grid neighbours.
EstimateRecord estimate(const EchoBlock& echo, const EstimatorGrids& grids = {});

/// MUSIC null spectrum ||E_n^H b(theta)||^2 / ||b||^2 of a receive covariance.
double music_null_spectrum(const CMatrix& noise_subspace, const ArrayGeometry& geometry, double theta);

struct RmseRow {
    double snr_db = 0.0;
    int parameter = 0;  ///< index into kParameterNames
    double rmse = 0.0;
    double rcrb = 0.0;
    double mean_error = 0.0;
    int trials = 0;
};

/// Monte-Carlo RMSE against the RCRB at each radar SNR |alpha|^2 P / sigma_m^2.
/// Trial r uses the same symbols and unit noise at every SNR (common random
/// numbers), so trends in SNR are not masked by resampling. The result does
/// not depend on the thread count.
std::vector<RmseRow> rmse_experiment(const PrecodingMatrix& precoder, const RadarScene& scene,
                                     const std::vector<double>& snr_db, int trials, std::uint64_t seed,
                                     const EstimatorGrids& grids = {}, Exec exec = Exec::Parallel);

}  // namespace isac
