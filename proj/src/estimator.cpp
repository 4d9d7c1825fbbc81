#include "isac/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/FFT>

#include "isac/array_model.hpp"
#include "isac/rng.hpp"

namespace isac {

namespace {

/// Minimizes f on [lo, hi] by golden-section search.
template <class F>
double golden_min(F&& f, double lo, double hi, double tol) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

cplx doppler_phase(double fd, int l, double period) {
    return std::polar(1.0, 2.0 * kPi * fd * l * period);
}

}  // namespace

void EstimatorGrids::validate() const {
    if (!(theta_step > 0.0)) throw ConfigError("theta grid step must be positive");
    if (!(theta_min > -kPi / 2 && theta_max < kPi / 2 && theta_min < theta_max))
        throw ConfigError("theta grid must lie inside (-pi/2, pi/2)");
    if (doppler_zero_pad < 1) throw ConfigError("Doppler zero padding must be at least 1");
}

SymbolBlock synth_symbols(int streams, int length, std::uint64_t seed) {
    if (streams < 1 || length < 1) throw DimensionError("symbol block needs at least one stream and one sample");
    static const double r = 1.0 / std::sqrt(2.0);
    Rng rng(seed);
    SymbolBlock b;
    b.symbols.resize(streams, length);
    for (int l = 0; l < length; ++l)
        for (int s = 0; s < streams; ++s) {
            const auto bits = rng.bits();
            b.symbols(s, l) = cplx((bits & 1) ? r : -r, (bits & 2) ? r : -r);
        }
    return b;
}

EchoBlock synth_echo(const PrecodingMatrix& precoder, const SymbolBlock& block, const RadarScene& scene,
                     std::uint64_t seed) {
    scene.validate();
    if (precoder.num_antennas() != scene.geometry.num_tx)
        throw DimensionError("precoder has " + std::to_string(precoder.num_antennas()) + " rows but the array has " +
                             std::to_string(scene.geometry.num_tx) + " transmit antennas");
    if (block.symbols.rows() != precoder.columns.cols())
        throw DimensionError("symbol block has " + std::to_string(block.symbols.rows()) + " streams, precoder has " +
                             std::to_string(precoder.columns.cols()));
    const CVector a = steering(scene.geometry, ArraySide::Tx, scene.target_angle);
    const CVector b = steering(scene.geometry, ArraySide::Rx, scene.target_angle);
    EchoBlock e;
    e.truth = scene;
    e.noise_seed = seed;
    e.transmit = precoder.columns * block.symbols;
    const int len = block.length();
    const int nr = scene.geometry.num_rx;
    e.samples.resize(nr, len);
    Rng rng(seed);
    for (int l = 1; l <= len; ++l) {
        const cplx amp = scene.alpha * doppler_phase(scene.doppler_hz, l, scene.symbol_period) *
                         a.dot(e.transmit.col(l - 1));  // dot() conjugates a
        for (int m = 0; m < nr; ++m) e.samples(m, l - 1) = amp * b(m) + rng.complex_normal(scene.noise_power);
    }
    return e;
}

double music_null_spectrum(const CMatrix& noise_subspace, const ArrayGeometry& geometry, double theta) {
    const CVector b = steering(geometry, ArraySide::Rx, theta);
    return (noise_subspace.adjoint() * b).squaredNorm() / b.squaredNorm();
}

EstimateRecord estimate(const EchoBlock& echo, const EstimatorGrids& grids) {
    grids.validate();
    const RadarScene& sc = echo.truth;
    const ArrayGeometry& geo = sc.geometry;
    const int len = static_cast<int>(echo.samples.cols());
    const int nr = static_cast<int>(echo.samples.rows());
    if (len < 2) throw DomainError("need at least two snapshots for a sample covariance");
    if (nr < 2) throw DomainError("MUSIC needs at least two receive antennas");
    if (nr != geo.num_rx || echo.transmit.cols() != len || echo.transmit.rows() != geo.num_tx)
        throw DimensionError("echo block does not match its scene");

    // (1) angle: MUSIC with a one-dimensional signal subspace
    const CMatrix cov = echo.samples * echo.samples.adjoint() / static_cast<double>(len);
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(cov);
    const CMatrix en = es.eigenvectors().leftCols(nr - 1);
    auto null_at = [&](double th) { return music_null_spectrum(en, geo, th); };
    const int points = static_cast<int>(std::floor((grids.theta_max - grids.theta_min) / grids.theta_step)) + 1;
    int best = 0;
    double best_val = INFINITY;
    for (int i = 0; i < points; ++i) {
        const double v = null_at(grids.theta_min + i * grids.theta_step);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    const double lo = grids.theta_min + std::max(0, best - 1) * grids.theta_step;
    const double hi = grids.theta_min + std::min(points - 1, best + 1) * grids.theta_step;
    const double theta = golden_min(null_at, lo, hi, 1e-13);

    // (2) Doppler: periodogram of the matched scalar sequence
    const CVector a = steering(geo, ArraySide::Tx, theta);
    const CVector b = steering(geo, ArraySide::Rx, theta);
    CVector ax(len), seq(len);
    for (int l = 0; l < len; ++l) {
        ax(l) = a.dot(echo.transmit.col(l));
        seq(l) = b.dot(echo.samples.col(l)) * std::conj(ax(l));
    }
    const int nfft = grids.doppler_zero_pad * len;
    std::vector<cplx> padded(static_cast<std::size_t>(nfft), cplx(0.0)), spec;
    // sample l (1-based) sits at index l - 1; the one-sample shift only rotates the phase
    for (int l = 0; l < len; ++l) padded[static_cast<std::size_t>(l)] = seq(l);
    Eigen::FFT<double> fft;
    fft.fwd(spec, padded);
    int peak = 0;
    for (int k = 1; k < nfft; ++k)
        if (std::norm(spec[static_cast<std::size_t>(k)]) > std::norm(spec[static_cast<std::size_t>(peak)])) peak = k;
    const double period = sc.symbol_period;
    const double bin = 1.0 / (nfft * period);
    const double f0 = (peak <= nfft / 2 ? peak : peak - nfft) * bin;
    auto neg_power = [&](double f) {
        cplx acc = 0.0;
        for (int l = 1; l <= len; ++l) acc += seq(l - 1) * std::conj(doppler_phase(f, l, period));
        return -std::norm(acc);
    };
    const double doppler = golden_min(neg_power, f0 - bin, f0 + bin, 1e-12 * bin * nfft);

    // (3) complex amplitude by least squares
    cplx num = 0.0;
    double den = 0.0;
    for (int l = 1; l <= len; ++l) {
        const cplx zs = doppler_phase(doppler, l, period) * ax(l - 1);
        num += std::conj(zs) * b.dot(echo.samples.col(l - 1));
        den += std::norm(zs) * b.squaredNorm();
    }
    const cplx alpha = den > 0.0 ? num / den : cplx(0.0);

    EstimateRecord rec;
    rec.estimate << theta, alpha.real(), alpha.imag(), doppler;
    const Vector4 truth(sc.target_angle, sc.alpha.real(), sc.alpha.imag(), sc.doppler_hz);
    rec.error = rec.estimate - truth;
    return rec;
}

std::vector<RmseRow> rmse_experiment(const PrecodingMatrix& precoder, const RadarScene& scene,
                                     const std::vector<double>& snr_db, int trials, std::uint64_t seed,
                                     const EstimatorGrids& grids, Exec exec) {
    if (trials < 1) throw ConfigError("need at least one trial");
    if (snr_db.empty()) throw ConfigError("SNR list is empty");
    grids.validate();
    const double power = precoder.total_power();
    if (!(power > 0.0)) throw DomainError("precoder has zero power");
    const cplx phase = std::abs(scene.alpha) > 0.0 ? scene.alpha / std::abs(scene.alpha) : cplx(1.0);
    const auto ns = snr_db.size();

    std::vector<RadarScene> scenes(ns);
    std::vector<Vector4> rcrb(ns);
    const CMatrix rx = covariance(precoder);
    for (std::size_t i = 0; i < ns; ++i) {
        scenes[i] = scene;
        scenes[i].alpha = phase * std::sqrt(db_to_linear(snr_db[i]) * scene.noise_power / power);
        rcrb[i] = *crb(fim(rx, scenes[i])).rcrb;
    }

    std::vector<Vector4> errors(static_cast<std::size_t>(trials) * ns);
    auto run_trial = [&](int r) {
        const auto ur = static_cast<std::uint64_t>(r);
        const SymbolBlock blk = synth_symbols(static_cast<int>(precoder.columns.cols()), scene.block_length,
                                              derive_seed(seed, {ur, 0}));
        const std::uint64_t noise = derive_seed(seed, {ur, 1});
        for (std::size_t i = 0; i < ns; ++i)
            errors[static_cast<std::size_t>(r) * ns + i] = estimate(synth_echo(precoder, blk, scenes[i], noise), grids).error;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < trials; ++r) run_trial(r);
    } else {
        for (int r = 0; r < trials; ++r) run_trial(r);
    }

    std::vector<RmseRow> rows;
    for (std::size_t i = 0; i < ns; ++i) {
        Vector4 sq = Vector4::Zero(), mean = Vector4::Zero();
        for (int r = 0; r < trials; ++r) {
            const Vector4& e = errors[static_cast<std::size_t>(r) * ns + i];
            sq += e.cwiseAbs2();
            mean += e;
        }
        for (int p = 0; p < 4; ++p) {
            RmseRow row;
            row.snr_db = snr_db[i];
            row.parameter = p;
            row.rmse = std::sqrt(sq(p) / trials);
            row.rcrb = rcrb[i](p);
            row.mean_error = mean(p) / trials;
            row.trials = trials;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace isac
