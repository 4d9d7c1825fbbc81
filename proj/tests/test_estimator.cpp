#include "doctest.h"

#include <cmath>

#include "isac/array_model.hpp"
#include "isac/estimator.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

RadarScene small_scene(int nt, int nr, int len) {
    RadarScene sc;
    sc.geometry.num_tx = nt;
    sc.geometry.num_rx = nr;
    sc.block_length = len;
    sc.target_angle = deg_to_rad(45.0);
    sc.alpha = cplx(0.6, -0.3);
    sc.doppler_hz = RadarScene::doppler_from_velocity(8.0, 2.4e9);
    sc.noise_power = 1.0;
    return sc;
}

PrecodingMatrix random_precoder(int nt, int cols, std::uint64_t seed, double power) {
    Rng rng(seed);
    CMatrix p(nt, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < nt; ++i) p(i, j) = rng.complex_normal();
    p *= std::sqrt(power) / p.norm();
    return PrecodingMatrix(p);
}

}  // namespace

TEST_CASE("QPSK blocks: alphabet, moments and determinism") {
    const int len = 4096;
    const SymbolBlock b = synth_symbols(3, len, 11);
    const double r = 1.0 / std::sqrt(2.0);
    for (int s = 0; s < 3; ++s)
        for (int l = 0; l < len; ++l) {
            CHECK(std::abs(std::abs(b.symbols(s, l).real()) - r) < 1e-15);
            CHECK(std::abs(std::abs(b.symbols(s, l).imag()) - r) < 1e-15);
        }
    for (int s = 0; s < 3; ++s) {
        const CVector row = b.symbols.row(s).transpose();
        CHECK(row.squaredNorm() / len == doctest::Approx(1.0).epsilon(1e-12));
        for (int lag : {1, 2, 7}) {
            const cplx ac = row.tail(len - lag).dot(row.head(len - lag)) / static_cast<double>(len - lag);
            CHECK(std::abs(ac) <= 3.0 / std::sqrt(static_cast<double>(len)));
        }
    }
    CHECK(synth_symbols(3, 64, 5).symbols == synth_symbols(3, 64, 5).symbols);
    CHECK(synth_symbols(3, 64, 5).symbols != synth_symbols(3, 64, 6).symbols);
}

TEST_CASE("noiseless echo is rank one along the receive steering vector") {
    RadarScene sc = small_scene(4, 5, 32);
    sc.noise_power = 1e-300;
    sc.alpha = 1.0;
    sc.doppler_hz = 0.0;
    const PrecodingMatrix pm = random_precoder(4, 3, 1, 0.1);
    const SymbolBlock blk = synth_symbols(3, 32, 2);
    const EchoBlock e = synth_echo(pm, blk, sc, 3);
    const CVector a = steering(sc.geometry, ArraySide::Tx, sc.target_angle);
    const CVector b = steering(sc.geometry, ArraySide::Rx, sc.target_angle);
    for (int l = 0; l < 32; ++l) {
        const cplx s = a.dot(pm.columns * blk.symbols.col(l));
        CHECK((e.samples.col(l) - s * b).norm() <= 1e-12);
    }
}

TEST_CASE("echo noise variance and block energy") {
    RadarScene sc = small_scene(4, 10, 10000);
    sc.noise_power = 0.5;
    const PrecodingMatrix zero(CMatrix::Zero(4, 2));
    const EchoBlock n = synth_echo(zero, synth_symbols(2, 10000, 1), sc, 9);
    CHECK(n.samples.squaredNorm() / n.samples.size() == doctest::Approx(0.5).epsilon(0.02));

    RadarScene s2 = small_scene(4, 5, 1024);
    const PrecodingMatrix pm = random_precoder(4, 3, 4, 0.1);
    const CVector a = steering(s2.geometry, ArraySide::Tx, s2.target_angle);
    const double gain = (a.adjoint() * covariance(pm) * a).real()(0, 0);
    const double expected = 1024.0 * (std::norm(s2.alpha) * 5 * gain + 5 * s2.noise_power);
    double mean = 0.0;
    const int blocks = 20;
    for (int i = 0; i < blocks; ++i) mean += synth_echo(pm, synth_symbols(3, 1024, 100 + i), s2, 200 + i).samples.squaredNorm();
    CHECK(mean / blocks == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("noiseless estimates sit on the truth") {
    RadarScene sc = small_scene(4, 5, 64);
    sc.noise_power = 1e-20;
    const PrecodingMatrix pm = random_precoder(4, 3, 5, 0.1);
    const EchoBlock e = synth_echo(pm, synth_symbols(3, 64, 6), sc, 7);
    EstimatorGrids g;
    const EstimateRecord r = estimate(e, g);
    CHECK(std::abs(r.error(0)) <= g.theta_step / 2);
    CHECK(std::abs(r.error(0)) <= 1e-8);
    CHECK(std::abs(r.error(3)) <= 1e-3);
    CHECK(std::abs(r.error(1)) <= 1e-6);
    CHECK(std::abs(r.error(2)) <= 1e-6);

    sc.doppler_hz = 0.0;
    sc.noise_power = 1e-2;
    const EstimateRecord z = estimate(synth_echo(pm, synth_symbols(3, 64, 6), sc, 8), g);
    CHECK(std::abs(z.estimate(3)) < 1.0 / (64 * sc.symbol_period));
}

TEST_CASE("estimator input checks") {
    RadarScene sc = small_scene(4, 5, 1);
    const PrecodingMatrix pm = random_precoder(4, 3, 5, 0.1);
    CHECK_THROWS_AS(estimate(synth_echo(pm, synth_symbols(3, 1, 1), sc, 1)), DomainError);
    CHECK_THROWS_AS(synth_echo(pm, synth_symbols(2, 8, 1), small_scene(4, 5, 8), 1), DimensionError);
    EstimatorGrids bad;
    bad.theta_step = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("RMSE experiment: bound ordering, trend, bias and determinism") {
    const RadarScene sc = small_scene(4, 5, 64);
    const PrecodingMatrix pm = random_precoder(4, 3, 21, 0.1);
    const std::vector<double> snr{-10.0, 0.0, 10.0};
    const auto rows = rmse_experiment(pm, sc, snr, 200, 5);
    REQUIRE(rows.size() == 12);
    for (int p = 0; p < 4; ++p) {
        CAPTURE(kParameterNames[p]);
        const RmseRow& lo = rows[p];
        const RmseRow& hi = rows[8 + p];
        CHECK(hi.rmse <= lo.rmse);
        CHECK(hi.rmse / hi.rcrb <= lo.rmse / lo.rcrb);
        // 200 trials: sampling spread of the RMSE is about 5 %
        CHECK(hi.rmse >= 0.85 * hi.rcrb);
    }
    // angle is unbiased at high SNR: mean error within 3 standard errors
    const RmseRow& th = rows[8];
    const double se = th.rmse / std::sqrt(200.0);
    CHECK(std::abs(th.mean_error) <= 3.0 * se);

    const auto serial = rmse_experiment(pm, sc, snr, 40, 5, {}, Exec::Serial);
    const auto parallel = rmse_experiment(pm, sc, snr, 40, 5, {}, Exec::Parallel);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].rmse == parallel[i].rmse);
        CHECK(serial[i].mean_error == parallel[i].mean_error);
    }
    const auto one = rmse_experiment(pm, sc, {0.0}, 1, 9);
    const auto again = rmse_experiment(pm, sc, {0.0}, 1, 9);
    CHECK(one[0].rmse == again[0].rmse);
    CHECK(one[0].trials == 1);
}
