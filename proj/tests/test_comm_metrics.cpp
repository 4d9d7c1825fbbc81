#include "doctest.h"

#include <cmath>

#include "isac/comm_metrics.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

PrecodingMatrix random_precoder(int nt, int streams, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    CMatrix p(nt, streams + 1);
    for (int j = 0; j < p.cols(); ++j)
        for (int i = 0; i < nt; ++i) p(i, j) = rng.complex_normal(scale);
    return PrecodingMatrix(p);
}

// Second implementation: explicit inner products and loops.
double sinr_oracle_gain(const ChannelSet& ch, const PrecodingMatrix& p, int user, int column) {
    cplx acc = 0.0;
    for (int n = 0; n < ch.num_antennas(); ++n) acc += std::conj(ch.h(n, user)) * p.columns(n, column);
    return acc.real() * acc.real() + acc.imag() * acc.imag();
}

}  // namespace

TEST_CASE("single user, unit SNR gives one bit") {
    ChannelSet ch;
    ch.h = CMatrix::Zero(2, 1);
    ch.h(0, 0) = 1.0;
    ch.noise_power = 1.0;
    CMatrix p = CMatrix::Zero(2, 2);
    p(0, 1) = 1.0;
    const auto r = rsma_rates(ch, PrecodingMatrix(p));
    CHECK(r.private_rate(0) == doctest::Approx(1.0));
    CHECK(r.common(0) == doctest::Approx(0.0));
    CHECK(sdma_rates(ch, PrecodingMatrix(p))(0) == doctest::Approx(1.0));
}

TEST_CASE("orthogonal channels with matched privates decouple") {
    ChannelSet ch;
    ch.h = CMatrix::Identity(3, 3) * 2.0;
    ch.noise_power = 0.5;
    CMatrix p = CMatrix::Zero(3, 4);
    p.rightCols(3) = CMatrix::Identity(3, 3) * cplx(0.0, 1.5);
    const auto r = rsma_rates(ch, PrecodingMatrix(p));
    for (int k = 0; k < 3; ++k) CHECK(r.private_rate(k) == doctest::Approx(std::log2(1.0 + 4.0 * 2.25 / 0.5)));
}

TEST_CASE("random K=3 instance matches the loop oracle") {
    const auto ch = rayleigh_channels(3, 4, 21, 0.3);
    const auto p = random_precoder(4, 3, 22);
    const auto r = rsma_rates(ch, p);
    for (int k = 0; k < 3; ++k) {
        double interference = 0.0;
        for (int i = 0; i < 3; ++i) interference += sinr_oracle_gain(ch, p, k, i + 1);
        const double rc = std::log2(1.0 + sinr_oracle_gain(ch, p, k, 0) / (interference + 0.3));
        const double own = sinr_oracle_gain(ch, p, k, k + 1);
        const double rp = std::log2(1.0 + own / (interference - own + 0.3));
        CHECK(std::abs(r.common(k) - rc) < 1e-10);
        CHECK(std::abs(r.private_rate(k) - rp) < 1e-10);
    }
    // SDMA is the p_c = 0 special case and does not depend on p_c
    PrecodingMatrix off = p;
    off.common().setZero();
    CHECK((sdma_rates(ch, p) - rsma_rates(ch, off).private_rate).norm() == 0.0);
}

TEST_CASE("multicast private rate is the group minimum") {
    const auto ch0 = rayleigh_channels(4, 2, 5, 0.1);
    ChannelSet ch = ch0;
    ch.groups = {{0, 2}, {1, 3}};
    const auto p = random_precoder(2, 2, 6);
    const auto r = rsma_rates(ch, p);
    for (const auto& g : ch.groups) {
        const double m = std::min(r.member_private(g[0]), r.member_private(g[1]));
        for (int u : g) {
            CHECK(r.private_rate(u) == m);
            CHECK(r.private_rate(u) <= r.member_private(u));
        }
    }
    // member rate of user 2 with stream 0, interference from stream 1 only
    const double own = sinr_oracle_gain(ch, p, 2, 1);
    const double other = sinr_oracle_gain(ch, p, 2, 2);
    CHECK(r.member_private(2) == doctest::Approx(std::log2(1.0 + own / (other + 0.1))));
}

TEST_CASE("dimension errors") {
    const auto ch = rayleigh_channels(3, 4, 1);
    CHECK_THROWS_AS(rsma_rates(ch, random_precoder(3, 3, 1)), DimensionError);
    CHECK_THROWS_AS(rsma_rates(ch, random_precoder(4, 2, 1)), DimensionError);
    CHECK_THROWS_AS(noma_rates(ch, random_precoder(4, 3, 1), {0, 1}), DimensionError);
    CHECK_THROWS_AS(noma_rates(ch, random_precoder(4, 3, 1), {0, 1, 1}), DimensionError);
}

TEST_CASE("NOMA with one user is the single-user rate") {
    const auto ch = rayleigh_channels(1, 3, 2, 0.2);
    const auto p = random_precoder(3, 1, 3);
    const RVector r = noma_rates(ch, p, {0});
    CHECK(r(0) == doctest::Approx(std::log2(1.0 + sinr_oracle_gain(ch, p, 0, 1) / 0.2)));
}

TEST_CASE("NOMA with aligned degraded channels") {
    ChannelSet ch;
    ch.h.resize(2, 2);
    ch.h.col(0) << cplx(1.0, 0.5), cplx(-0.3, 0.2);
    ch.h.col(1) = 2.0 * ch.h.col(0);
    ch.noise_power = 0.4;
    const auto p = random_precoder(2, 2, 9);
    const RVector r = noma_rates(ch, p, {0, 1});
    // stream at position 0 (user 0): both users decode it, user 1 inside the min
    const double g10 = sinr_oracle_gain(ch, p, 0, 1), g20 = sinr_oracle_gain(ch, p, 0, 2);
    const double g11 = sinr_oracle_gain(ch, p, 1, 1), g21 = sinr_oracle_gain(ch, p, 1, 2);
    const double at_user0 = std::log2(1.0 + g10 / (g20 + 0.4));
    const double at_user1 = std::log2(1.0 + g11 / (g21 + 0.4));
    CHECK(r(0) == doctest::Approx(std::min(at_user0, at_user1)));
    // the stronger user sees the same SINR scaled by 4 in both terms; with
    // noise it is at least as good, so user 0's own decode limits the rate
    CHECK(at_user1 >= at_user0 - 1e-12);
    CHECK(r(0) == doctest::Approx(at_user0));
    CHECK(r(1) == doctest::Approx(std::log2(1.0 + g21 / 0.4)));
}

TEST_CASE("two-user NOMA equals RSMA under the common/private mapping") {
    const auto ch = rayleigh_channels(2, 3, 31, 0.2);
    const auto q = random_precoder(3, 2, 32);
    // NOMA: stream of user 0 decoded first, then user 1
    const RVector noma = noma_rates(ch, q, {0, 1});
    // RSMA encoding: W1 -> common, W2 -> private 2, private 1 off
    CMatrix cols = CMatrix::Zero(3, 3);
    cols.col(0) = q.columns.col(1);
    cols.col(2) = q.columns.col(2);
    const auto rs = rsma_rates(ch, PrecodingMatrix(cols));
    const double user1 = rs.common.minCoeff();  // C_1 = min_k R_c,k, C_2 = 0
    CHECK(noma(0) == doctest::Approx(user1).epsilon(1e-12));
    CHECK(noma(1) == doctest::Approx(rs.private_rate(1)).epsilon(1e-12));
}

TEST_CASE("ascending strength order") {
    ChannelSet ch;
    ch.h.resize(1, 3);
    ch.h << cplx(3, 0), cplx(1, 0), cplx(2, 0);
    CHECK(ascending_strength_order(ch) == std::vector<int>{1, 2, 0});
}

TEST_CASE("MFR / WSR / EE arithmetic") {
    auto r = make_rate_report(RVector::Constant(2, 5.0), (RVector(2) << 2, 4).finished(), RVector::Zero(2));
    CHECK(mfr(r) == 2.0);
    CHECK(wsr(r, RVector::Ones(2)) == 6.0);
    auto r2 = make_rate_report(RVector::Constant(2, 5.0), (RVector(2) << 2, 4).finished(), (RVector(2) << 1, 0).finished());
    CHECK(mfr(r2) == 3.0);
    CMatrix p = CMatrix::Zero(2, 3);
    p(0, 1) = 1.0;
    p(1, 2) = 1.0;
    CHECK(ee(r, PrecodingMatrix(p), 1.0, 8.0) == doctest::Approx(0.6));
    CHECK_THROWS(make_rate_report(RVector::Constant(2, 1.0), RVector::Zero(2), RVector::Constant(2, 0.6)));
    CHECK_THROWS_AS(wsr(r, (RVector(2) << -1, 1).finished()), DomainError);
    CHECK_THROWS_AS(ee(r, PrecodingMatrix(p), 0.0, 1.0), DomainError);
}

TEST_CASE("interference monotonicity and phase invariance") {
    const auto ch = rayleigh_channels(3, 4, 40, 0.1);
    const auto p = random_precoder(4, 3, 41);
    const auto base = rsma_rates(ch, p);
    for (int k = 0; k < 3; ++k) {
        PrecodingMatrix louder = p;
        for (int i = 0; i < 3; ++i)
            if (i != k) louder.private_stream(i) *= 1.7;
        CHECK(rsma_rates(ch, louder).private_rate(k) <= base.private_rate(k) + 1e-14);
    }
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        PrecodingMatrix rot = p;
        for (int j = 0; j < rot.columns.cols(); ++j) rot.columns.col(j) *= std::polar(1.0, rng.uniform(0, 6.28));
        const auto r = rsma_rates(ch, rot);
        CHECK((r.common - base.common).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((r.private_rate - base.private_rate).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("max-min common split matches a bisection oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + static_cast<int>(rng.bits() % 6);
        RVector rp(k);
        for (int i = 0; i < k; ++i) rp(i) = rng.uniform(0.0, 5.0);
        const double budget = rng.uniform(0.0, 4.0);
        const RVector c = max_min_common_split(budget, rp);
        CHECK((c.array() >= 0.0).all());
        CHECK(c.sum() == doctest::Approx(budget).epsilon(1e-12));
        double lo = 0.0, hi = 20.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = (lo + hi) / 2;
            double need = 0.0;
            for (int i = 0; i < k; ++i) need += std::max(0.0, mid - rp(i));
            (need > budget ? hi : lo) = mid;
        }
        CHECK((c + rp).minCoeff() == doctest::Approx(lo).epsilon(1e-9));
    }
    CHECK(max_min_common_split(0.0, RVector::Ones(3)).isZero());
}
