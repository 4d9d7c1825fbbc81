#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "isac/optimizer.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

DesignProblem desk_problem(int nt, int k, std::uint64_t seed, Strategy s, double lambda = 0.0) {
    DesignProblem p;
    p.channels = rayleigh_channels(k, nt, seed, 1e-3);
    p.scene.geometry.num_tx = nt;
    p.scene.geometry.num_rx = nt + 1;
    p.scene.block_length = 64;
    p.scene.doppler_hz = RadarScene::doppler_from_velocity(8.0, 2.4e9);
    p.scene.noise_power = 1.0;
    p.scene.alpha = std::sqrt(0.01 * p.scene.noise_power / 0.1);  // radar SNR -20 dB at P = 0.1 W
    p.total_power = 0.1;
    p.strategy = s;
    p.lambda = lambda;
    return p;
}

SolveOptions quick() {
    SolveOptions o;
    o.randomization_candidates = 20;
    return o;
}

}  // namespace

TEST_CASE("single antenna single user reaches the scalar capacity") {
    DesignProblem p;
    p.channels.h = CMatrix::Ones(1, 1);
    p.channels.noise_power = 1.0;
    p.scene.geometry.num_tx = 1;
    p.scene.geometry.num_rx = 2;
    p.scene.block_length = 16;
    p.total_power = 1.0;
    for (Strategy s : {Strategy::RSMA, Strategy::SDMA, Strategy::NOMA}) {
        CAPTURE(to_string(s));
        p.strategy = s;
        const DesignSolution sol = solve(p, quick());
        REQUIRE(sol.ok());
        CHECK(sol.mfr == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(sol.precoder.antenna_powers()(0) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("RSMA objective is never below SDMA") {
    for (std::uint64_t seed : {1, 2, 3}) {
        for (double lam : {0.0, 1.0}) {
            CAPTURE(seed);
            CAPTURE(lam);
            const auto rs = solve(desk_problem(4, 2, seed, Strategy::RSMA, lam), quick());
            const auto sd = solve(desk_problem(4, 2, seed, Strategy::SDMA, lam), quick());
            REQUIRE(rs.ok());
            REQUIRE(sd.ok());
            CHECK(rs.objective >= sd.objective - 1e-3);
        }
    }
}

TEST_CASE("tiny instance matches an exhaustive grid over real precoders") {
    // Nt = 2, K = 1, broadside target and a real channel: every row of the
    // precoder is (p_c,n, p_p,n) on a circle of radius sqrt(P/2).
    DesignProblem p = desk_problem(2, 1, 0, Strategy::RSMA, 0.5);
    p.channels.h = CMatrix(2, 1);
    p.channels.h << 1.0, 0.4;
    p.channels.noise_power = 1e-2;
    p.scene.target_angle = 0.0;
    const double scale = p.fim_scale();
    const double amp = std::sqrt(p.total_power / 2.0);
    const FimModel model(p.scene);

    const int steps = static_cast<int>(std::ceil(2.0 * kPi / 0.01));
    double best = -INFINITY;
    for (int a = 0; a < steps; ++a) {
        for (int b = 0; b < steps; ++b) {
            const double pa = 0.01 * a, pb = 0.01 * b;
            const double c0 = amp * std::cos(pa), c1 = amp * std::cos(pb);
            const double q0 = amp * std::sin(pa), q1 = amp * std::sin(pb);
            // one user: common + private collapse to log2(1 + total received power / noise)
            const double gc = std::pow(c0 * 1.0 + c1 * 0.4, 2), gp = std::pow(q0 * 1.0 + q1 * 0.4, 2);
            const double rate = std::log2(1.0 + (gc + gp) / p.channels.noise_power);
            CMatrix rx(2, 2);
            rx << c0 * c0 + q0 * q0, c0 * c1 + q0 * q1, c0 * c1 + q0 * q1, c1 * c1 + q1 * q1;
            const double t = min_eigenvalue(model.evaluate(rx));
            best = std::max(best, rate + p.lambda * t / scale);
        }
    }
    const DesignSolution sol = solve(p, quick());
    REQUIRE(sol.ok());
    CHECK(std::abs(sol.objective - best) <= 0.02 * std::abs(best));
}

TEST_CASE("SCA surrogate is nondecreasing and solutions keep per-antenna power") {
    for (Strategy s : {Strategy::RSMA, Strategy::SDMA, Strategy::NOMA}) {
        for (std::uint64_t seed : {4, 5}) {
            CAPTURE(to_string(s));
            CAPTURE(seed);
            const DesignSolution sol = solve(desk_problem(4, 3, seed, s, 0.5), quick());
            REQUIRE(sol.ok());
            const auto& f = sol.diagnostics.surrogate_objective;
            REQUIRE(!f.empty());
            for (std::size_t i = 1; i < f.size(); ++i) CHECK(f[i] >= f[i - 1] - 1e-8);
            CHECK(sol.diagnostics.power_residual <= 1e-6);
            const double target = sol.precoder.total_power() / sol.precoder.num_antennas();
            CHECK(target == doctest::Approx(0.1 / 4).epsilon(1e-6));
            // decodability and FIM bound of the reported point
            if (sol.rates.common_rates.size() > 0)
                CHECK(sol.common_split.sum() <= sol.rates.common_rates.minCoeff() + 1e-6);
            CHECK((sol.common_split.array() >= 0.0).all());
            CHECK(min_eigenvalue(sol.fisher.fim) >= sol.t - 1e-6 * std::abs(sol.t));
        }
    }
}

TEST_CASE("lambda sweep trades rate for Fisher information") {
    const std::vector<double> lambdas{0.0, 0.3, 1.0, 3.0, 10.0};
    const DesignProblem p = desk_problem(4, 2, 7, Strategy::RSMA);
    const auto sols = sweep_lambda(p, lambdas, quick());
    REQUIRE(sols.size() == lambdas.size());
    const double scale = p.fim_scale();
    for (std::size_t i = 1; i < sols.size(); ++i) {
        REQUIRE(sols[i].ok());
        CHECK(sols[i].mfr <= sols[i - 1].mfr + 1e-3);
        CHECK(sols[i].t / scale >= sols[i - 1].t / scale - 1e-3);
    }
}

TEST_CASE("very large lambda approaches the radar-only optimum") {
    DesignProblem p = desk_problem(4, 2, 8, Strategy::SDMA, 1e4);
    const double bound = radar_only_bound(p);
    const DesignSolution sol = solve(p, quick());
    REQUIRE(sol.ok());
    CHECK(sol.t <= bound * (1.0 + 1e-6));
    CHECK(sol.t >= 0.99 * bound);
    CHECK(bound >= p.fim_scale() * (1.0 - 1e-9));  // isotropic transmission is feasible
}

TEST_CASE("common channel phase leaves MFR and t unchanged") {
    DesignProblem p = desk_problem(4, 2, 9, Strategy::RSMA, 0.5);
    const DesignSolution a = solve(p, quick());
    p.channels.h *= std::polar(1.0, 1.234);
    const DesignSolution b = solve(p, quick());
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    CHECK(b.mfr == doctest::Approx(a.mfr).epsilon(1e-3));
    CHECK(b.t == doctest::Approx(a.t).epsilon(1e-3));
}

TEST_CASE("two-user NOMA equals RSMA restricted to the NOMA stream mapping") {
    for (std::uint64_t seed : {10, 11}) {
        CAPTURE(seed);
        DesignProblem noma = desk_problem(4, 2, seed, Strategy::NOMA, 0.5);
        const auto order = ascending_strength_order(noma.channels);
        const int weak = order[0], strong = order[1];
        DesignProblem rs = noma;
        rs.strategy = Strategy::RSMA;
        StreamMapping m;
        m.private_enabled.assign(2, false);
        m.private_enabled[strong] = true;
        m.common_users = {weak};
        rs.mapping = m;
        const auto a = solve(noma, quick());
        const auto b = solve(rs, quick());
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(a.diagnostics.lifted_value == doctest::Approx(b.diagnostics.lifted_value).epsilon(1e-4));
    }
}

TEST_CASE("linear-program common split matches the closed form") {
    const BarrierSolver backend;
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 1 + trial % 4;
        RVector priv(k);
        for (int i = 0; i < k; ++i) priv(i) = rng.uniform(0.0, 4.0);
        const double budget = rng.uniform(0.0, 5.0);
        std::vector<int> all(k);
        for (int i = 0; i < k; ++i) all[i] = i;
        const RVector lp = lp_common_split(budget, priv, all, backend);
        const RVector cf = max_min_common_split(budget, priv);
        CHECK(lp.sum() <= budget + 1e-9);
        CHECK((lp.array() >= 0.0).all());
        CHECK((lp + priv).minCoeff() == doctest::Approx((cf + priv).minCoeff()).epsilon(1e-7));
    }
    // users outside the allowed set get nothing
    RVector priv(3);
    priv << 0.5, 2.0, 3.0;
    const RVector lp = lp_common_split(1.0, priv, {1, 2}, backend);
    CHECK(lp(0) == 0.0);
}

TEST_CASE("evaluate_rates agrees with the direct rate formulas") {
    const DesignProblem rs = desk_problem(4, 3, 13, Strategy::RSMA);
    const PrecodingMatrix pm = maximum_ratio_precoder(rs);
    const RateReport rep = evaluate_rates(rs, pm);
    const StreamRates direct = rsma_rates(rs.channels, pm);
    CHECK((rep.common_rates - direct.common).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((rep.private_rates - direct.private_rate).cwiseAbs().maxCoeff() <= 1e-12);

    DesignProblem no = rs;
    no.strategy = Strategy::NOMA;
    const PrecodingMatrix pn = maximum_ratio_precoder(no);
    CHECK(pn.common().norm() == 0.0);
    const RVector nr = noma_rates(no.channels, pn, ascending_strength_order(no.channels));
    CHECK((evaluate_rates(no, pn).total_rates - nr).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("rate-constrained mode reports unreachable targets as infeasible") {
    DesignProblem p = desk_problem(4, 2, 14, Strategy::NOMA);
    p.mode = DesignMode::RateConstrained;
    p.r_min = 40.0;
    const DesignSolution sol = solve(p, quick());
    CHECK(sol.status == DesignStatus::Infeasible);
    CHECK(sol.message.find("cannot be satisfied") != std::string::npos);

    p.strategy = Strategy::RSMA;
    const DesignSolution free = solve(desk_problem(4, 2, 14, Strategy::RSMA), quick());
    p.r_min = 0.8 * free.mfr;
    const DesignSolution ok = solve(p, quick());
    REQUIRE(ok.ok());
    CHECK(ok.mfr >= p.r_min - 1e-6);
    CHECK(ok.rate_target_met);
}

TEST_CASE("recorded subproblems replay to the same optimum") {
    const auto dir = std::filesystem::temp_directory_path() / "isac_test_record";
    std::filesystem::remove_all(dir);
    SolveOptions o = quick();
    o.record_dir = dir;
    const DesignSolution sol = solve(desk_problem(4, 2, 15, Strategy::RSMA, 0.5), o);
    REQUIRE(sol.ok());
    const auto first = dir / "subproblem_0.txt";
    REQUIRE(std::filesystem::exists(first));
    const ConicSolution replay = BarrierSolver().solve(load_problem(first));
    REQUIRE(replay.optimal());
    CHECK(-replay.primal_objective == doctest::Approx(sol.diagnostics.surrogate_objective[0]).epsilon(1e-6));
    std::filesystem::remove_all(dir);
}

TEST_CASE("invalid problems throw") {
    DesignProblem p = desk_problem(4, 2, 16, Strategy::RSMA, -1.0);
    CHECK_THROWS_AS(solve(p), ConfigError);
    p.lambda = 0.0;
    p.scene.geometry.num_tx = 3;
    CHECK_THROWS_AS(solve(p), DimensionError);
    CHECK_THROWS_AS(sweep_lambda(desk_problem(4, 2, 16, Strategy::RSMA), {1.0, 0.5}), ConfigError);
}
