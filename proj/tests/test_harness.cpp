#include "doctest.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "isac/harness.hpp"

using namespace isac;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("isac_harness_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kDesk = R"({
  "seed": 3, "realizations": 2,
  "array": {"num_tx": 3, "num_rx": 4},
  "comm": {"users": 2},
  "radar": {"block_length": 32},
  "tradeoff": {"strategies": ["RSMA", "SDMA", "NOMA"], "lambdas": [0, 1, 10]},
  "solver": {"randomization_candidates": 10}
})";

}  // namespace

TEST_CASE("config defaults, parsing and unit conversion") {
    const ExperimentConfig d = parse_config("{}");
    CHECK(d.array.num_tx == 8);
    CHECK(d.array.num_rx == 9);
    CHECK(d.users == 4);
    CHECK(d.block_length == 1024);
    CHECK(d.power_w() == doctest::Approx(0.1).epsilon(1e-14));
    const RadarScene sc = d.scene();
    CHECK(sc.noise_power == doctest::Approx(1e-3).epsilon(1e-14));
    // radar SNR -20 dB: |alpha|^2 P / sigma_m^2 = 0.01
    CHECK(std::norm(sc.alpha) * d.power_w() / sc.noise_power == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(sc.target_angle == doctest::Approx(kPi / 4));
    CHECK(sc.doppler_hz == doctest::Approx(2.0 * 8.0 * 2.4e9 / 299792458.0).epsilon(1e-12));

    const ExperimentConfig c = parse_config(kDesk);
    CHECK(c.seed == 3);
    CHECK(c.realization_seed(1) == 4);
    CHECK(c.lambdas == std::vector<double>{0, 1, 10});
    // the resolved config round-trips
    const ExperimentConfig again = parse_config(config_to_json(c));
    CHECK(config_to_json(again) == config_to_json(c));
}

TEST_CASE("config errors name the offending key") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message(R"({"array": {"num_tx": 4, "nt": 3}})").find("array.nt") != std::string::npos);
    CHECK(message(R"({"sed": 1})").find("sed") != std::string::npos);
    CHECK(message(R"({"comm": {"power_dbm": "high"}})").find("comm.power_dbm") != std::string::npos);
    CHECK(message(R"({"tradeoff": {"lambdas": [1, 0]}})").find("nondecreasing") != std::string::npos);
    CHECK(message(R"({"tradeoff": {"strategies": ["TDMA"]}})") != "no error");
    CHECK(message("{not json") != "no error");
    CHECK(message(R"({"scenario": "satellite", "array": {"num_tx": 4}, "satellite": {"num_beams": 3}})")
              .find("num_beams") != std::string::npos);
    CHECK(message(R"({"scenario": "lunar"})") != "no error");
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);

    const ExperimentConfig s = parse_config(
        R"({"scenario": "satellite", "array": {"num_tx": 4}, "satellite": {"num_beams": 4, "users_per_beam": 3},
            "tradeoff": {"strategies": ["RSMA", "SDMA"]}})");
    CHECK(s.users == 12);
    CHECK(s.channels(0).num_users() == 12);
}

TEST_CASE("trade-off run: schema, determinism and thread independence") {
    const ExperimentConfig c = parse_config(kDesk);
    const fs::path a = fresh_dir("a"), b = fresh_dir("b");
    const auto files = run_tradeoff(c, {a, 1});
    run_tradeoff(c, {b, 3});
    REQUIRE(files.size() == 4);
    for (const auto& f : files) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const CsvTable t = read_csv(a / "tradeoff.csv");
    CHECK(t.header == tradeoff_header());
    CHECK(t.rows.size() == 3u * 3u * 2u);
    // one converged row per (strategy, lambda) at least
    std::set<std::pair<std::string, std::string>> ok;
    for (const auto& r : t.rows)
        if (r[12] == "1") ok.insert({r[0], r[1]});
    CHECK(ok.size() == 9);
    // sorted by strategy name, then lambda, then seed
    CHECK(t.rows.front()[0] == "NOMA");
    CHECK(t.rows.back()[0] == "SDMA");
    CHECK(t.rows[0][2] == "3");
    CHECK(t.rows[1][2] == "4");

    const std::string meta = slurp(a / "metadata.json");
    CHECK(meta.find("\"dbm_roundtrip\"") != std::string::npos);
    CHECK(meta.find("lambda_tilde") != std::string::npos);

    CHECK_THROWS_AS(run_satellite(c, {fresh_dir("c"), 1}), ConfigError);
}

TEST_CASE("channel ingestion reproduces generated channels") {
    ExperimentConfig c = parse_config(kDesk);
    c.lambdas = {0.0};
    c.strategies = {Strategy::RSMA};
    const fs::path ch = fresh_dir("ch"), gen = fresh_dir("gen"), read = fresh_dir("read");
    const auto names = gen_channels(c, {ch, 1});
    CHECK(names == std::vector<std::string>{"channels_seed3.txt", "channels_seed4.txt"});
    run_tradeoff(c, {gen, 1});
    c.channels_dir = ch.string();
    run_tradeoff(c, {read, 1});
    CHECK(slurp(gen / "tradeoff.csv") == slurp(read / "tradeoff.csv"));
    c.seed = 99;
    CHECK_THROWS(c.channels(0));
}

TEST_CASE("report: mean and sample standard deviation") {
    CHECK_THROWS_AS(report(fresh_dir("empty")), ConfigError);
    CHECK_THROWS_AS(report("/nonexistent/dir"), ConfigError);

    const fs::path d = fresh_dir("report");
    CsvTable t{tradeoff_header(), {}};
    auto row = [](const std::string& s, const std::string& lam, const std::string& seed, const std::string& mfr) {
        return std::vector<std::string>{s, lam, seed, mfr, "2", "3", "4", "5", "6", "7", "8", "10", "1"};
    };
    t.rows = {row("RSMA", "0", "1", "1"), row("RSMA", "0", "2", "2"), row("RSMA", "0", "3", "6"),
              row("SDMA", "0", "1", "4")};
    auto failed = row("SDMA", "0", "2", "");
    for (int i = 3; i <= 10; ++i) failed[static_cast<std::size_t>(i)] = "";
    failed[12] = "0";
    t.rows.push_back(failed);
    write_csv(t, d / "tradeoff.csv");
    CHECK(report(d) == std::vector<std::string>{"tradeoff_summary.csv"});
    const CsvTable s = read_csv(d / "tradeoff_summary.csv");
    REQUIRE(s.rows.size() == 2);
    const int mean = s.column("mfr_mean"), sd = s.column("mfr_std"), count = s.column("count");
    CHECK(s.rows[0][static_cast<std::size_t>(count)] == "3");
    CHECK(std::stod(s.rows[0][static_cast<std::size_t>(mean)]) == doctest::Approx(3.0));
    CHECK(std::stod(s.rows[0][static_cast<std::size_t>(sd)]) == doctest::Approx(std::sqrt(7.0)));
    // a single surviving seed has zero spread; the failed row is skipped
    CHECK(s.rows[1][static_cast<std::size_t>(count)] == "1");
    CHECK(std::stod(s.rows[1][static_cast<std::size_t>(sd)]) == 0.0);

    CsvTable r{rmse_header(), {{"RSMA", "1", "0", "theta", "0.2", "0.1", "0", "50"},
                               {"RSMA", "2", "0", "theta", "0.4", "0.3", "0", "50"}}};
    write_csv(r, d / "rmse.csv");
    CHECK(report(d).size() == 2);
    const CsvTable rs = read_csv(d / "rmse_summary.csv");
    REQUIRE(rs.rows.size() == 1);
    CHECK(std::stod(rs.rows[0][static_cast<std::size_t>(rs.column("rmse_mean"))]) == doctest::Approx(0.3));

    CsvTable bad{{"strategy", "lambda"}, {}};
    CHECK_THROWS_AS(summarize_tradeoff(bad), ParseError);
}
