#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "isac/channels.hpp"
#include "isac/csv.hpp"
#include "isac/optimizer.hpp"

namespace isac {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Everything one experiment needs. Power-like inputs are in dBm and
/// converted on use; lambda values are normalized (see DesignProblem).
struct ExperimentConfig {
    std::string scenario = "terrestrial";  ///< terrestrial | satellite
    ArrayGeometry array{8, 9, 0.5};
    int users = 4;
    int block_length = 1024;
    double power_dbm = 20.0;
    double comm_noise_dbm = 0.0;
    double radar_noise_dbm = 0.0;
    double radar_snr_db = -20.0;
    double target_angle_deg = 45.0;
    double alpha_phase_deg = 0.0;
    double velocity_mps = 8.0;
    double carrier_hz = 2.4e9;
    double symbol_period_s = 1e-6;
    std::vector<Strategy> strategies{Strategy::RSMA, Strategy::SDMA, Strategy::NOMA};
    std::vector<double> lambdas{0.0, 0.1, 0.3, 1.0, 3.0, 10.0};
    double r_min = 6.0;
    /// When set, r_min = fraction * (RSMA MFR at lambda = 0) per realization.
    std::optional<double> r_min_fraction;
    std::vector<double> estimation_snr_db{-10.0, 0.0, 10.0};
    int trials = 200;
    int realizations = 100;
    std::uint64_t seed = 1;
    double amp_efficiency_inv = 1.0;
    double circuit_power_dbm = 30.0;
    SatelliteConfig satellite;
    /// When set, realization r reads <channels_dir>/channels_seed<seed + r>.txt
    /// instead of generating channels.
    std::string channels_dir;
    double objective_tol = 1e-4;
    int max_iterations = 30;
    int randomization_candidates = 100;

    void validate() const;
    double power_w() const { return dbm_to_watts(power_dbm); }
    /// Radar scene with |alpha| set from the radar SNR and transmit power.
    RadarScene scene() const;
    SolveOptions solve_options(std::uint64_t seed) const;
    /// Channels of realization r (seed + r).
    ChannelSet channels(int realization) const;
    std::uint64_t realization_seed(int realization) const { return seed + static_cast<std::uint64_t>(realization); }
};

/// Parses the JSON config; unknown keys and wrong types are errors naming
/// the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved config as pretty-printed JSON.
std::string config_to_json(const ExperimentConfig& config);

/// Column names of a trade-off results file, in order.
const std::vector<std::string>& tradeoff_header();
const std::vector<std::string>& rmse_header();

struct RunOptions {
    std::filesystem::path out_dir = "results";
    int jobs = 1;
};

/// Each run writes its tables plus metadata.json into out_dir and returns
/// the names of the files written.
std::vector<std::string> run_tradeoff(const ExperimentConfig& config, const RunOptions& options);
std::vector<std::string> run_satellite(const ExperimentConfig& config, const RunOptions& options);
std::vector<std::string> run_estimation(const ExperimentConfig& config, const RunOptions& options);
/// Writes one channel file per realization.
std::vector<std::string> gen_channels(const ExperimentConfig& config, const RunOptions& options);

/// Mean and sample standard deviation across seeds for every result table
/// in `dir`; writes <stem>_summary.csv next to each. Throws ConfigError
/// ("no results") when the directory holds no result table.
std::vector<std::string> report(const std::filesystem::path& dir);

/// Summary of a trade-off table: one row per (strategy, lambda).
CsvTable summarize_tradeoff(const CsvTable& table);
/// Summary of an RMSE table: one row per (strategy, snr_db, parameter).
CsvTable summarize_rmse(const CsvTable& table);

}  // namespace isac
