#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isac/channels.hpp"
#include "isac/comm_metrics.hpp"
#include "isac/conic.hpp"
#include "isac/radar_metrics.hpp"

namespace isac {

enum class Strategy { RSMA, SDMA, NOMA };
enum class DesignMode { Tradeoff, RateConstrained };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

/// Restricts the RSMA stream structure: which users keep a private stream
/// and which users may receive a share of the common stream. Used to
/// express NOMA-like mappings inside the RSMA solver.
struct StreamMapping {
    std::vector<bool> private_enabled;  ///< per private stream; empty = all
    std::vector<int> common_users;      ///< users allowed a common share; empty = all
};

struct DesignProblem {
    ChannelSet channels;
    RadarScene scene;
    Strategy strategy = Strategy::RSMA;
    DesignMode mode = DesignMode::Tradeoff;
    /// Trade-off weight in units of the normalized FIM (see fim_scale()).
    double lambda = 0.0;
    double total_power = 0.1;  ///< watts
    double r_min = 0.0;        ///< bps/Hz, RateConstrained only
    std::optional<StreamMapping> mapping;  ///< RSMA only

    void validate() const;
    /// lambda_min of the FIM under isotropic transmission P/Nt * I. The
    /// optimizer works with t / fim_scale().
    double fim_scale() const;
};

struct SolveOptions {
    double objective_tol = 1e-4;
    int max_iterations = 30;
    int randomization_candidates = 100;
    std::uint64_t seed = 0;
    /// Lifted-vs-recovered objective gap above which a warning is recorded.
    double rank_gap_warning = 0.05;
    /// When set, every conic subproblem is written here for replay.
    std::optional<std::filesystem::path> record_dir;
    ConicOptions conic{1e-10, 1e-12, 20.0, 600, 1e-10};
};

enum class DesignStatus { Converged, MaxIterations, Infeasible, Failed };
const char* to_string(DesignStatus s);

struct DesignDiagnostics {
    int iterations = 0;
    std::vector<double> surrogate_objective;  ///< subproblem optimum per outer iteration
    std::vector<double> lifted_objective;     ///< exact objective at each lifted iterate
    double lifted_value = 0.0;
    double recovered_value = 0.0;
    double rank_gap = 0.0;  ///< lifted - recovered objective
    double power_residual = 0.0;   ///< max_n |P_n - P/Nt| / (P/Nt)
    double common_residual = 0.0;  ///< max(0, sum C - min_k R_c,k)
    double fim_residual = 0.0;     ///< max(0, t - lambda_min(F))
    double fim_scale = 1.0;
    int chosen_candidate = 0;  ///< 0 = dominant eigenvectors
    int conic_newton_steps = 0;
    std::vector<std::string> warnings;
};

struct DesignSolution {
    DesignStatus status = DesignStatus::Failed;
    std::string message;
    PrecodingMatrix precoder;
    RVector common_split;
    double t = 0.0;  ///< lambda_min of the FIM of the recovered precoder
    double mfr = 0.0;
    double objective = 0.0;  ///< mfr + lambda * t / fim_scale (Tradeoff) or t (RateConstrained)
    bool rate_target_met = true;
    RateReport rates;
    FisherReport fisher;
    DesignDiagnostics diagnostics;
    /// Lifted matrices of the last SCA iterate (normalized by P), used as
    /// the warm start of the next solve in a sweep.
    std::vector<CMatrix> lifted;

    bool ok() const { return status == DesignStatus::Converged || status == DesignStatus::MaxIterations; }
};

/// SDR + SCA design followed by rank-1 recovery. Problem-level failures
/// are reported through DesignSolution::status; invalid input throws.
DesignSolution solve(const DesignProblem& problem, const SolveOptions& options = {},
                     const ConicBackend* backend = nullptr, const std::vector<CMatrix>* warm_start = nullptr);

/// One solve per lambda (nondecreasing), each warm-started from the previous.
std::vector<DesignSolution> sweep_lambda(const DesignProblem& problem, const std::vector<double>& lambdas,
                                         const SolveOptions& options = {}, const ConicBackend* backend = nullptr);

/// max t s.t. F(R_X) >= tI, diag(R_X) = P/Nt, R_X >= 0 (no rate terms).
double radar_only_bound(const DesignProblem& problem, const ConicBackend* backend = nullptr);

/// Rates of a fixed precoder under the problem's strategy (common split
/// from a linear program solved by `backend`).
RateReport evaluate_rates(const DesignProblem& problem, const PrecodingMatrix& precoder,
                          const ConicBackend* backend = nullptr);

/// Max-min common split by linear programming: maximize r subject to
/// C_k + private_k >= r, sum C <= budget, C >= 0, C_k = 0 outside `allowed`.
RVector lp_common_split(double budget, const RVector& private_rates, const std::vector<int>& allowed,
                        const ConicBackend& backend);

/// Maximum-ratio initial precoder projected to per-antenna power P/Nt.
PrecodingMatrix maximum_ratio_precoder(const DesignProblem& problem);

/// Rescales every antenna (row) to power P/Nt. Rows with zero power are
/// left untouched and reported by returning false.
bool restore_antenna_power(PrecodingMatrix& precoder, double total_power);

}  // namespace isac
