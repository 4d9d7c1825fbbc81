#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "isac/types.hpp"

namespace isac {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Product cone K = R+^l x Q^{q_1} x ... x S^{n_1} x ... x H^{m_1} x ...
///
/// Slack layout, in this order: nonnegative entries; each second-order cone
/// (s_0 >= ||s_1:||); each real symmetric PSD cone of order n as n*n entries
/// (column-major, symmetrized); each Hermitian PSD cone of order m as 2*m*m
/// entries (real parts column-major, then imaginary parts, Hermitian-projected).
struct ConeDims {
    int nonneg = 0;
    std::vector<int> soc;
    std::vector<int> psd;
    std::vector<int> hpsd;

    int rows() const;
    /// Barrier degree nu.
    double degree() const;
    int num_blocks() const;
    bool operator==(const ConeDims&) const = default;
};

/// minimize c'x  s.t.  G x + s = h,  A x = b,  s in K.
/// Dual: maximize -h'z - b'y  s.t.  G'z + A'y + c = 0,  z in K*.
struct ConicProblem {
    RVector c;
    SparseMatrix G;
    RVector h;
    SparseMatrix A;
    RVector b;
    ConeDims cones;

    int num_vars() const { return static_cast<int>(c.size()); }
    void validate() const;
};

enum class ConicStatus { Optimal, PrimalInfeasible, Unbounded, MaxIterations, NumericalError };
const char* to_string(ConicStatus status);

struct ConicSolution {
    ConicStatus status = ConicStatus::NumericalError;
    RVector x, s, z, y;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    double gap = 0.0;           ///< primal - dual objective
    double relative_gap = 0.0;  ///< gap / max(1, |primal|)
    double dual_residual = 0.0; ///< ||G'z + A'y + c||
    int iterations = 0;         ///< Newton steps, both phases
    /// For PrimalInfeasible: z, y hold a Farkas certificate (G'z + A'y ~ 0,
    /// h'z + b'y < 0, z in K*); `message` states its residuals.
    std::string message;

    bool optimal() const { return status == ConicStatus::Optimal; }
};

struct ConicOptions {
    double rel_gap_tol = 1e-9;
    double abs_gap_tol = 1e-12;
    double barrier_growth = 20.0;
    int max_newton_steps = 600;
    double newton_tol = 1e-9;  ///< stop centering when lambda^2/2 falls below
};

/// Solver backend for ConicProblem. Implementations must report the
/// relative duality gap and surface infeasibility as a certificate.
class ConicBackend {
public:
    virtual ~ConicBackend() = default;
    virtual std::string name() const = 0;
    /// `start`, when given, must satisfy Ax = b with h - Gx in int K;
    /// otherwise a phase-I problem finds such a point.
    virtual ConicSolution solve(const ConicProblem& problem, const std::optional<RVector>& start = {}) const = 0;
};

/// Primal log-barrier path-following method with damped Newton centering
/// and a phase-I feasibility search. Dual variables come from the
/// barrier gradient at each central point.
class BarrierSolver final : public ConicBackend {
public:
    explicit BarrierSolver(ConicOptions options = {}) : options_(options) {}
    std::string name() const override { return "barrier"; }
    ConicSolution solve(const ConicProblem& problem, const std::optional<RVector>& start = {}) const override;

    const ConicOptions& options() const { return options_; }

private:
    ConicOptions options_;
};

/// True when s lies in the interior of K.
bool in_cone_interior(const RVector& s, const ConeDims& cones);
/// Largest violation of s in K (0 when inside).
double cone_violation(const RVector& s, const ConeDims& cones);

// ---- recorded-problem files ------------------------------------------------

std::string format_problem(const ConicProblem& problem);
ConicProblem parse_problem(const std::string& text);
void save_problem(const ConicProblem& problem, const std::filesystem::path& path);
ConicProblem load_problem(const std::filesystem::path& path);

}  // namespace isac
