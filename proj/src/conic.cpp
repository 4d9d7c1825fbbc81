#include "isac/conic.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace isac {

int ConeDims::rows() const {
    int r = nonneg;
    for (int q : soc) r += q;
    for (int n : psd) r += n * n;
    for (int m : hpsd) r += 2 * m * m;
    return r;
}

double ConeDims::degree() const {
    double nu = nonneg;
    nu += 2.0 * static_cast<double>(soc.size());
    for (int n : psd) nu += n;
    for (int m : hpsd) nu += m;
    return nu;
}

int ConeDims::num_blocks() const {
    return (nonneg > 0 ? 1 : 0) + static_cast<int>(soc.size() + psd.size() + hpsd.size());
}

const char* to_string(ConicStatus status) {
    switch (status) {
        case ConicStatus::Optimal: return "optimal";
        case ConicStatus::PrimalInfeasible: return "primal_infeasible";
        case ConicStatus::Unbounded: return "unbounded";
        case ConicStatus::MaxIterations: return "max_iterations";
        case ConicStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

void ConicProblem::validate() const {
    const int n = num_vars();
    if (G.cols() != n || h.size() != G.rows()) throw DimensionError("conic problem: G/h dimensions disagree with c");
    if (G.rows() != cones.rows()) throw DimensionError("conic problem: G rows do not match the cone dimensions");
    if (A.rows() > 0 && A.cols() != n) throw DimensionError("conic problem: A columns disagree with c");
    if (A.rows() != b.size()) throw DimensionError("conic problem: A rows disagree with b");
    for (int q : cones.soc)
        if (q < 1) throw DimensionError("second-order cone of dimension < 1");
    for (int s : cones.psd)
        if (s < 1) throw DimensionError("PSD cone of order < 1");
    for (int s : cones.hpsd)
        if (s < 1) throw DimensionError("Hermitian PSD cone of order < 1");
    if (!c.allFinite() || !h.allFinite() || !b.allFinite()) throw DimensionError("conic problem data must be finite");
}

namespace {

enum class Kind { Nonneg, Soc, Psd, Hpsd };

struct Block {
    Kind kind;
    int offset = 0;
    int rows = 0;
    int order = 0;
    std::vector<int> cols;
    RMatrix g;  // dense rows x cols slice of G
};

std::vector<Block> layout(const ConeDims& cones) {
    std::vector<Block> blocks;
    int off = 0;
    if (cones.nonneg > 0) {
        blocks.push_back({Kind::Nonneg, off, cones.nonneg, cones.nonneg, {}, {}});
        off += cones.nonneg;
    }
    for (int q : cones.soc) {
        blocks.push_back({Kind::Soc, off, q, q, {}, {}});
        off += q;
    }
    for (int n : cones.psd) {
        blocks.push_back({Kind::Psd, off, n * n, n, {}, {}});
        off += n * n;
    }
    for (int m : cones.hpsd) {
        blocks.push_back({Kind::Hpsd, off, 2 * m * m, m, {}, {}});
        off += 2 * m * m;
    }
    return blocks;
}

RMatrix sym_mat(const double* v, int n) {
    RMatrix m = Eigen::Map<const RMatrix>(v, n, n);
    return (m + m.transpose()) / 2.0;
}

CMatrix herm_mat(const double* v, int m) {
    CMatrix out(m, m);
    const int mm = m * m;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) out(i, j) = cplx(v[j * m + i], v[mm + j * m + i]);
    return (out + out.adjoint()) / 2.0;
}

template <typename Mat>
double log_det_chol(const Eigen::LLT<Mat>& llt) {
    double ld = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) ld += 2.0 * std::log(std::real(l(i, i)));
    return ld;
}

/// Smallest eigenvalue of the (real or Hermitian) block matrix, -inf on NaN.
double block_min_eig(const Block& b, const double* v) {
    switch (b.kind) {
        case Kind::Nonneg: {
            double m = INFINITY;
            for (int i = 0; i < b.rows; ++i) m = std::min(m, v[i]);
            return m;
        }
        case Kind::Soc: {
            double tail = 0.0;
            for (int i = 1; i < b.rows; ++i) tail += v[i] * v[i];
            return v[0] - std::sqrt(tail);
        }
        case Kind::Psd: {
            Eigen::SelfAdjointEigenSolver<RMatrix> es(sym_mat(v, b.order), Eigen::EigenvaluesOnly);
            return es.eigenvalues()(0);
        }
        case Kind::Hpsd: {
            Eigen::SelfAdjointEigenSolver<CMatrix> es(herm_mat(v, b.order), Eigen::EigenvaluesOnly);
            return es.eigenvalues()(0);
        }
    }
    return -INFINITY;
}

/// Log-barrier of K evaluated block-wise on a slack vector.
class Barrier {
public:
    Barrier(const ConicProblem& p) : blocks_(layout(p.cones)), nu_(p.cones.degree()), n_(p.num_vars()) {
        const Eigen::SparseMatrix<double, Eigen::RowMajor> g = p.G;
        for (auto& b : blocks_) {
            std::vector<int> seen(n_, -1);
            for (int r = b.offset; r < b.offset + b.rows; ++r)
                for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g, r); it; ++it)
                    if (it.value() != 0.0 && seen[it.col()] < 0) {
                        seen[it.col()] = 0;
                        b.cols.push_back(static_cast<int>(it.col()));
                    }
            std::sort(b.cols.begin(), b.cols.end());
            // wide blocks use every column so their Hessian term is a single rank update
            if (2 * b.cols.size() > static_cast<std::size_t>(n_)) {
                b.cols.resize(n_);
                std::iota(b.cols.begin(), b.cols.end(), 0);
            }
            for (std::size_t k = 0; k < b.cols.size(); ++k) seen[b.cols[k]] = static_cast<int>(k);
            b.g = RMatrix::Zero(b.rows, static_cast<Eigen::Index>(b.cols.size()));
            for (int r = b.offset; r < b.offset + b.rows; ++r)
                for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g, r); it; ++it)
                    if (seen[it.col()] >= 0) b.g(r - b.offset, seen[it.col()]) += it.value();
        }
        rchol_.resize(blocks_.size());
        cchol_.resize(blocks_.size());
    }

    double degree() const { return nu_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    /// Barrier value; +inf outside int K. Caches factors for gradient/hessian.
    double value(const RVector& s) {
        double f = 0.0;
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const Block& b = blocks_[k];
            const double* v = s.data() + b.offset;
            switch (b.kind) {
                case Kind::Nonneg:
                    for (int i = 0; i < b.rows; ++i) {
                        if (!(v[i] > 0.0)) return INFINITY;
                        f -= std::log(v[i]);
                    }
                    break;
                case Kind::Soc: {
                    double tail = 0.0;
                    for (int i = 1; i < b.rows; ++i) tail += v[i] * v[i];
                    const double q = v[0] * v[0] - tail;
                    if (!(v[0] > 0.0) || !(q > 0.0)) return INFINITY;
                    f -= std::log(q);
                    break;
                }
                case Kind::Psd: {
                    rchol_[k].compute(sym_mat(v, b.order));
                    if (rchol_[k].info() != Eigen::Success || !positive_diag(rchol_[k])) return INFINITY;
                    f -= log_det_chol(rchol_[k]);
                    break;
                }
                case Kind::Hpsd: {
                    cchol_[k].compute(herm_mat(v, b.order));
                    if (cchol_[k].info() != Eigen::Success || !positive_diag(cchol_[k])) return INFINITY;
                    f -= log_det_chol(cchol_[k]);
                    break;
                }
            }
        }
        return f;
    }

    /// Gradient of the barrier w.r.t. s; requires a preceding finite value(s).
    RVector gradient(const RVector& s) const {
        RVector g(s.size());
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const Block& b = blocks_[k];
            const double* v = s.data() + b.offset;
            double* out = g.data() + b.offset;
            switch (b.kind) {
                case Kind::Nonneg:
                    for (int i = 0; i < b.rows; ++i) out[i] = -1.0 / v[i];
                    break;
                case Kind::Soc: {
                    double tail = 0.0;
                    for (int i = 1; i < b.rows; ++i) tail += v[i] * v[i];
                    const double q = v[0] * v[0] - tail;
                    out[0] = -2.0 * v[0] / q;
                    for (int i = 1; i < b.rows; ++i) out[i] = 2.0 * v[i] / q;
                    break;
                }
                case Kind::Psd: {
                    const int n = b.order;
                    const RMatrix inv = rchol_[k].solve(RMatrix::Identity(n, n));
                    for (int j = 0; j < n; ++j)
                        for (int i = 0; i < n; ++i) out[j * n + i] = -(inv(i, j) + inv(j, i)) / 2.0;
                    break;
                }
                case Kind::Hpsd: {
                    const int m = b.order;
                    CMatrix inv = cchol_[k].solve(CMatrix::Identity(m, m));
                    inv = (inv + inv.adjoint()) / 2.0;
                    for (int j = 0; j < m; ++j)
                        for (int i = 0; i < m; ++i) {
                            out[j * m + i] = -inv(i, j).real();
                            out[m * m + j * m + i] = -inv(i, j).imag();
                        }
                    break;
                }
            }
        }
        return g;
    }

    /// H += G' (nabla^2 phi) G at the cached point. Only the lower
    /// triangle is accumulated; the upper triangle is mirrored at the end.
    void add_hessian(const RVector& s, RMatrix& hess) const {
        auto lower = hess.selfadjointView<Eigen::Lower>();
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const Block& b = blocks_[k];
            if (b.cols.empty()) continue;
            const double* v = s.data() + b.offset;
            const auto ncols = static_cast<Eigen::Index>(b.cols.size());
            // factor Y with G_b' nabla^2 G_b = Y' Y (Y is r x ncols), or a signed sum for SOC
            RMatrix& y = ybuf_;
            switch (b.kind) {
                case Kind::Nonneg: {
                    y.resize(b.rows, ncols);
                    for (int i = 0; i < b.rows; ++i) y.row(i) = b.g.row(i) / v[i];
                    break;
                }
                case Kind::Soc: {
                    // nabla^2 = -2J/q + 4 (Js)(Js)'/q^2 as signed rank-one updates
                    double tail = 0.0;
                    for (int i = 1; i < b.rows; ++i) tail += v[i] * v[i];
                    const double q = v[0] * v[0] - tail;
                    RVector js(b.rows);
                    js(0) = v[0];
                    for (int i = 1; i < b.rows; ++i) js(i) = -v[i];
                    const RVector u = b.g.transpose() * js;
                    auto apply = [&](auto&& target) {
                        target.rankUpdate(u, 4.0 / (q * q));
                        target.rankUpdate(b.g.row(0).transpose(), -2.0 / q);
                        for (int i = 1; i < b.rows; ++i) target.rankUpdate(b.g.row(i).transpose(), 2.0 / q);
                    };
                    if (ncols == n_) {
                        apply(lower);
                    } else {
                        RMatrix& local = lbuf_;
                        local.setZero(ncols, ncols);
                        apply(local.selfadjointView<Eigen::Lower>());
                        for (Eigen::Index j = 0; j < ncols; ++j)
                            for (Eigen::Index i = j; i < ncols; ++i) hess(b.cols[i], b.cols[j]) += local(i, j);
                    }
                    continue;
                }
                case Kind::Psd: {
                    const int n = b.order;
                    const auto l = rchol_[k].matrixL();
                    y.resize(n * n, ncols);
                    for (Eigen::Index c = 0; c < ncols; ++c) {
                        RMatrix m = sym_mat(b.g.col(c).data(), n);
                        m = l.solve(m);
                        m = l.solve(m.transpose()).transpose().eval();
                        y.col(c) = Eigen::Map<RVector>(m.data(), n * n);
                    }
                    break;
                }
                case Kind::Hpsd: {
                    const int m = b.order;
                    const auto l = cchol_[k].matrixL();
                    y.resize(2 * m * m, ncols);
                    for (Eigen::Index c = 0; c < ncols; ++c) {
                        CMatrix mm = herm_mat(b.g.col(c).data(), m);
                        mm = l.solve(mm);
                        mm = l.solve(mm.adjoint()).adjoint().eval();
                        const Eigen::Map<CVector> z(mm.data(), m * m);
                        y.col(c).head(m * m) = z.real();
                        y.col(c).tail(m * m) = z.imag();
                    }
                    break;
                }
            }
            if (ncols == n_) {
                lower.rankUpdate(y.transpose());
            } else {
                RMatrix& local = lbuf_;
                local.setZero(ncols, ncols);
                local.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose());
                for (Eigen::Index j = 0; j < ncols; ++j)
                    for (Eigen::Index i = j; i < ncols; ++i) hess(b.cols[i], b.cols[j]) += local(i, j);
            }
        }
        hess.triangularView<Eigen::StrictlyUpper>() = hess.transpose();
    }

    /// (nabla^2 phi) ds at the cached point.
    RVector hessian_times(const RVector& s, const RVector& ds) const {
        RVector out(s.size());
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const Block& b = blocks_[k];
            const double* v = s.data() + b.offset;
            const double* d = ds.data() + b.offset;
            double* o = out.data() + b.offset;
            switch (b.kind) {
                case Kind::Nonneg:
                    for (int i = 0; i < b.rows; ++i) o[i] = d[i] / (v[i] * v[i]);
                    break;
                case Kind::Soc: {
                    double q = v[0] * v[0], jsd = v[0] * d[0];
                    for (int i = 1; i < b.rows; ++i) {
                        q -= v[i] * v[i];
                        jsd -= v[i] * d[i];
                    }
                    o[0] = -2.0 * d[0] / q + 4.0 * v[0] * jsd / (q * q);
                    for (int i = 1; i < b.rows; ++i) o[i] = 2.0 * d[i] / q - 4.0 * v[i] * jsd / (q * q);
                    break;
                }
                case Kind::Psd: {
                    const int n = b.order;
                    const RMatrix inv = rchol_[k].solve(RMatrix::Identity(n, n));
                    RMatrix m = inv * sym_mat(d, n) * inv;
                    m = (m + m.transpose()) / 2.0;
                    Eigen::Map<RVector>(o, n * n) = Eigen::Map<RVector>(m.data(), n * n);
                    break;
                }
                case Kind::Hpsd: {
                    const int m = b.order;
                    const CMatrix inv = cchol_[k].solve(CMatrix::Identity(m, m));
                    CMatrix mm = inv * herm_mat(d, m) * inv;
                    mm = (mm + mm.adjoint()) / 2.0;
                    for (int j = 0; j < m; ++j)
                        for (int i = 0; i < m; ++i) {
                            o[j * m + i] = mm(i, j).real();
                            o[m * m + j * m + i] = mm(i, j).imag();
                        }
                    break;
                }
            }
        }
        return out;
    }

    /// Largest step alpha with s + alpha ds in K (may be +inf).
    double max_step(const RVector& s, const RVector& ds) const {
        double alpha = INFINITY;
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const Block& b = blocks_[k];
            const double* v = s.data() + b.offset;
            const double* d = ds.data() + b.offset;
            switch (b.kind) {
                case Kind::Nonneg:
                    for (int i = 0; i < b.rows; ++i)
                        if (d[i] < 0.0) alpha = std::min(alpha, -v[i] / d[i]);
                    break;
                case Kind::Soc: {
                    // q(a) = A a^2 + 2 B a + C, C > 0
                    double qa = d[0] * d[0], qb = v[0] * d[0], qc = v[0] * v[0];
                    for (int i = 1; i < b.rows; ++i) {
                        qa -= d[i] * d[i];
                        qb -= v[i] * d[i];
                        qc -= v[i] * v[i];
                    }
                    double lim = INFINITY;
                    if (d[0] < 0.0) lim = -v[0] / d[0];
                    if (std::abs(qa) < 1e-300) {
                        if (qb < 0.0) lim = std::min(lim, -qc / (2.0 * qb));
                    } else {
                        const double disc = qb * qb - qa * qc;
                        if (disc >= 0.0) {
                            const double sq = std::sqrt(disc);
                            for (double root : {(-qb - sq) / qa, (-qb + sq) / qa})
                                if (root > 0.0) lim = std::min(lim, root);
                        }
                    }
                    alpha = std::min(alpha, lim);
                    break;
                }
                case Kind::Psd: {
                    const int n = b.order;
                    const auto l = rchol_[k].matrixL();
                    RMatrix m = l.solve(sym_mat(d, n));
                    m = l.solve(m.transpose()).transpose().eval();
                    Eigen::SelfAdjointEigenSolver<RMatrix> es((m + m.transpose()) / 2.0, Eigen::EigenvaluesOnly);
                    const double lo = es.eigenvalues()(0);
                    if (lo < 0.0) alpha = std::min(alpha, -1.0 / lo);
                    break;
                }
                case Kind::Hpsd: {
                    const int m = b.order;
                    const auto l = cchol_[k].matrixL();
                    CMatrix mm = l.solve(herm_mat(d, m));
                    mm = l.solve(mm.adjoint()).adjoint().eval();
                    Eigen::SelfAdjointEigenSolver<CMatrix> es((mm + mm.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
                    const double lo = es.eigenvalues()(0);
                    if (lo < 0.0) alpha = std::min(alpha, -1.0 / lo);
                    break;
                }
            }
        }
        return alpha;
    }

private:
    template <typename Chol>
    static bool positive_diag(const Chol& llt) {
        const auto& l = llt.matrixLLT();
        for (Eigen::Index i = 0; i < l.rows(); ++i)
            if (!(std::real(l(i, i)) > 0.0) || !std::isfinite(std::real(l(i, i)))) return false;
        return true;
    }

    std::vector<Block> blocks_;
    double nu_;
    int n_;
    std::vector<Eigen::LLT<RMatrix>> rchol_;
    std::vector<Eigen::LLT<CMatrix>> cchol_;
    mutable RMatrix ybuf_, lbuf_;
};

RVector cone_identity(const ConeDims& cones) {
    RVector e = RVector::Zero(cones.rows());
    for (const auto& b : layout(cones)) {
        switch (b.kind) {
            case Kind::Nonneg: e.segment(b.offset, b.rows).setOnes(); break;
            case Kind::Soc: e(b.offset) = 1.0; break;
            case Kind::Psd:
                for (int i = 0; i < b.order; ++i) e(b.offset + i * b.order + i) = 1.0;
                break;
            case Kind::Hpsd:
                for (int i = 0; i < b.order; ++i) e(b.offset + i * b.order + i) = 1.0;
                break;
        }
    }
    return e;
}

// Relative primal-dual gap a "converged" run must show. Duals recovered at
// tau ~ 1e11 carry ~1e-6 relative error from the ill-conditioned Newton
// system, while a run stranded off the central path shows gaps ~1e-2.
constexpr double kCertifiedGap = 1e-5;

enum class PathOutcome { Converged, EarlyStop, Unbounded, MaxSteps, Stalled };

struct PathState {
    RVector x;
    double tau = 1.0;
    int steps = 0;
    RVector w;  // equality multipliers of the last Newton system (scaled by tau)
};

/// Central-path tracking from a strictly feasible x.
class PathFollower {
public:
    PathFollower(const ConicProblem& p, const ConicOptions& o) : p_(p), opt_(o), barrier_(p) {
        if (p_.A.rows() > 0) at_ = RMatrix(p_.A).transpose();
    }

    double degree() const { return barrier_.degree(); }
    Barrier& barrier() { return barrier_; }

    RVector slack(const RVector& x) const { return p_.h - p_.G * x; }

    PathOutcome run(PathState& st, const std::function<bool(const RVector&)>& early_stop,
                    const std::function<bool(const PathState&)>& finished) {
        const int n = p_.num_vars();
        const double nu = barrier_.degree();
        bool polishing = false;
        for (;;) {
            // centering
            int center_steps = 0;
            for (;;) {
                const RVector s = slack(st.x);
                const double phi = barrier_.value(s);
                if (!std::isfinite(phi)) return PathOutcome::Stalled;
                const RVector gs = barrier_.gradient(s);
                RVector g = st.tau * p_.c - p_.G.transpose() * gs;
                hess_.setZero(n, n);
                barrier_.add_hessian(s, hess_);
                RVector dx;
                if (!newton_direction(hess_, g, dx, st.w)) return PathOutcome::Stalled;
                const double dec = -g.dot(dx);
                // centre to dec/2 <= 1/8 between barrier updates (raising tau off the path
                // strands the iterate on curved cone faces), tight once the gap target is met
                const double target = polishing ? opt_.newton_tol : 0.125;
                if (dec / 2.0 <= target || (polishing && center_steps >= 8)) break;
                const RVector ds = -(p_.G * dx);
                double alpha = std::min(1.0, 0.99 * barrier_.max_step(s, ds));
                bool accepted = false;
                if (dec < 0.1) {
                    // quadratic region: full step, no line search
                    const RVector xn = st.x + alpha * dx;
                    if (std::isfinite(barrier_.value(slack(xn)))) {
                        st.x = xn;
                        accepted = true;
                    }
                } else {
                    const double f0 = st.tau * p_.c.dot(st.x) + phi;
                    for (int bt = 0; bt < 60; ++bt) {
                        const RVector xn = st.x + alpha * dx;
                        const double fn = st.tau * p_.c.dot(xn) + barrier_.value(slack(xn));
                        if (std::isfinite(fn) && fn <= f0 - 0.01 * alpha * dec) {
                            st.x = xn;
                            accepted = true;
                            break;
                        }
                        alpha *= 0.5;
                    }
                }
                ++st.steps;
                ++center_steps;
                if (!accepted) break;  // numerically centred
                if (early_stop && early_stop(st.x)) return PathOutcome::EarlyStop;
                if (!st.x.allFinite()) return PathOutcome::Stalled;
                if (st.x.cwiseAbs().maxCoeff() > 1e12) return PathOutcome::Unbounded;
                if (st.steps >= opt_.max_newton_steps) return PathOutcome::MaxSteps;
            }
            if (st.steps >= opt_.max_newton_steps) return PathOutcome::MaxSteps;
            if (finished(st)) {
                if (polishing) return PathOutcome::Converged;
                polishing = true;
                continue;
            }
            // keep the refreshed barrier factors consistent with x
            barrier_.value(slack(st.x));
            const double growth = center_steps <= 2 ? opt_.barrier_growth * 5.0 : opt_.barrier_growth;
            st.tau *= growth;
            (void)nu;
        }
    }

    /// Dual variables at the current point, Newton-corrected so that the
    /// dual equality holds to rounding. If the full correction leaves the
    /// cone, the longest fraction of it that stays inside is kept.
    void duals(PathState& st, RVector& z, RVector& y) {
        const int n = p_.num_vars();
        const RVector s = slack(st.x);
        barrier_.value(s);
        const RVector gs = barrier_.gradient(s);
        const RVector g = st.tau * p_.c - p_.G.transpose() * gs;
        hess_.setZero(n, n);
        barrier_.add_hessian(s, hess_);
        z = -gs / st.tau;
        RVector dx, w;
        if (newton_direction(hess_, g, dx, w)) {
            const RVector ds = -(p_.G * dx);
            const RVector dz = -barrier_.hessian_times(s, ds) / st.tau;
            if (dz.size() == 0 || in_cone_interior(z + dz, p_.cones)) {
                z += dz;
                y = p_.A.rows() > 0 ? RVector(w / st.tau) : RVector(0);
                return;
            }
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 30; ++it) {
                const double mid = 0.5 * (lo + hi);
                (in_cone_interior(z + mid * dz, p_.cones) ? lo : hi) = mid;
            }
            z += 0.99 * lo * dz;
        }
        const RVector r = -(p_.c + p_.G.transpose() * z);
        if (p_.A.rows() > 0) {
            y = at_.colPivHouseholderQr().solve(r);
        } else {
            y.resize(0);
        }
    }

private:
    /// Solves [H A'; A 0][dx; w] = [-g; 0] with a Jacobi-scaled Cholesky
    /// factorization, a Schur complement for the equalities and two rounds
    /// of iterative refinement.
    bool newton_direction(const RMatrix& hess, const RVector& g, RVector& dx, RVector& w) {
        const Eigen::Index n = g.size();
        const Eigen::Index m = p_.A.rows();
        RVector d = hess.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        hs_.noalias() = d.asDiagonal() * hess * d.asDiagonal();
        const RMatrix& hs = hs_;
        const RMatrix as = m > 0 ? RMatrix(d.asDiagonal() * at_) : RMatrix(n, 0);
        double reg = 1e-14;
        for (int attempt = 0; attempt < 8; ++attempt, reg *= 100.0) {
            hr_ = hs;
            hr_.diagonal().array() += reg;
            llt_.compute(hr_);
            const auto& llt = llt_;
            if (llt.info() != Eigen::Success) continue;
            RMatrix hinv_a;
            Eigen::LDLT<RMatrix> schur;
            if (m > 0) {
                hinv_a = llt.solve(as);
                schur.compute(as.transpose() * hinv_a);
            }
            // scaled system: hs u + as w = r1, as' u = r2, dx = d .* u
            auto solve = [&](const RVector& r1, const RVector& r2, RVector& u, RVector& ww) {
                const RVector hinv_r = llt.solve(r1);
                if (m > 0) {
                    ww = schur.solve(as.transpose() * hinv_r - r2);
                    u = hinv_r - hinv_a * ww;
                } else {
                    u = hinv_r;
                    ww.resize(0);
                }
            };
            const RVector rhs = -(d.asDiagonal() * g);
            RVector u, ww;
            solve(rhs, RVector::Zero(m), u, ww);
            for (int it = 0; it < 2; ++it) {
                RVector r1 = rhs - hs * u;
                if (m > 0) r1 -= as * ww;
                const RVector r2 = m > 0 ? RVector(-(as.transpose() * u)) : RVector(0);
                RVector du, dw;
                solve(r1, r2, du, dw);
                u += du;
                if (m > 0) ww += dw;
            }
            dx = d.asDiagonal() * u;
            w = ww;
            if (dx.allFinite()) return true;
        }
        return false;
    }

    const ConicProblem& p_;
    ConicOptions opt_;
    Barrier barrier_;
    RMatrix at_;
    RMatrix hess_, hs_, hr_;
    Eigen::LLT<RMatrix> llt_;
};

/// Starting point: any x with Ax = b (least squares). Returns false if inconsistent.
bool equality_point(const ConicProblem& p, RVector& x0, double& residual) {
    const int n = p.num_vars();
    if (p.A.rows() == 0) {
        x0 = RVector::Zero(n);
        residual = 0.0;
        return true;
    }
    const RMatrix a(p.A);
    Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(a);
    x0 = cod.solve(p.b);
    residual = (a * x0 - p.b).norm();
    return residual <= 1e-8 * std::max(1.0, p.b.norm());
}

/// Removes linearly dependent equality rows (keeps consistency check to caller).
ConicProblem drop_redundant_equalities(const ConicProblem& p) {
    if (p.A.rows() == 0) return p;
    const RMatrix a(p.A);
    Eigen::ColPivHouseholderQR<RMatrix> qr(a.transpose());
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank == a.rows()) return p;
    ConicProblem out = p;
    std::vector<Triplet> trip;
    RVector b(rank);
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index r = 0; r < rank; ++r) {
        const auto row = perm(r);
        b(r) = p.b(row);
        for (Eigen::Index c = 0; c < a.cols(); ++c)
            if (a(row, c) != 0.0) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), a(row, c));
    }
    out.A.resize(rank, a.cols());
    out.A.setFromTriplets(trip.begin(), trip.end());
    out.b = b;
    return out;
}

void fill_objectives(const ConicProblem& p, ConicSolution& sol) {
    sol.primal_objective = p.c.dot(sol.x);
    sol.dual_objective = -p.h.dot(sol.z) - (p.b.size() ? p.b.dot(sol.y) : 0.0);
    sol.gap = sol.primal_objective - sol.dual_objective;
    sol.relative_gap = std::abs(sol.gap) / std::max(1.0, std::abs(sol.primal_objective));
    RVector r = p.c + p.G.transpose() * sol.z;
    if (p.A.rows() > 0) r += p.A.transpose() * sol.y;
    sol.dual_residual = r.norm();
}

}  // namespace

bool in_cone_interior(const RVector& s, const ConeDims& cones) {
    for (const auto& b : layout(cones))
        if (!(block_min_eig(b, s.data() + b.offset) > 0.0)) return false;
    return true;
}

double cone_violation(const RVector& s, const ConeDims& cones) {
    double v = 0.0;
    for (const auto& b : layout(cones)) v = std::max(v, -block_min_eig(b, s.data() + b.offset));
    return v;
}

ConicSolution BarrierSolver::solve(const ConicProblem& input, const std::optional<RVector>& start) const {
    input.validate();
    const ConicProblem p = drop_redundant_equalities(input);
    ConicSolution sol;
    const int n = p.num_vars();

    RVector x;
    int phase1_steps = 0;
    if (start) {
        x = *start;
        if (x.size() != n) throw DimensionError("start point has wrong length");
        if (p.A.rows() > 0 && (p.A * x - p.b).norm() > 1e-8 * std::max(1.0, p.b.norm()))
            throw DimensionError("start point violates the equality constraints");
        if (!in_cone_interior(p.h - p.G * x, p.cones)) throw DimensionError("start point is not strictly feasible");
    } else {
        double eq_res = 0.0;
        RVector x0;
        if (!equality_point(p, x0, eq_res) ||
            (input.A.rows() > 0 && (eq_res = (input.A * x0 - input.b).norm()) > 1e-8 * std::max(1.0, input.b.norm()))) {
            sol.status = ConicStatus::PrimalInfeasible;
            sol.message = "equality constraints are inconsistent (least-squares residual " + std::to_string(eq_res) + ")";
            return sol;
        }
        const RVector s0 = p.h - p.G * x0;
        if (in_cone_interior(s0, p.cones)) {
            x = x0;
        } else {
            // Phase I: minimize sigma s.t. G x - sigma e + s = h, sigma >= -1.
            const RVector e = cone_identity(p.cones);
            ConicProblem p1;
            p1.cones = p.cones;
            p1.cones.nonneg += 1;
            const int l = p.cones.nonneg;
            const int rows1 = p1.cones.rows();
            p1.c = RVector::Zero(n + 1);
            p1.c(n) = 1.0;
            auto map_row = [l](int r) { return r < l ? r : r + 1; };
            std::vector<Triplet> trip;
            trip.reserve(static_cast<std::size_t>(p.G.nonZeros()) + static_cast<std::size_t>(rows1));
            for (int col = 0; col < p.G.outerSize(); ++col)
                for (SparseMatrix::InnerIterator it(p.G, col); it; ++it)
                    trip.emplace_back(map_row(static_cast<int>(it.row())), col, it.value());
            p1.h.resize(rows1);
            for (int r = 0; r < p.G.rows(); ++r) {
                if (e(r) != 0.0) trip.emplace_back(map_row(r), n, -e(r));
                p1.h(map_row(r)) = p.h(r);
            }
            trip.emplace_back(l, n, -1.0);
            p1.h(l) = 1.0;
            p1.G.resize(rows1, n + 1);
            p1.G.setFromTriplets(trip.begin(), trip.end());
            p1.A.resize(p.A.rows(), n + 1);
            if (p.A.rows() > 0) {
                std::vector<Triplet> at;
                for (int col = 0; col < p.A.outerSize(); ++col)
                    for (SparseMatrix::InnerIterator it(p.A, col); it; ++it)
                        at.emplace_back(static_cast<int>(it.row()), col, it.value());
                p1.A.setFromTriplets(at.begin(), at.end());
            }
            p1.b = p.b;

            double depth = 0.0;
            for (const auto& b : layout(p.cones)) depth = std::max(depth, -block_min_eig(b, s0.data() + b.offset));
            PathState st;
            st.x.resize(n + 1);
            st.x.head(n) = x0;
            st.x(n) = std::max(0.0, depth) + 1.0;
            st.tau = 1.0;
            PathFollower pf(p1, options_);
            const double nu1 = pf.degree();
            bool infeasible = false;
            auto early = [&](const RVector& xs) { return xs(n) < 0.0; };
            auto done = [&](const PathState& s) {
                const double sigma = s.x(n);
                const double lower = sigma - nu1 / s.tau;
                if (lower > 1e-10) {
                    infeasible = true;
                    return true;
                }
                if (nu1 / s.tau < 1e-11) {
                    infeasible = true;
                    return true;
                }
                return false;
            };
            const auto outcome = pf.run(st, early, done);
            phase1_steps = st.steps;
            sol.iterations = phase1_steps;
            if (outcome != PathOutcome::EarlyStop) {
                sol.status = (infeasible || outcome == PathOutcome::Converged || outcome == PathOutcome::Stalled)
                                 ? ConicStatus::PrimalInfeasible
                                 : ConicStatus::NumericalError;
                if (outcome == PathOutcome::MaxSteps) sol.status = ConicStatus::MaxIterations;
                RVector z1, y1;
                pf.duals(st, z1, y1);
                // certificate on the original rows: drop the sigma >= -1 row
                sol.z.resize(p.G.rows());
                for (int r = 0; r < p.G.rows(); ++r) sol.z(r) = z1(map_row(r));
                sol.y = y1;
                sol.x = st.x.head(n);
                const double hz = p.h.dot(sol.z) + (p.b.size() ? p.b.dot(sol.y) : 0.0);
                RVector gz = p.G.transpose() * sol.z;
                if (p.A.rows() > 0) gz += p.A.transpose() * sol.y;
                std::ostringstream os;
                os << "phase I: min sigma = " << st.x(n) << " (lower bound " << st.x(n) - nu1 / st.tau
                   << "); certificate h'z + b'y = " << hz << ", ||G'z + A'y|| = " << gz.norm();
                sol.message = os.str();
                return sol;
            }
            x = st.x.head(n);
        }
    }

    PathFollower pf(p, options_);
    PathState st;
    st.x = x;
    const double nu = pf.degree();
    // tau0 balancing the objective against the barrier gradient
    {
        const double cn = p.c.norm();
        st.tau = cn > 0.0 ? std::max(1e-6, std::min(1e6, nu / std::max(1e-12, std::abs(p.c.dot(x)) + cn))) : 1.0;
    }
    auto done = [&](const PathState& s) {
        const double gap = nu / s.tau;
        return gap <= std::max(options_.abs_gap_tol, options_.rel_gap_tol * std::max(1.0, std::abs(p.c.dot(s.x))));
    };
    const auto outcome = pf.run(st, {}, done);
    sol.iterations = phase1_steps + st.steps;
    sol.x = st.x;
    sol.s = pf.slack(st.x);
    pf.duals(st, sol.z, sol.y);
    fill_objectives(p, sol);
    switch (outcome) {
        case PathOutcome::Converged:
            // nu / tau is only a gap bound on the central path; trust the duals instead
            sol.status = sol.relative_gap <= kCertifiedGap ? ConicStatus::Optimal : ConicStatus::NumericalError;
            if (sol.status != ConicStatus::Optimal) sol.message = "barrier converged but duality gap is large";
            break;
        case PathOutcome::Unbounded:
            sol.status = ConicStatus::Unbounded;
            sol.message = "objective decreases without bound (|x| > 1e12)";
            break;
        case PathOutcome::MaxSteps:
            sol.status = ConicStatus::MaxIterations;
            sol.message = "Newton step limit reached";
            break;
        default:
            // A stalled line search near the optimum still yields a usable point.
            sol.status = sol.relative_gap <= kCertifiedGap ? ConicStatus::Optimal : ConicStatus::NumericalError;
            sol.message = "line search stalled";
            break;
    }
    // Map the dual multipliers back if redundant equalities were dropped.
    if (p.A.rows() != input.A.rows()) {
        const RMatrix a(input.A);
        const RVector r = -(input.c + input.G.transpose() * sol.z);
        sol.y = a.transpose().completeOrthogonalDecomposition().solve(r);
    }
    return sol;
}

}  // namespace isac
