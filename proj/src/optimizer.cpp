#include "isac/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "isac/rng.hpp"

namespace isac {

namespace {

const double kLn2 = std::log(2.0);

/// One achievable-rate expression: user `user` decodes column `signal`
/// with the listed columns as interference.
struct RateTerm {
    int user = 0;
    int signal = 0;
    std::vector<int> interference;
};

/// Stream structure of a design problem, independent of the iterate.
struct Structure {
    int nt = 0;
    int users = 0;
    int columns = 0;               // 1 + number of private streams
    std::vector<bool> active;      // per column
    std::vector<int> common_users; // users that may hold a common share
    std::vector<RateTerm> common_terms;
    std::vector<RateTerm> private_terms;
    // per user: indices into private_terms whose rate bounds the user's private rate
    std::vector<std::vector<int>> user_terms;
};

Structure make_structure(const DesignProblem& p) {
    const ChannelSet& ch = p.channels;
    Structure st;
    st.nt = ch.num_antennas();
    st.users = ch.num_users();
    st.columns = ch.num_streams() + 1;
    st.active.assign(st.columns, true);
    st.user_terms.resize(st.users);

    if (p.strategy == Strategy::NOMA) {
        st.active[0] = false;
        const auto order = ascending_strength_order(ch);
        for (int i = 0; i < st.users; ++i) {
            const int u = order[i];
            for (int j = i; j < st.users; ++j) {
                RateTerm t;
                t.user = order[j];
                t.signal = u + 1;
                for (int m = i + 1; m < st.users; ++m) t.interference.push_back(order[m] + 1);
                st.user_terms[u].push_back(static_cast<int>(st.private_terms.size()));
                st.private_terms.push_back(t);
            }
        }
        return st;
    }

    if (p.strategy == Strategy::SDMA) st.active[0] = false;
    if (p.strategy == Strategy::RSMA && p.mapping) {
        const auto& en = p.mapping->private_enabled;
        for (std::size_t s = 0; s < en.size(); ++s) st.active[s + 1] = en[s];
    }
    if (st.active[0]) {
        if (p.mapping && !p.mapping->common_users.empty()) {
            st.common_users = p.mapping->common_users;
        } else {
            st.common_users.resize(st.users);
            std::iota(st.common_users.begin(), st.common_users.end(), 0);
        }
    }
    std::vector<int> privates;
    for (int c = 1; c < st.columns; ++c)
        if (st.active[c]) privates.push_back(c);
    if (st.active[0]) {
        for (int k = 0; k < st.users; ++k) {
            RateTerm t;
            t.user = k;
            t.signal = 0;
            t.interference = privates;
            st.common_terms.push_back(t);
        }
    }
    for (int k = 0; k < st.users; ++k) {
        const int col = ch.stream_of(k) + 1;
        if (!st.active[col]) continue;
        std::vector<int> members{k};
        if (ch.multicast()) members = ch.groups[col - 1];
        for (int m : members) {
            RateTerm t;
            t.user = m;
            t.signal = col;
            for (int c : privates)
                if (c != col) t.interference.push_back(c);
            st.user_terms[k].push_back(static_cast<int>(st.private_terms.size()));
            st.private_terms.push_back(t);
        }
    }
    return st;
}

double term_rate(const RateTerm& t, const RMatrix& q) {
    double interf = 1.0;
    for (int c : t.interference) interf += q(t.user, c);
    return std::log2((interf + q(t.user, t.signal)) / interf);
}

struct ExactRates {
    RVector common;   // per user R_c,k (zeros without common stream)
    RVector priv;     // per user private rate
    double budget = 0.0;
};

ExactRates exact_rates(const Structure& st, const RMatrix& q) {
    ExactRates e;
    e.common = RVector::Zero(st.users);
    e.priv = RVector::Zero(st.users);
    for (const auto& t : st.common_terms) e.common(t.user) = term_rate(t, q);
    e.budget = st.common_terms.empty() ? 0.0 : e.common.minCoeff();
    for (int u = 0; u < st.users; ++u) {
        if (st.user_terms[u].empty()) continue;
        double r = INFINITY;
        for (int i : st.user_terms[u]) r = std::min(r, term_rate(st.private_terms[i], q));
        e.priv(u) = r;
    }
    return e;
}

/// Closed-form max-min value over the allowed users.
double max_min_value(const ExactRates& e, const std::vector<int>& allowed) {
    if (allowed.empty()) return e.priv.minCoeff();
    RVector sub(static_cast<Eigen::Index>(allowed.size()));
    for (std::size_t i = 0; i < allowed.size(); ++i) sub(static_cast<Eigen::Index>(i)) = e.priv(allowed[i]);
    const RVector c = max_min_common_split(std::max(0.0, e.budget), sub);
    double v = INFINITY;
    std::vector<bool> in(e.priv.size(), false);
    for (std::size_t i = 0; i < allowed.size(); ++i) {
        in[allowed[i]] = true;
        v = std::min(v, c(static_cast<Eigen::Index>(i)) + sub(static_cast<Eigen::Index>(i)));
    }
    for (Eigen::Index u = 0; u < e.priv.size(); ++u)
        if (!in[u]) v = std::min(v, e.priv(u));
    return v;
}

/// Normalized gains q(k, c) = (P / sigma^2) g_k^H W_c g_k for lifted W_c (trace-normalized).
RMatrix lifted_gains(const Structure& st, const ChannelSet& ch, const std::vector<CMatrix>& w, double snr) {
    RMatrix q = RMatrix::Zero(st.users, st.columns);
    for (int k = 0; k < st.users; ++k)
        for (int c = 0; c < st.columns; ++c)
            if (st.active[c]) q(k, c) = snr * std::max(0.0, (ch.h.col(k).adjoint() * w[c] * ch.h.col(k))(0, 0).real());
    return q;
}

RMatrix precoder_gains(const ChannelSet& ch, const PrecodingMatrix& p) {
    return (ch.h.adjoint() * p.columns).cwiseAbs2() / ch.noise_power;
}

// ---- Hermitian parametrization ---------------------------------------------

/// Coordinates of an n x n Hermitian matrix: n diagonal reals, then for
/// each i < j the real and imaginary parts of entry (i, j).
struct HermCoord {
    int i, j, kind;  // kind 0 diag, 1 real, 2 imaginary
};

std::vector<HermCoord> herm_coords(int n) {
    std::vector<HermCoord> out;
    for (int i = 0; i < n; ++i) out.push_back({i, i, 0});
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < j; ++i) {
            out.push_back({i, j, 1});
            out.push_back({i, j, 2});
        }
    return out;
}

/// Coefficients of x -> tr(Q W(x)) for Hermitian Q.
RVector trace_coefficients(const CMatrix& q, const std::vector<HermCoord>& coords) {
    RVector a(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t m = 0; m < coords.size(); ++m) {
        const auto& c = coords[m];
        const cplx v = q(c.i, c.j);
        a(static_cast<Eigen::Index>(m)) = c.kind == 0 ? v.real() : (c.kind == 1 ? 2.0 * v.real() : 2.0 * v.imag());
    }
    return a;
}

CMatrix herm_from_coords(const double* x, const std::vector<HermCoord>& coords, int n) {
    CMatrix w = CMatrix::Zero(n, n);
    for (std::size_t m = 0; m < coords.size(); ++m) {
        const auto& c = coords[m];
        if (c.kind == 0) {
            w(c.i, c.i) = x[m];
        } else if (c.kind == 1) {
            w(c.i, c.j) += x[m];
            w(c.j, c.i) += x[m];
        } else {
            w(c.i, c.j) += cplx(0.0, x[m]);
            w(c.j, c.i) -= cplx(0.0, x[m]);
        }
    }
    return w;
}

/// Incremental builder for a ConicProblem with cones added in fixed order.
class ProblemBuilder {
public:
    explicit ProblemBuilder(int num_vars) : n_(num_vars), c_(RVector::Zero(num_vars)) {}

    RVector& cost() { return c_; }

    /// Row sum_j coef_j x_j <= rhs  (nonnegative slack rhs - coef'x).
    void add_leq(const std::vector<std::pair<int, double>>& coef, double rhs) {
        for (auto [j, v] : coef) nonneg_.emplace_back(static_cast<int>(nonneg_h_.size()), j, v);
        nonneg_h_.push_back(rhs);
    }
    /// SOC block with slack rows (h_r - G_r x), r = 0..d-1.
    void add_soc(const std::vector<std::vector<std::pair<int, double>>>& g, const std::vector<double>& h) {
        soc_dims_.push_back(static_cast<int>(h.size()));
        for (std::size_t r = 0; r < h.size(); ++r) {
            for (auto [j, v] : g[r]) soc_.emplace_back(static_cast<int>(soc_h_.size()), j, v);
            soc_h_.push_back(h[r]);
        }
    }
    void add_psd(int order, const std::vector<Triplet>& g, const std::vector<double>& h) {
        psd_dims_.push_back(order);
        const int base = static_cast<int>(psd_h_.size());
        for (const auto& t : g) psd_.emplace_back(base + t.row(), t.col(), t.value());
        psd_h_.insert(psd_h_.end(), h.begin(), h.end());
    }
    void add_hpsd(int order, const std::vector<Triplet>& g, const std::vector<double>& h) {
        hpsd_dims_.push_back(order);
        const int base = static_cast<int>(hpsd_h_.size());
        for (const auto& t : g) hpsd_.emplace_back(base + t.row(), t.col(), t.value());
        hpsd_h_.insert(hpsd_h_.end(), h.begin(), h.end());
    }
    void add_eq(const std::vector<std::pair<int, double>>& coef, double rhs) {
        for (auto [j, v] : coef) eq_.emplace_back(static_cast<int>(eq_b_.size()), j, v);
        eq_b_.push_back(rhs);
    }

    ConicProblem build() const {
        ConicProblem p;
        p.c = c_;
        p.cones.nonneg = static_cast<int>(nonneg_h_.size());
        p.cones.soc = soc_dims_;
        p.cones.psd = psd_dims_;
        p.cones.hpsd = hpsd_dims_;
        const int rows = p.cones.rows();
        std::vector<Triplet> all;
        RVector h(rows);
        int off = 0;
        auto append = [&](const std::vector<Triplet>& t, const std::vector<double>& hv) {
            for (const auto& e : t) all.emplace_back(off + e.row(), e.col(), e.value());
            for (std::size_t r = 0; r < hv.size(); ++r) h(off + static_cast<int>(r)) = hv[r];
            off += static_cast<int>(hv.size());
        };
        append(nonneg_, nonneg_h_);
        append(soc_, soc_h_);
        append(psd_, psd_h_);
        append(hpsd_, hpsd_h_);
        p.G.resize(rows, n_);
        p.G.setFromTriplets(all.begin(), all.end());
        p.h = h;
        p.A.resize(static_cast<Eigen::Index>(eq_b_.size()), n_);
        p.A.setFromTriplets(eq_.begin(), eq_.end());
        p.b = Eigen::Map<const RVector>(eq_b_.data(), static_cast<Eigen::Index>(eq_b_.size()));
        return p;
    }

private:
    int n_;
    RVector c_;
    std::vector<Triplet> nonneg_, soc_, psd_, hpsd_, eq_;
    std::vector<double> nonneg_h_, soc_h_, psd_h_, hpsd_h_, eq_b_;
    std::vector<int> soc_dims_, psd_dims_, hpsd_dims_;
};

/// Shared pieces of the lifted subproblems: matrix variables, PSD cones,
/// per-antenna equalities and the FIM LMI.
struct LiftedModel {
    const Structure& st;
    std::vector<HermCoord> coords;
    std::vector<int> offset;  // per column, -1 when inactive
    int num_matrix_vars = 0;
    std::array<RVector, 10> fim_coef;  // scaled FIM entry (i<=j) per coordinate

    LiftedModel(const Structure& s, const DesignProblem& p) : st(s), coords(herm_coords(s.nt)) {
        const int per = static_cast<int>(coords.size());
        offset.assign(st.columns, -1);
        for (int c = 0; c < st.columns; ++c)
            if (st.active[c]) {
                offset[c] = num_matrix_vars;
                num_matrix_vars += per;
            }
        // F >= tI is imposed as D F D / s >= t D^2 with D = diag(F_iso)^{-1/2} and
        // s = fim_scale, which keeps the LMI entries O(1) across parameter units.
        const FimModel model(p.scene);
        const int nt = p.scene.geometry.num_tx;
        const Matrix4 iso = model.evaluate(CMatrix::Identity(nt, nt) * (p.total_power / nt));
        const double scale = p.fim_scale();
        for (int i = 0; i < 4; ++i) congruence(i) = 1.0 / std::sqrt(iso(i, i));
        int idx = 0;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j)
                fim_coef[idx++] = (p.total_power * congruence(i) * congruence(j)) *
                                  trace_coefficients(model.coefficient(i, j), coords);
        t_coef = congruence.array().square() * scale;
    }
    Vector4 congruence;
    Vector4 t_coef;  // coefficient of t on each LMI diagonal entry

    static int fim_index(int i, int j) {
        if (i > j) std::swap(i, j);
        return i * 4 - i * (i - 1) / 2 + (j - i);
    }

    /// Coefficients of the normalized quadratic form (P/sigma^2) g^H W_c g.
    std::vector<std::pair<int, double>> gain_coef(const CVector& g, int column, double snr) const {
        const CMatrix q = g * g.adjoint();
        const RVector a = snr * trace_coefficients(q, coords);
        std::vector<std::pair<int, double>> out;
        for (Eigen::Index m = 0; m < a.size(); ++m)
            if (a(m) != 0.0) out.emplace_back(offset[column] + static_cast<int>(m), a(m));
        return out;
    }

    /// Adds PSD cones for every W_c, diag(sum W_c) = 1/Nt and
    /// F(sum W_c)/fim_scale - t I >= 0.
    void add_common_constraints(ProblemBuilder& b, int t_var) const {
        const int n = st.nt;
        for (int c = 0; c < st.columns; ++c) {
            if (!st.active[c]) continue;
            std::vector<Triplet> g;
            for (std::size_t m = 0; m < coords.size(); ++m) {
                const auto& co = coords[m];
                const int v = offset[c] + static_cast<int>(m);
                if (co.kind == 0) {
                    g.emplace_back(co.j * n + co.i, v, -1.0);
                } else if (co.kind == 1) {
                    g.emplace_back(co.j * n + co.i, v, -1.0);
                    g.emplace_back(co.i * n + co.j, v, -1.0);
                } else {
                    g.emplace_back(n * n + co.j * n + co.i, v, -1.0);
                    g.emplace_back(n * n + co.i * n + co.j, v, 1.0);
                }
            }
            b.add_hpsd(n, g, std::vector<double>(2 * n * n, 0.0));
        }
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<int, double>> coef;
            for (int c = 0; c < st.columns; ++c)
                if (st.active[c]) coef.emplace_back(offset[c] + i, 1.0);
            b.add_eq(coef, 1.0 / n);
        }
        std::vector<Triplet> g;
        for (int a = 0; a < 4; ++a)
            for (int bb = 0; bb < 4; ++bb) {
                const int row = bb * 4 + a;
                const RVector& f = fim_coef[fim_index(a, bb)];
                for (int c = 0; c < st.columns; ++c) {
                    if (!st.active[c]) continue;
                    for (Eigen::Index m = 0; m < f.size(); ++m)
                        if (f(m) != 0.0) g.emplace_back(row, offset[c] + static_cast<int>(m), -f(m));
                }
                if (a == bb) g.emplace_back(row, t_var, t_coef(a));
            }
        b.add_psd(4, g, std::vector<double>(16, 0.0));
    }

    std::vector<CMatrix> extract(const RVector& x) const {
        std::vector<CMatrix> w(st.columns, CMatrix::Zero(st.nt, st.nt));
        for (int c = 0; c < st.columns; ++c)
            if (st.active[c]) w[c] = herm_from_coords(x.data() + offset[c], coords, st.nt);
        return w;
    }
};

double normalized_min_eig(const DesignProblem& p, const CMatrix& rx_normalized) {
    const Matrix4 f = FimModel(p.scene).evaluate(rx_normalized * p.total_power);
    return min_eigenvalue(f) / p.fim_scale();
}

CMatrix lifted_sum(const std::vector<CMatrix>& w) {
    CMatrix s = CMatrix::Zero(w[0].rows(), w[0].cols());
    for (const auto& m : w) s += m;
    return s;
}

struct Subproblem {
    ConicProblem problem;
    int r_var = -1, t_var = -1;
    int c0 = -1, rho0 = -1, u0 = -1, nterms = 0;
};

/// SCA subproblem linearized at gains q_hat.
Subproblem build_subproblem(const LiftedModel& lm, const DesignProblem& p, const RMatrix& q_hat, bool rate_stage) {
    const Structure& st = lm.st;
    const double snr = p.total_power / p.channels.noise_power;
    const int nterms = static_cast<int>(st.common_terms.size() + st.private_terms.size());
    const int ncommon = static_cast<int>(st.common_users.size());
    const int r = lm.num_matrix_vars;
    const int t = r + 1;
    const int c0 = t + 1;
    const int rho0 = c0 + ncommon;
    const int u0 = rho0 + nterms;
    const int nvars = u0 + nterms;
    ProblemBuilder b(nvars);

    if (rate_stage) {
        b.cost()(t) = -1.0;
    } else {
        b.cost()(r) = -1.0;
        b.cost()(t) = -p.lambda;
    }
    b.add_leq({{t, -1.0}}, 1.0);  // t >= -1
    // r >= -1 (or r >= r_min) bounds the phase-I barrier; MFR >= 0 anyway
    b.add_leq({{r, -1.0}}, rate_stage ? -p.r_min : 1.0);
    std::vector<int> c_of_user(st.users, -1);
    for (int i = 0; i < ncommon; ++i) {
        c_of_user[st.common_users[i]] = c0 + i;
        b.add_leq({{c0 + i, -1.0}}, 0.0);
    }

    std::vector<const RateTerm*> terms;
    for (const auto& tm : st.common_terms) terms.push_back(&tm);
    for (const auto& tm : st.private_terms) terms.push_back(&tm);
    // common budget: sum C <= rho_common(k)
    for (std::size_t k = 0; k < st.common_terms.size(); ++k) {
        std::vector<std::pair<int, double>> coef{{rho0 + static_cast<int>(k), -1.0}};
        for (int i = 0; i < ncommon; ++i) coef.emplace_back(c0 + i, 1.0);
        b.add_leq(coef, 0.0);
    }
    // user rates: r <= C_u + rho_term
    const int first_private = static_cast<int>(st.common_terms.size());
    for (int u = 0; u < st.users; ++u) {
        if (st.user_terms[u].empty()) {
            if (c_of_user[u] < 0) throw ConfigError("user " + std::to_string(u) + " has neither a private stream nor a common share");
            b.add_leq({{r, 1.0}, {c_of_user[u], -1.0}}, 0.0);
            continue;
        }
        for (int i : st.user_terms[u]) {
            std::vector<std::pair<int, double>> coef{{r, 1.0}, {rho0 + first_private + i, -1.0}};
            if (c_of_user[u] >= 0) coef.emplace_back(c_of_user[u], -1.0);
            b.add_leq(coef, 0.0);
        }
    }
    // rate minorants
    std::vector<std::vector<std::vector<std::pair<int, double>>>> soc_g;
    std::vector<std::vector<double>> soc_h;
    for (int i = 0; i < nterms; ++i) {
        const RateTerm& tm = *terms[i];
        const CVector g = p.channels.h.col(tm.user);
        double a_hat = 1.0 + q_hat(tm.user, tm.signal), b_hat = 1.0;
        for (int c : tm.interference) {
            a_hat += q_hat(tm.user, c);
            b_hat += q_hat(tm.user, c);
        }
        // with v = A_hat u (v A / A_hat >= 1):
        // rho + v/ln2 + sum_I q / (B_hat ln2) <= log2 A_hat - log2 B_hat + 2/ln2 - 1/(B_hat ln2)
        std::vector<std::pair<int, double>> coef{{rho0 + i, 1.0}, {u0 + i, 1.0 / kLn2}};
        std::vector<std::pair<int, double>> a_coef;  // coefficients of A - 1
        for (int c : tm.interference) {
            for (auto [j, v] : lm.gain_coef(g, c, snr)) {
                coef.emplace_back(j, v / (b_hat * kLn2));
                a_coef.emplace_back(j, v);
            }
        }
        for (auto e : lm.gain_coef(g, tm.signal, snr)) a_coef.push_back(e);
        b.add_leq(coef, std::log2(a_hat) - std::log2(b_hat) + 2.0 / kLn2 - 1.0 / (b_hat * kLn2));
        // v * a >= 1 with a = A / A_hat:  || (2, v - a) || <= v + a
        std::vector<std::vector<std::pair<int, double>>> g3(3);
        g3[0].emplace_back(u0 + i, -1.0);
        g3[2].emplace_back(u0 + i, -1.0);
        for (auto [j, v] : a_coef) {
            g3[0].emplace_back(j, -v / a_hat);
            g3[2].emplace_back(j, v / a_hat);
        }
        soc_g.push_back(std::move(g3));
        soc_h.push_back({1.0 / a_hat, 2.0, -1.0 / a_hat});
    }
    for (std::size_t i = 0; i < soc_g.size(); ++i) b.add_soc(soc_g[i], soc_h[i]);
    lm.add_common_constraints(b, t);
    return {b.build(), r, t, c0, rho0, u0, nterms};
}

/// Strictly feasible point of the subproblem built at `q_hat`, obtained by
/// shrinking the lifted iterate towards isotropic power. Empty when the
/// shrunken point is not interior (the backend then runs phase I).
std::optional<RVector> interior_start(const LiftedModel& lm, const DesignProblem& p, const Subproblem& sp,
                                      const std::vector<CMatrix>& w, const RMatrix& q_hat, bool rate_stage) {
    const Structure& st = lm.st;
    const int nt = st.nt;
    int active = 0;
    for (int c = 0; c < st.columns; ++c) active += st.active[c] ? 1 : 0;
    const double eps = 0.01;
    std::vector<CMatrix> ws(st.columns, CMatrix::Zero(nt, nt));
    RVector x = RVector::Zero(sp.problem.num_vars());
    for (int c = 0; c < st.columns; ++c) {
        if (!st.active[c]) continue;
        ws[c] = (1.0 - eps) * (w[c] + w[c].adjoint()) / 2.0 +
                CMatrix::Identity(nt, nt) * (eps / (static_cast<double>(nt) * active));
        for (std::size_t m = 0; m < lm.coords.size(); ++m) {
            const auto& co = lm.coords[m];
            const cplx v = ws[c](co.i, co.j);
            x(lm.offset[c] + static_cast<int>(m)) = co.kind == 0 ? v.real() : (co.kind == 1 ? v.real() : v.imag());
        }
    }
    const RMatrix q = lifted_gains(st, p.channels, ws, p.total_power / p.channels.noise_power);
    std::vector<const RateTerm*> terms;
    for (const auto& tm : st.common_terms) terms.push_back(&tm);
    for (const auto& tm : st.private_terms) terms.push_back(&tm);
    const double margin = 1e-3;
    RVector rho(sp.nterms);
    for (int i = 0; i < sp.nterms; ++i) {
        const RateTerm& tm = *terms[i];
        double a = 1.0 + q(tm.user, tm.signal), bb = 1.0, a_hat = 1.0 + q_hat(tm.user, tm.signal), b_hat = 1.0;
        for (int c : tm.interference) {
            a += q(tm.user, c);
            bb += q(tm.user, c);
            a_hat += q_hat(tm.user, c);
            b_hat += q_hat(tm.user, c);
        }
        const double v = (1.0 + margin) * a_hat / a;
        const double surrogate =
            std::log2(a_hat) - std::log2(b_hat) + (1.0 - v) / kLn2 - (bb - b_hat) / (b_hat * kLn2);
        rho(i) = surrogate - margin;
        x(sp.u0 + i) = v;
        x(sp.rho0 + i) = rho(i);
    }
    const int ncommon = static_cast<int>(st.common_users.size());
    std::vector<double> c_of_user(st.users, 0.0);
    if (ncommon > 0) {
        const double budget = rho.head(static_cast<Eigen::Index>(st.common_terms.size())).minCoeff();
        if (!(budget > 0.0)) return std::nullopt;
        for (int i = 0; i < ncommon; ++i) {
            x(sp.c0 + i) = budget / (2.0 * ncommon);
            c_of_user[st.common_users[i]] = x(sp.c0 + i);
        }
    }
    const int first_private = static_cast<int>(st.common_terms.size());
    double r = INFINITY;
    for (int u = 0; u < st.users; ++u) {
        if (st.user_terms[u].empty()) r = std::min(r, c_of_user[u]);
        for (int i : st.user_terms[u]) r = std::min(r, c_of_user[u] + rho(first_private + i));
    }
    r -= margin;
    if (!(r > (rate_stage ? p.r_min : -1.0))) return std::nullopt;
    x(sp.r_var) = r;
    const double tmin = normalized_min_eig(p, lifted_sum(ws));
    x(sp.t_var) = tmin - margin * std::max(1.0, std::abs(tmin));
    if (!(x(sp.t_var) > -1.0)) return std::nullopt;
    const ConicProblem& cp = sp.problem;
    if (cp.A.rows() > 0 && (cp.A * x - cp.b).norm() > 1e-9 * std::max(1.0, cp.b.norm())) return std::nullopt;
    if (!in_cone_interior(cp.h - cp.G * x, cp.cones)) return std::nullopt;
    return x;
}

struct LiftedState {
    std::vector<CMatrix> w;
    RMatrix q;
    double mfr = 0.0;
    double t = 0.0;  // normalized
};

LiftedState make_state(const Structure& st, const DesignProblem& p, std::vector<CMatrix> w) {
    LiftedState s;
    s.w = std::move(w);
    s.q = lifted_gains(st, p.channels, s.w, p.total_power / p.channels.noise_power);
    s.mfr = max_min_value(exact_rates(st, s.q), st.common_users);
    s.t = normalized_min_eig(p, lifted_sum(s.w));
    return s;
}

double lifted_objective(const LiftedState& s, const DesignProblem& p, bool rate_stage) {
    return rate_stage ? s.t : s.mfr + p.lambda * s.t;
}

struct ScaResult {
    LiftedState state;
    bool converged = false;
    bool failed = false;
    bool infeasible = false;
    std::string message;
};

ScaResult run_sca(const Structure& st, const LiftedModel& lm, const DesignProblem& p, LiftedState start,
                  bool rate_stage, const SolveOptions& opt, const ConicBackend& backend, DesignDiagnostics& diag,
                  double stop_when_mfr_reaches = INFINITY) {
    ScaResult res;
    res.state = std::move(start);
    double prev = -INFINITY;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Subproblem sp = build_subproblem(lm, p, res.state.q, rate_stage);
        if (opt.record_dir) {
            std::filesystem::create_directories(*opt.record_dir);
            save_problem(sp.problem, *opt.record_dir / ("subproblem_" + std::to_string(diag.surrogate_objective.size()) + ".txt"));
        }
        const auto x0 = interior_start(lm, p, sp, res.state.w, res.state.q, rate_stage);
        const ConicSolution sol = backend.solve(sp.problem, x0);
        diag.conic_newton_steps += sol.iterations;
        // An uncertified but strictly feasible point that does not lower the
        // surrogate is still a valid ascent step for SCA.
        const bool usable =
            sol.status == ConicStatus::NumericalError && sol.x.size() == sp.problem.num_vars() &&
            sol.x.allFinite() && in_cone_interior(sp.problem.h - sp.problem.G * sol.x, sp.problem.cones) &&
            (sp.problem.A.rows() == 0 ||
             (sp.problem.A * sol.x - sp.problem.b).norm() <= 1e-8 * std::max(1.0, sp.problem.b.norm())) &&
            (!x0 || sp.problem.c.dot(sol.x) <= sp.problem.c.dot(*x0));
        if (usable)
            diag.warnings.push_back("subproblem " + std::to_string(it) + " accepted without a dual certificate (" +
                                    sol.message + ", relative gap " + std::to_string(sol.relative_gap) + ")");
        if (!sol.optimal() && !usable) {
            if (sol.status == ConicStatus::PrimalInfeasible) {
                res.infeasible = true;
                res.message = rate_stage ? "subproblem infeasible: rate constraint MFR >= r_min cannot be met"
                                         : "subproblem infeasible: " + sol.message;
            } else {
                res.message = std::string("conic backend returned ") + to_string(sol.status) + " at iteration " +
                              std::to_string(it) + (sol.message.empty() ? "" : ": " + sol.message);
            }
            if (it == 0) res.failed = true;
            return res;
        }
        const double f = -sol.primal_objective;
        ++diag.iterations;
        diag.surrogate_objective.push_back(f);
        res.state = make_state(st, p, lm.extract(sol.x));
        diag.lifted_objective.push_back(lifted_objective(res.state, p, rate_stage));
        if (res.state.mfr >= stop_when_mfr_reaches) {
            res.converged = true;
            return res;
        }
        if (it > 0 && std::abs(f - prev) < opt.objective_tol) {
            res.converged = true;
            return res;
        }
        prev = f;
    }
    return res;
}

struct Candidate {
    PrecodingMatrix precoder;
    RateReport rates;
    double mfr = 0.0;
    double t = 0.0;  // raw lambda_min
    double residual = 0.0;
};

double power_residual(const PrecodingMatrix& pm, double total_power) {
    const double target = total_power / pm.num_antennas();
    return ((pm.antenna_powers().array() - target).abs() / target).maxCoeff();
}

/// Rank-1 recovery: dominant eigenvectors plus Gaussian randomization of each
/// lifted matrix, antenna powers restored, best candidate by objective (by
/// t among those meeting r_min in rate-constrained mode).
void recover(const Structure& st, const DesignProblem& problem, const LiftedState& state, double scale,
             const SolveOptions& options, const ConicBackend& be, std::optional<Candidate>& best, int& best_index) {
    const bool rate_mode = problem.mode == DesignMode::RateConstrained;
    const int nt = st.nt;
    std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig(st.columns);
    for (int c = 0; c < st.columns; ++c)
        if (st.active[c]) eig[c].compute(problem.total_power * (state.w[c] + state.w[c].adjoint()) / 2.0);
    Rng rng = Rng(options.seed).substream({0x72616e64});
    const double lam_raw = problem.lambda / scale;
    const double tol = 1e-9;

    double best_score = -INFINITY;
    for (int cand = 0; cand <= options.randomization_candidates; ++cand) {
        CMatrix cols = CMatrix::Zero(nt, st.columns);
        for (int c = 0; c < st.columns; ++c) {
            if (!st.active[c]) continue;
            const RVector ev = eig[c].eigenvalues().cwiseMax(0.0);
            if (cand == 0) {
                cols.col(c) = eig[c].eigenvectors().col(nt - 1) * std::sqrt(ev(nt - 1));
            } else {
                CVector xi(nt);
                for (int i = 0; i < nt; ++i) xi(i) = rng.complex_normal();
                cols.col(c) = eig[c].eigenvectors() * (ev.cwiseSqrt().cast<cplx>().asDiagonal() * xi);
            }
        }
        Candidate cd;
        cd.precoder = PrecodingMatrix(cols);
        if (!restore_antenna_power(cd.precoder, problem.total_power)) continue;
        cd.residual = power_residual(cd.precoder, problem.total_power);
        cd.rates = evaluate_rates(problem, cd.precoder, &be);
        cd.mfr = mfr(cd.rates);
        cd.t = min_eigenvalue(FimModel(problem.scene).evaluate(covariance(cd.precoder)));
        double score;
        if (rate_mode) {
            score = cd.mfr >= problem.r_min - 1e-6 ? cd.t / scale : -1e6 + cd.mfr;
        } else {
            score = cd.mfr + lam_raw * cd.t;
        }
        const bool better = !best || score > best_score + tol ||
                            (std::abs(score - best_score) <= tol && cd.residual < best->residual);
        if (better) {
            best = std::move(cd);
            best_score = score;
            best_index = cand;
        }
    }
}

DesignProblem stage1_of(const DesignProblem& problem) {
    DesignProblem s = problem;
    s.mode = DesignMode::Tradeoff;
    s.lambda = 0.0;
    return s;
}

}  // namespace

// ---- public API -------------------------------------------------------------

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::RSMA: return "RSMA";
        case Strategy::SDMA: return "SDMA";
        case Strategy::NOMA: return "NOMA";
    }
    return "?";
}

Strategy parse_strategy(const std::string& name) {
    std::string u = name;
    for (auto& ch : u) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (u == "RSMA") return Strategy::RSMA;
    if (u == "SDMA") return Strategy::SDMA;
    if (u == "NOMA") return Strategy::NOMA;
    throw ConfigError("unknown strategy '" + name + "' (expected RSMA, SDMA or NOMA)");
}

const char* to_string(DesignStatus s) {
    switch (s) {
        case DesignStatus::Converged: return "converged";
        case DesignStatus::MaxIterations: return "max_iterations";
        case DesignStatus::Infeasible: return "infeasible";
        case DesignStatus::Failed: return "failed";
    }
    return "?";
}

void DesignProblem::validate() const {
    channels.validate();
    scene.validate();
    if (scene.geometry.num_tx != channels.num_antennas())
        throw DimensionError("radar transmit array has " + std::to_string(scene.geometry.num_tx) +
                             " antennas but the channels have " + std::to_string(channels.num_antennas()));
    if (!(total_power > 0.0)) throw ConfigError("total power must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and nonnegative");
    if (!(r_min >= 0.0)) throw ConfigError("r_min must be nonnegative");
    if (strategy == Strategy::NOMA && channels.multicast())
        throw ConfigError("NOMA is defined for unicast channels only");
    if (mapping) {
        if (strategy != Strategy::RSMA) throw ConfigError("a stream mapping applies to RSMA only");
        if (!mapping->private_enabled.empty() &&
            static_cast<int>(mapping->private_enabled.size()) != channels.num_streams())
            throw DimensionError("stream mapping must list every private stream");
        for (int u : mapping->common_users)
            if (u < 0 || u >= channels.num_users()) throw DimensionError("stream mapping names an unknown user");
    }
}

double DesignProblem::fim_scale() const {
    const int nt = scene.geometry.num_tx;
    const CMatrix iso = CMatrix::Identity(nt, nt) * (total_power / nt);
    const double s = min_eigenvalue(FimModel(scene).evaluate(iso));
    if (!(s > 0.0)) throw ConfigError("FIM is singular under isotropic transmission (alpha = 0?)");
    return s;
}

bool restore_antenna_power(PrecodingMatrix& precoder, double total_power) {
    const double target = total_power / precoder.num_antennas();
    const RVector pw = precoder.antenna_powers();
    bool ok = true;
    for (int n = 0; n < precoder.num_antennas(); ++n) {
        if (!(pw(n) > 0.0)) {
            ok = false;
            continue;
        }
        precoder.columns.row(n) *= std::sqrt(target / pw(n));
    }
    return ok;
}

PrecodingMatrix maximum_ratio_precoder(const DesignProblem& p) {
    const Structure st = make_structure(p);
    const ChannelSet& ch = p.channels;
    const int nt = ch.num_antennas();
    CMatrix cols = CMatrix::Zero(nt, st.columns);
    auto dominant = [](const CMatrix& m) -> CVector {
        Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU);
        return svd.matrixU().col(0);
    };
    int active = 0;
    for (int c = 0; c < st.columns; ++c) active += st.active[c] ? 1 : 0;
    const double per = p.total_power / active;
    if (st.active[0]) cols.col(0) = dominant(ch.h) * std::sqrt(per);
    for (int c = 1; c < st.columns; ++c) {
        if (!st.active[c]) continue;
        CVector v;
        if (ch.multicast()) {
            const auto& g = ch.groups[c - 1];
            CMatrix sub(nt, static_cast<Eigen::Index>(g.size()));
            for (std::size_t i = 0; i < g.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = ch.h.col(g[i]);
            v = dominant(sub);
        } else {
            v = ch.h.col(c - 1).normalized();
        }
        cols.col(c) = v * std::sqrt(per);
    }
    PrecodingMatrix pm(cols);
    restore_antenna_power(pm, p.total_power);
    return pm;
}

RVector lp_common_split(double budget, const RVector& private_rates, const std::vector<int>& allowed,
                        const ConicBackend& backend) {
    const int k = static_cast<int>(private_rates.size());
    RVector split = RVector::Zero(k);
    const int a = static_cast<int>(allowed.size());
    if (a == 0 || !(budget > 1e-12)) return split;
    // variables: C_allowed (a), r
    ProblemBuilder b(a + 1);
    b.cost()(a) = -1.0;
    b.add_leq({{a, -1.0}}, 1.0);
    std::vector<int> var_of(k, -1);
    for (int i = 0; i < a; ++i) {
        var_of[allowed[i]] = i;
        b.add_leq({{i, -1.0}}, 0.0);
    }
    std::vector<std::pair<int, double>> sum;
    for (int i = 0; i < a; ++i) sum.emplace_back(i, 1.0);
    b.add_leq(sum, budget);
    for (int u = 0; u < k; ++u) {
        if (var_of[u] >= 0) {
            b.add_leq({{a, 1.0}, {var_of[u], -1.0}}, private_rates(u));
        } else {
            b.add_leq({{a, 1.0}}, private_rates(u));
        }
    }
    const ConicSolution sol = backend.solve(b.build());
    if (!sol.optimal()) throw std::runtime_error(std::string("common-split LP failed: ") + to_string(sol.status));
    for (int i = 0; i < a; ++i) split(allowed[i]) = std::max(0.0, sol.x(i));
    // keep sum C <= budget exactly after clipping
    const double s = split.sum();
    if (s > budget) split *= budget / s;
    return split;
}

RateReport evaluate_rates(const DesignProblem& p, const PrecodingMatrix& precoder, const ConicBackend* backend) {
    const BarrierSolver fallback;
    const ConicBackend& be = backend ? *backend : fallback;
    const Structure st = make_structure(p);
    if (precoder.columns.cols() != st.columns || precoder.num_antennas() != st.nt)
        throw DimensionError("precoder does not match the problem's stream layout");
    const RMatrix q = precoder_gains(p.channels, precoder);
    const ExactRates e = exact_rates(st, q);
    const RVector split = lp_common_split(e.budget, e.priv, st.common_users, be);
    return make_rate_report(e.common, e.priv, split, 1e-9);
}

double radar_only_bound(const DesignProblem& problem, const ConicBackend* backend) {
    problem.validate();
    DesignProblem p = problem;
    p.strategy = Strategy::SDMA;
    p.mapping.reset();
    // a single lifted matrix carries R_X
    Structure st;
    st.nt = p.channels.num_antennas();
    st.users = 0;
    st.columns = 1;
    st.active = {true};
    LiftedModel lm(st, p);
    const int t = lm.num_matrix_vars;
    ProblemBuilder b(t + 1);
    b.cost()(t) = -1.0;
    b.add_leq({{t, -1.0}}, 1.0);
    lm.add_common_constraints(b, t);
    const BarrierSolver fallback;
    const ConicBackend& be = backend ? *backend : fallback;
    const ConicSolution sol = be.solve(b.build());
    if (!sol.optimal()) throw std::runtime_error(std::string("radar-only SDP failed: ") + to_string(sol.status));
    return sol.x(t) * p.fim_scale();
}

DesignSolution solve(const DesignProblem& problem, const SolveOptions& options, const ConicBackend* backend,
                     const std::vector<CMatrix>* warm_start) {
    problem.validate();
    const BarrierSolver fallback(options.conic);
    const ConicBackend& be = backend ? *backend : fallback;
    const Structure st = make_structure(problem);
    const LiftedModel lm(st, problem);
    const double scale = problem.fim_scale();
    const bool rate_mode = problem.mode == DesignMode::RateConstrained;

    DesignSolution out;
    out.diagnostics.fim_scale = scale;

    // iteration-0 expansion point
    std::vector<CMatrix> w0;
    if (warm_start && static_cast<int>(warm_start->size()) == st.columns) {
        w0 = *warm_start;
        for (int c = 0; c < st.columns; ++c)
            if (!st.active[c] || w0[c].rows() != st.nt) w0[c] = CMatrix::Zero(st.nt, st.nt);
    } else {
        const PrecodingMatrix mr = maximum_ratio_precoder(problem);
        for (int c = 0; c < st.columns; ++c)
            w0.push_back(mr.columns.col(c) * mr.columns.col(c).adjoint() / problem.total_power);
    }
    LiftedState state = make_state(st, problem, w0);

    ScaResult sca;
    if (rate_mode) {
        const DesignProblem stage1 = stage1_of(problem);
        if (state.mfr >= problem.r_min + 1e-3) {
            sca.state = state;
            sca.converged = true;
        } else {
            sca = run_sca(st, lm, stage1, state, false, options, be, out.diagnostics, problem.r_min + 1e-3);
        }
        if (sca.failed) {
            out.status = DesignStatus::Failed;
            out.message = sca.message;
            return out;
        }
        if (sca.state.mfr < problem.r_min) {
            std::ostringstream os;
            os << "rate constraint MFR >= " << problem.r_min << " cannot be satisfied (best lifted MFR "
               << sca.state.mfr << ")";
            out.status = DesignStatus::Infeasible;
            out.message = os.str();
            out.mfr = sca.state.mfr;
            out.rate_target_met = false;
            out.lifted = sca.state.w;
            return out;
        }
        out.diagnostics.surrogate_objective.clear();
        out.diagnostics.lifted_objective.clear();
        sca = run_sca(st, lm, problem, sca.state, true, options, be, out.diagnostics);
    } else {
        sca = run_sca(st, lm, problem, state, false, options, be, out.diagnostics);
    }
    if (sca.failed) {
        out.status = sca.infeasible ? DesignStatus::Infeasible : DesignStatus::Failed;
        out.message = sca.message;
        return out;
    }
    if (!sca.message.empty()) out.diagnostics.warnings.push_back(sca.message);
    out.lifted = sca.state.w;
    out.diagnostics.lifted_value = lifted_objective(sca.state, problem, rate_mode);

    std::optional<Candidate> best;
    int best_index = -1;
    recover(st, problem, sca.state, scale, options, be, best, best_index);
    if (rate_mode) {
        // the lifted rate constraint is tight at the optimum, so rank loss in
        // recovery lands just below r_min; re-solve with the target raised by
        // the observed loss while the lifted problem can still reach it
        double target = problem.r_min;
        for (int retry = 0; retry < 3 && best && best->mfr < problem.r_min - 1e-6 && best->mfr > 0.0; ++retry) {
            target *= problem.r_min / best->mfr;
            ScaResult lift = run_sca(st, lm, stage1_of(problem), sca.state, false, options, be, out.diagnostics,
                                     target + 1e-3);
            if (lift.failed || lift.state.mfr < target) break;
            DesignProblem raised = problem;
            raised.r_min = target;
            out.diagnostics.surrogate_objective.clear();
            out.diagnostics.lifted_objective.clear();
            ScaResult again = run_sca(st, lm, raised, lift.state, true, options, be, out.diagnostics);
            if (again.failed) break;
            std::optional<Candidate> cand;
            int idx = -1;
            recover(st, problem, again.state, scale, options, be, cand, idx);
            if (!cand || cand->mfr <= best->mfr) break;
            out.diagnostics.warnings.push_back("recovery retried with lifted target " + std::to_string(target));
            sca = std::move(again);
            out.lifted = sca.state.w;
            out.diagnostics.lifted_value = lifted_objective(sca.state, problem, rate_mode);
            best = std::move(cand);
            best_index = idx;
        }
    }
    if (!best) {
        out.status = DesignStatus::Failed;
        out.message = "rank-1 recovery produced no candidate with nonzero power on every antenna";
        return out;
    }

    out.precoder = best->precoder;
    out.rates = best->rates;
    out.common_split = best->rates.common_split;
    out.mfr = best->mfr;
    out.t = best->t;
    out.rate_target_met = !rate_mode || best->mfr >= problem.r_min - 1e-6;
    out.objective = rate_mode ? best->t / scale : best->mfr + problem.lambda / scale * best->t;
    out.fisher.fim = FimModel(problem.scene).evaluate(covariance(out.precoder));
    try {
        out.fisher = crb(out.fisher);
    } catch (const UnidentifiableError& e) {
        out.diagnostics.warnings.push_back(e.what());
    }

    auto& d = out.diagnostics;
    d.chosen_candidate = best_index;
    d.recovered_value = out.objective;
    d.rank_gap = d.lifted_value - d.recovered_value;
    d.power_residual = best->residual;
    const double min_rc = st.common_terms.empty() ? 0.0 : out.rates.common_rates.minCoeff();
    d.common_residual = std::max(0.0, out.common_split.sum() - min_rc);
    d.fim_residual = std::max(0.0, out.t - min_eigenvalue(out.fisher.fim));
    if (d.rank_gap > options.rank_gap_warning * std::max(1.0, std::abs(d.lifted_value))) {
        std::ostringstream os;
        os << "rank-1 recovery gap " << d.rank_gap << " exceeds threshold";
        d.warnings.push_back(os.str());
    }
    if (!out.rate_target_met) {
        std::ostringstream os;
        os << "recovered MFR " << out.mfr << " is below r_min " << problem.r_min;
        d.warnings.push_back(os.str());
    }
    out.status = sca.converged ? DesignStatus::Converged : DesignStatus::MaxIterations;
    if (!sca.converged && out.message.empty()) out.message = "SCA stopped before the objective settled";
    return out;
}

std::vector<DesignSolution> sweep_lambda(const DesignProblem& problem, const std::vector<double>& lambdas,
                                         const SolveOptions& options, const ConicBackend* backend) {
    if (lambdas.empty()) throw ConfigError("lambda list is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (lambdas[i] < lambdas[i - 1]) throw ConfigError("lambda list must be nondecreasing");
    std::vector<DesignSolution> out;
    std::vector<CMatrix> warm;
    for (double lam : lambdas) {
        DesignProblem p = problem;
        p.lambda = lam;
        try {
            out.push_back(solve(p, options, backend, warm.empty() ? nullptr : &warm));
        } catch (const std::exception& e) {
            DesignSolution s;
            s.status = DesignStatus::Failed;
            s.message = e.what();
            out.push_back(std::move(s));
        }
        if (!out.back().lifted.empty()) warm = out.back().lifted;
    }
    return out;
}

}  // namespace isac
