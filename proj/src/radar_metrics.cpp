#include "isac/radar_metrics.hpp"

#include <cmath>
#include <sstream>

namespace isac {

void RadarScene::validate() const {
    geometry.validate();
    if (block_length < 1) throw ConfigError("block length L must be >= 1");
    if (!(noise_power > 0.0)) throw ConfigError("radar noise power must be positive");
    if (!(symbol_period > 0.0)) throw ConfigError("symbol period must be positive");
    if (!(std::abs(doppler_hz * symbol_period) < 0.5)) throw ConfigError("|F_D T| must be < 0.5 (ambiguous Doppler)");
    if (!(target_angle > -kPi / 2 && target_angle < kPi / 2)) throw DomainError("target angle outside (-pi/2, pi/2)");
}

CMatrix covariance(const PrecodingMatrix& precoder) {
    CMatrix r = precoder.columns * precoder.columns.adjoint();
    return (r + r.adjoint()) / 2.0;
}

std::array<double, 3> FimModel::index_sums(int block_length) {
    const double l = block_length;
    return {l, l * (l + 1.0) / 2.0, l * (l + 1.0) * (2.0 * l + 1.0) / 6.0};
}

FimModel::FimModel(const RadarScene& scene) : num_tx_(scene.geometry.num_tx) {
    scene.validate();
    const auto& g = scene.geometry;
    const CVector a = steering(g, ArraySide::Tx, scene.target_angle);
    const CVector da = steering_derivative(g, ArraySide::Tx, scene.target_angle);
    const CVector b = steering(g, ArraySide::Rx, scene.target_angle);
    const CVector db = steering_derivative(g, ArraySide::Rx, scene.target_angle);

    const CMatrix amat = b * a.adjoint();
    const CMatrix damat = db * a.adjoint() + b * da.adjoint();
    const CMatrix aa = amat.adjoint() * amat;     // A^H A
    const CMatrix dd = damat.adjoint() * damat;   // Adot^H Adot
    const CMatrix da_a = damat.adjoint() * amat;  // Adot^H A

    const auto s = index_sums(scene.block_length);
    const double c = 2.0 / scene.noise_power;
    const cplx alpha = scene.alpha;
    const double alpha2 = std::norm(alpha);
    const double w = 2.0 * kPi * scene.symbol_period;
    const cplx j(0.0, 1.0);

    auto herm = [](const CMatrix& m) -> CMatrix { return (m + m.adjoint()) / 2.0; };
    // theta, aR, aI, FD = 0..3
    q_[index(0, 0)] = herm(c * alpha2 * s[0] * dd);
    q_[index(0, 1)] = herm(c * s[0] * std::conj(alpha) * da_a);
    q_[index(0, 2)] = herm(c * s[0] * j * std::conj(alpha) * da_a);
    q_[index(0, 3)] = herm(c * alpha2 * w * s[1] * j * da_a);
    q_[index(1, 1)] = herm(c * s[0] * aa);
    q_[index(1, 2)] = herm(c * s[0] * j * aa);
    q_[index(1, 3)] = herm(c * w * s[1] * j * alpha * aa);
    q_[index(2, 2)] = herm(c * s[0] * aa);
    q_[index(2, 3)] = herm(c * w * s[1] * alpha * aa);
    q_[index(3, 3)] = herm(c * alpha2 * w * w * s[2] * aa);
}

Matrix4 FimModel::evaluate(const CMatrix& rx) const {
    if (rx.rows() != num_tx_ || rx.cols() != num_tx_)
        throw DimensionError("R_X must be " + std::to_string(num_tx_) + "x" + std::to_string(num_tx_));
    Matrix4 f;
    for (int i = 0; i < 4; ++i)
        for (int jj = i; jj < 4; ++jj) {
            // tr(Q R) for Hermitian Q, R is real: sum_ab Q_ab R_ba.
            const double v = (q_[index(i, jj)].transpose().cwiseProduct(rx)).sum().real();
            f(i, jj) = v;
            f(jj, i) = v;
        }
    return f;
}

namespace {

void check_psd(const CMatrix& rx) {
    if (rx.rows() != rx.cols()) throw DimensionError("R_X must be square");
    const double scale = std::max(1.0, rx.cwiseAbs().maxCoeff());
    if ((rx - rx.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw DomainError("R_X is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rx, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) throw DomainError("R_X is not positive semidefinite");
}

}  // namespace

FisherReport fim(const CMatrix& rx, const RadarScene& scene) {
    if (rx.rows() != scene.geometry.num_tx) throw DimensionError("R_X size does not match the transmit array");
    check_psd(rx);
    FisherReport r;
    r.fim = FimModel(scene).evaluate(rx);
    return r;
}

double min_eigenvalue(const Matrix4& m) {
    Eigen::SelfAdjointEigenSolver<Matrix4> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

FisherReport crb(const FisherReport& report, double max_condition) {
    const Matrix4& f = report.fim;
    Vector4 d = f.diagonal();
    for (int i = 0; i < 4; ++i) {
        if (!(d(i) > 0.0)) {
            Vector4 dir = Vector4::Zero();
            dir(i) = 1.0;
            throw UnidentifiableError(std::string("unidentifiable parameters: FIM has no information on ") +
                                          kParameterNames[static_cast<std::size_t>(i)],
                                      dir);
        }
    }
    const Vector4 inv_sqrt = d.cwiseSqrt().cwiseInverse();
    const Matrix4 scaled = inv_sqrt.asDiagonal() * f * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix4> es(scaled);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(3);
    if (!(lo > 0.0) || hi / lo > max_condition) {
        Vector4 dir = (inv_sqrt.asDiagonal() * es.eigenvectors().col(0)).normalized();
        std::ostringstream os;
        os << "unidentifiable parameters: FIM is singular or ill-conditioned along (";
        for (int i = 0; i < 4; ++i) os << (i ? ", " : "") << kParameterNames[static_cast<std::size_t>(i)] << "=" << dir(i);
        os << ")";
        throw UnidentifiableError(os.str(), dir);
    }
    // Invert through the scaled eigendecomposition for accuracy.
    const Matrix4 scaled_inv =
        es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    Matrix4 c = inv_sqrt.asDiagonal() * scaled_inv * inv_sqrt.asDiagonal();
    c = (c + c.transpose()) / 2.0;
    FisherReport out = report;
    out.crb = c;
    out.rcrb = c.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

void BeampatternSpec::validate() const {
    if (grid.size() != desired.size()) throw DimensionError("beampattern grid and desired pattern differ in length");
    for (std::size_t m = 1; m < grid.size(); ++m)
        if (!(grid[m] > grid[m - 1])) throw DomainError("beampattern grid must be strictly increasing");
}

double beampattern_gain(const CMatrix& rx, const ArrayGeometry& geometry, double angle) {
    const CVector a = steering(geometry, ArraySide::Tx, angle);
    return (a.adjoint() * rx * a)(0, 0).real();
}

double beampattern_mse(const CMatrix& rx, const ArrayGeometry& geometry, const BeampatternSpec& spec) {
    spec.validate();
    double mse = 0.0;
    for (std::size_t m = 0; m < spec.grid.size(); ++m) {
        const double e = spec.desired[m] - beampattern_gain(rx, geometry, spec.grid[m]);
        mse += e * e;
    }
    return mse;
}

double rmi(const CMatrix& rx, const RadarScene& scene) {
    const double gain = beampattern_gain(rx, scene.geometry, scene.target_angle);
    return std::log2(1.0 + std::norm(scene.alpha) * scene.geometry.num_rx * gain / scene.noise_power);
}

CMatrix radar_channel(const RadarScene& scene) {
    const CVector a = steering(scene.geometry, ArraySide::Tx, scene.target_angle);
    const CVector b = steering(scene.geometry, ArraySide::Rx, scene.target_angle);
    return scene.alpha * b * a.adjoint();
}

double rmi_determinant(const CMatrix& rx, const RadarScene& scene) {
    const CMatrix hr = radar_channel(scene);
    const int nr = scene.geometry.num_rx;
    CMatrix m = CMatrix::Identity(nr, nr) + hr * rx * hr.adjoint() / scene.noise_power;
    m = (m + m.adjoint()) / 2.0;
    Eigen::LLT<CMatrix> llt(m);
    if (llt.info() != Eigen::Success) throw DomainError("I + H R H^H / sigma^2 is not positive definite");
    double logdet = 0.0;
    for (int i = 0; i < nr; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
    return logdet / std::log(2.0);
}

}  // namespace isac

#include <omp.h>

#include "isac/rng.hpp"

namespace isac {

Matrix4 realized_fim(const RadarScene& scene, const CMatrix& x_block) {
    const auto& g = scene.geometry;
    if (x_block.rows() != g.num_tx) throw DimensionError("symbol block rows must equal Nt");
    const CVector a = steering(g, ArraySide::Tx, scene.target_angle);
    const CVector da = steering_derivative(g, ArraySide::Tx, scene.target_angle);
    const CVector b = steering(g, ArraySide::Rx, scene.target_angle);
    const CVector db = steering_derivative(g, ArraySide::Rx, scene.target_angle);
    const cplx alpha = scene.alpha;
    const double w = 2.0 * kPi * scene.symbol_period;
    const double nr = static_cast<double>(g.num_rx);
    const cplx bdb = b.dot(db);    // b^H db
    const double dbdb = db.squaredNorm();

    Matrix4 f = Matrix4::Zero();
    const CVector v = x_block.adjoint() * a;   // conj(a^H x[l])
    const CVector dv = x_block.adjoint() * da; // conj(da^H x[l])
    for (Eigen::Index col = 0; col < x_block.cols(); ++col) {
        const double l = static_cast<double>(col + 1);
        const cplx s = std::conj(v(col));    // a^H x
        const cplx ds = std::conj(dv(col));  // da^H x
        // d mu (up to the common unit-modulus Doppler phase):
        //   theta: alpha (db s + b ds), aR: b s, aI: j b s, FD: j w l alpha b s
        // Build the four derivative directions explicitly in the basis {b, db}.
        // u_i = c_b,i b + c_db,i db
        cplx cb[4], cdb[4];
        cb[0] = alpha * ds;
        cdb[0] = alpha * s;
        cb[1] = s;
        cdb[1] = 0.0;
        cb[2] = cplx(0.0, 1.0) * s;
        cdb[2] = 0.0;
        cb[3] = cplx(0.0, w * l) * alpha * s;
        cdb[3] = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) {
                // u_i^H u_j
                const cplx ip = std::conj(cb[i]) * cb[j] * nr + std::conj(cb[i]) * cdb[j] * bdb +
                                std::conj(cdb[i]) * cb[j] * std::conj(bdb) + std::conj(cdb[i]) * cdb[j] * dbdb;
                f(i, j) += ip.real();
            }
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) f(i, j) = f(j, i);
    return f * (2.0 / scene.noise_power);
}

namespace {

CMatrix qpsk_block(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    static const double r = 1.0 / std::sqrt(2.0);
    CMatrix s(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto bits = rng.bits();
            s(i, j) = cplx((bits & 1) ? r : -r, (bits & 2) ? r : -r);
        }
    return s;
}

}  // namespace

Matrix4 monte_carlo_fim(const RadarScene& scene, const CMatrix& sqrt_rx, int realizations, std::uint64_t seed,
                        Exec exec) {
    scene.validate();
    if (realizations < 1) throw DomainError("need at least one realization");
    if (sqrt_rx.rows() != scene.geometry.num_tx) throw DimensionError("square root of R_X must have Nt rows");
    constexpr int kChunk = 256;
    const int chunks = (realizations + kChunk - 1) / kChunk;
    std::vector<Matrix4> partial(static_cast<std::size_t>(chunks), Matrix4::Zero());
    auto run_chunk = [&](int c) {
        Matrix4 acc = Matrix4::Zero();
        const int end = std::min(realizations, (c + 1) * kChunk);
        for (int r = c * kChunk; r < end; ++r) {
            Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
            const CMatrix s = qpsk_block(rng, sqrt_rx.cols(), scene.block_length);
            acc += realized_fim(scene, sqrt_rx * s);
        }
        partial[static_cast<std::size_t>(c)] = acc;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        for (int c = 0; c < chunks; ++c) run_chunk(c);
    }
    Matrix4 total = Matrix4::Zero();
    for (const auto& m : partial) total += m;
    return total / static_cast<double>(realizations);
}

}  // namespace isac
