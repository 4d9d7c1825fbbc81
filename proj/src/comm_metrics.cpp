#include "isac/comm_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace isac {

PrecodingMatrix::PrecodingMatrix(const CVector& common, const std::vector<CVector>& privates) {
    columns.resize(common.size(), static_cast<Eigen::Index>(privates.size()) + 1);
    columns.col(0) = common;
    for (std::size_t s = 0; s < privates.size(); ++s) {
        if (privates[s].size() != common.size()) throw DimensionError("private precoder length differs from common");
        columns.col(static_cast<Eigen::Index>(s) + 1) = privates[s];
    }
}

void PrecodingMatrix::validate() const {
    if (columns.cols() < 1 || columns.rows() < 1) throw DimensionError("empty precoder");
    if (!columns.allFinite()) throw DimensionError("precoder entries must be finite");
}

RateReport make_rate_report(const RVector& common_rates, const RVector& private_rates, const RVector& common_split,
                            double tol) {
    const auto k = common_rates.size();
    if (private_rates.size() != k || common_split.size() != k) throw DimensionError("rate vectors differ in length");
    if ((common_split.array() < -tol).any()) throw std::logic_error("negative common rate portion");
    if (k > 0 && common_split.sum() > common_rates.minCoeff() + tol)
        throw std::logic_error("common split exceeds the common-stream decodability limit");
    RateReport r;
    r.common_rates = common_rates;
    r.private_rates = private_rates;
    r.common_split = common_split.cwiseMax(0.0);
    r.total_rates = r.common_split + private_rates;
    return r;
}

namespace {

void check_dims(const ChannelSet& channels, const PrecodingMatrix& precoder) {
    if (channels.num_antennas() != precoder.num_antennas())
        throw DimensionError("precoder has " + std::to_string(precoder.num_antennas()) + " rows, channels have " +
                             std::to_string(channels.num_antennas()) + " antennas");
    if (precoder.num_private() != channels.num_streams())
        throw DimensionError("precoder has " + std::to_string(precoder.num_private()) + " private streams, expected " +
                             std::to_string(channels.num_streams()));
    if (!(channels.noise_power > 0.0)) throw DimensionError("noise power must be positive");
}

}  // namespace

StreamRates rsma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder) {
    check_dims(channels, precoder);
    const int k_users = channels.num_users();
    const int streams = precoder.num_private();
    const double noise = channels.noise_power;
    // gains(k, s) = |h_k^H p_s| ^2, column 0 common.
    const RMatrix gains = (channels.h.adjoint() * precoder.columns).cwiseAbs2();

    StreamRates out;
    out.common.resize(k_users);
    out.member_private.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const double all_private = gains.row(k).tail(streams).sum();
        out.common(k) = std::log2(1.0 + gains(k, 0) / (all_private + noise));
        const int own = channels.stream_of(k);
        const double own_gain = gains(k, own + 1);
        out.member_private(k) = std::log2(1.0 + own_gain / (all_private - own_gain + noise));
    }
    out.private_rate = out.member_private;
    for (const auto& group : channels.groups) {
        double g_min = INFINITY;
        for (int u : group) g_min = std::min(g_min, out.member_private(u));
        for (int u : group) out.private_rate(u) = g_min;
    }
    return out;
}

RVector sdma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder) {
    PrecodingMatrix off = precoder;
    off.common().setZero();
    return rsma_rates(channels, off).private_rate;
}

RVector noma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder, const std::vector<int>& order) {
    check_dims(channels, precoder);
    if (channels.multicast()) throw DimensionError("NOMA rates are defined without user grouping");
    const int k_users = channels.num_users();
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (static_cast<int>(order.size()) != k_users) throw DimensionError("decoding order must list every user once");
    for (int i = 0; i < k_users; ++i)
        if (sorted[i] != i) throw DimensionError("decoding order is not a permutation of the users");

    const RMatrix gains = (channels.h.adjoint() * precoder.columns).cwiseAbs2();
    const double noise = channels.noise_power;
    RVector rates(k_users);
    for (int i = 0; i < k_users; ++i) {
        double rate = INFINITY;
        for (int j = i; j < k_users; ++j) {
            const int decoder = order[j];
            double residual = noise;
            for (int m = i + 1; m < k_users; ++m) residual += gains(decoder, order[m] + 1);
            const double signal = gains(decoder, order[i] + 1);
            rate = std::min(rate, std::log2(1.0 + signal / residual));
        }
        rates(order[i]) = rate;
    }
    return rates;
}

std::vector<int> ascending_strength_order(const ChannelSet& channels) {
    std::vector<int> order(channels.num_users());
    std::iota(order.begin(), order.end(), 0);
    const RVector norms = channels.h.colwise().norm();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return norms(a) < norms(b); });
    return order;
}

RVector max_min_common_split(double common_budget, const RVector& private_rates) {
    const auto k = private_rates.size();
    RVector split = RVector::Zero(k);
    if (k == 0 || !(common_budget > 0.0)) return split;
    std::vector<double> sorted(private_rates.data(), private_rates.data() + k);
    std::sort(sorted.begin(), sorted.end());
    // Water level w with sum_k max(0, w - R_k) = budget.
    double prefix = 0.0;
    double level = 0.0;
    for (Eigen::Index i = 1; i <= k; ++i) {
        prefix += sorted[i - 1];
        level = (common_budget + prefix) / static_cast<double>(i);
        if (i == k || level <= sorted[i]) break;
    }
    for (Eigen::Index j = 0; j < k; ++j) split(j) = std::max(0.0, level - private_rates(j));
    return split;
}

double mfr(const RateReport& report) { return report.total_rates.minCoeff(); }

double wsr(const RateReport& report, const RVector& weights) {
    if (weights.size() != report.total_rates.size()) throw DimensionError("weight vector length differs from K");
    if ((weights.array() < 0.0).any()) throw DomainError("weights must be nonnegative");
    return weights.dot(report.total_rates);
}

double ee(const RateReport& report, const PrecodingMatrix& precoder, double amp_efficiency_inv, double circuit_power) {
    if (!(amp_efficiency_inv > 0.0)) throw DomainError("amplifier efficiency inverse must be positive");
    if (circuit_power < 0.0) throw DomainError("circuit power must be nonnegative");
    return report.total_rates.sum() / (amp_efficiency_inv * precoder.total_power() + circuit_power);
}

}  // namespace isac
