#pragma once

#include <vector>

#include "isac/channels.hpp"
#include "isac/types.hpp"

namespace isac {

/// Nt x (S+1) precoder: column 0 is the common stream p_c, columns 1..S the
/// private streams (S = K for unicast, number of groups for multicast).
struct PrecodingMatrix {
    CMatrix columns;

    PrecodingMatrix() = default;
    explicit PrecodingMatrix(CMatrix cols) : columns(std::move(cols)) {}
    PrecodingMatrix(const CVector& common, const std::vector<CVector>& privates);

    int num_antennas() const { return static_cast<int>(columns.rows()); }
    int num_private() const { return static_cast<int>(columns.cols()) - 1; }
    auto common() const { return columns.col(0); }
    auto common() { return columns.col(0); }
    auto private_stream(int s) const { return columns.col(s + 1); }
    auto private_stream(int s) { return columns.col(s + 1); }

    double total_power() const { return columns.squaredNorm(); }
    RVector antenna_powers() const { return columns.rowwise().squaredNorm(); }
    void validate() const;
};

/// Per-user decode rates of a fixed precoder (bps/Hz).
struct StreamRates {
    RVector common;          ///< R_c,k: rate at which user k decodes s_c
    RVector private_rate;    ///< R_p,k: rate of user k's private stream (group minimum when multicast)
    RVector member_private;  ///< each user's own private decode rate before the group minimum
};

struct RateReport {
    RVector common_rates;
    RVector private_rates;
    RVector common_split;
    RVector total_rates;

    int num_users() const { return static_cast<int>(total_rates.size()); }
};

/// Builds a report and checks sum(C) <= min_k R_c,k (+tol), C >= 0.
RateReport make_rate_report(const RVector& common_rates, const RVector& private_rates, const RVector& common_split,
                            double tol = 1e-9);

StreamRates rsma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder);
/// Private rates with the common stream switched off.
RVector sdma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder);

/// SIC chain: order[i] is the user whose stream sits at decoding position i
/// (position 0 decoded first). Stream of user u is private column u.
/// Returns per-user rates.
RVector noma_rates(const ChannelSet& channels, const PrecodingMatrix& precoder, const std::vector<int>& order);

/// Users sorted by ascending channel norm (ties by index).
std::vector<int> ascending_strength_order(const ChannelSet& channels);

/// Closed-form max-min common split (water-filling of R_c over the private rates).
RVector max_min_common_split(double common_budget, const RVector& private_rates);

double mfr(const RateReport& report);
double wsr(const RateReport& report, const RVector& weights);
double ee(const RateReport& report, const PrecodingMatrix& precoder, double amp_efficiency_inv, double circuit_power);

}  // namespace isac
