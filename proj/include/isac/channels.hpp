#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "isac/types.hpp"

namespace isac {

/// Downlink channels h_1..h_K (columns of `h`, Nt x K) with receiver noise
/// power and an optional multicast partition of the users.
struct ChannelSet {
    CMatrix h;
    double noise_power = 1e-3;
    /// groups[b] lists the users served by private stream b; empty means
    /// unicast (one private stream per user).
    std::vector<std::vector<int>> groups;

    int num_users() const { return static_cast<int>(h.cols()); }
    int num_antennas() const { return static_cast<int>(h.rows()); }
    bool multicast() const { return !groups.empty(); }
    /// Number of private streams: groups when multicast, users otherwise.
    int num_streams() const { return multicast() ? static_cast<int>(groups.size()) : num_users(); }
    /// Private stream index carrying user k's private message.
    int stream_of(int user) const;

    CVector channel(int user) const { return h.col(user); }

    /// Throws DimensionError / ConfigError on a broken invariant.
    void validate() const;

    bool operator==(const ChannelSet& other) const;
};

/// i.i.d. CN(0,1) entries; user k is drawn from the substream keyed (seed, k).
ChannelSet rayleigh_channels(int num_users, int num_antennas, std::uint64_t seed, double noise_power = 1e-3);

/// Parametric multibeam model: one feed per beam, Gaussian-shaped gain
/// G(offset) = g_max * exp(-kappa offset^2) with kappa set by the 3 dB width.
struct SatelliteConfig {
    int num_beams = 8;
    int users_per_beam = 2;
    /// Beam centre angles (degrees). Empty -> uniform grid spaced by beam_spacing_deg, centred on 0.
    std::vector<double> beam_centers_deg;
    double beam_spacing_deg = 0.5;
    double beam_width_3db_deg = 0.5;
    double g_max = 1.0;
    double noise_power = 1e-3;

    void validate() const;
    std::vector<double> centers_deg() const;
    double kappa() const;  ///< per deg^2
    double gain(double offset_deg) const;
};

ChannelSet satellite_channels(const SatelliteConfig& config, std::uint64_t seed);

/// Beam-gain matrix (users x beams) for users located at `user_angles_deg`.
RMatrix satellite_gain_matrix(const SatelliteConfig& config, const std::vector<double>& user_angles_deg);

void save_channels(const ChannelSet& set, const std::filesystem::path& path);
ChannelSet load_channels(const std::filesystem::path& path);

std::string format_channels(const ChannelSet& set);
ChannelSet parse_channels(const std::string& text);

}  // namespace isac
