#include "isac/channels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "isac/csv.hpp"
#include "isac/rng.hpp"

namespace isac {

int ChannelSet::stream_of(int user) const {
    if (!multicast()) return user;
    for (std::size_t b = 0; b < groups.size(); ++b)
        if (std::find(groups[b].begin(), groups[b].end(), user) != groups[b].end()) return static_cast<int>(b);
    throw ConfigError("user " + std::to_string(user) + " belongs to no multicast group");
}

void ChannelSet::validate() const {
    if (h.cols() < 1 || h.rows() < 1) throw DimensionError("channel set needs K >= 1 users and Nt >= 1 antennas");
    if (!h.allFinite()) throw DimensionError("channel entries must be finite");
    if (!(noise_power > 0.0) || !std::isfinite(noise_power)) throw ConfigError("noise power must be positive");
    if (multicast()) {
        std::vector<int> seen(num_users(), 0);
        for (const auto& g : groups) {
            if (g.empty()) throw ConfigError("multicast group is empty");
            for (int u : g) {
                if (u < 0 || u >= num_users()) throw ConfigError("group member " + std::to_string(u) + " out of range");
                if (seen[u]++) throw ConfigError("user " + std::to_string(u) + " appears in two groups");
            }
        }
        for (int u = 0; u < num_users(); ++u)
            if (!seen[u]) throw ConfigError("user " + std::to_string(u) + " belongs to no multicast group");
    }
}

bool ChannelSet::operator==(const ChannelSet& other) const {
    return h.rows() == other.h.rows() && h.cols() == other.h.cols() && h == other.h &&
           noise_power == other.noise_power && groups == other.groups;
}

ChannelSet rayleigh_channels(int num_users, int num_antennas, std::uint64_t seed, double noise_power) {
    if (num_users < 1 || num_antennas < 1) throw ConfigError("rayleigh_channels needs K >= 1 and Nt >= 1");
    ChannelSet set;
    set.noise_power = noise_power;
    set.h.resize(num_antennas, num_users);
    Rng root(seed);
    for (int k = 0; k < num_users; ++k) {
        Rng user = root.substream({0x7261796cULL, static_cast<std::uint64_t>(k)});
        for (int n = 0; n < num_antennas; ++n) set.h(n, k) = user.complex_normal(1.0);
    }
    return set;
}

void SatelliteConfig::validate() const {
    if (num_beams < 1) throw ConfigError("satellite config needs at least one beam");
    if (users_per_beam < 1) throw ConfigError("users_per_beam (rho) must be >= 1");
    if (!beam_centers_deg.empty() && static_cast<int>(beam_centers_deg.size()) != num_beams)
        throw ConfigError("beam_centers_deg must list one centre per beam");
    if (beam_centers_deg.empty() && !(beam_spacing_deg > 0.0)) throw ConfigError("missing beam layout");
    if (!(beam_width_3db_deg > 0.0)) throw ConfigError("beam 3 dB width must be positive");
    if (!(g_max > 0.0)) throw ConfigError("g_max must be positive");
    if (!(noise_power > 0.0)) throw ConfigError("noise power must be positive");
}

std::vector<double> SatelliteConfig::centers_deg() const {
    if (!beam_centers_deg.empty()) return beam_centers_deg;
    std::vector<double> c(num_beams);
    for (int b = 0; b < num_beams; ++b) c[b] = (b - (num_beams - 1) / 2.0) * beam_spacing_deg;
    return c;
}

double SatelliteConfig::kappa() const {
    const double half = beam_width_3db_deg / 2.0;
    return std::log(2.0) / (half * half);
}

double SatelliteConfig::gain(double offset_deg) const { return g_max * std::exp(-kappa() * offset_deg * offset_deg); }

RMatrix satellite_gain_matrix(const SatelliteConfig& config, const std::vector<double>& user_angles_deg) {
    const auto centers = config.centers_deg();
    RMatrix g(static_cast<Eigen::Index>(user_angles_deg.size()), config.num_beams);
    for (std::size_t k = 0; k < user_angles_deg.size(); ++k)
        for (int b = 0; b < config.num_beams; ++b)
            g(static_cast<Eigen::Index>(k), b) = config.gain(user_angles_deg[k] - centers[b]);
    return g;
}

ChannelSet satellite_channels(const SatelliteConfig& config, std::uint64_t seed) {
    config.validate();
    const int nt = config.num_beams;
    const int rho = config.users_per_beam;
    const auto centers = config.centers_deg();
    ChannelSet set;
    set.noise_power = config.noise_power;
    set.h.resize(nt, nt * rho);
    set.groups.assign(nt, {});
    Rng root(seed);
    const double half = config.beam_width_3db_deg / 2.0;
    for (int b = 0; b < nt; ++b) {
        for (int i = 0; i < rho; ++i) {
            const int k = b * rho + i;
            Rng user = root.substream({0x7361746cULL, static_cast<std::uint64_t>(k)});
            const double angle = centers[b] + user.uniform(-half, half);
            for (int n = 0; n < nt; ++n) {
                const double g = config.gain(angle - centers[n]);
                set.h(n, k) = std::sqrt(g) * std::polar(1.0, user.uniform(0.0, 2.0 * kPi));
            }
            set.groups[b].push_back(k);
        }
    }
    return set;
}

// ---- file format ----------------------------------------------------------

std::string format_channels(const ChannelSet& set) {
    set.validate();
    std::ostringstream os;
    os << "isac-channels 1\n";
    os << "users " << set.num_users() << "\n";
    os << "antennas " << set.num_antennas() << "\n";
    os << "noise_power " << format_double(set.noise_power) << "\n";
    if (set.multicast()) {
        os << "groups " << set.groups.size() << "\n";
        for (const auto& g : set.groups) {
            for (std::size_t i = 0; i < g.size(); ++i) os << (i ? " " : "") << g[i];
            os << "\n";
        }
    }
    os << "data\n";
    for (int k = 0; k < set.num_users(); ++k) {
        for (int n = 0; n < set.num_antennas(); ++n) {
            if (n) os << ' ';
            os << format_double(set.h(n, k).real()) << ' ' << format_double(set.h(n, k).imag());
        }
        os << "\n";
    }
    return os.str();
}

namespace {

struct LineReader {
    std::istringstream in;
    int line_no = 0;
    explicit LineReader(const std::string& text) : in(text) {}

    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++line_no;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("channel file line " + std::to_string(line_no) + ": " + what);
    }
};

template <typename T>
T keyed_value(LineReader& r, const std::string& key) {
    std::string line;
    if (!r.next(line)) r.fail("unexpected end of file, expected '" + key + "'");
    std::istringstream ls(line);
    std::string k;
    T v{};
    if (!(ls >> k) || k != key) r.fail("expected field '" + key + "'");
    if (!(ls >> v)) r.fail("field '" + key + "' has no valid value");
    std::string extra;
    if (ls >> extra) r.fail("trailing content after field '" + key + "'");
    return v;
}

}  // namespace

ChannelSet parse_channels(const std::string& text) {
    LineReader r(text);
    std::string line;
    if (!r.next(line)) r.fail("empty channel file");
    {
        std::istringstream ls(line);
        std::string magic;
        int version = 0;
        if (!(ls >> magic >> version) || magic != "isac-channels") r.fail("missing 'isac-channels' header");
        if (version != 1) r.fail("unsupported channel file version " + std::to_string(version));
    }
    const int users = keyed_value<int>(r, "users");
    const int antennas = keyed_value<int>(r, "antennas");
    if (users < 1) r.fail("users must be >= 1");
    if (antennas < 1) r.fail("antennas must be >= 1");
    ChannelSet set;
    set.noise_power = parse_double_field(keyed_value<std::string>(r, "noise_power"), "noise_power");
    if (!(set.noise_power > 0.0)) r.fail("noise_power must be positive");

    if (!r.next(line)) r.fail("unexpected end of file before 'data'");
    if (line.rfind("groups", 0) == 0) {
        std::istringstream ls(line);
        std::string k;
        int count = 0;
        if (!(ls >> k >> count) || count < 1) r.fail("bad 'groups' field");
        for (int b = 0; b < count; ++b) {
            if (!r.next(line)) r.fail("missing member list for group " + std::to_string(b));
            std::istringstream gs(line);
            std::vector<int> members;
            std::string tok;
            while (gs >> tok) {
                try {
                    std::size_t pos = 0;
                    const int u = std::stoi(tok, &pos);
                    if (pos != tok.size()) throw std::invalid_argument(tok);
                    members.push_back(u);
                } catch (const std::exception&) {
                    r.fail("group " + std::to_string(b) + ": bad member '" + tok + "'");
                }
            }
            set.groups.push_back(std::move(members));
        }
        if (!r.next(line)) r.fail("unexpected end of file before 'data'");
    }
    if (line != "data") r.fail("expected 'data'");

    set.h.resize(antennas, users);
    for (int k = 0; k < users; ++k) {
        if (!r.next(line)) r.fail("missing channel for user " + std::to_string(k));
        std::istringstream ls(line);
        std::vector<double> values;
        std::string tok;
        while (ls >> tok) {
            try {
                values.push_back(parse_double_field(tok, "channel entry"));
            } catch (const ParseError& e) {
                r.fail("user " + std::to_string(k) + ": " + e.what());
            }
        }
        if (static_cast<int>(values.size()) != 2 * antennas)
            r.fail("user " + std::to_string(k) + ": expected " + std::to_string(2 * antennas) +
                   " values (re/im pairs), found " + std::to_string(values.size()));
        for (int n = 0; n < antennas; ++n) set.h(n, k) = cplx(values[2 * n], values[2 * n + 1]);
    }
    if (r.next(line)) r.fail("trailing content after user " + std::to_string(users - 1));
    try {
        set.validate();
    } catch (const std::exception& e) {
        throw ParseError(std::string("channel file: ") + e.what());
    }
    return set;
}

void save_channels(const ChannelSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << format_channels(set);
}

ChannelSet load_channels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open channel file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_channels(ss.str());
}

}  // namespace isac
