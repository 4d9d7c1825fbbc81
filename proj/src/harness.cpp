#include "isac/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <omp.h>

#include "isac/estimator.hpp"
#include "isac/rng.hpp"
#include "json.hpp"

namespace isac {

using nlohmann::ordered_json;

namespace {

// ---- config parsing ---------------------------------------------------------

/// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Section {
public:
    Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + key_path(it.key()) + "'");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    template <class T>
    void get(const std::string& k, T& out) {
        seen_.insert(k);
        if (!j_.contains(k)) return;
        try {
            out = j_.at(k).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + key_path(k) + "' has the wrong type");
        }
    }

    Section sub(const std::string& k) {
        seen_.insert(k);
        static const ordered_json empty = ordered_json::object();
        return Section(j_.contains(k) ? j_.at(k) : empty, key_path(k));
    }

private:
    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
    std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    const ordered_json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string csv_text(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

ordered_json unit_entry(double dbm) {
    const double w = dbm_to_watts(dbm);
    return {{"dbm", dbm}, {"watts", w}, {"dbm_roundtrip", 10.0 * std::log10(w) + 30.0}};
}

ordered_json metadata(const ExperimentConfig& c, const std::string& command) {
    ordered_json m;
    m["toolkit_version"] = kToolkitVersion;
    m["command"] = command;
    m["config"] = ordered_json::parse(config_to_json(c));
    m["unit_conversions"] = {{"rule", "watts = 10^((dBm - 30) / 10)"},
                             {"power", unit_entry(c.power_dbm)},
                             {"comm_noise", unit_entry(c.comm_noise_dbm)},
                             {"radar_noise", unit_entry(c.radar_noise_dbm)},
                             {"circuit_power", unit_entry(c.circuit_power_dbm)}};
    const RadarScene sc = c.scene();
    m["radar"] = {{"alpha_abs", std::abs(sc.alpha)},
                  {"doppler_hz", sc.doppler_hz},
                  {"snr_rule", "radar SNR = |alpha|^2 P / sigma_m^2"}};
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < c.realizations; ++r) seeds.push_back(c.realization_seed(r));
    m["seeds"] = {{"master", c.seed}, {"realizations", seeds}};
    m["lambda_normalization"] =
        "the lambda column holds lambda_tilde; the objective is MFR + lambda_tilde * t / fim_scale with "
        "fim_scale = lambda_min(F) under isotropic transmission P/Nt I (per row in *_diagnostics.csv)";
    m["averaging"] = "summaries average MFR and each RCRB separately per (strategy, lambda) across seeds";
    return m;
}

std::string rcrb_cell(const DesignSolution& s, int i) {
    return s.fisher.rcrb ? format_double((*s.fisher.rcrb)(i)) : "";
}

struct TaskResult {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::vector<std::string>> diag;
};

using RowKey = std::tuple<std::string, double, std::uint64_t>;

void sort_rows(std::vector<std::vector<std::string>>& rows) {
    auto key = [](const std::vector<std::string>& r) {
        return RowKey(r[0], parse_double_field(r[1], "lambda"), std::stoull(r[2]));
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

template <class F>
void run_parallel(int tasks, int jobs, F&& body) {
    // every task writes only its own slot, so the outcome is independent of scheduling
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
    for (int i = 0; i < tasks; ++i) body(i);
}

DesignProblem base_problem(const ExperimentConfig& c, ChannelSet channels, Strategy s) {
    DesignProblem p;
    p.channels = std::move(channels);
    p.scene = c.scene();
    p.strategy = s;
    p.total_power = c.power_w();
    return p;
}

std::vector<std::string> tradeoff_run(const ExperimentConfig& c, const RunOptions& o, const std::string& stem) {
    c.validate();
    std::filesystem::create_directories(o.out_dir);
    const int ns = static_cast<int>(c.strategies.size());
    const int tasks = c.realizations * ns;
    std::vector<TaskResult> results(static_cast<std::size_t>(tasks));
    std::vector<ChannelSet> channels(static_cast<std::size_t>(c.realizations));
    for (int r = 0; r < c.realizations; ++r) channels[static_cast<std::size_t>(r)] = c.channels(r);
    const double xi = c.amp_efficiency_inv;
    const double pcir = dbm_to_watts(c.circuit_power_dbm);

    run_parallel(tasks, o.jobs, [&](int task) {
        const int r = task / ns;
        const Strategy s = c.strategies[static_cast<std::size_t>(task % ns)];
        const std::uint64_t seed = c.realization_seed(r);
        const DesignProblem p = base_problem(c, channels[static_cast<std::size_t>(r)], s);
        const SolveOptions opt = c.solve_options(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
        std::vector<DesignSolution> sols;
        try {
            sols = sweep_lambda(p, c.lambdas, opt);
        } catch (const std::exception& e) {
            sols.assign(c.lambdas.size(), DesignSolution{});
            for (auto& x : sols) x.message = e.what();
        }
        TaskResult& out = results[static_cast<std::size_t>(task)];
        const RVector ones = RVector::Ones(p.channels.num_users());
        for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
            const DesignSolution& sol = sols[i];
            std::vector<std::string> row{to_string(s), format_double(c.lambdas[i]), std::to_string(seed)};
            std::string group_ok;
            if (sol.ok()) {
                row.push_back(format_double(sol.mfr));
                row.push_back(format_double(wsr(sol.rates, ones)));
                row.push_back(format_double(ee(sol.rates, sol.precoder, xi, pcir)));
                row.push_back(format_double(sol.t));
                for (int k = 0; k < 4; ++k) row.push_back(rcrb_cell(sol, k));
                if (p.channels.multicast()) {
                    const StreamRates sr = rsma_rates(p.channels, sol.precoder);
                    bool ok = true;
                    for (int k = 0; k < p.channels.num_users(); ++k)
                        ok = ok && sr.private_rate(k) <= sr.member_private(k) + 1e-12;
                    group_ok = ok ? "1" : "0";
                }
            } else {
                row.insert(row.end(), 8, "");
            }
            row.push_back(std::to_string(sol.diagnostics.iterations));
            row.push_back(sol.status == DesignStatus::Converged ? "1" : "0");
            out.rows.push_back(std::move(row));

            const auto& d = sol.diagnostics;
            std::string split;
            for (Eigen::Index k = 0; k < sol.common_split.size(); ++k)
                split += (k ? ";" : "") + format_double(sol.common_split(k));
            std::string warnings;
            for (const auto& w : d.warnings) warnings += (warnings.empty() ? "" : " | ") + w;
            out.diag.push_back({to_string(s), format_double(c.lambdas[i]), std::to_string(seed), to_string(sol.status),
                                sol.ok() ? format_double(d.fim_scale) : "", format_double(d.lifted_value),
                                format_double(d.recovered_value), format_double(d.rank_gap),
                                format_double(d.power_residual), format_double(d.common_residual),
                                std::to_string(d.conic_newton_steps), split, group_ok,
                                csv_text(sol.message + (warnings.empty() ? "" : " [" + warnings + "]"))});
        }
    });

    CsvTable table{tradeoff_header(), {}};
    CsvTable diag{{"strategy", "lambda", "seed", "status", "fim_scale", "lifted_objective", "recovered_objective",
                   "rank_gap", "power_residual", "common_residual", "newton_steps", "common_split", "group_rate_ok",
                   "message"},
                  {}};
    for (auto& t : results) {
        for (auto& r : t.rows) table.rows.push_back(std::move(r));
        for (auto& r : t.diag) diag.rows.push_back(std::move(r));
    }
    sort_rows(table.rows);
    sort_rows(diag.rows);
    const std::string main = stem + ".csv", dname = stem + "_diagnostics.csv", sname = stem + "_summary.csv";
    write_csv(table, o.out_dir / main);
    write_csv(diag, o.out_dir / dname);
    write_csv(summarize_tradeoff(table), o.out_dir / sname);
    ordered_json meta = metadata(c, "run-" + stem);
    if (c.scenario == "satellite") {
        const ChannelSet& ch = channels.front();
        meta["satellite"] = {{"users", ch.num_users()}, {"groups", ch.groups}};
    }
    write_text(o.out_dir / "metadata.json", meta.dump(2) + "\n");
    return {main, dname, sname, "metadata.json"};
}

// ---- summaries ----------------------------------------------------------------

struct Stats {
    std::vector<double> v;
    void add(double x) { v.push_back(x); }
    double mean() const {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
    }
    double stddev() const {
        if (v.size() < 2) return v.empty() ? std::nan("") : 0.0;
        const double m = mean();
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    }
};

int require_column(const CsvTable& t, const std::string& name) {
    const int i = t.column(name);
    if (i < 0) throw ParseError("results table lacks column '" + name + "'");
    return i;
}

}  // namespace

// ---- config -------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (scenario != "terrestrial" && scenario != "satellite")
        throw ConfigError("scenario must be 'terrestrial' or 'satellite', got '" + scenario + "'");
    array.validate();
    if (users < 1) throw ConfigError("comm.users must be >= 1");
    if (block_length < 2) throw ConfigError("radar.block_length must be >= 2");
    if (strategies.empty()) throw ConfigError("tradeoff.strategies is empty");
    if (lambdas.empty()) throw ConfigError("tradeoff.lambdas is empty");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0)) throw ConfigError("tradeoff.lambdas must be nonnegative");
        if (i > 0 && lambdas[i] < lambdas[i - 1]) throw ConfigError("tradeoff.lambdas must be nondecreasing");
    }
    if (!(r_min >= 0.0)) throw ConfigError("estimation.r_min must be nonnegative");
    if (r_min_fraction && !(*r_min_fraction > 0.0)) throw ConfigError("estimation.r_min_fraction must be positive");
    if (estimation_snr_db.empty()) throw ConfigError("estimation.snr_db is empty");
    if (trials < 1) throw ConfigError("estimation.trials must be >= 1");
    if (realizations < 1) throw ConfigError("realizations must be >= 1");
    if (!(amp_efficiency_inv > 0.0)) throw ConfigError("comm.amp_efficiency_inv must be positive");
    if (!(objective_tol > 0.0) || max_iterations < 1 || randomization_candidates < 0)
        throw ConfigError("solver settings out of range");
    if (scenario == "satellite") {
        satellite.validate();
        if (satellite.num_beams != array.num_tx)
            throw ConfigError("satellite.num_beams (" + std::to_string(satellite.num_beams) +
                              ") must equal array.num_tx (" + std::to_string(array.num_tx) + ")");
        for (Strategy s : strategies)
            if (s == Strategy::NOMA) throw ConfigError("NOMA is not defined for the multicast satellite scenario");
    }
    scene().validate();
}

RadarScene ExperimentConfig::scene() const {
    RadarScene sc;
    sc.geometry = array;
    sc.target_angle = deg_to_rad(target_angle_deg);
    sc.doppler_hz = RadarScene::doppler_from_velocity(velocity_mps, carrier_hz);
    sc.symbol_period = symbol_period_s;
    sc.block_length = block_length;
    sc.noise_power = dbm_to_watts(radar_noise_dbm);
    const double amp = std::sqrt(db_to_linear(radar_snr_db) * sc.noise_power / power_w());
    sc.alpha = std::polar(amp, deg_to_rad(alpha_phase_deg));
    return sc;
}

SolveOptions ExperimentConfig::solve_options(std::uint64_t s) const {
    SolveOptions o;
    o.objective_tol = objective_tol;
    o.max_iterations = max_iterations;
    o.randomization_candidates = randomization_candidates;
    o.seed = s;
    return o;
}

ChannelSet ExperimentConfig::channels(int realization) const {
    const std::uint64_t s = realization_seed(realization);
    ChannelSet ch;
    if (!channels_dir.empty()) {
        ch = load_channels(std::filesystem::path(channels_dir) / ("channels_seed" + std::to_string(s) + ".txt"));
    } else if (scenario == "satellite") {
        SatelliteConfig sat = satellite;
        sat.noise_power = dbm_to_watts(comm_noise_dbm);
        ch = satellite_channels(sat, s);
    } else {
        ch = rayleigh_channels(users, array.num_tx, s, dbm_to_watts(comm_noise_dbm));
    }
    if (ch.num_antennas() != array.num_tx)
        throw ConfigError("channels of seed " + std::to_string(s) + " have " + std::to_string(ch.num_antennas()) +
                          " antennas, array.num_tx is " + std::to_string(array.num_tx));
    return ch;
}

ExperimentConfig parse_config(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    {
        Section root(j, "");
        root.get("scenario", c.scenario);
        root.get("seed", c.seed);
        root.get("realizations", c.realizations);
        {
            Section a = root.sub("array");
            a.get("num_tx", c.array.num_tx);
            a.get("num_rx", c.array.num_rx);
            a.get("spacing_wavelengths", c.array.spacing_wavelengths);
        }
        {
            Section m = root.sub("comm");
            m.get("users", c.users);
            m.get("power_dbm", c.power_dbm);
            m.get("noise_dbm", c.comm_noise_dbm);
            m.get("amp_efficiency_inv", c.amp_efficiency_inv);
            m.get("circuit_power_dbm", c.circuit_power_dbm);
            m.get("channels_dir", c.channels_dir);
        }
        {
            Section r = root.sub("radar");
            r.get("block_length", c.block_length);
            r.get("noise_dbm", c.radar_noise_dbm);
            r.get("snr_db", c.radar_snr_db);
        }
        {
            Section t = root.sub("target");
            t.get("angle_deg", c.target_angle_deg);
            t.get("alpha_phase_deg", c.alpha_phase_deg);
            t.get("velocity_mps", c.velocity_mps);
            t.get("carrier_hz", c.carrier_hz);
            t.get("symbol_period_s", c.symbol_period_s);
        }
        {
            Section t = root.sub("tradeoff");
            std::vector<std::string> names;
            t.get("strategies", names);
            if (t.has("strategies")) {
                c.strategies.clear();
                for (const auto& n : names) c.strategies.push_back(parse_strategy(n));
            }
            t.get("lambdas", c.lambdas);
        }
        {
            Section e = root.sub("estimation");
            e.get("r_min", c.r_min);
            double frac = 0.0;
            e.get("r_min_fraction", frac);
            if (e.has("r_min_fraction")) c.r_min_fraction = frac;
            e.get("snr_db", c.estimation_snr_db);
            e.get("trials", c.trials);
        }
        {
            Section s = root.sub("satellite");
            s.get("num_beams", c.satellite.num_beams);
            s.get("users_per_beam", c.satellite.users_per_beam);
            s.get("beam_centers_deg", c.satellite.beam_centers_deg);
            s.get("beam_spacing_deg", c.satellite.beam_spacing_deg);
            s.get("beam_width_3db_deg", c.satellite.beam_width_3db_deg);
            s.get("g_max", c.satellite.g_max);
        }
        {
            Section s = root.sub("solver");
            s.get("objective_tol", c.objective_tol);
            s.get("max_iterations", c.max_iterations);
            s.get("randomization_candidates", c.randomization_candidates);
        }
    }
    if (c.scenario == "satellite") c.users = c.satellite.num_beams * c.satellite.users_per_beam;
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["scenario"] = c.scenario;
    j["seed"] = c.seed;
    j["realizations"] = c.realizations;
    j["array"] = {{"num_tx", c.array.num_tx},
                  {"num_rx", c.array.num_rx},
                  {"spacing_wavelengths", c.array.spacing_wavelengths}};
    j["comm"] = {{"users", c.users},
                 {"power_dbm", c.power_dbm},
                 {"noise_dbm", c.comm_noise_dbm},
                 {"amp_efficiency_inv", c.amp_efficiency_inv},
                 {"circuit_power_dbm", c.circuit_power_dbm},
                 {"channels_dir", c.channels_dir}};
    j["radar"] = {{"block_length", c.block_length}, {"noise_dbm", c.radar_noise_dbm}, {"snr_db", c.radar_snr_db}};
    j["target"] = {{"angle_deg", c.target_angle_deg},
                   {"alpha_phase_deg", c.alpha_phase_deg},
                   {"velocity_mps", c.velocity_mps},
                   {"carrier_hz", c.carrier_hz},
                   {"symbol_period_s", c.symbol_period_s}};
    std::vector<std::string> names;
    for (Strategy s : c.strategies) names.push_back(to_string(s));
    j["tradeoff"] = {{"strategies", names}, {"lambdas", c.lambdas}};
    j["estimation"] = {{"r_min", c.r_min}};
    if (c.r_min_fraction) j["estimation"]["r_min_fraction"] = *c.r_min_fraction;
    j["estimation"]["snr_db"] = c.estimation_snr_db;
    j["estimation"]["trials"] = c.trials;
    j["satellite"] = {{"num_beams", c.satellite.num_beams},
                      {"users_per_beam", c.satellite.users_per_beam},
                      {"beam_centers_deg", c.satellite.beam_centers_deg},
                      {"beam_spacing_deg", c.satellite.beam_spacing_deg},
                      {"beam_width_3db_deg", c.satellite.beam_width_3db_deg},
                      {"g_max", c.satellite.g_max}};
    j["solver"] = {{"objective_tol", c.objective_tol},
                   {"max_iterations", c.max_iterations},
                   {"randomization_candidates", c.randomization_candidates}};
    return j.dump(2);
}

// ---- runs -----------------------------------------------------------------------

const std::vector<std::string>& tradeoff_header() {
    static const std::vector<std::string> h{"strategy",      "lambda",         "seed",           "mfr",
                                            "wsr",           "ee",             "t",              "rcrb_theta",
                                            "rcrb_alpha_re", "rcrb_alpha_im",  "rcrb_doppler",   "iterations",
                                            "converged"};
    return h;
}

const std::vector<std::string>& rmse_header() {
    static const std::vector<std::string> h{"strategy", "seed", "snr_db", "parameter", "rmse", "rcrb",
                                            "mean_error", "trials"};
    return h;
}

std::vector<std::string> run_tradeoff(const ExperimentConfig& config, const RunOptions& options) {
    if (config.scenario != "terrestrial") throw ConfigError("run-tradeoff expects scenario 'terrestrial'");
    return tradeoff_run(config, options, "tradeoff");
}

std::vector<std::string> run_satellite(const ExperimentConfig& config, const RunOptions& options) {
    if (config.scenario != "satellite") throw ConfigError("run-satellite expects scenario 'satellite'");
    return tradeoff_run(config, options, "satellite");
}

std::vector<std::string> run_estimation(const ExperimentConfig& c, const RunOptions& o) {
    c.validate();
    if (c.scenario != "terrestrial") throw ConfigError("run-estimation expects scenario 'terrestrial'");
    std::filesystem::create_directories(o.out_dir);
    const int ns = static_cast<int>(c.strategies.size());
    std::vector<ChannelSet> channels(static_cast<std::size_t>(c.realizations));
    for (int r = 0; r < c.realizations; ++r) channels[static_cast<std::size_t>(r)] = c.channels(r);

    // rate targets: absolute, or a fraction of RSMA's unconstrained MFR
    std::vector<double> targets(static_cast<std::size_t>(c.realizations), c.r_min);
    if (c.r_min_fraction) {
        run_parallel(c.realizations, o.jobs, [&](int r) {
            const std::uint64_t seed = c.realization_seed(r);
            const DesignProblem p = base_problem(c, channels[static_cast<std::size_t>(r)], Strategy::RSMA);
            const DesignSolution s = solve(p, c.solve_options(derive_seed(seed, {0x726d696eULL})));
            targets[static_cast<std::size_t>(r)] = s.ok() ? *c.r_min_fraction * s.mfr : c.r_min;
        });
    }

    const int tasks = c.realizations * ns;
    std::vector<TaskResult> results(static_cast<std::size_t>(tasks));
    run_parallel(tasks, o.jobs, [&](int task) {
        const int r = task / ns;
        const Strategy s = c.strategies[static_cast<std::size_t>(task % ns)];
        const std::uint64_t seed = c.realization_seed(r);
        DesignProblem p = base_problem(c, channels[static_cast<std::size_t>(r)], s);
        p.mode = DesignMode::RateConstrained;
        p.r_min = targets[static_cast<std::size_t>(r)];
        DesignSolution sol;
        try {
            sol = solve(p, c.solve_options(derive_seed(seed, {static_cast<std::uint64_t>(s)})));
        } catch (const std::exception& e) {
            sol.message = e.what();
        }
        TaskResult& out = results[static_cast<std::size_t>(task)];
        const bool feasible = sol.ok() && sol.rate_target_met;
        std::string status = sol.status == DesignStatus::Infeasible ? "infeasible" : (sol.ok() ? "feasible" : "failed");
        if (sol.ok() && !sol.rate_target_met) status = "recovery_below_target";
        std::vector<std::string> row{to_string(s), std::to_string(seed), format_double(p.r_min), status};
        if (sol.ok()) {
            row.push_back(format_double(sol.mfr));
            row.push_back(format_double(sol.t));
            for (int k = 0; k < 4; ++k) row.push_back(rcrb_cell(sol, k));
        } else {
            row.insert(row.end(), 6, "");
        }
        row.push_back(std::to_string(sol.diagnostics.iterations));
        row.push_back(csv_text(sol.message));
        out.rows.push_back(std::move(row));
        if (!feasible || !sol.fisher.rcrb) return;
        const auto rmse = rmse_experiment(sol.precoder, p.scene, c.estimation_snr_db, c.trials,
                                          derive_seed(seed, {0x65737469ULL}), {}, Exec::Serial);
        for (const RmseRow& e : rmse)
            out.diag.push_back({to_string(s), std::to_string(seed), format_double(e.snr_db),
                                kParameterNames[static_cast<std::size_t>(e.parameter)], format_double(e.rmse),
                                format_double(e.rcrb), format_double(e.mean_error), std::to_string(e.trials)});
    });

    CsvTable design{{"strategy", "seed", "r_min", "status", "mfr", "t", "rcrb_theta", "rcrb_alpha_re", "rcrb_alpha_im",
                     "rcrb_doppler", "iterations", "message"},
                    {}};
    CsvTable rmse{rmse_header(), {}};
    for (auto& t : results) {
        for (auto& r : t.rows) design.rows.push_back(std::move(r));
        for (auto& r : t.diag) rmse.rows.push_back(std::move(r));
    }
    auto by_key = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        const auto ka = std::make_tuple(a[0], std::stoull(a[1]));
        const auto kb = std::make_tuple(b[0], std::stoull(b[1]));
        return ka < kb;
    };
    std::stable_sort(design.rows.begin(), design.rows.end(), by_key);
    std::stable_sort(rmse.rows.begin(), rmse.rows.end(), by_key);
    write_csv(design, o.out_dir / "estimation.csv");
    write_csv(rmse, o.out_dir / "rmse.csv");
    write_csv(summarize_rmse(rmse), o.out_dir / "rmse_summary.csv");
    ordered_json meta = metadata(c, "run-estimation");
    meta["rate_targets"] = targets;
    meta["rmse_protocol"] =
        "per SNR |alpha| is rescaled so |alpha|^2 P / sigma_m^2 matches; trial r reuses its symbols and unit noise "
        "at every SNR";
    write_text(o.out_dir / "metadata.json", meta.dump(2) + "\n");
    return {"estimation.csv", "rmse.csv", "rmse_summary.csv", "metadata.json"};
}

std::vector<std::string> gen_channels(const ExperimentConfig& c, const RunOptions& o) {
    c.validate();
    std::filesystem::create_directories(o.out_dir);
    std::vector<std::string> files;
    for (int r = 0; r < c.realizations; ++r) {
        const std::string name = "channels_seed" + std::to_string(c.realization_seed(r)) + ".txt";
        save_channels(c.channels(r), o.out_dir / name);
        files.push_back(name);
    }
    return files;
}

// ---- report ---------------------------------------------------------------------

CsvTable summarize_tradeoff(const CsvTable& t) {
    const int is = require_column(t, "strategy"), il = require_column(t, "lambda");
    const std::vector<std::string> metrics{"mfr", "wsr", "ee", "t", "rcrb_theta", "rcrb_alpha_re", "rcrb_alpha_im",
                                           "rcrb_doppler"};
    std::vector<int> cols;
    for (const auto& m : metrics) cols.push_back(require_column(t, m));
    std::map<std::pair<std::string, double>, std::vector<Stats>> groups;
    for (const auto& row : t.rows) {
        auto& g = groups[{row[static_cast<std::size_t>(is)], parse_double_field(row[static_cast<std::size_t>(il)], "lambda")}];
        g.resize(metrics.size());
        if (row[static_cast<std::size_t>(cols[0])].empty()) continue;  // failed point
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            const std::string& cell = row[static_cast<std::size_t>(cols[m])];
            if (!cell.empty()) g[m].add(parse_double_field(cell, metrics[m]));
        }
    }
    CsvTable out;
    out.header = {"strategy", "lambda", "count"};
    for (const auto& m : metrics) {
        out.header.push_back(m + "_mean");
        out.header.push_back(m + "_std");
    }
    for (const auto& [key, g] : groups) {
        std::vector<std::string> row{key.first, format_double(key.second), std::to_string(g[0].v.size())};
        for (const auto& s : g) {
            row.push_back(s.v.empty() ? "" : format_double(s.mean()));
            row.push_back(s.v.empty() ? "" : format_double(s.stddev()));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

CsvTable summarize_rmse(const CsvTable& t) {
    const int is = require_column(t, "strategy"), isnr = require_column(t, "snr_db"),
              ip = require_column(t, "parameter"), ir = require_column(t, "rmse"), ic = require_column(t, "rcrb");
    auto param_index = [](const std::string& name) {
        for (std::size_t i = 0; i < kParameterNames.size(); ++i)
            if (name == kParameterNames[i]) return static_cast<int>(i);
        throw ParseError("unknown parameter '" + name + "'");
    };
    std::map<std::tuple<std::string, double, int>, std::pair<Stats, Stats>> groups;
    for (const auto& row : t.rows) {
        auto& g = groups[{row[static_cast<std::size_t>(is)], parse_double_field(row[static_cast<std::size_t>(isnr)], "snr_db"),
                          param_index(row[static_cast<std::size_t>(ip)])}];
        g.first.add(parse_double_field(row[static_cast<std::size_t>(ir)], "rmse"));
        g.second.add(parse_double_field(row[static_cast<std::size_t>(ic)], "rcrb"));
    }
    CsvTable out;
    out.header = {"strategy", "snr_db", "parameter", "count", "rmse_mean", "rmse_std", "rcrb_mean", "rcrb_std"};
    for (const auto& [key, g] : groups)
        out.rows.push_back({std::get<0>(key), format_double(std::get<1>(key)),
                            kParameterNames[static_cast<std::size_t>(std::get<2>(key))], std::to_string(g.first.v.size()),
                            format_double(g.first.mean()), format_double(g.first.stddev()),
                            format_double(g.second.mean()), format_double(g.second.stddev())});
    return out;
}

std::vector<std::string> report(const std::filesystem::path& dir) {
    std::vector<std::string> written;
    if (std::filesystem::is_directory(dir)) {
        for (const char* stem : {"tradeoff", "satellite"}) {
            const auto in = dir / (std::string(stem) + ".csv");
            if (!std::filesystem::exists(in)) continue;
            const std::string name = std::string(stem) + "_summary.csv";
            write_csv(summarize_tradeoff(read_csv(in)), dir / name);
            written.push_back(name);
        }
        if (std::filesystem::exists(dir / "rmse.csv")) {
            write_csv(summarize_rmse(read_csv(dir / "rmse.csv")), dir / "rmse_summary.csv");
            written.push_back("rmse_summary.csv");
        }
    }
    if (written.empty())
        throw ConfigError("no results in " + dir.string() + " (expected tradeoff.csv, satellite.csv or rmse.csv)");
    return written;
}

}  // namespace isac
