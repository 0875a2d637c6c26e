#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhom/mc_sim.hpp"
#include "qhom/optics.hpp"
#include "qhom/qudit_state.hpp"

namespace qhom {

/// Configuration problems; every message names the offending key path.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct AnalysisConfig {
    double max_tau = 10000.0;       // histogram span, ns
    double tau_bin_width = 1.0;     // ns
    double window_width = 60.0;     // coincidence window, ns
    int max_lag = 10;               // periods used for accidental normalization
    int n_satellites = 0;           // 0 = use d - 1
};

struct ExperimentConfig {
    TimeBinQudit signal = make_lo_qudit(2);
    TimeBinQudit lo = make_lo_qudit(2);
    InterferenceSettings interference;
    SourceConfig source;
    AnalysisConfig analysis;
    std::string output_dir = "out";
};

inline const char* kernel_name(CoherenceKernel k) {
    return k == CoherenceKernel::gaussian ? "gaussian" : "exponential";
}

inline CoherenceKernel kernel_from_name(const std::string& name) {
    if (name == "gaussian") return CoherenceKernel::gaussian;
    if (name == "exponential") return CoherenceKernel::exponential;
    throw ConfigError("kernel must be \"gaussian\" or \"exponential\", got \"" + name + "\"");
}

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                                const std::string& path, std::vector<std::string>& issues) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) issues.push_back(path + "." + key + ": unknown key");
    }
}

inline bool parse_state(const json& obj, const std::string& path, TimeBinQudit& out,
                        std::vector<std::string>& issues) {
    if (!obj.is_object()) {
        issues.push_back(path + ": must be an object");
        return false;
    }
    reject_unknown_keys(obj, {"d", "magnitudes", "phases_rad", "phases_deg", "bin_ns"}, path,
                        issues);
    if (!obj.contains("d") || !obj["d"].is_number_integer()) {
        issues.push_back(path + ".d: required integer");
        return false;
    }
    const int d = obj["d"].get<int>();
    std::vector<double> magnitudes(static_cast<std::size_t>(std::max(d, 0)), 1.0);
    std::vector<double> phases(magnitudes.size(), 0.0);
    double bin = kDefaultBinNs;

    if (obj.contains("phases_rad") && obj.contains("phases_deg")) {
        issues.push_back(path + ": give phases_rad or phases_deg, not both");
        return false;
    }
    try {
        if (obj.contains("magnitudes")) magnitudes = obj["magnitudes"].get<std::vector<double>>();
        if (obj.contains("phases_rad")) phases = obj["phases_rad"].get<std::vector<double>>();
        if (obj.contains("phases_deg")) {
            phases = obj["phases_deg"].get<std::vector<double>>();
            for (auto& p : phases) p *= M_PI / 180.0;
        }
        if (obj.contains("bin_ns")) bin = obj["bin_ns"].get<double>();
        out = make_qudit(d, magnitudes, phases, bin);
    } catch (const json::exception& e) {
        issues.push_back(path + ": " + e.what());
        return false;
    } catch (const std::invalid_argument& e) {
        issues.push_back(path + ": " + e.what());
        return false;
    }
    return true;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/// Parses and fully validates a configuration document. All problems are
/// collected and reported together, one per line, each naming its key path.
inline ExperimentConfig parse_config(const nlohmann::json& doc) {
    using nlohmann::json;
    std::vector<std::string> issues;
    ExperimentConfig cfg;

    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    detail::reject_unknown_keys(doc, {"signal", "lo", "interference", "source", "analysis",
                                      "output_dir"},
                                "config", issues);

    bool have_signal = false;
    if (!doc.contains("signal")) {
        issues.push_back("config.signal: required");
    } else {
        have_signal = detail::parse_state(doc["signal"], "config.signal", cfg.signal, issues);
    }
    if (doc.contains("lo")) {
        detail::parse_state(doc["lo"], "config.lo", cfg.lo, issues);
    } else if (have_signal) {
        cfg.lo = make_lo_qudit(cfg.signal.d, cfg.signal.bin_duration);
    }

    try {
        if (doc.contains("interference")) {
            const json& j = doc["interference"];
            detail::reject_unknown_keys(j, {"coherence_time_ns", "kernel", "mode_overlap"},
                                        "config.interference", issues);
            if (j.contains("coherence_time_ns")) {
                const json& tc = j["coherence_time_ns"];
                if (tc.is_string() && tc.get<std::string>() == "inf")
                    cfg.interference.coherence_time = std::numeric_limits<double>::infinity();
                else if (tc.is_number())
                    cfg.interference.coherence_time = tc.get<double>();
                else
                    issues.push_back(
                        "config.interference.coherence_time_ns: number or \"inf\"");
            }
            if (j.contains("kernel")) {
                try {
                    cfg.interference.coherence_kernel =
                        kernel_from_name(j["kernel"].get<std::string>());
                } catch (const ConfigError& e) {
                    issues.push_back(std::string("config.interference.kernel: ") + e.what());
                }
            }
            if (j.contains("mode_overlap"))
                cfg.interference.mode_overlap = j["mode_overlap"].get<double>();
        }
        if (doc.contains("source")) {
            const json& j = doc["source"];
            detail::reject_unknown_keys(
                j,
                {"repetition_period_ns", "emission_efficiency", "detection_efficiency",
                 "dark_count_rate_per_ns", "detector_dead_time_ns", "n_trigger_pairs",
                 "rng_seed"},
                "config.source", issues);
            if (j.contains("repetition_period_ns"))
                cfg.source.repetition_period = j["repetition_period_ns"].get<double>();
            if (j.contains("emission_efficiency"))
                cfg.source.emission_efficiency = j["emission_efficiency"].get<double>();
            if (j.contains("detection_efficiency"))
                cfg.source.detection_efficiency = j["detection_efficiency"].get<double>();
            if (j.contains("dark_count_rate_per_ns"))
                cfg.source.dark_count_rate = j["dark_count_rate_per_ns"].get<double>();
            if (j.contains("detector_dead_time_ns"))
                cfg.source.detector_dead_time = j["detector_dead_time_ns"].get<double>();
            if (j.contains("n_trigger_pairs"))
                cfg.source.n_trigger_pairs = j["n_trigger_pairs"].get<long long>();
            if (j.contains("rng_seed")) cfg.source.rng_seed = j["rng_seed"].get<std::uint64_t>();
        }
        if (doc.contains("analysis")) {
            const json& j = doc["analysis"];
            detail::reject_unknown_keys(j,
                                        {"max_tau_ns", "tau_bin_width_ns", "window_width_ns",
                                         "max_lag", "n_satellites"},
                                        "config.analysis", issues);
            if (j.contains("max_tau_ns")) cfg.analysis.max_tau = j["max_tau_ns"].get<double>();
            if (j.contains("tau_bin_width_ns"))
                cfg.analysis.tau_bin_width = j["tau_bin_width_ns"].get<double>();
            if (j.contains("window_width_ns"))
                cfg.analysis.window_width = j["window_width_ns"].get<double>();
            if (j.contains("max_lag")) cfg.analysis.max_lag = j["max_lag"].get<int>();
            if (j.contains("n_satellites"))
                cfg.analysis.n_satellites = j["n_satellites"].get<int>();
        }
        if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
    } catch (const json::exception& e) {
        issues.push_back(std::string("config: ") + e.what());
    }

    try {
        validate(cfg.interference);
    } catch (const std::invalid_argument& e) {
        issues.push_back(std::string("config.interference: ") + e.what());
    }
    if (have_signal && cfg.signal.d == cfg.lo.d &&
        cfg.signal.bin_duration == cfg.lo.bin_duration) {
        try {
            validate(cfg.source, cfg.signal, cfg.lo);
        } catch (const std::invalid_argument& e) {
            issues.push_back(std::string("config.source: ") + e.what());
        }
    } else if (have_signal) {
        issues.push_back("config.lo: dimension and bin duration must match config.signal");
    }
    if (!(cfg.analysis.max_tau > 0.0))
        issues.push_back("config.analysis.max_tau_ns: must be > 0");
    if (!(cfg.analysis.tau_bin_width > 0.0))
        issues.push_back("config.analysis.tau_bin_width_ns: must be > 0");
    if (!(cfg.analysis.window_width > 0.0) ||
        cfg.analysis.window_width > cfg.source.repetition_period)
        issues.push_back("config.analysis.window_width_ns: must be in (0, repetition period]");
    if (cfg.analysis.max_lag < 1) issues.push_back("config.analysis.max_lag: must be >= 1");
    if (cfg.analysis.n_satellites < 0 ||
        (have_signal && cfg.analysis.n_satellites > cfg.signal.d - 1))
        issues.push_back("config.analysis.n_satellites: must be in [0, d - 1]");
    if (cfg.output_dir.empty()) issues.push_back("config.output_dir: must not be empty");

    if (!issues.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& issue : issues) msg += "\n  - " + issue;
        throw ConfigError(msg);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

/// Canonical serialized form: every field explicit, phases in radians.
/// Used for hashing and for echoing the effective configuration.
inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    using nlohmann::json;
    const auto state_json = [](const TimeBinQudit& s) {
        std::vector<double> mags, phases;
        for (const auto& c : s.amplitudes) {
            mags.push_back(std::abs(c));
            phases.push_back(std::arg(c));
        }
        return json{{"d", s.d},
                    {"magnitudes", mags},
                    {"phases_rad", phases},
                    {"bin_ns", s.bin_duration}};
    };
    json j;
    j["signal"] = state_json(cfg.signal);
    j["lo"] = state_json(cfg.lo);
    j["interference"] = {
        {"coherence_time_ns",
         std::isinf(cfg.interference.coherence_time)
             ? json("inf")
             : json(cfg.interference.coherence_time)},
        {"kernel", kernel_name(cfg.interference.coherence_kernel)},
        {"mode_overlap", cfg.interference.mode_overlap}};
    j["source"] = {{"repetition_period_ns", cfg.source.repetition_period},
                   {"emission_efficiency", cfg.source.emission_efficiency},
                   {"detection_efficiency", cfg.source.detection_efficiency},
                   {"dark_count_rate_per_ns", cfg.source.dark_count_rate},
                   {"detector_dead_time_ns", cfg.source.detector_dead_time},
                   {"n_trigger_pairs", cfg.source.n_trigger_pairs},
                   {"rng_seed", cfg.source.rng_seed}};
    j["analysis"] = {{"max_tau_ns", cfg.analysis.max_tau},
                     {"tau_bin_width_ns", cfg.analysis.tau_bin_width},
                     {"window_width_ns", cfg.analysis.window_width},
                     {"max_lag", cfg.analysis.max_lag},
                     {"n_satellites", cfg.analysis.n_satellites}};
    j["output_dir"] = cfg.output_dir;
    return j;
}

/// FNV-1a hash of the canonical serialization, as 16 hex digits. The output
/// directory routes artifacts but does not alter them, so it is excluded:
/// the hash identifies the experiment, not the destination.
inline std::string config_hash(const ExperimentConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("output_dir");
    const std::uint64_t h = detail::fnv1a(j.dump());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline int effective_n_satellites(const ExperimentConfig& cfg) {
    return cfg.analysis.n_satellites > 0 ? cfg.analysis.n_satellites : cfg.signal.d - 1;
}

}  // namespace qhom
