#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhom/correlator.hpp"
#include "qhom/tomography.hpp"
#include "qhom/version.hpp"

namespace qhom {

/// Provenance stamped into every artifact: as '#' comment lines in CSV files,
/// as a "meta" object in JSON files (JSON has no comment syntax).
struct RunMetadata {
    std::string config_hash;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

inline void write_meta_comments(std::ofstream& out, const RunMetadata& meta) {
    out << "# config_hash=" << meta.config_hash << "\n";
    out << "# seed=" << meta.seed << "\n";
    out << "# tool_version=" << kVersionString << "\n";
}

}  // namespace detail

inline nlohmann::json meta_to_json(const RunMetadata& meta) {
    return nlohmann::json{{"config_hash", meta.config_hash},
                          {"seed", meta.seed},
                          {"tool_version", kVersionString}};
}

inline void write_json_artifact(const std::filesystem::path& path, nlohmann::json body,
                                const RunMetadata& meta) {
    body["meta"] = meta_to_json(meta);
    auto out = detail::open_artifact(path);
    out << body.dump(2) << "\n";
}

/// Plot-ready normalized histogram: one row per tau bin over the full
/// [-max_tau, max_tau] span (zero-count bins included), with both the raw
/// per-ns density and the sliding-coincidence-window trace at the bin centre.
inline void write_histogram_csv(const std::filesystem::path& path,
                                const CoincidenceHistogram& h, const RunMetadata& meta) {
    if (!(h.normalization > 0.0))
        throw std::invalid_argument("write_histogram_csv: histogram must be normalized");
    auto out = detail::open_artifact(path);
    detail::write_meta_comments(out, meta);
    out << "tau_bin_center_ns,counts,density_per_ns,windowed_density\n";

    const auto lo = static_cast<long long>(std::floor(-h.max_tau / h.tau_bin_width));
    const auto hi = static_cast<long long>(std::floor(h.max_tau / h.tau_bin_width));
    char line[160];
    for (long long b = lo; b <= hi; ++b) {
        const double centre = (static_cast<double>(b) + 0.5) * h.tau_bin_width;
        const auto it = h.counts.find(b);
        const long long c = it == h.counts.end() ? 0 : it->second;
        std::snprintf(line, sizeof(line), "%.3f,%lld,%.9e,%.9e\n", centre, c,
                      histogram_density(h, b), windowed_density(h, centre));
        out << line;
    }
}

inline void write_side_peaks_csv(const std::filesystem::path& path,
                                 const std::vector<SatelliteStrength>& peaks,
                                 const RunMetadata& meta) {
    auto out = detail::open_artifact(path);
    detail::write_meta_comments(out, meta);
    out << "k,strength,sigma,n_parallel,n_perp\n";
    char line[160];
    for (const auto& p : peaks) {
        std::snprintf(line, sizeof(line), "%d,%.9e,%.9e,%lld,%lld\n", p.k, p.strength, p.sigma,
                      p.n_parallel, p.n_perp);
        out << line;
    }
}

inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<SweepPoint>& points, const RunMetadata& meta) {
    auto out = detail::open_artifact(path);
    detail::write_meta_comments(out, meta);
    out << "phi_rad,strength,sigma\n";
    char line[120];
    for (const auto& p : points) {
        std::snprintf(line, sizeof(line), "%.9f,%.9e,%.9e\n", p.phi, p.strength, p.sigma);
        out << line;
    }
}

inline nlohmann::json rcp_to_json(const RCPMatrix& m) {
    return nlohmann::json{{"d", m.d},
                          {"entries", m.entries},
                          {"defined", m.defined},
                          {"counts_parallel", m.counts_parallel},
                          {"counts_perp", m.counts_perp},
                          {"norm_parallel", m.norm_parallel},
                          {"norm_perp", m.norm_perp}};
}

inline nlohmann::json tomography_report_json(const DensityMatrixEstimate& est,
                                             const FidelityResult& fid) {
    std::vector<std::vector<double>> re(static_cast<std::size_t>(est.d)),
        im(static_cast<std::size_t>(est.d));
    for (int j = 0; j < est.d; ++j) {
        for (int k = 0; k < est.d; ++k) {
            re[static_cast<std::size_t>(j)].push_back(est.at(j, k).real());
            im[static_cast<std::size_t>(j)].push_back(est.at(j, k).imag());
        }
    }
    nlohmann::json vis = nlohmann::json::array();
    for (const auto& [jk, v] : est.visibilities) {
        const auto it = est.pair_counts.find(jk);
        vis.push_back({{"j", jk.first},
                       {"k", jk.second},
                       {"visibility", v},
                       {"n_correlations", it == est.pair_counts.end() ? 0 : it->second}});
    }
    return nlohmann::json{
        {"d", est.d},
        {"sigma_re", re},
        {"sigma_im", im},
        {"diagonal_counts", est.diagonal_counts},
        {"target_phases_rad", est.target_phases},
        {"visibilities", vis},
        {"fidelity", fid.fidelity},
        {"std_error", fid.std_error},
        {"n_correlations", fid.n_correlations},
        {"clamped", fid.clamped},
        {"min_eigenvalue", min_eigenvalue(est)},
        {"assumptions",
         {"off-diagonal phases are taken from the prepared target state, not measured",
          "diagonal populations from square roots of same-bin reference counts",
          "raw linear reconstruction; no positivity projection applied"}}};
}

}  // namespace qhom
