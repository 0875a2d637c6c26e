#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qhom/correlator.hpp"
#include "qhom/mc_sim.hpp"
#include "qhom/qudit_state.hpp"
#include "qhom/rng.hpp"

namespace qhom {

using PairKey = std::pair<int, int>;  // (j, k) with j < k

/// Partial density-matrix reconstruction: diagonal from non-interfering
/// same-bin counts, off-diagonal magnitudes from pairwise side-peak
/// visibilities, off-diagonal phases taken from the prepared target phases
/// (an assumption, not a measurement). Hermitian with unit trace by
/// construction; positive semidefiniteness is reported, not enforced.
struct DensityMatrixEstimate {
    int d = 0;
    std::vector<std::vector<Complex>> matrix;
    std::vector<long long> diagonal_counts;        // N_k behind the diagonal
    std::map<PairKey, double> visibilities;        // V_jk in [0, 2]
    std::map<PairKey, long long> pair_counts;      // correlations behind V_jk
    std::vector<double> target_phases;             // radians

    Complex at(int j, int k) const {
        return matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    }
};

struct FidelityResult {
    double fidelity = 0.0;
    double std_error = 0.0;
    long long n_correlations = 0;
    bool clamped = false;  // <psi|sigma|psi> fell outside [0, 1]
};

namespace detail {

inline PairKey ordered_pair(int j, int k) { return j < k ? PairKey{j, k} : PairKey{k, j}; }

/// Core linear reconstruction, no input validation (used for the nominal
/// estimate and for numerically perturbed inputs during error propagation).
inline std::vector<std::vector<Complex>> reconstruct_raw(
    const std::vector<double>& diagonal_counts, const std::map<PairKey, double>& visibilities,
    const std::vector<double>& target_phases) {
    const auto n = diagonal_counts.size();
    std::vector<double> diag(n);
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        diag[k] = std::sqrt(std::max(0.0, diagonal_counts[k]));
        norm += diag[k];
    }
    for (auto& v : diag) v /= norm;

    std::vector<std::vector<Complex>> m(n, std::vector<Complex>(n, Complex{0.0, 0.0}));
    for (std::size_t k = 0; k < n; ++k) m[k][k] = diag[k];
    for (const auto& [jk, v] : visibilities) {
        const auto j = static_cast<std::size_t>(jk.first);
        const auto k = static_cast<std::size_t>(jk.second);
        const double mag = std::sqrt(std::max(0.0, v) / 2.0) * std::sqrt(diag[j] * diag[k]);
        const Complex phase =
            std::polar(1.0, target_phases[j] - target_phases[k]);
        m[j][k] = mag * phase;
        m[k][j] = std::conj(m[j][k]);
    }
    return m;
}

inline double overlap(const TimeBinQudit& psi, const std::vector<std::vector<Complex>>& m) {
    Complex acc{0.0, 0.0};
    const auto n = psi.amplitudes.size();
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
            acc += std::conj(psi.amplitudes[j]) * m[j][k] * psi.amplitudes[k];
    return acc.real();
}

}  // namespace detail

/// Builds the density-matrix estimate. diagonal_counts are same-bin
/// coincidence counts of the non-interfering reference run; pair_visibilities
/// map bin pairs (j < k) to observed side-peak visibilities in [0, 2];
/// pair_counts (optional) give the number of correlations behind each
/// visibility, used for error propagation.
inline DensityMatrixEstimate reconstruct_density_matrix(
    const std::vector<long long>& diagonal_counts,
    const std::map<PairKey, double>& pair_visibilities, const std::vector<double>& target_phases,
    const std::map<PairKey, long long>& pair_counts = {}) {
    const auto d = static_cast<int>(diagonal_counts.size());
    if (d < 1 || d > kMaxTimeBins)
        throw std::invalid_argument("reconstruct_density_matrix: d must be in [1, 8]");
    if (target_phases.size() != diagonal_counts.size())
        throw std::invalid_argument("reconstruct_density_matrix: phases length must equal d");
    long long total = 0;
    for (long long n : diagonal_counts) {
        if (n < 0) throw std::invalid_argument("reconstruct_density_matrix: negative count");
        total += n;
    }
    if (total == 0) throw std::invalid_argument("reconstruct_density_matrix: all-zero diagonal");
    for (const auto& [jk, v] : pair_visibilities) {
        if (jk.first < 0 || jk.second >= d || jk.first >= jk.second)
            throw std::invalid_argument("reconstruct_density_matrix: bad pair index");
        if (!(v >= 0.0))
            throw std::invalid_argument("reconstruct_density_matrix: negative visibility");
        if (v > 2.0)
            throw std::invalid_argument("reconstruct_density_matrix: visibility > 2");
    }

    DensityMatrixEstimate est;
    est.d = d;
    est.diagonal_counts = diagonal_counts;
    est.visibilities = pair_visibilities;
    est.pair_counts = pair_counts;
    est.target_phases = target_phases;
    est.matrix = detail::reconstruct_raw(
        std::vector<double>(diagonal_counts.begin(), diagonal_counts.end()), pair_visibilities,
        target_phases);
    return est;
}

/// F = sqrt(<psi|sigma|psi>) with a first-order (delta method) standard
/// error from Poisson fluctuations of the diagonal counts and visibility
/// uncertainties sigma_V = V / sqrt(N_jk).
inline FidelityResult fidelity(const TimeBinQudit& reference, const DensityMatrixEstimate& sigma) {
    if (reference.d != sigma.d) throw std::invalid_argument("fidelity: dimension mismatch");

    const std::vector<double> diag(sigma.diagonal_counts.begin(), sigma.diagonal_counts.end());
    const double f2 = detail::overlap(reference, sigma.matrix);

    FidelityResult r;
    if (f2 < 0.0) {
        r.fidelity = 0.0;
        r.clamped = true;
    } else if (f2 > 1.0 + 1e-12) {
        r.fidelity = 1.0;
        r.clamped = true;
    } else {
        r.fidelity = std::sqrt(std::min(1.0, f2));
    }

    // d(F)/dx = d(F^2)/dx / (2F), numerically via central differences of the
    // raw reconstruction. Near F = 0 the error is reported on F^2 instead.
    const double f_for_slope = std::max(r.fidelity, 1e-3);
    double var = 0.0;

    for (std::size_t k = 0; k < diag.size(); ++k) {
        if (diag[k] <= 0.0) continue;  // zero observed counts: no Poisson spread
        const double h = 0.01 * diag[k];
        auto lo = diag, hi = diag;
        lo[k] -= h;
        hi[k] += h;
        const double up =
            detail::overlap(reference, detail::reconstruct_raw(hi, sigma.visibilities,
                                                               sigma.target_phases));
        const double dn =
            detail::overlap(reference, detail::reconstruct_raw(lo, sigma.visibilities,
                                                               sigma.target_phases));
        const double slope = (up - dn) / (2.0 * h) / (2.0 * f_for_slope);
        var += slope * slope * diag[k];
    }

    for (const auto& [jk, v] : sigma.visibilities) {
        const auto it = sigma.pair_counts.find(jk);
        if (it == sigma.pair_counts.end() || it->second <= 0 || v <= 0.0) continue;
        const double sigma_v = v / std::sqrt(static_cast<double>(it->second));
        const double h = 0.01 * std::max(v, 0.1);
        auto vis_lo = sigma.visibilities, vis_hi = sigma.visibilities;
        vis_lo[jk] = v - h;
        vis_hi[jk] = v + h;
        const double up = detail::overlap(
            reference, detail::reconstruct_raw(diag, vis_hi, sigma.target_phases));
        const double dn = detail::overlap(
            reference, detail::reconstruct_raw(diag, vis_lo, sigma.target_phases));
        const double slope = (up - dn) / (2.0 * h) / (2.0 * f_for_slope);
        var += slope * slope * sigma_v * sigma_v;
    }

    r.std_error = std::sqrt(var);
    for (const auto& [jk, n] : sigma.pair_counts) r.n_correlations += n;
    return r;
}

/// How the two mirror cells (C_j, D_k) and (C_k, D_j) are combined into one
/// observed visibility.
enum class VisibilityCombine { mean, max };

/// Pairwise visibilities and diagonal counts extracted from an RCP matrix
/// for the given target phases:
///   V_jk = 2 (1 - R_jk) / cos(phi_j - phi_k), clamped to [0, 2],
/// with R_jk the combined mirror-cell RCP. Pairs whose prepared phase
/// difference gives |cos| < 0.1 carry no usable visibility and are skipped.
struct VisibilityExtraction {
    std::vector<long long> diagonal_counts;
    std::map<PairKey, double> visibilities;
    std::map<PairKey, long long> pair_counts;
};

inline VisibilityExtraction extract_visibilities(const RCPMatrix& m,
                                                 const std::vector<double>& target_phases,
                                                 VisibilityCombine combine) {
    if (static_cast<int>(target_phases.size()) != m.d)
        throw std::invalid_argument("extract_visibilities: phases length must equal d");
    VisibilityExtraction out;
    out.diagonal_counts.resize(static_cast<std::size_t>(m.d));
    for (int k = 0; k < m.d; ++k)
        out.diagonal_counts[static_cast<std::size_t>(k)] =
            m.counts_perp[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];

    for (int j = 0; j < m.d; ++j) {
        for (int k = j + 1; k < m.d; ++k) {
            const double cos_delta = std::cos(target_phases[static_cast<std::size_t>(j)] -
                                              target_phases[static_cast<std::size_t>(k)]);
            if (std::abs(cos_delta) < 0.1) continue;  // phase setting carries no contrast

            const auto ju = static_cast<std::size_t>(j);
            const auto ku = static_cast<std::size_t>(k);
            std::vector<double> cells;
            if (m.defined[ju][ku]) cells.push_back(m.entries[ju][ku]);
            if (m.defined[ku][ju]) cells.push_back(m.entries[ku][ju]);
            if (cells.empty()) continue;

            double v = 0.0;
            if (combine == VisibilityCombine::mean) {
                double r = 0.0;
                for (double c : cells) r += c;
                r /= static_cast<double>(cells.size());
                v = 2.0 * (1.0 - r) / cos_delta;
            } else {
                for (double c : cells) v = std::max(v, 2.0 * (1.0 - c) / cos_delta);
            }
            v = std::min(2.0, std::max(0.0, v));
            out.visibilities[{j, k}] = v;
            out.pair_counts[{j, k}] =
                m.counts_parallel[ju][ku] + m.counts_parallel[ku][ju];
        }
    }
    return out;
}

/// Full analysis chain: RCP matrix -> pairwise visibilities and diagonal
/// counts -> density-matrix reconstruction -> fidelity against the target.
inline FidelityResult qudit_fidelity_pipeline(const std::vector<DetectionEvent>& events_parallel,
                                              const std::vector<DetectionEvent>& events_perp,
                                              const TimeBinQudit& target, double period = 1000.0,
                                              VisibilityCombine combine = VisibilityCombine::mean,
                                              int max_lag = 10) {
    AnalysisGeometry g;
    g.d = target.d;
    g.bin_duration = target.bin_duration;
    g.period = period;

    const auto m = rcp_matrix(events_parallel, events_perp, g, max_lag);
    std::vector<double> phases(static_cast<std::size_t>(target.d));
    for (int k = 0; k < target.d; ++k)
        phases[static_cast<std::size_t>(k)] = std::arg(target.amplitudes[static_cast<std::size_t>(k)]);

    const auto ex = extract_visibilities(m, phases, combine);
    const auto est =
        reconstruct_density_matrix(ex.diagonal_counts, ex.visibilities, phases, ex.pair_counts);
    return fidelity(target, est);
}

/// Projects the estimate onto the nearest positive-semidefinite state
/// (eigenvalue clipping + trace renormalization). Optional post-process;
/// the default reporting keeps the raw linear reconstruction.
inline DensityMatrixEstimate project_to_psd(const DensityMatrixEstimate& est) {
    const auto n = static_cast<Eigen::Index>(est.d);
    Eigen::MatrixXcd m(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            m(j, k) = est.matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    Eigen::VectorXd vals = solver.eigenvalues();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (vals(i) < 0.0) vals(i) = 0.0;
        total += vals(i);
    }
    const Eigen::MatrixXcd back =
        solver.eigenvectors() * (vals / total).asDiagonal() * solver.eigenvectors().adjoint();

    DensityMatrixEstimate out = est;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            out.matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = back(j, k);
    return out;
}

/// Smallest eigenvalue of the estimate (negative values quantify how far the
/// linear reconstruction strays from a physical state).
inline double min_eigenvalue(const DensityMatrixEstimate& est) {
    const auto n = static_cast<Eigen::Index>(est.d);
    Eigen::MatrixXcd m(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k)
            m(j, k) = est.matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    return solver.eigenvalues().minCoeff();
}

/// Bootstrap cross-check of the fidelity error: resamples trigger windows
/// with replacement in both runs and returns the sample standard deviation
/// of the pipeline fidelity across n_resamples replicas.
inline double bootstrap_fidelity_error(const std::vector<DetectionEvent>& events_parallel,
                                       const std::vector<DetectionEvent>& events_perp,
                                       const TimeBinQudit& target, double period,
                                       int n_resamples, std::uint64_t seed) {
    if (n_resamples < 2) throw std::invalid_argument("bootstrap: need at least 2 resamples");

    const auto split_windows = [](const std::vector<DetectionEvent>& events) {
        std::vector<std::vector<DetectionEvent>> windows;
        std::size_t i = 0;
        long long max_trial = -1;
        for (const auto& ev : events) max_trial = std::max(max_trial, ev.trial_index);
        windows.resize(static_cast<std::size_t>(max_trial + 1));
        for (; i < events.size(); ++i)
            windows[static_cast<std::size_t>(events[i].trial_index)].push_back(events[i]);
        return windows;
    };
    const auto win_par = split_windows(events_parallel);
    const auto win_perp = split_windows(events_perp);

    const auto resample = [&](const std::vector<std::vector<DetectionEvent>>& windows, Rng& rng) {
        std::vector<DetectionEvent> out;
        const auto n = windows.size();
        for (std::size_t w = 0; w < n; ++w) {
            const auto& src = windows[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n))];
            for (DetectionEvent ev : src) {
                const double local =
                    ev.timestamp - static_cast<double>(ev.trial_index) * period;
                ev.trial_index = static_cast<long long>(w);
                ev.timestamp = static_cast<double>(w) * period + local;
                out.push_back(ev);
            }
        }
        return out;
    };

    std::vector<double> fs;
    fs.reserve(static_cast<std::size_t>(n_resamples));
    for (int r = 0; r < n_resamples; ++r) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r), 0xb007);
        const auto par = resample(win_par, rng);
        const auto perp = resample(win_perp, rng);
        fs.push_back(qudit_fidelity_pipeline(par, perp, target, period).fidelity);
    }

    double mean = 0.0;
    for (double f : fs) mean += f;
    mean /= static_cast<double>(fs.size());
    double var = 0.0;
    for (double f : fs) var += (f - mean) * (f - mean);
    var /= static_cast<double>(fs.size() - 1);
    return std::sqrt(var);
}

}  // namespace qhom
