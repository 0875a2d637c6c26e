#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qhom/mc_sim.hpp"
#include "qhom/optics.hpp"

namespace qhom {

/// Raw coincidence histogram over the detection-time difference
/// tau = t_C - t_D of same-window cross-port pairs, with the cross-period
/// accidental normalization attached by normalize_histogram. Bin b covers
/// [b*tau_bin_width, (b+1)*tau_bin_width).
struct CoincidenceHistogram {
    double tau_bin_width = 1.0;  // ns, raw granularity
    double window_width = 60.0;  // ns, sliding-sum presentation
    double max_tau = 0.0;        // ns, |tau| cutoff used when building
    std::map<long long, long long> counts;
    double normalization = 0.0;  // mean accidental photon pairs; 0 = not normalized

    long long total_counts() const {
        long long n = 0;
        for (const auto& [b, c] : counts) n += c;
        return n;
    }

    /// Raw counts with bin centre inside [lo, hi).
    long long counts_in(double lo, double hi) const {
        long long n = 0;
        for (const auto& [b, c] : counts) {
            const double centre = (static_cast<double>(b) + 0.5) * tau_bin_width;
            if (centre >= lo && centre < hi) n += c;
        }
        return n;
    }
};

/// Raw counts of the 60 ns (window_width) sliding sum centred on tau.
inline long long windowed_counts(const CoincidenceHistogram& h, double tau) {
    return h.counts_in(tau - 0.5 * h.window_width, tau + 0.5 * h.window_width);
}

/// Normalized coincidence probability density (1/ns) of one raw bin.
inline double histogram_density(const CoincidenceHistogram& h, long long bin) {
    if (!(h.normalization > 0.0))
        throw std::logic_error("histogram_density: histogram is not normalized");
    const auto it = h.counts.find(bin);
    const double c = it == h.counts.end() ? 0.0 : static_cast<double>(it->second);
    return c / (h.normalization * h.tau_bin_width);
}

/// Normalized sliding-window trace at tau: coincidence probability within
/// [tau - w/2, tau + w/2), dimensionless.
inline double windowed_density(const CoincidenceHistogram& h, double tau) {
    if (!(h.normalization > 0.0))
        throw std::logic_error("windowed_density: histogram is not normalized");
    return static_cast<double>(windowed_counts(h, tau)) / h.normalization;
}

namespace detail {
/// Applies fn(c_event, d_event) to every C-D event pair sharing a trigger
/// window. The record must be grouped by trial (simulate_stream order).
template <typename F>
void for_each_window_pair(const std::vector<DetectionEvent>& events, F&& fn) {
    std::size_t start = 0;
    while (start < events.size()) {
        std::size_t stop = start;
        while (stop < events.size() && events[stop].trial_index == events[start].trial_index)
            ++stop;
        for (std::size_t i = start; i < stop; ++i) {
            if (events[i].detector != Port::C) continue;
            for (std::size_t j = start; j < stop; ++j) {
                if (events[j].detector != Port::D) continue;
                fn(events[i], events[j]);
            }
        }
        start = stop;
    }
}
}  // namespace detail

/// Histograms tau = t_C - t_D over all same-window cross-port pairs with
/// |tau| <= max_tau.
inline CoincidenceHistogram build_histogram(const std::vector<DetectionEvent>& events,
                                            double max_tau, double tau_bin_width = 1.0,
                                            double window_width = 60.0) {
    if (!(max_tau > 0.0) || !(tau_bin_width > 0.0) || !(window_width > 0.0))
        throw std::invalid_argument("build_histogram: widths must be positive");
    CoincidenceHistogram h;
    h.tau_bin_width = tau_bin_width;
    h.window_width = window_width;
    h.max_tau = max_tau;
    detail::for_each_window_pair(events, [&](const DetectionEvent& c, const DetectionEvent& d) {
        const double tau = c.timestamp - d.timestamp;
        if (tau < -max_tau || tau > max_tau) return;
        h.counts[static_cast<long long>(std::floor(tau / tau_bin_width))]++;
    });
    return h;
}

/// Mean number of accidental photon pairs: C-D event pairs between different
/// trigger windows up to max_lag periods apart, averaged per window pair and
/// scaled by the window count. Dividing same-window coincidence counts by
/// this number yields the coincidence probability of one analyzed pair.
inline double cross_period_normalization(const std::vector<DetectionEvent>& events, double period,
                                         int max_lag = 10) {
    if (!(period > 0.0) || max_lag < 1)
        throw std::invalid_argument("cross_period_normalization: bad period or lag");
    if (events.empty())
        throw std::runtime_error("cross_period_normalization: empty record");

    long long n_windows = 0;
    for (const auto& ev : events)
        if (ev.trial_index + 1 > n_windows) n_windows = ev.trial_index + 1;
    if (n_windows <= max_lag)
        throw std::runtime_error("cross_period_normalization: record too short");

    std::vector<double> nc(static_cast<std::size_t>(n_windows), 0.0);
    std::vector<double> nd(static_cast<std::size_t>(n_windows), 0.0);
    for (const auto& ev : events) {
        auto& n = ev.detector == Port::C ? nc : nd;
        n[static_cast<std::size_t>(ev.trial_index)] += 1.0;
    }

    double pair_sum = 0.0;
    double n_terms = 0.0;
    for (int k = 1; k <= max_lag; ++k) {
        for (long long w = 0; w + k < n_windows; ++w) {
            const auto a = static_cast<std::size_t>(w);
            const auto b = static_cast<std::size_t>(w + k);
            pair_sum += nc[a] * nd[b] + nc[b] * nd[a];
        }
        n_terms += 2.0 * static_cast<double>(n_windows - k);
    }
    if (!(pair_sum > 0.0))
        throw std::runtime_error("cross_period_normalization: no accidental coincidences");
    return static_cast<double>(n_windows) * pair_sum / n_terms;
}

/// Returns the histogram with its cross-period accidental normalization set.
inline CoincidenceHistogram normalize_histogram(CoincidenceHistogram hist,
                                                const std::vector<DetectionEvent>& events,
                                                double period, int max_lag = 10) {
    hist.normalization = cross_period_normalization(events, period, max_lag);
    return hist;
}

/// Maps an event onto its virtual detector (port, time bin), or nothing if
/// the timestamp falls outside the d bins starting at window_start. A
/// timestamp exactly on a bin boundary belongs to the later bin.
inline std::optional<OutputMode> assign_virtual_detector(const DetectionEvent& ev,
                                                         double window_start, double bin_duration,
                                                         int d) {
    const double local = ev.timestamp - window_start;
    if (local < 0.0) return std::nullopt;
    const int bin = static_cast<int>(std::floor(local / bin_duration));
    if (bin < 0 || bin >= d) return std::nullopt;
    return OutputMode{ev.detector, bin};
}

/// Trigger-window geometry shared by the event-level analyses.
struct AnalysisGeometry {
    int d = 2;
    double bin_duration = kDefaultBinNs;
    double period = 1000.0;      // ns between trigger windows
    double window_offset = 0.0;  // photon window start within each period
};

inline void validate(const AnalysisGeometry& g) {
    if (g.d < 1 || g.d > kMaxTimeBins)
        throw std::invalid_argument("AnalysisGeometry: d must be in [1, 8]");
    if (!(g.bin_duration > 0.0))
        throw std::invalid_argument("AnalysisGeometry: bin_duration must be positive");
    if (!(g.period >= g.window_offset + g.d * g.bin_duration))
        throw std::invalid_argument("AnalysisGeometry: period too short for the photon window");
    if (!(g.window_offset >= 0.0))
        throw std::invalid_argument("AnalysisGeometry: window_offset must be >= 0");
}

/// Relative coincidence probabilities between virtual detectors C_i and D_j:
/// same-window parallel-run coincidences divided by the perpendicular
/// reference, with both runs scaled to equal numbers of analyzed pairs via
/// their cross-period normalizations. Cells without perpendicular reference
/// counts are flagged undefined.
struct RCPMatrix {
    int d = 0;
    std::vector<std::vector<double>> entries;
    std::vector<std::vector<bool>> defined;
    std::vector<std::vector<long long>> counts_parallel;
    std::vector<std::vector<long long>> counts_perp;
    double norm_parallel = 0.0;
    double norm_perp = 0.0;
};

namespace detail {
inline std::vector<std::vector<long long>> bin_pair_counts(
    const std::vector<DetectionEvent>& events, const AnalysisGeometry& g) {
    std::vector<std::vector<long long>> counts(
        static_cast<std::size_t>(g.d), std::vector<long long>(static_cast<std::size_t>(g.d), 0));
    for_each_window_pair(events, [&](const DetectionEvent& c, const DetectionEvent& d) {
        const double start = static_cast<double>(c.trial_index) * g.period + g.window_offset;
        const auto vc = assign_virtual_detector(c, start, g.bin_duration, g.d);
        const auto vd = assign_virtual_detector(d, start, g.bin_duration, g.d);
        if (vc && vd) counts[static_cast<std::size_t>(vc->bin)][static_cast<std::size_t>(vd->bin)]++;
    });
    return counts;
}
}  // namespace detail

inline RCPMatrix rcp_matrix(const std::vector<DetectionEvent>& events_parallel,
                            const std::vector<DetectionEvent>& events_perp,
                            const AnalysisGeometry& geometry, int max_lag = 10) {
    validate(geometry);
    RCPMatrix m;
    m.d = geometry.d;
    m.counts_parallel = detail::bin_pair_counts(events_parallel, geometry);
    m.counts_perp = detail::bin_pair_counts(events_perp, geometry);
    m.norm_parallel = cross_period_normalization(events_parallel, geometry.period, max_lag);
    m.norm_perp = cross_period_normalization(events_perp, geometry.period, max_lag);

    const auto n = static_cast<std::size_t>(geometry.d);
    m.entries.assign(n, std::vector<double>(n, 0.0));
    m.defined.assign(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (m.counts_perp[i][j] <= 0) continue;  // undefined cell
            m.defined[i][j] = true;
            m.entries[i][j] = (static_cast<double>(m.counts_parallel[i][j]) / m.norm_parallel) /
                              (static_cast<double>(m.counts_perp[i][j]) / m.norm_perp);
        }
    }
    return m;
}

/// One satellite-peak strength: normalized parallel counts in
/// [kT - T/2, kT + T/2) and its mirror at -kT, divided by the perpendicular
/// reference, with a Poisson standard error from the raw counts.
struct SatelliteStrength {
    int k = 0;  // satellite order: peaks at +-k*T
    double strength = 0.0;
    double sigma = 0.0;
    long long n_parallel = 0;
    long long n_perp = 0;
};

/// Strengths of the +-kT satellites for k = 1..n_satellites. Both histograms
/// must be normalized and share a coincidence window width; each satellite
/// combines the +kT and -kT coincidence windows. The narrow window (not the
/// full satellite lobe) keeps same-bin pairs out of the reference: their
/// |tau| < T tails would otherwise dilute the peak-strength ratio.
inline std::vector<SatelliteStrength> side_peak_details(const CoincidenceHistogram& parallel,
                                                        const CoincidenceHistogram& perp,
                                                        double bin_duration, int n_satellites) {
    if (!(parallel.normalization > 0.0) || !(perp.normalization > 0.0))
        throw std::invalid_argument("side_peak_details: histograms must be normalized");
    if (n_satellites < 1)
        throw std::invalid_argument("side_peak_details: n_satellites must be >= 1");
    if (parallel.window_width != perp.window_width)
        throw std::invalid_argument("side_peak_details: window widths differ");

    std::vector<SatelliteStrength> out;
    out.reserve(static_cast<std::size_t>(n_satellites));
    const double T = bin_duration;
    const double w = parallel.window_width;
    for (int k = 1; k <= n_satellites; ++k) {
        SatelliteStrength s;
        s.k = k;
        const double c = k * T;
        s.n_parallel = parallel.counts_in(c - w / 2, c + w / 2) +
                       parallel.counts_in(-c - w / 2, -c + w / 2);
        s.n_perp = perp.counts_in(c - w / 2, c + w / 2) + perp.counts_in(-c - w / 2, -c + w / 2);
        if (s.n_perp <= 0)
            throw std::runtime_error("side_peak_details: zero perpendicular reference at satellite " +
                                     std::to_string(k));
        const double par_rate = static_cast<double>(s.n_parallel) / parallel.normalization;
        const double perp_rate = static_cast<double>(s.n_perp) / perp.normalization;
        s.strength = par_rate / perp_rate;
        // Poisson error on both raw counts; normalizations carry far more
        // statistics and are treated as exact.
        if (s.n_parallel > 0) {
            const double rel = 1.0 / static_cast<double>(s.n_parallel) +
                               1.0 / static_cast<double>(s.n_perp);
            s.sigma = s.strength * std::sqrt(rel);
        } else {
            // Zero observed counts: use the strength one count would produce.
            s.sigma = (1.0 / parallel.normalization) / perp_rate;
        }
        out.push_back(s);
    }
    return out;
}

/// Satellite strengths only (k = 1..n_satellites), per side_peak_details.
inline std::vector<double> side_peak_strength(const CoincidenceHistogram& parallel,
                                              const CoincidenceHistogram& perp,
                                              double bin_duration, int n_satellites) {
    std::vector<double> out;
    for (const auto& s : side_peak_details(parallel, perp, bin_duration, n_satellites))
        out.push_back(s.strength);
    return out;
}

/// One measured point of the side-peak-strength-versus-phase sweep.
struct SweepPoint {
    double phi = 0.0;
    double strength = 0.0;
    double sigma = 0.0;
};

struct Chi2Result {
    double chi2 = 0.0;
    int dof = 0;
    double threshold_95 = 0.0;
    bool pass = false;
};

/// Pearson chi-squared of the measured sweep against a model curve,
/// compared with the 95% quantile for the number of points.
inline Chi2Result chi2_model_test(const std::vector<SweepPoint>& measured,
                                  const std::function<double(double)>& model) {
    if (measured.empty()) throw std::invalid_argument("chi2_model_test: no data points");
    Chi2Result r;
    for (const auto& p : measured) {
        if (!(p.sigma > 0.0))
            throw std::invalid_argument("chi2_model_test: sigma must be positive");
        const double z = (p.strength - model(p.phi)) / p.sigma;
        r.chi2 += z * z;
    }
    r.dof = static_cast<int>(measured.size());
    r.threshold_95 = boost::math::quantile(boost::math::chi_squared(r.dof), 0.95);
    r.pass = r.chi2 <= r.threshold_95;
    return r;
}

/// Origin breakdown of same-window cross-port pairs whose delay falls in the
/// +-tau_center coincidence windows. Simulation-truth diagnostic used to
/// calibrate how much of a peak is background (any dark count involved).
struct WindowPairOrigins {
    long long photon_photon = 0;
    long long dark_involved = 0;

    double dark_fraction() const {
        const long long total = photon_photon + dark_involved;
        return total > 0 ? static_cast<double>(dark_involved) / static_cast<double>(total) : 0.0;
    }
};

inline WindowPairOrigins classify_cross_port_pairs(const std::vector<DetectionEvent>& events,
                                                   double tau_center, double window_width) {
    if (!(window_width > 0.0) || !(tau_center >= 0.0))
        throw std::invalid_argument("classify_cross_port_pairs: bad window");
    WindowPairOrigins out;
    detail::for_each_window_pair(events, [&](const DetectionEvent& c, const DetectionEvent& d) {
        const double tau = c.timestamp - d.timestamp;
        if (std::abs(std::abs(tau) - tau_center) > window_width / 2.0) return;
        if (c.origin == EventOrigin::photon && d.origin == EventOrigin::photon)
            out.photon_photon++;
        else
            out.dark_involved++;
    });
    return out;
}

/// Debug helper: the record without dark counts (simulation-truth filter).
inline std::vector<DetectionEvent> photon_events_only(const std::vector<DetectionEvent>& events) {
    std::vector<DetectionEvent> out;
    out.reserve(events.size());
    for (const auto& ev : events)
        if (ev.origin == EventOrigin::photon) out.push_back(ev);
    return out;
}

}  // namespace qhom
