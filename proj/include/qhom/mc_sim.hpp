#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qhom/optics.hpp"
#include "qhom/qudit_state.hpp"
#include "qhom/rng.hpp"

namespace qhom {

/// Source and detection parameters of one simulated run. One trigger pair =
/// one signal photon + one reference photon per repetition period; routing
/// makes them simultaneous at the beam splitter in 25% of the windows.
struct SourceConfig {
    double repetition_period = 1000.0;        // ns per trigger-pair window
    double emission_efficiency = 0.85;        // eta: photon actually emitted
    double detection_efficiency = 0.2 / 0.85; // click probability per photon at a detector
    double dark_count_rate = 0.0;             // counts/ns per detector
    double detector_dead_time = 0.0;          // ns; 0 = ideal time-resolving detector
    long long n_trigger_pairs = 0;
    std::uint64_t rng_seed = 0;
};

inline void validate(const SourceConfig& c, const TimeBinQudit& signal, const TimeBinQudit& lo) {
    if (signal.d != lo.d)
        throw std::invalid_argument("SourceConfig: signal and LO dimensions differ");
    if (signal.bin_duration != lo.bin_duration)
        throw std::invalid_argument("SourceConfig: signal and LO bin durations differ");
    if (!(c.emission_efficiency > 0.0 && c.emission_efficiency <= 1.0))
        throw std::invalid_argument("SourceConfig: emission_efficiency must be in (0, 1]");
    if (!(c.detection_efficiency >= 0.0 && c.detection_efficiency <= 1.0))
        throw std::invalid_argument("SourceConfig: detection_efficiency must be in [0, 1]");
    if (!(c.dark_count_rate >= 0.0) || std::isinf(c.dark_count_rate))
        throw std::invalid_argument("SourceConfig: dark_count_rate must be finite and >= 0");
    if (!(c.detector_dead_time >= 0.0))
        throw std::invalid_argument("SourceConfig: detector_dead_time must be >= 0");
    if (c.n_trigger_pairs < 0)
        throw std::invalid_argument("SourceConfig: n_trigger_pairs must be >= 0");
    if (!(c.repetition_period > signal.total_duration()))
        throw std::invalid_argument("SourceConfig: repetition_period must exceed photon duration");
}

enum class EventOrigin { photon, dark };

/// One time-tag record. `origin` is simulation truth for diagnostics and
/// calibration; the analysis treats photon and dark events alike.
struct DetectionEvent {
    Port detector = Port::C;
    double timestamp = 0.0;  // ns, absolute (trial * period + in-window time)
    long long trial_index = 0;
    EventOrigin origin = EventOrigin::photon;

    friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

/// Detection times and exit ports of one interfering photon pair.
struct PairSample {
    double t1 = 0.0;
    double t2 = 0.0;
    Port port1 = Port::C;
    Port port2 = Port::C;
};

/// Draws an arrival time from |zeta(t)|^2: bin by amplitude weight, then the
/// sin^2 profile within the bin by rejection (acceptance rate 1/2).
inline double sample_envelope_time(const TemporalEnvelope& env, Rng& rng) {
    const auto& q = env.state;
    std::vector<double> weights(static_cast<std::size_t>(q.d));
    for (int k = 0; k < q.d; ++k) weights[static_cast<std::size_t>(k)] = q.bin_weight(k);
    const auto bin = static_cast<double>(rng.discrete(weights));

    const double T = q.bin_duration;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const double u = rng.uniform(T);
        const double s = std::sin(std::numbers::pi * u / T);
        if (rng.uniform() < s * s) return bin * T + u;
    }
    throw std::runtime_error("sample_envelope_time: rejection sampling did not converge");
}

/// Samples (t1, t2, port1, port2) of one interfering pair from the full
/// two-photon output distribution.
///
/// Two stages: (t1, t2) from the port-summed time density
///   m(t1,t2) = 1/2 [rho_S(t1) rho_L(t2) + rho_S(t2) rho_L(t1)],
/// then the port combination conditioned on the times, with
///   P(both C) = P(both D) = (S + I) / (4S),
///   P(C at t1, D at t2) = P(D at t1, C at t2) = (S - I) / (4S),
/// where S = |a|^2 + |b|^2, I = 2 mu kappa(t1-t2) Re(a conj(b)),
/// a = zeta_S(t1) zeta_L(t2), b = zeta_S(t2) zeta_L(t1). Marginalizing
/// reproduces joint_coincidence_density exactly.
inline PairSample sample_detection_times(const TemporalEnvelope& signal,
                                         const TemporalEnvelope& lo,
                                         const InterferenceSettings& settings, Rng& rng) {
    if (signal.state.bin_duration != lo.state.bin_duration)
        throw std::invalid_argument("sample_detection_times: mismatched bin durations");

    PairSample out;
    const double ts = sample_envelope_time(signal, rng);
    const double tl = sample_envelope_time(lo, rng);
    if (rng.bernoulli(0.5)) {
        out.t1 = ts;
        out.t2 = tl;
    } else {
        out.t1 = tl;
        out.t2 = ts;
    }

    const Complex a = envelope_amplitude(signal, out.t1) * envelope_amplitude(lo, out.t2);
    const Complex b = envelope_amplitude(signal, out.t2) * envelope_amplitude(lo, out.t1);
    const double s = std::norm(a) + std::norm(b);
    double i = 0.0;
    if (settings.polarization == Polarization::parallel)
        i = 2.0 * settings.mode_overlap * dephasing_kernel(settings, out.t1 - out.t2) *
            (a * std::conj(b)).real();

    const double same = std::max(0.0, (s + i) / (4.0 * s));
    const double cross = std::max(0.0, (s - i) / (4.0 * s));
    const double combo[4] = {same, same, cross, cross};  // CC, DD, CD, DC
    switch (rng.discrete(combo)) {
        case 0: out.port1 = Port::C; out.port2 = Port::C; break;
        case 1: out.port1 = Port::D; out.port2 = Port::D; break;
        case 2: out.port1 = Port::C; out.port2 = Port::D; break;
        default: out.port1 = Port::D; out.port2 = Port::C; break;
    }
    return out;
}

/// Simulates n_trigger_pairs windows of the homodyne apparatus and returns
/// the time-tag record, ordered by trial and timestamp.
///
/// Per window: with probability 1/4 both photons reach the beam splitter
/// simultaneously (interfering pair), with probability 1/2 exactly one does,
/// otherwise none. Each arriving photon exists with the emission efficiency
/// and clicks with the detection efficiency; dark counts are Poisson and
/// uniform over each window on both detectors. Each detected photon yields
/// its own event; an optional non-paralyzable detector dead time drops events
/// following a previous one on the same detector too closely.
inline std::vector<DetectionEvent> simulate_stream(const TimeBinQudit& signal,
                                                   const TimeBinQudit& lo,
                                                   const InterferenceSettings& settings,
                                                   const SourceConfig& source) {
    validate(settings);
    validate(source, signal, lo);

    const TemporalEnvelope env_s(signal);
    const TemporalEnvelope env_l(lo);
    const double period = source.repetition_period;
    const double eps = source.detection_efficiency;
    const double dark_mean = source.dark_count_rate * period;

    std::vector<DetectionEvent> record;
    record.reserve(static_cast<std::size_t>(
        static_cast<double>(source.n_trigger_pairs) * (eps + 2.0 * dark_mean) + 64.0));

    std::vector<DetectionEvent> window;
    double last_kept[2] = {-1e300, -1e300};  // per-detector, for dead time

    for (long long w = 0; w < source.n_trigger_pairs; ++w) {
        window.clear();
        Rng rng = Rng::substream(source.rng_seed, static_cast<std::uint64_t>(w));
        const double t0 = static_cast<double>(w) * period;

        const auto detect = [&](Port port, double t) {
            if (rng.bernoulli(eps))
                window.push_back({port, t0 + t, w, EventOrigin::photon});
        };
        // A photon alone at the beam splitter exits either port with odds 1/2.
        const auto single_photon = [&](const TemporalEnvelope& env) {
            const double t = sample_envelope_time(env, rng);
            detect(rng.bernoulli(0.5) ? Port::C : Port::D, t);
        };

        const double routing[3] = {0.25, 0.5, 0.25};  // both, one, none
        switch (rng.discrete(routing)) {
            case 0: {
                const bool s_here = rng.bernoulli(source.emission_efficiency);
                const bool l_here = rng.bernoulli(source.emission_efficiency);
                if (s_here && l_here) {
                    const PairSample p = sample_detection_times(env_s, env_l, settings, rng);
                    detect(p.port1, p.t1);
                    detect(p.port2, p.t2);
                } else if (s_here) {
                    single_photon(env_s);
                } else if (l_here) {
                    single_photon(env_l);
                }
                break;
            }
            case 1:
                if (rng.bernoulli(source.emission_efficiency))
                    single_photon(rng.bernoulli(0.5) ? env_s : env_l);
                break;
            default:
                break;
        }

        if (dark_mean > 0.0) {
            for (Port det : {Port::C, Port::D}) {
                const std::uint64_t n = rng.poisson(dark_mean);
                for (std::uint64_t k = 0; k < n; ++k)
                    window.push_back({det, t0 + rng.uniform(period), w, EventOrigin::dark});
            }
        }

        std::sort(window.begin(), window.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            return a.detector < b.detector;
        });

        for (const auto& ev : window) {
            if (source.detector_dead_time > 0.0) {
                double& last = last_kept[ev.detector == Port::C ? 0 : 1];
                if (ev.timestamp - last < source.detector_dead_time) continue;
                last = ev.timestamp;
            }
            record.push_back(ev);
        }
    }
    return record;
}

}  // namespace qhom
