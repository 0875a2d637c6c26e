#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qhom/quadrature.hpp"
#include "qhom/qudit_state.hpp"

namespace qhom {

/// Beam-splitter output ports.
enum class Port { C, D };

inline char port_name(Port p) { return p == Port::C ? 'C' : 'D'; }

/// Relative polarization of the two interfering photons. Parallel photons
/// interfere; perpendicular ones are fully distinguishable and serve as the
/// non-interfering reference throughout the analysis.
enum class Polarization { parallel, perpendicular };

enum class CoherenceKernel { gaussian, exponential };

/// Imperfection model of the two-photon interference: a mutual-coherence
/// kernel kappa(tau) with time constant tau_c, and a scalar mode overlap mu
/// multiplying the interference term.
struct InterferenceSettings {
    Polarization polarization = Polarization::parallel;
    double coherence_time = 500.0;  // tau_c in ns; +infinity = no dephasing
    CoherenceKernel coherence_kernel = CoherenceKernel::gaussian;
    double mode_overlap = 1.0;  // mu in [0, 1]
};

inline void validate(const InterferenceSettings& s) {
    if (!(s.coherence_time > 0.0))
        throw std::invalid_argument("InterferenceSettings: coherence_time must be > 0");
    if (!(s.mode_overlap >= 0.0 && s.mode_overlap <= 1.0))
        throw std::invalid_argument("InterferenceSettings: mode_overlap must be in [0, 1]");
}

/// Mutual-coherence factor kappa(tau) damping the interference term.
inline double dephasing_kernel(const InterferenceSettings& s, double tau) {
    if (std::isinf(s.coherence_time)) return 1.0;
    const double x = tau / s.coherence_time;
    return s.coherence_kernel == CoherenceKernel::gaussian ? std::exp(-x * x)
                                                           : std::exp(-std::abs(x));
}

/// One output mode of the interferometer: physical port x time bin
/// ("virtual detector" C_{bin+1} or D_{bin+1}).
struct OutputMode {
    Port port = Port::C;
    int bin = 0;

    friend bool operator==(const OutputMode&, const OutputMode&) = default;
};

/// One term of the two-photon output state: amplitude on the (unordered)
/// pair of occupied output modes.
struct ModePairWeight {
    OutputMode out1;
    OutputMode out2;
    Complex amplitude;
};

namespace detail {
// Flat index over output modes: C bins first, then D bins.
inline int mode_index(const OutputMode& m, int d) {
    return (m.port == Port::C ? 0 : d) + m.bin;
}

inline OutputMode mode_from_index(int idx, int d) {
    return idx < d ? OutputMode{Port::C, idx} : OutputMode{Port::D, idx - d};
}
}  // namespace detail

/// Expands the two-photon state behind a 50:50 beam splitter over all
/// unordered pairs of output modes. The signal photon enters port A, the
/// reference (LO) photon port B; the splitter acts as
///   a^dag_A -> (a^dag_C + a^dag_D)/sqrt(2),
///   a^dag_B -> (a^dag_C - a^dag_D)/sqrt(2).
/// Amplitudes are symmetrized for boson statistics; since the two input
/// modes are orthogonal the squared amplitudes sum to exactly 1.
inline std::vector<ModePairWeight> two_photon_output_expansion(const TimeBinQudit& signal,
                                                               const TimeBinQudit& lo) {
    if (signal.d != lo.d)
        throw std::invalid_argument("two_photon_output_expansion: dimension mismatch");
    const int d = signal.d;
    const int n_modes = 2 * d;

    // Single-photon output amplitudes of each input photon.
    std::vector<Complex> f(static_cast<std::size_t>(n_modes));  // signal (from A)
    std::vector<Complex> g(static_cast<std::size_t>(n_modes));  // LO (from B)
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < d; ++j) {
        f[static_cast<std::size_t>(j)] = signal.amplitudes[static_cast<std::size_t>(j)] * inv_sqrt2;
        f[static_cast<std::size_t>(d + j)] = signal.amplitudes[static_cast<std::size_t>(j)] * inv_sqrt2;
        g[static_cast<std::size_t>(j)] = lo.amplitudes[static_cast<std::size_t>(j)] * inv_sqrt2;
        g[static_cast<std::size_t>(d + j)] = -lo.amplitudes[static_cast<std::size_t>(j)] * inv_sqrt2;
    }

    std::vector<ModePairWeight> out;
    out.reserve(static_cast<std::size_t>(n_modes * (n_modes + 1) / 2));
    for (int m = 0; m < n_modes; ++m) {
        for (int n = m; n < n_modes; ++n) {
            const auto fm = f[static_cast<std::size_t>(m)];
            const auto fn = f[static_cast<std::size_t>(n)];
            const auto gm = g[static_cast<std::size_t>(m)];
            const auto gn = g[static_cast<std::size_t>(n)];
            const Complex amp = (m == n) ? std::sqrt(2.0) * fm * gm : fm * gn + fn * gm;
            out.push_back({detail::mode_from_index(m, d), detail::mode_from_index(n, d), amp});
        }
    }
    return out;
}

/// Ideal relative coincidence probability between virtual detectors in
/// different time bins, as a function of the inter-bin phase difference:
/// 1 - cos(phase). Ranges from 0 (coalescence) to 2 (anti-coalescence).
inline double cross_bin_rcp_analytic(double phase_difference) {
    return 1.0 - std::cos(phase_difference);
}

namespace detail {
// Interference cross term 2*mu*kappa(t1-t2)*Re(zS(t1) zL(t2) zS*(t2) zL*(t1)).
inline double interference_term(const TemporalEnvelope& signal, const TemporalEnvelope& lo,
                                const InterferenceSettings& s, double t1, double t2) {
    const Complex a = envelope_amplitude(signal, t1) * envelope_amplitude(lo, t2);
    const Complex b = envelope_amplitude(signal, t2) * envelope_amplitude(lo, t1);
    return 2.0 * s.mode_overlap * dephasing_kernel(s, t1 - t2) * (a * std::conj(b)).real();
}

inline double density_sum_term(const TemporalEnvelope& signal, const TemporalEnvelope& lo,
                               double t1, double t2) {
    return probability_density(signal, t1) * probability_density(lo, t2) +
           probability_density(signal, t2) * probability_density(lo, t1);
}
}  // namespace detail

/// Cross-port joint coincidence density G(t1, t2) in 1/ns^2: probability
/// density for detecting one photon at port C at t1 and the other at port D
/// at t2 (times within one trigger window). Symmetric in (t1, t2); the
/// full-plane integral is 1/2 for perpendicular (distinguishable) photons.
inline double joint_coincidence_density(const TemporalEnvelope& signal, const TemporalEnvelope& lo,
                                        const InterferenceSettings& settings, double t1,
                                        double t2) {
    if (signal.state.bin_duration != lo.state.bin_duration)
        throw std::invalid_argument("joint_coincidence_density: mismatched bin durations");
    const double base = detail::density_sum_term(signal, lo, t1, t2);
    if (settings.polarization == Polarization::perpendicular) return 0.25 * base;
    const double g = 0.25 * (base - detail::interference_term(signal, lo, settings, t1, t2));
    // Guard against tiny negative values from floating-point cancellation.
    return g > 0.0 ? g : 0.0;
}

/// Same-port counterpart of joint_coincidence_density (both photons exit C,
/// or both exit D): the interference term enters with a plus sign. The
/// density describes unordered time pairs; integrating over t1 < t2 gives
/// the same-port probability for one port (1/4 for perpendicular photons).
inline double joint_coincidence_density_same_port(const TemporalEnvelope& signal,
                                                  const TemporalEnvelope& lo,
                                                  const InterferenceSettings& settings, double t1,
                                                  double t2) {
    if (signal.state.bin_duration != lo.state.bin_duration)
        throw std::invalid_argument("joint_coincidence_density_same_port: mismatched bin durations");
    const double base = detail::density_sum_term(signal, lo, t1, t2);
    if (settings.polarization == Polarization::perpendicular) return 0.25 * base;
    const double g = 0.25 * (base + detail::interference_term(signal, lo, settings, t1, t2));
    return g > 0.0 ? g : 0.0;
}

/// Envelope-weighted average of the dephasing kernel over adjacent-bin
/// detection pairs landing inside the +-T coincidence windows: the
/// interference visibility V = mu * <kappa> of the satellite peaks as the
/// correlator measures them. Computed by quadrature from
/// joint_coincidence_density on the strip |t1 - t2 - T| <= w/2 of the
/// (bin 1) x (bin 0) cell of a phase-flat twin-peak state, where
///   integral(parallel, phase 0) / integral(perpendicular) = 1 - V.
inline double satellite_visibility(const InterferenceSettings& settings,
                                   double bin_duration = kDefaultBinNs,
                                   double window_width = 60.0) {
    if (!(window_width > 0.0))
        throw std::invalid_argument("satellite_visibility: window_width must be > 0");
    const TemporalEnvelope env(make_lo_qudit(2, bin_duration));
    InterferenceSettings par = settings;
    par.polarization = Polarization::parallel;
    InterferenceSettings perp = settings;
    perp.polarization = Polarization::perpendicular;

    const double T = bin_duration;
    const double half = window_width / 2.0;
    // Integrate t1 over the strip's exact t2-dependent bounds; split the
    // outer integral where the strip clips the cell corners so every
    // segment is smooth.
    const auto strip = [&](const InterferenceSettings& s) {
        const auto slice = [&](double t2) {
            const double lo = std::max(T, t2 + T - half);
            const double hi = std::min(2.0 * T, t2 + T + half);
            if (hi <= lo) return 0.0;
            return integrate_1d(
                [&](double t1) { return joint_coincidence_density(env, env, s, t1, t2); }, lo,
                hi, 0.25);
        };
        std::array<double, 4> cuts{0.0, std::min(half, T), std::max(T - half, 0.0), T};
        std::sort(cuts.begin(), cuts.end());
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            if (cuts[i + 1] > cuts[i]) total += integrate_1d(slice, cuts[i], cuts[i + 1], 0.25);
        return total;
    };
    const double reference = strip(perp);
    return 1.0 - strip(par) / reference;
}

/// Model curve for the +-T satellite strength versus prepared phase:
/// 1 - V*cos(phase) + background_rcp with V = mu * <kappa> from
/// satellite_visibility.
inline double expected_side_peak_strength(double phase, const InterferenceSettings& settings,
                                          double background_rcp,
                                          double bin_duration = kDefaultBinNs,
                                          double window_width = 60.0) {
    if (!(background_rcp >= 0.0))
        throw std::invalid_argument("expected_side_peak_strength: background_rcp must be >= 0");
    const double v = satellite_visibility(settings, bin_duration, window_width);
    return 1.0 - v * std::cos(phase) + background_rcp;
}

}  // namespace qhom
