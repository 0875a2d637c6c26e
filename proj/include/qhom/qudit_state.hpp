#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qhom {

using Complex = std::complex<double>;

/// Default time-bin duration in ns.
inline constexpr double kDefaultBinNs = 230.0;

/// Single photon distributed over d consecutive time bins of duration T,
/// with one complex amplitude per bin. Amplitudes are normalized so that
/// the squared moduli sum to one. Immutable after construction.
struct TimeBinQudit {
    int d = 0;
    std::vector<Complex> amplitudes;
    double bin_duration = kDefaultBinNs;  // ns

    double total_duration() const { return bin_duration * d; }

    /// Squared modulus of the k-th bin amplitude.
    double bin_weight(int k) const { return std::norm(amplitudes.at(static_cast<std::size_t>(k))); }
};

inline constexpr int kMaxTimeBins = 8;

/// Builds a normalized qudit from per-bin magnitudes and phases (radians).
inline TimeBinQudit make_qudit(int d, const std::vector<double>& magnitudes,
                               const std::vector<double>& phases,
                               double bin_duration = kDefaultBinNs) {
    if (d < 1 || d > kMaxTimeBins)
        throw std::invalid_argument("make_qudit: d must be in [1, 8]");
    if (magnitudes.size() != static_cast<std::size_t>(d) ||
        phases.size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("make_qudit: magnitudes/phases length must equal d");
    if (!(bin_duration > 0.0))
        throw std::invalid_argument("make_qudit: bin_duration must be positive");

    double norm2 = 0.0;
    for (int k = 0; k < d; ++k) {
        const double m = magnitudes[static_cast<std::size_t>(k)];
        const double p = phases[static_cast<std::size_t>(k)];
        if (!std::isfinite(m) || !std::isfinite(p))
            throw std::invalid_argument("make_qudit: non-finite input");
        if (m < 0.0)
            throw std::invalid_argument("make_qudit: magnitudes must be non-negative");
        norm2 += m * m;
    }
    if (!(norm2 > 0.0))
        throw std::invalid_argument("make_qudit: magnitudes must not be all zero");

    TimeBinQudit q;
    q.d = d;
    q.bin_duration = bin_duration;
    q.amplitudes.reserve(static_cast<std::size_t>(d));
    const double inv = 1.0 / std::sqrt(norm2);
    for (int k = 0; k < d; ++k)
        q.amplitudes.push_back(std::polar(magnitudes[static_cast<std::size_t>(k)] * inv,
                                          phases[static_cast<std::size_t>(k)]));
    return q;
}

/// Equal-magnitude qudit with the given inter-bin phases.
inline TimeBinQudit make_equal_qudit(int d, const std::vector<double>& phases,
                                     double bin_duration = kDefaultBinNs) {
    return make_qudit(d, std::vector<double>(static_cast<std::size_t>(d), 1.0), phases,
                      bin_duration);
}

/// Reference (local oscillator) state: equal magnitudes, zero phases.
inline TimeBinQudit make_lo_qudit(int d, double bin_duration = kDefaultBinNs) {
    return make_equal_qudit(d, std::vector<double>(static_cast<std::size_t>(d), 0.0),
                            bin_duration);
}

/// Temporal wave packet of a time-bin qudit:
///   zeta(t) = sum_k c_k * s(t - k*T),  s(t) = sqrt(2/T) * sin(pi*t/T) on [0, T].
/// Each bin carries one sin^2-shaped intensity peak; bins do not overlap.
struct TemporalEnvelope {
    TimeBinQudit state;
    double total_duration = 0.0;  // = d * T

    explicit TemporalEnvelope(TimeBinQudit s)
        : state(std::move(s)), total_duration(state.total_duration()) {}
};

/// Complex amplitude zeta(t); zero outside [0, d*T). A timestamp exactly at a
/// bin boundary k*T belongs to bin k (the envelope vanishes there anyway).
inline Complex envelope_amplitude(const TemporalEnvelope& env, double t) {
    const double T = env.state.bin_duration;
    if (t < 0.0 || t >= env.total_duration) return {0.0, 0.0};
    const int k = static_cast<int>(std::floor(t / T));
    const double local = t - k * T;
    const double s = std::sqrt(2.0 / T) * std::sin(std::numbers::pi * local / T);
    return env.state.amplitudes[static_cast<std::size_t>(k)] * s;
}

/// |zeta(t)|^2 in 1/ns; integrates to 1 over the photon support.
inline double probability_density(const TemporalEnvelope& env, double t) {
    return std::norm(envelope_amplitude(env, t));
}

}  // namespace qhom
