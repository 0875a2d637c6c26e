#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "qhom/optics.hpp"
#include "qhom/quadrature.hpp"
#include "test_support.hpp"

using namespace qhom;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

InterferenceSettings ideal_parallel() {
    InterferenceSettings s;
    s.polarization = Polarization::parallel;
    s.coherence_time = kInf;
    s.mode_overlap = 1.0;
    return s;
}

InterferenceSettings perpendicular() {
    InterferenceSettings s;
    s.polarization = Polarization::perpendicular;
    return s;
}

const ModePairWeight& find_pair(const std::vector<ModePairWeight>& terms, OutputMode a,
                                OutputMode b) {
    for (const auto& t : terms)
        if ((t.out1 == a && t.out2 == b) || (t.out1 == b && t.out2 == a)) return t;
    throw std::runtime_error("pair not found");
}

// Independent cross-bin RCP oracle: enumerate the output expansion and divide
// the interfering pair probability by the distinguishable-photon reference
// (each photon routed independently, no interference).
double rcp_from_expansion(double phase, int bin_c, int bin_d) {
    const auto signal = make_equal_qudit(2, {0.0, phase});
    const auto lo = make_lo_qudit(2);
    const auto terms = two_photon_output_expansion(signal, lo);
    const auto& t = find_pair(terms, {Port::C, bin_c}, {Port::D, bin_d});
    const double p_parallel = std::norm(t.amplitude);
    // Distinguishable photons: |f_m|^2|g_n|^2 + |f_n|^2|g_m|^2 with the 50:50
    // routing factor 1/2 per photon.
    const double p_perp = 0.25 * (std::norm(signal.amplitudes[static_cast<std::size_t>(bin_c)]) *
                                      std::norm(lo.amplitudes[static_cast<std::size_t>(bin_d)]) +
                                  std::norm(signal.amplitudes[static_cast<std::size_t>(bin_d)]) *
                                      std::norm(lo.amplitudes[static_cast<std::size_t>(bin_c)]));
    return p_parallel / p_perp;
}

}  // namespace

TEST_CASE("settings validation") {
    InterferenceSettings s;
    REQUIRE_NOTHROW(validate(s));
    s.coherence_time = kInf;
    REQUIRE_NOTHROW(validate(s));
    s.coherence_time = 0.0;
    REQUIRE_THROWS_AS(validate(s), std::invalid_argument);
    s.coherence_time = -1.0;
    REQUIRE_THROWS_AS(validate(s), std::invalid_argument);
    s = InterferenceSettings{};
    s.mode_overlap = 1.5;
    REQUIRE_THROWS_AS(validate(s), std::invalid_argument);
    s.mode_overlap = -0.1;
    REQUIRE_THROWS_AS(validate(s), std::invalid_argument);
}

TEST_CASE("dephasing kernel follows its definition") {
    InterferenceSettings s;  // gaussian, tau_c = 500
    REQUIRE(dephasing_kernel(s, 0.0) == Approx(1.0).margin(1e-15));
    REQUIRE(dephasing_kernel(s, 230.0) == Approx(std::exp(-0.2116)).margin(1e-12));
    REQUIRE(dephasing_kernel(s, -230.0) == Approx(dephasing_kernel(s, 230.0)).margin(1e-15));

    s.coherence_kernel = CoherenceKernel::exponential;
    REQUIRE(dephasing_kernel(s, 230.0) == Approx(std::exp(-0.46)).margin(1e-12));
    REQUIRE(dephasing_kernel(s, -230.0) == Approx(std::exp(-0.46)).margin(1e-12));

    s.coherence_time = kInf;
    REQUIRE(dephasing_kernel(s, 1e9) == 1.0);
}

TEST_CASE("expansion is normalized and validates dimensions") {
    REQUIRE_THROWS_AS(two_photon_output_expansion(make_lo_qudit(2), make_lo_qudit(3)),
                      std::invalid_argument);

    for (int d : {1, 2, 3, 4}) {
        const auto signal = make_qudit(
            d, std::vector<double>(static_cast<std::size_t>(d), 1.0),
            [&] {
                std::vector<double> p(static_cast<std::size_t>(d));
                for (int k = 0; k < d; ++k) p[static_cast<std::size_t>(k)] = 0.3 * k * k;
                return p;
            }());
        const auto terms = two_photon_output_expansion(signal, make_lo_qudit(d));
        REQUIRE(terms.size() == static_cast<std::size_t>(2 * d * (2 * d + 1) / 2));
        double total = 0.0;
        for (const auto& t : terms) total += std::norm(t.amplitude);
        REQUIRE(total == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("identical photons never split across ports") {
    const auto q = make_lo_qudit(2);
    const auto terms = two_photon_output_expansion(q, q);
    for (const auto& t : terms) {
        if (t.out1.port != t.out2.port) REQUIRE(std::abs(t.amplitude) < 1e-15);
    }
}

TEST_CASE("phase-pi qubit: same-bin cross-port terms vanish, cross-bin carry 1-e^{i pi}") {
    const auto signal = make_equal_qudit(2, {0.0, kPi});
    const auto terms = two_photon_output_expansion(signal, make_lo_qudit(2));

    REQUIRE(std::abs(find_pair(terms, {Port::C, 0}, {Port::D, 0}).amplitude) < 1e-15);
    REQUIRE(std::abs(find_pair(terms, {Port::C, 1}, {Port::D, 1}).amplitude) < 1e-15);

    // |(1 - e^{i pi})| / 4 = 1/2 on each cross-bin pair.
    REQUIRE(std::abs(find_pair(terms, {Port::C, 1}, {Port::D, 0}).amplitude) ==
            Approx(0.5).margin(1e-12));
    REQUIRE(std::abs(find_pair(terms, {Port::C, 0}, {Port::D, 1}).amplitude) ==
            Approx(0.5).margin(1e-12));
}

TEST_CASE("analytic cross-bin RCP matches brute-force enumeration on a 17-point grid") {
    REQUIRE(cross_bin_rcp_analytic(0.0) == Approx(0.0).margin(1e-15));
    REQUIRE(cross_bin_rcp_analytic(kPi) == Approx(2.0).margin(1e-15));
    REQUIRE(cross_bin_rcp_analytic(kPi / 2) == Approx(1.0).margin(1e-15));

    for (int i = 0; i <= 16; ++i) {
        const double phi = 2.0 * kPi * i / 16.0;
        const double analytic = cross_bin_rcp_analytic(phi);
        REQUIRE(rcp_from_expansion(phi, 1, 0) == Approx(analytic).margin(1e-12));
        REQUIRE(rcp_from_expansion(phi, 0, 1) == Approx(analytic).margin(1e-12));
    }
}

TEST_CASE("identical parallel photons produce zero cross-port density") {
    const TemporalEnvelope env(make_lo_qudit(2));
    const auto s = ideal_parallel();
    for (double t1 : {20.0, 115.0, 260.0, 345.0, 401.0})
        for (double t2 : {33.0, 115.0, 290.0, 411.0})
            REQUIRE(joint_coincidence_density(env, env, s, t1, t2) < 1e-15);
}

TEST_CASE("perpendicular coincidence density integrates to one half") {
    const TemporalEnvelope env(make_lo_qudit(2));
    const auto s = perpendicular();
    const auto g = [&](double t1, double t2) {
        return joint_coincidence_density(env, env, s, t1, t2);
    };
    REQUIRE(testsupport::trapz2(g, 0.0, 460.0, 0.0, 460.0, 460, 460) ==
            Approx(0.5).margin(1e-4));
    REQUIRE(integrate_2d(g, 0.0, 460.0, 0.0, 460.0, 1.0) == Approx(0.5).margin(1e-8));
}

TEST_CASE("phase-pi qubit: same-bin density vanishes, cross-bin integral is one half") {
    const TemporalEnvelope signal(make_equal_qudit(2, {0.0, kPi}));
    const TemporalEnvelope lo(make_lo_qudit(2));
    const auto s = ideal_parallel();

    for (double t1 : {30.0, 115.0, 200.0})
        for (double t2 : {40.0, 115.0, 180.0}) {
            REQUIRE(joint_coincidence_density(signal, lo, s, t1, t2) < 1e-15);
            REQUIRE(joint_coincidence_density(signal, lo, s, t1 + 230.0, t2 + 230.0) < 1e-15);
        }

    const double total = integrate_2d(
        [&](double t1, double t2) { return joint_coincidence_density(signal, lo, s, t1, t2); },
        0.0, 460.0, 0.0, 460.0, 1.0);
    REQUIRE(total == Approx(0.5).margin(1e-8));
}

TEST_CASE("density is symmetric, non-negative, and bounded in total") {
    const TemporalEnvelope signal(make_qudit(3, {1.0, 1.4, 0.8}, {0.0, 1.9, 0.4}));
    const TemporalEnvelope lo(make_lo_qudit(3));
    InterferenceSettings s;  // parallel, tau_c = 500, gaussian
    s.mode_overlap = 0.9;

    for (double t1 : {15.0, 115.0, 300.0, 512.0, 660.0})
        for (double t2 : {77.0, 230.0, 401.0, 689.0}) {
            const double a = joint_coincidence_density(signal, lo, s, t1, t2);
            const double b = joint_coincidence_density(signal, lo, s, t2, t1);
            REQUIRE(a >= 0.0);
            REQUIRE(a == Approx(b).margin(1e-15));
        }

    const double total = integrate_2d(
        [&](double t1, double t2) { return joint_coincidence_density(signal, lo, s, t1, t2); },
        0.0, 690.0, 0.0, 690.0, 1.0);
    REQUIRE(total >= 0.0);
    REQUIRE(total <= 1.0);
}

TEST_CASE("zero mode overlap reproduces the perpendicular density exactly") {
    const TemporalEnvelope signal(make_equal_qudit(2, {0.0, 0.7}));
    const TemporalEnvelope lo(make_lo_qudit(2));
    InterferenceSettings par;
    par.mode_overlap = 0.0;
    const auto perp = perpendicular();

    for (double t1 : {10.0, 115.0, 250.0, 345.0, 449.0})
        for (double t2 : {25.0, 140.0, 333.0, 458.0})
            REQUIRE(joint_coincidence_density(signal, lo, par, t1, t2) ==
                    Approx(joint_coincidence_density(signal, lo, perp, t1, t2)).margin(1e-15));
}

TEST_CASE("same-port density complements the cross-port density") {
    const TemporalEnvelope signal(make_equal_qudit(2, {0.0, 1.1}));
    const TemporalEnvelope lo(make_lo_qudit(2));
    InterferenceSettings s;

    // cross + same equals the non-interfering base: the interference term
    // cancels between the two port combinations.
    for (double t1 : {50.0, 115.0, 300.0})
        for (double t2 : {80.0, 220.0, 415.0}) {
            const double cross = joint_coincidence_density(signal, lo, s, t1, t2);
            const double same = joint_coincidence_density_same_port(signal, lo, s, t1, t2);
            const double base =
                0.5 * (probability_density(signal, t1) * probability_density(lo, t2) +
                       probability_density(signal, t2) * probability_density(lo, t1));
            REQUIRE(cross + same == Approx(base).margin(1e-15));
        }

    // Identical photons, ideal interference: everything is same-port (HOM).
    const auto ideal = ideal_parallel();
    const double same_total = integrate_2d(
        [&](double t1, double t2) {
            return joint_coincidence_density_same_port(lo, lo, ideal, t1, t2);
        },
        0.0, 460.0, 0.0, 460.0, 1.0);
    // Unordered-pair density integrated over the full plane double-counts:
    // both same-port combos together carry probability 1 = 2 * (1/2) / 2 * 2.
    REQUIRE(same_total == Approx(1.0).margin(1e-8));

    REQUIRE_THROWS_AS(
        joint_coincidence_density_same_port(TemporalEnvelope(make_lo_qudit(2, 100.0)), lo, s, 0, 0),
        std::invalid_argument);
    REQUIRE_THROWS_AS(
        joint_coincidence_density(TemporalEnvelope(make_lo_qudit(2, 100.0)), lo, s, 0, 0),
        std::invalid_argument);
}

TEST_CASE("satellite visibility matches an independent kernel average") {
    InterferenceSettings s;  // gaussian, tau_c = 500, mu = 1
    const double T = 230.0;
    const double w = 60.0;

    // [DERIVED oracle] inside the +-w/2 coincidence window of the +T peak
    // the base density reduces to the envelope autocorrelation A(delta) of
    // the detection-time difference delta = tau - T:
    //   <kappa> = int_{|delta|<w/2} A(delta) kappa(T + delta) d delta
    //           / int_{|delta|<w/2} A(delta) d delta,
    // with A(delta) = int s^2(u) s^2(u - delta) du over one bin.
    const auto sin2 = [&](double x) {
        const double v = std::sin(kPi * x / T);
        return (2.0 / T) * v * v;
    };
    const auto autocorr = [&](double delta) {
        const double a = std::max(0.0, delta);
        const double b = std::min(T, T + delta);
        return testsupport::trapz([&](double u) { return sin2(u) * sin2(u - delta); }, a, b,
                                  4000);
    };
    const auto kernel = [](double tau) { return std::exp(-(tau / 500.0) * (tau / 500.0)); };
    const double num = testsupport::trapz(
        [&](double delta) { return autocorr(delta) * kernel(T + delta); }, -w / 2, w / 2, 400);
    const double den =
        testsupport::trapz([&](double delta) { return autocorr(delta); }, -w / 2, w / 2, 400);
    const double want = num / den;

    const double got = satellite_visibility(s, T, w);
    REQUIRE(got == Approx(want).margin(1e-6));
    REQUIRE(got > 0.75);
    REQUIRE(got < 0.85);

    // mu scales the visibility linearly.
    s.mode_overlap = 0.5;
    REQUIRE(satellite_visibility(s, T, w) == Approx(0.5 * got).margin(1e-9));

    REQUIRE_THROWS_AS(satellite_visibility(s, T, 0.0), std::invalid_argument);
}

TEST_CASE("expected side-peak strength: ideal limits and background offset") {
    const auto ideal = ideal_parallel();
    REQUIRE(expected_side_peak_strength(kPi, ideal, 0.0) == Approx(2.0).margin(1e-9));
    REQUIRE(expected_side_peak_strength(0.0, ideal, 0.0) == Approx(0.0).margin(1e-9));
    REQUIRE(expected_side_peak_strength(kPi / 2, ideal, 0.0) == Approx(1.0).margin(1e-9));

    InterferenceSettings s;  // tau_c = 500
    const double at_pi = expected_side_peak_strength(kPi, s, 0.0);
    REQUIRE(at_pi < 2.0);
    REQUIRE(at_pi > 1.0);
    REQUIRE(expected_side_peak_strength(kPi, s, 0.3) == Approx(at_pi + 0.3).margin(1e-12));

    REQUIRE_THROWS_AS(expected_side_peak_strength(0.0, s, -0.1), std::invalid_argument);
}

TEST_CASE("longer coherence time never decreases the pi-phase satellite strength") {
    InterferenceSettings s;
    double prev = -1.0;
    for (double tau_c : {100.0, 200.0, 500.0, 1000.0, 5000.0, kInf}) {
        s.coherence_time = tau_c;
        const double v = expected_side_peak_strength(kPi, s, 0.0);
        REQUIRE(v >= prev);
        prev = v;
    }
    REQUIRE(prev == Approx(2.0).margin(1e-9));
}
