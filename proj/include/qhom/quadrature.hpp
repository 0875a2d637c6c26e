#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace qhom {

/// Composite Simpson rule on [a, b] with at most `max_step` spacing.
/// The interval is split into an even number of panels.
template <typename F>
double integrate_1d(F&& f, double a, double b, double max_step = 0.25) {
    if (!(b > a)) return 0.0;
    std::size_t n = static_cast<std::size_t>(std::ceil((b - a) / max_step));
    if (n < 2) n = 2;
    if (n % 2 != 0) ++n;
    const double h = (b - a) / static_cast<double>(n);
    double sum = f(a) + f(b);
    for (std::size_t i = 1; i < n; ++i) {
        const double w = (i % 2 == 0) ? 2.0 : 4.0;
        sum += w * f(a + h * static_cast<double>(i));
    }
    return sum * h / 3.0;
}

/// Tensor-product Simpson rule on [ax, bx] x [ay, by].
template <typename F>
double integrate_2d(F&& f, double ax, double bx, double ay, double by,
                    double max_step = 1.0) {
    return integrate_1d(
        [&](double x) {
            return integrate_1d([&](double y) { return f(x, y); }, ay, by, max_step);
        },
        ax, bx, max_step);
}

}  // namespace qhom
