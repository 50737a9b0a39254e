#pragma once

#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace dgate {

// Composite Simpson on uniform samples y[0..n] with spacing h.
// Odd interval counts close with a 3/8 panel; n = 1 is a trapezoid.
template <class T>
T simpson(const std::vector<T>& y, double h) {
    const std::size_t m = y.size();
    require(m >= 1, "simpson: empty sample vector");
    const std::size_t n = m - 1;
    if (n == 0) return T{};
    if (n == 1) return (y[0] + y[1]) * (0.5 * h);
    std::size_t even = (n % 2 == 0) ? n : n - 3;
    T acc{};
    for (std::size_t k = 0; k + 2 <= even; k += 2)
        acc += (y[k] + 4.0 * y[k + 1] + y[k + 2]) * (h / 3.0);
    if (even != n) {
        const std::size_t k = even;
        acc += (y[k] + 3.0 * y[k + 1] + 3.0 * y[k + 2] + y[k + 3]) * (3.0 * h / 8.0);
    }
    return acc;
}

// Running integral S[k] = int_0^{t_k} y, fourth order at every node.
// Even nodes use Simpson pairs, odd nodes add a single interval from a cubic fit.
template <class T>
std::vector<T> cumulative_simpson(const std::vector<T>& y, double h) {
    const std::size_t m = y.size();
    require(m >= 1, "cumulative_simpson: empty sample vector");
    std::vector<T> s(m, T{});
    const std::size_t n = m - 1;
    if (n == 0) return s;
    if (n < 3) {
        for (std::size_t k = 1; k <= n; ++k) s[k] = s[k - 1] + (y[k - 1] + y[k]) * (0.5 * h);
        return s;
    }
    const double c = h / 24.0;
    for (std::size_t k = 1; k <= n; ++k) {
        if (k % 2 == 0) {
            s[k] = s[k - 2] + (y[k - 2] + 4.0 * y[k - 1] + y[k]) * (h / 3.0);
        } else if (k == 1) {
            s[k] = (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3]) * c;
        } else if (k + 1 <= n) {
            s[k] = s[k - 1] + (-y[k - 2] + 13.0 * y[k - 1] + 13.0 * y[k] - y[k + 1]) * c;
        } else {
            s[k] = s[k - 1] + (y[k - 3] - 5.0 * y[k - 2] + 19.0 * y[k - 1] + 9.0 * y[k]) * c;
        }
    }
    return s;
}

}  // namespace dgate
