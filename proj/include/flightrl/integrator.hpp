#pragma once

#include <array>
#include <cstddef>

namespace flightrl {

/// One classical fourth-order Runge-Kutta step of x' = f(x) over h.
template <std::size_t N, typename Derivative>
std::array<double, N> rk4_step(const Derivative &f, const std::array<double, N> &x, double h) {
    auto axpy = [](const std::array<double, N> &a, double s, const std::array<double, N> &b) {
        std::array<double, N> out{};
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = a[i] + s * b[i];
        }
        return out;
    };

    const std::array<double, N> k1 = f(x);
    const std::array<double, N> k2 = f(axpy(x, 0.5 * h, k1));
    const std::array<double, N> k3 = f(axpy(x, 0.5 * h, k2));
    const std::array<double, N> k4 = f(axpy(x, h, k3));

    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

} // namespace flightrl
