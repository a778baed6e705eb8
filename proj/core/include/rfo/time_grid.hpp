// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rfo {

/// Ordered flow times 0 = t_0 < t_1 < ... < t_N = 1 with N >= 1.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);

    /// N equal steps; interior times are k / N so the endpoints are exact.
    static TimeGrid uniform(std::size_t steps);

    std::size_t steps() const noexcept { return m_times.size() - 1; }
    double operator[](std::size_t k) const noexcept { return m_times[k]; }
    double step_size(std::size_t k) const noexcept { return m_times[k + 1] - m_times[k]; }
    std::span<const double> times() const noexcept { return m_times; }

    /// Index k with t_k == t exactly, or steps() + 1 if absent.
    std::size_t index_of(double t) const noexcept;

private:
    std::vector<double> m_times;
};

}  // namespace rfo
