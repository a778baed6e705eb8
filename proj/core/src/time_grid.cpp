// SPDX-License-Identifier: Apache-2.0
#include "rfo/time_grid.hpp"

#include <string>

#include "rfo/error.hpp"

namespace rfo {

TimeGrid::TimeGrid(std::vector<double> times) : m_times(std::move(times)) {
    if (m_times.size() < 2) {
        throw DomainError("TimeGrid needs at least one step");
    }
    if (m_times.front() != 0.0 || m_times.back() != 1.0) {
        throw DomainError("TimeGrid must start at 0 and end at 1");
    }
    for (std::size_t k = 1; k < m_times.size(); ++k) {
        if (!(m_times[k] > m_times[k - 1])) {
            throw DomainError("TimeGrid must be strictly increasing (index " + std::to_string(k) + ")");
        }
    }
}

TimeGrid TimeGrid::uniform(std::size_t steps) {
    if (steps == 0) {
        throw DomainError("TimeGrid::uniform needs steps >= 1");
    }
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        times[k] = static_cast<double>(k) / static_cast<double>(steps);
    }
    return TimeGrid(std::move(times));
}

std::size_t TimeGrid::index_of(double t) const noexcept {
    for (std::size_t k = 0; k < m_times.size(); ++k) {
        if (m_times[k] == t) {
            return k;
        }
    }
    return m_times.size();
}

}  // namespace rfo
