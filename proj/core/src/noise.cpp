// SPDX-License-Identifier: Apache-2.0
#include "rfo/noise.hpp"

#include <cmath>
#include <numbers>

#include "rfo/state_batch.hpp"

namespace rfo {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

NoiseSource::NoiseSource(std::uint64_t seed) : m_seed(seed) {
    std::uint64_t sm = seed;
    for (auto& word : m_state) {
        word = splitmix64(sm);
    }
}

std::uint64_t NoiseSource::derive_seed(std::uint64_t seed, std::uint64_t worker) noexcept {
    std::uint64_t sm = seed;
    const std::uint64_t a = splitmix64(sm);
    std::uint64_t sw = worker ^ 0xD1B54A32D192ED03ULL;
    const std::uint64_t b = splitmix64(sw);
    std::uint64_t mix = a ^ rotl(b, 17);
    return splitmix64(mix);
}

NoiseSource NoiseSource::derive(std::uint64_t seed, std::uint64_t worker) {
    return NoiseSource(derive_seed(seed, worker));
}

std::uint64_t NoiseSource::next_u64() noexcept {
    // xoshiro256**
    const std::uint64_t result = rotl(m_state[1] * 5, 7) * 9;
    const std::uint64_t t = m_state[1] << 17;
    m_state[2] ^= m_state[0];
    m_state[3] ^= m_state[1];
    m_state[1] ^= m_state[2];
    m_state[0] ^= m_state[3];
    m_state[2] ^= t;
    m_state[3] = rotl(m_state[3], 45);
    return result;
}

double NoiseSource::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double NoiseSource::normal() noexcept {
    ++m_normals_drawn;
    if (m_has_spare) {
        m_has_spare = false;
        return m_spare;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    m_spare = radius * std::sin(angle);
    m_has_spare = true;
    return radius * std::cos(angle);
}

std::uint64_t NoiseSource::uniform_index(std::uint64_t bound) noexcept {
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % bound;
}

void NoiseSource::fill_normal(StateBatch& out) noexcept {
    for (double& x : out.values()) {
        x = normal();
    }
}

StateBatch NoiseSource::normal_batch(std::size_t batch, std::size_t dim) {
    StateBatch out(batch, dim);
    fill_normal(out);
    return out;
}

}  // namespace rfo
