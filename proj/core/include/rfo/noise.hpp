// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace rfo {

class StateBatch;

/// Deterministic standard-normal stream.
///
/// Generator: xoshiro256** seeded by four successive SplitMix64 outputs of the
/// 64-bit seed. Uniforms take the top 53 bits of a 64-bit output, u = (x >> 11) * 2^-53,
/// giving u in [0, 1). Normals use the Box-Muller transform on (u1, u2) with
/// u1 replaced by 1 - u1 so the logarithm never sees zero; each transform emits
/// two normals, cos branch first, and the sin branch is cached for the next draw.
/// Batches are filled row-major (batch row, then dimension).
///
/// Not thread-safe: a NoiseSource has a single owner. Parallel workers derive
/// their own stream with `derive`.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed);

    /// Independent stream for (seed, worker); identical inputs give identical streams.
    static NoiseSource derive(std::uint64_t seed, std::uint64_t worker);
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t worker) noexcept;

    std::uint64_t seed() const noexcept { return m_seed; }

    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;
    double normal() noexcept;

    /// Uniform integer in [0, bound) by rejection, bound >= 1.
    std::uint64_t uniform_index(std::uint64_t bound) noexcept;

    /// Overwrites every entry of `out` with fresh normals in row-major order.
    void fill_normal(StateBatch& out) noexcept;
    StateBatch normal_batch(std::size_t batch, std::size_t dim);

    /// Number of normal variates handed out so far.
    std::uint64_t normals_drawn() const noexcept { return m_normals_drawn; }

private:
    std::uint64_t m_seed;
    std::array<std::uint64_t, 4> m_state{};
    double m_spare = 0.0;
    bool m_has_spare = false;
    std::uint64_t m_normals_drawn = 0;
};

}  // namespace rfo
