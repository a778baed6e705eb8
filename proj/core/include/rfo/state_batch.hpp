// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace rfo {

/// A batch of B points in R^d, stored row-major (batch row, then dimension).
///
/// Every sampler state, interpolation endpoint and velocity output is a
/// StateBatch. Construction rejects empty shapes; finiteness is checked by
/// the operations that can produce non-finite values.
class StateBatch {
public:
    StateBatch(std::size_t batch, std::size_t dim, double fill = 0.0);
    StateBatch(std::size_t batch, std::size_t dim, std::vector<double> values);

    /// Builds a batch from literal rows; all rows must have equal length.
    static StateBatch from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t batch() const noexcept { return m_batch; }
    std::size_t dim() const noexcept { return m_dim; }
    std::size_t size() const noexcept { return m_values.size(); }

    double& operator()(std::size_t row, std::size_t col) noexcept { return m_values[row * m_dim + col]; }
    double operator()(std::size_t row, std::size_t col) const noexcept { return m_values[row * m_dim + col]; }

    std::span<double> row(std::size_t r) noexcept { return {m_values.data() + r * m_dim, m_dim}; }
    std::span<const double> row(std::size_t r) const noexcept { return {m_values.data() + r * m_dim, m_dim}; }

    std::span<double> values() noexcept { return m_values; }
    std::span<const double> values() const noexcept { return m_values; }

    bool same_shape(const StateBatch& other) const noexcept {
        return m_batch == other.m_batch && m_dim == other.m_dim;
    }

    bool all_finite() const noexcept;

    /// Rows [first, first + count) as a new batch.
    StateBatch slice_rows(std::size_t first, std::size_t count) const;

    /// Exact (bitwise for non-NaN) equality.
    bool operator==(const StateBatch& other) const = default;

private:
    std::size_t m_batch;
    std::size_t m_dim;
    std::vector<double> m_values;
};

/// Throws ShapeError with `context` when the two batches differ in shape.
void require_same_shape(const StateBatch& a, const StateBatch& b, const char* context);

/// Per-coordinate sample mean.
std::vector<double> column_means(const StateBatch& x);

}  // namespace rfo

namespace rfo {

/// True when both spans hold the same bit patterns (distinguishes -0.0 from 0.0).
bool bitwise_equal(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace rfo
