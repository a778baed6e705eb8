// SPDX-License-Identifier: Apache-2.0
#include "rfo/state_batch.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "rfo/error.hpp"

namespace rfo {

namespace {

void require_nonempty(std::size_t batch, std::size_t dim) {
    if (batch == 0 || dim == 0) {
        throw ShapeError("StateBatch requires batch >= 1 and dim >= 1, got " + std::to_string(batch) + "x" +
                         std::to_string(dim));
    }
}

}  // namespace

StateBatch::StateBatch(std::size_t batch, std::size_t dim, double fill)
    : m_batch(batch), m_dim(dim) {
    require_nonempty(batch, dim);
    m_values.assign(batch * dim, fill);
}

StateBatch::StateBatch(std::size_t batch, std::size_t dim, std::vector<double> values)
    : m_batch(batch), m_dim(dim), m_values(std::move(values)) {
    require_nonempty(batch, dim);
    if (m_values.size() != batch * dim) {
        throw ShapeError("StateBatch value count " + std::to_string(m_values.size()) + " != " +
                         std::to_string(batch) + "x" + std::to_string(dim));
    }
}

StateBatch StateBatch::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) {
        throw ShapeError("StateBatch::from_rows needs at least one row");
    }
    const std::size_t dim = rows.begin()->size();
    std::vector<double> values;
    values.reserve(rows.size() * dim);
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw ShapeError("StateBatch::from_rows: ragged rows");
        }
        values.insert(values.end(), r.begin(), r.end());
    }
    return StateBatch(rows.size(), dim, std::move(values));
}

bool StateBatch::all_finite() const noexcept {
    for (double x : m_values) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

StateBatch StateBatch::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > m_batch) {
        throw ShapeError("slice_rows out of range");
    }
    std::vector<double> values(m_values.begin() + static_cast<std::ptrdiff_t>(first * m_dim),
                               m_values.begin() + static_cast<std::ptrdiff_t>((first + count) * m_dim));
    return StateBatch(count, m_dim, std::move(values));
}

void require_same_shape(const StateBatch& a, const StateBatch& b, const char* context) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(context) + ": shape mismatch " + std::to_string(a.batch()) + "x" +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.batch()) + "x" +
                         std::to_string(b.dim()));
    }
}

std::vector<double> column_means(const StateBatch& x) {
    std::vector<double> mean(x.dim(), 0.0);
    for (std::size_t i = 0; i < x.batch(); ++i) {
        for (std::size_t j = 0; j < x.dim(); ++j) {
            mean[j] += x(i, j);
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(x.batch());
    }
    return mean;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) noexcept {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
}

}  // namespace rfo
