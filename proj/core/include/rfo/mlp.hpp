// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rfo/flow.hpp"
#include "rfo/noise.hpp"
#include "rfo/state_batch.hpp"

namespace rfo {

/// Fully connected velocity model (x, t) -> v.
///
/// widths = {d + 1, h_1, ..., h_L, d}; the input is x concatenated with t.
/// Hidden layers use SiLU, z * sigmoid(z); the output layer is affine.
/// Parameters live in one flat array, layer by layer: the weight matrix
/// (out x in, row-major) followed by the bias vector.
class MlpVelocity final : public VelocityField {
public:
    explicit MlpVelocity(std::vector<std::size_t> widths);

    /// Weights ~ N(0, 1/fan_in), biases zero. Draws are taken layer by layer in
    /// flat-parameter order.
    static MlpVelocity initialized(std::vector<std::size_t> widths, NoiseSource& rng);

    std::size_t dim() const noexcept override { return m_widths.back(); }
    void evaluate(const StateBatch& x, double t, StateBatch& out) const override;

    /// Forward pass with a time per row.
    StateBatch forward(const StateBatch& x, std::span<const double> t) const;

    const std::vector<std::size_t>& widths() const noexcept { return m_widths; }
    std::size_t layer_count() const noexcept { return m_widths.size() - 1; }
    std::size_t weight_offset(std::size_t layer) const noexcept { return m_offsets[layer]; }
    std::size_t bias_offset(std::size_t layer) const noexcept {
        return m_offsets[layer] + m_widths[layer] * m_widths[layer + 1];
    }

    std::size_t parameter_count() const noexcept { return m_params.size(); }
    std::span<double> parameters() noexcept { return m_params; }
    std::span<const double> parameters() const noexcept { return m_params; }

    bool parameters_finite() const noexcept;

private:
    friend struct MlpWorkspace;

    std::vector<std::size_t> m_widths;
    std::vector<std::size_t> m_offsets;
    std::vector<double> m_params;
};

/// Mean over the batch of || model(X_t, t) - (x1 - x0) ||^2, X_t interpolated per row.
double rf_loss(const MlpVelocity& model, const StateBatch& x0, const StateBatch& x1,
               std::span<const double> t);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient;  // same layout as MlpVelocity::parameters()
};

/// rf_loss and its exact gradient by reverse-mode backpropagation.
LossGradient grad_rf_loss(const MlpVelocity& model, const StateBatch& x0, const StateBatch& x1,
                          std::span<const double> t);

nlohmann::json checkpoint_to_json(const MlpVelocity& model);
MlpVelocity checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const MlpVelocity& model, const std::string& path);
MlpVelocity load_checkpoint(const std::string& path);

}  // namespace rfo
