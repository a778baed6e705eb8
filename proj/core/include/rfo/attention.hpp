// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rfo/noise.hpp"

namespace rfo {

/// Dense row-major matrix of token vectors (one token per row).
struct TokenMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    TokenMatrix() = default;
    TokenMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) noexcept { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values[r * cols + c]; }
};

/// Text-token queries (n x d_k) and image-patch keys (h*w x d_k) from one layer/head.
/// Image positions are flattened row-major: index = row * w + col.
struct AttentionPair {
    TokenMatrix queries;
    TokenMatrix keys;
};

struct AttentionInputs {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<AttentionPair> pairs;
};

/// Unnormalised h x w map, row-major.
struct AttentionMap {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> values;
};

/// Per-coordinate modulation in [0, 1], h x w row-major; coordinate i of a
/// grid state is modulated by values()[i].
class AttentionMask {
public:
    AttentionMask(std::size_t h, std::size_t w, std::vector<double> values);

    static AttentionMask constant(std::size_t h, std::size_t w, double value);

    std::size_t h() const noexcept { return m_h; }
    std::size_t w() const noexcept { return m_w; }
    std::size_t size() const noexcept { return m_values.size(); }
    const std::vector<double>& values() const noexcept { return m_values; }
    double operator[](std::size_t i) const noexcept { return m_values[i]; }

    bool operator==(const AttentionMask&) const = default;

private:
    std::size_t m_h;
    std::size_t m_w;
    std::vector<double> m_values;
};

/// m_{hw} = sum_i softmax_{h'w'}(q_i . k_{h'w'} / temperature)_{hw}.
AttentionMap raw_mask(const AttentionPair& pair, std::size_t h, std::size_t w, double temperature = 1.0);

/// Row-wise softmax probabilities (n x h*w) behind raw_mask; exposed for checks.
TokenMatrix attention_probabilities(const AttentionPair& pair, double temperature = 1.0);

/// Elementwise mean over layers/heads, then min-max rescale to [0, 1].
/// A constant mean map rescales to all zeros.
AttentionMask aggregate_and_rescale(const std::vector<AttentionMap>& maps);

/// raw_mask over every pair, then aggregate_and_rescale.
AttentionMask build_mask(const AttentionInputs& inputs, double temperature = 1.0);

/// Inclusive rectangle of grid cells.
struct CellBlock {
    std::size_t row_begin = 0;
    std::size_t row_end = 0;  // inclusive
    std::size_t col_begin = 0;
    std::size_t col_end = 0;  // inclusive

    bool contains(std::size_t row, std::size_t col) const noexcept {
        return row >= row_begin && row <= row_end && col >= col_begin && col <= col_end;
    }
};

/// The block used by "focused-block": rows and columns [floor(h/4), ceil(3h/4) - 1].
CellBlock default_focus_block(std::size_t h, std::size_t w);

struct SyntheticAttentionOptions {
    std::size_t key_dim = 16;
    std::size_t layers = 2;
    std::size_t heads = 2;
    /// Logit margin given to focused keys.
    double focus_strength = 12.0;
    /// Scale of the random component of queries and keys.
    double noise_scale = 0.15;
};

std::vector<std::string> synthetic_scenario_names();

/// Synthetic cross-attention inputs standing in for a transformer:
/// Keys and queries carry N(0, noise_scale^2) entries; block cells add sqrt(focus_strength)
/// along their region's basis direction and patches outside every block have zero keys.
///   "focused-block"  keys inside default_focus_block share a direction the queries point at;
///   "diffuse"        all logits small and random (near-uniform softmax);
///   "multi-region"   two disjoint corner blocks, each attended by half of the tokens.
AttentionInputs synthetic_attention(std::string_view scenario, std::size_t h, std::size_t w,
                                    std::size_t tokens, NoiseSource& rng,
                                    const SyntheticAttentionOptions& options = {});

/// Blocks whose cells the scenario focuses on (empty for "diffuse").
std::vector<CellBlock> scenario_blocks(std::string_view scenario, std::size_t h, std::size_t w);

nlohmann::json mask_to_json(const AttentionMask& mask);
AttentionMask mask_from_json(const nlohmann::json& doc);

/// h lines of w comma-separated values.
std::string mask_to_csv(const AttentionMask& mask);

}  // namespace rfo
