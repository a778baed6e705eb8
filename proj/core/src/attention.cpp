// SPDX-License-Identifier: Apache-2.0
#include "rfo/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"
#include "rfo/io.hpp"

namespace rfo {

AttentionMask::AttentionMask(std::size_t h, std::size_t w, std::vector<double> values)
    : m_h(h), m_w(w), m_values(std::move(values)) {
    if (h == 0 || w == 0) {
        throw ShapeError("AttentionMask: h and w must be >= 1");
    }
    if (m_values.size() != h * w) {
        throw ShapeError("AttentionMask: expected " + std::to_string(h * w) + " values, got " +
                         std::to_string(m_values.size()));
    }
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        const double m = m_values[i];
        if (!(m >= 0.0 && m <= 1.0)) {
            throw DomainError("AttentionMask: entry " + std::to_string(i) + " = " + std::to_string(m) +
                              " is outside [0, 1]");
        }
    }
}

AttentionMask AttentionMask::constant(std::size_t h, std::size_t w, double value) {
    return AttentionMask(h, w, std::vector<double>(h * w, value));
}

TokenMatrix attention_probabilities(const AttentionPair& pair, double temperature) {
    const TokenMatrix& q = pair.queries;
    const TokenMatrix& k = pair.keys;
    if (q.rows == 0) {
        throw ShapeError("attention: at least one text token is required");
    }
    if (k.rows == 0) {
        throw ShapeError("attention: at least one image position is required");
    }
    if (q.cols != k.cols) {
        throw ShapeError("attention: query width " + std::to_string(q.cols) + " != key width " +
                         std::to_string(k.cols));
    }
    if (q.values.size() != q.rows * q.cols || k.values.size() != k.rows * k.cols) {
        throw ShapeError("attention: token matrix storage does not match its shape");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw DomainError("attention: temperature must be finite and > 0");
    }
    TokenMatrix probs(q.rows, k.rows);
    for (std::size_t i = 0; i < q.rows; ++i) {
        double peak = -INFINITY;
        for (std::size_t p = 0; p < k.rows; ++p) {
            double dot = 0.0;
            for (std::size_t c = 0; c < q.cols; ++c) {
                dot += q(i, c) * k(p, c);
            }
            probs(i, p) = dot / temperature;
            peak = std::max(peak, probs(i, p));
        }
        if (!std::isfinite(peak)) {
            throw DomainError("attention: non-finite logits");
        }
        double total = 0.0;
        for (std::size_t p = 0; p < k.rows; ++p) {
            probs(i, p) = std::exp(probs(i, p) - peak);
            total += probs(i, p);
        }
        for (std::size_t p = 0; p < k.rows; ++p) {
            probs(i, p) /= total;
        }
    }
    return probs;
}

AttentionMap raw_mask(const AttentionPair& pair, std::size_t h, std::size_t w, double temperature) {
    if (pair.keys.rows != h * w) {
        throw ShapeError("raw_mask: " + std::to_string(pair.keys.rows) + " keys for a " + std::to_string(h) +
                         "x" + std::to_string(w) + " grid");
    }
    const TokenMatrix probs = attention_probabilities(pair, temperature);
    AttentionMap map{h, w, std::vector<double>(h * w, 0.0)};
    for (std::size_t i = 0; i < probs.rows; ++i) {
        for (std::size_t p = 0; p < probs.cols; ++p) {
            map.values[p] += probs(i, p);
        }
    }
    return map;
}

AttentionMask aggregate_and_rescale(const std::vector<AttentionMap>& maps) {
    if (maps.empty()) {
        throw DomainError("aggregate_and_rescale: no attention maps given");
    }
    const std::size_t h = maps.front().h;
    const std::size_t w = maps.front().w;
    std::vector<double> mean(h * w, 0.0);
    for (const auto& map : maps) {
        if (map.h != h || map.w != w || map.values.size() != h * w) {
            throw ShapeError("aggregate_and_rescale: maps have different shapes");
        }
        for (std::size_t p = 0; p < mean.size(); ++p) {
            mean[p] += map.values[p];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(maps.size());
    }
    const auto [lo_it, hi_it] = std::minmax_element(mean.begin(), mean.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
        throw DomainError("aggregate_and_rescale: non-finite attention values");
    }
    if (hi == lo) {
        return AttentionMask(h, w, std::vector<double>(h * w, 0.0));
    }
    const double span = hi - lo;
    for (double& m : mean) {
        m = std::clamp((m - lo) / span, 0.0, 1.0);
    }
    return AttentionMask(h, w, std::move(mean));
}

AttentionMask build_mask(const AttentionInputs& inputs, double temperature) {
    std::vector<AttentionMap> maps;
    maps.reserve(inputs.pairs.size());
    for (const auto& pair : inputs.pairs) {
        maps.push_back(raw_mask(pair, inputs.h, inputs.w, temperature));
    }
    return aggregate_and_rescale(maps);
}

CellBlock default_focus_block(std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) {
        throw ShapeError("default_focus_block: empty grid");
    }
    return {h / 4, (3 * h + 3) / 4 - 1, w / 4, (3 * w + 3) / 4 - 1};
}

std::vector<std::string> synthetic_scenario_names() {
    return {"focused-block", "diffuse", "multi-region"};
}

std::vector<CellBlock> scenario_blocks(std::string_view scenario, std::size_t h, std::size_t w) {
    if (h == 0 || w == 0) {
        throw ShapeError("scenario_blocks: empty grid");
    }
    if (scenario == "focused-block") {
        return {default_focus_block(h, w)};
    }
    if (scenario == "diffuse") {
        return {};
    }
    if (scenario == "multi-region") {
        if (h < 2 || w < 2) {
            throw ShapeError("multi-region needs at least a 2x2 grid");
        }
        const std::size_t bh = std::max<std::size_t>(1, h / 3);
        const std::size_t bw = std::max<std::size_t>(1, w / 3);
        return {CellBlock{0, bh - 1, 0, bw - 1}, CellBlock{h - bh, h - 1, w - bw, w - 1}};
    }
    throw DomainError("unknown attention scenario '" + std::string(scenario) + "'");
}

AttentionInputs synthetic_attention(std::string_view scenario, std::size_t h, std::size_t w, std::size_t tokens,
                                    NoiseSource& rng, const SyntheticAttentionOptions& options) {
    if (tokens == 0) {
        throw DomainError("synthetic_attention: at least one text token is required");
    }
    const auto blocks = scenario_blocks(scenario, h, w);
    if (options.key_dim < std::max<std::size_t>(blocks.size(), 1) || options.layers == 0 || options.heads == 0) {
        throw DomainError("synthetic_attention: key_dim, layers and heads must be large enough");
    }
    const std::size_t dk = options.key_dim;
    const double lift = std::sqrt(options.focus_strength);

    AttentionInputs inputs;
    inputs.h = h;
    inputs.w = w;
    for (std::size_t pair_index = 0; pair_index < options.layers * options.heads; ++pair_index) {
        AttentionPair pair{TokenMatrix(tokens, dk), TokenMatrix(h * w, dk)};
        for (double& x : pair.queries.values) {
            x = options.noise_scale * rng.normal();
        }
        for (double& x : pair.keys.values) {
            x = options.noise_scale * rng.normal();
        }
        // Region r is tagged by basis direction r. Background patches get a zero
        // key: their logits are exactly 0, so they share the minimum and rescale to 0.
        for (std::size_t row = 0; row < h && !blocks.empty(); ++row) {
            for (std::size_t col = 0; col < w; ++col) {
                const std::size_t p = row * w + col;
                bool inside = false;
                for (std::size_t r = 0; r < blocks.size(); ++r) {
                    if (blocks[r].contains(row, col)) {
                        pair.keys(p, r) += lift;
                        inside = true;
                    }
                }
                if (!inside) {
                    std::fill_n(pair.keys.values.begin() + static_cast<std::ptrdiff_t>(p * dk), dk, 0.0);
                }
            }
        }
        if (!blocks.empty()) {
            const std::size_t half = (tokens + 1) / 2;
            for (std::size_t i = 0; i < tokens; ++i) {
                const std::size_t r = blocks.size() == 1 ? 0 : (i < half ? 0 : 1);
                pair.queries(i, r) += lift;
            }
        }
        inputs.pairs.push_back(std::move(pair));
    }
    return inputs;
}

nlohmann::json mask_to_json(const AttentionMask& mask) {
    nlohmann::json doc;
    doc["h"] = mask.h();
    doc["w"] = mask.w();
    doc["values"] = mask.values();
    return doc;
}

AttentionMask mask_from_json(const nlohmann::json& doc) {
    try {
        return AttentionMask(doc.at("h").get<std::size_t>(), doc.at("w").get<std::size_t>(),
                             doc.at("values").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mask JSON: ") + e.what());
    }
}

std::string mask_to_csv(const AttentionMask& mask) {
    std::string out;
    for (std::size_t r = 0; r < mask.h(); ++r) {
        for (std::size_t c = 0; c < mask.w(); ++c) {
            if (c > 0) {
                out += ',';
            }
            out += format_double(mask[r * mask.w() + c]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace rfo
