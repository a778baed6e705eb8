// SPDX-License-Identifier: Apache-2.0
#include "rfo/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"
#include "rfo/io.hpp"

namespace rfo {

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double silu(double z) noexcept {
    return z * sigmoid(z);
}

double silu_derivative(double z) noexcept {
    const double s = sigmoid(z);
    return s * (1.0 + z * (1.0 - s));
}

void check_widths(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2) {
        throw ShapeError("MlpVelocity needs at least an input and an output width");
    }
    if (std::any_of(widths.begin(), widths.end(), [](std::size_t w) { return w == 0; })) {
        throw ShapeError("MlpVelocity widths must be positive");
    }
    if (widths.front() != widths.back() + 1) {
        throw ShapeError("MlpVelocity input width must be output width + 1 (x and t)");
    }
}

}  // namespace

/// Per-sample activations reused across the batch.
struct MlpWorkspace {
    std::vector<std::vector<double>> pre;   // z_l for l = 1..L
    std::vector<std::vector<double>> post;  // a_0 = input, a_l = act(z_l); a_L = z_L
    std::vector<std::vector<double>> delta;

    explicit MlpWorkspace(const MlpVelocity& model) {
        const auto& w = model.m_widths;
        post.resize(w.size());
        pre.resize(w.size());
        delta.resize(w.size());
        for (std::size_t l = 0; l < w.size(); ++l) {
            post[l].resize(w[l]);
            pre[l].resize(w[l]);
            delta[l].resize(w[l]);
        }
    }

    void forward(const MlpVelocity& model, std::span<const double> x, double t) {
        const auto& widths = model.m_widths;
        const auto& params = model.m_params;
        std::copy(x.begin(), x.end(), post[0].begin());
        post[0][x.size()] = t;
        const std::size_t layers = widths.size() - 1;
        for (std::size_t l = 0; l < layers; ++l) {
            const std::size_t in = widths[l];
            const std::size_t out = widths[l + 1];
            const double* weight = params.data() + model.weight_offset(l);
            const double* bias = params.data() + model.bias_offset(l);
            const std::vector<double>& a = post[l];
            std::vector<double>& z = pre[l + 1];
            for (std::size_t o = 0; o < out; ++o) {
                double acc = bias[o];
                const double* row = weight + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    acc += row[i] * a[i];
                }
                z[o] = acc;
            }
            std::vector<double>& next = post[l + 1];
            if (l + 1 < layers) {
                for (std::size_t o = 0; o < out; ++o) {
                    next[o] = silu(z[o]);
                }
            } else {
                next = z;
            }
        }
    }

    /// delta[L] must hold dLoss/dOutput; accumulates into `grad`.
    void backward(const MlpVelocity& model, std::span<double> grad) {
        const auto& widths = model.m_widths;
        const auto& params = model.m_params;
        const std::size_t layers = widths.size() - 1;
        for (std::size_t l = layers; l-- > 0;) {
            const std::size_t in = widths[l];
            const std::size_t out = widths[l + 1];
            double* gw = grad.data() + model.weight_offset(l);
            double* gb = grad.data() + model.bias_offset(l);
            const std::vector<double>& d = delta[l + 1];
            const std::vector<double>& a = post[l];
            for (std::size_t o = 0; o < out; ++o) {
                gb[o] += d[o];
                double* row = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    row[i] += d[o] * a[i];
                }
            }
            if (l == 0) {
                break;
            }
            const double* weight = params.data() + model.weight_offset(l);
            std::vector<double>& prev = delta[l];
            std::fill(prev.begin(), prev.end(), 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double* row = weight + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    prev[i] += row[i] * d[o];
                }
            }
            for (std::size_t i = 0; i < in; ++i) {
                prev[i] *= silu_derivative(pre[l][i]);
            }
        }
    }
};

MlpVelocity::MlpVelocity(std::vector<std::size_t> widths) : m_widths(std::move(widths)) {
    check_widths(m_widths);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < m_widths.size(); ++l) {
        m_offsets.push_back(offset);
        offset += m_widths[l] * m_widths[l + 1] + m_widths[l + 1];
    }
    m_params.assign(offset, 0.0);
}

MlpVelocity MlpVelocity::initialized(std::vector<std::size_t> widths, NoiseSource& rng) {
    MlpVelocity model(std::move(widths));
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const std::size_t in = model.m_widths[l];
        const std::size_t count = in * model.m_widths[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < count; ++i) {
            model.m_params[model.weight_offset(l) + i] = scale * rng.normal();
        }
    }
    return model;
}

bool MlpVelocity::parameters_finite() const noexcept {
    return std::all_of(m_params.begin(), m_params.end(), [](double p) { return std::isfinite(p); });
}

StateBatch MlpVelocity::forward(const StateBatch& x, std::span<const double> t) const {
    if (x.dim() != dim()) {
        throw ShapeError("MlpVelocity::forward: input dimension " + std::to_string(x.dim()) + " != " +
                         std::to_string(dim()));
    }
    if (t.size() != x.batch()) {
        throw ShapeError("MlpVelocity::forward: one time per row required");
    }
    MlpWorkspace ws(*this);
    StateBatch out(x.batch(), dim());
    for (std::size_t i = 0; i < x.batch(); ++i) {
        ws.forward(*this, x.row(i), t[i]);
        std::copy(ws.post.back().begin(), ws.post.back().end(), out.row(i).begin());
    }
    return out;
}

void MlpVelocity::evaluate(const StateBatch& x, double t, StateBatch& out) const {
    require_same_shape(x, out, "MlpVelocity::evaluate");
    if (x.dim() != dim()) {
        throw ShapeError("MlpVelocity::evaluate: dimension mismatch");
    }
    MlpWorkspace ws(*this);
    for (std::size_t i = 0; i < x.batch(); ++i) {
        ws.forward(*this, x.row(i), t);
        std::copy(ws.post.back().begin(), ws.post.back().end(), out.row(i).begin());
    }
}

namespace {

void check_loss_inputs(const MlpVelocity& model, const StateBatch& x0, const StateBatch& x1,
                       std::span<const double> t) {
    require_same_shape(x0, x1, "rf_loss");
    if (x0.dim() != model.dim()) {
        throw ShapeError("rf_loss: model dimension mismatch");
    }
    if (t.size() != x0.batch()) {
        throw ShapeError("rf_loss: one time per row required");
    }
    for (double ti : t) {
        if (!(ti >= 0.0 && ti <= 1.0)) {
            throw DomainError("rf_loss: times must lie in [0, 1]");
        }
    }
}

}  // namespace

double rf_loss(const MlpVelocity& model, const StateBatch& x0, const StateBatch& x1, std::span<const double> t) {
    check_loss_inputs(model, x0, x1, t);
    const std::size_t d = x0.dim();
    MlpWorkspace ws(model);
    std::vector<double> xt(d);
    double total = 0.0;
    for (std::size_t i = 0; i < x0.batch(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            xt[j] = t[i] * x1(i, j) + (1.0 - t[i]) * x0(i, j);
        }
        ws.forward(model, xt, t[i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double r = ws.post.back()[j] - (x1(i, j) - x0(i, j));
            total += r * r;
        }
    }
    return total / static_cast<double>(x0.batch());
}

LossGradient grad_rf_loss(const MlpVelocity& model, const StateBatch& x0, const StateBatch& x1,
                          std::span<const double> t) {
    check_loss_inputs(model, x0, x1, t);
    const std::size_t d = x0.dim();
    const double scale = 1.0 / static_cast<double>(x0.batch());
    MlpWorkspace ws(model);
    std::vector<double> xt(d);
    LossGradient result;
    result.gradient.assign(model.parameter_count(), 0.0);
    for (std::size_t i = 0; i < x0.batch(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            xt[j] = t[i] * x1(i, j) + (1.0 - t[i]) * x0(i, j);
        }
        ws.forward(model, xt, t[i]);
        auto& d_out = ws.delta.back();
        for (std::size_t j = 0; j < d; ++j) {
            const double r = ws.post.back()[j] - (x1(i, j) - x0(i, j));
            result.loss += r * r;
            d_out[j] = 2.0 * scale * r;
        }
        ws.backward(model, result.gradient);
    }
    result.loss *= scale;
    return result;
}

nlohmann::json checkpoint_to_json(const MlpVelocity& model) {
    nlohmann::json layers = nlohmann::json::array();
    const auto params = model.parameters();
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const std::size_t in = model.widths()[l];
        const std::size_t out = model.widths()[l + 1];
        const auto w = params.subspan(model.weight_offset(l), in * out);
        const auto b = params.subspan(model.bias_offset(l), out);
        layers.push_back({{"weight_shape", {out, in}},
                          {"weights", std::vector<double>(w.begin(), w.end())},
                          {"bias", std::vector<double>(b.begin(), b.end())}});
    }
    return {{"format", "rf-overshoot-mlp"},
            {"version", 1},
            {"activation", "silu"},
            {"widths", model.widths()},
            {"layers", std::move(layers)}};
}

MlpVelocity checkpoint_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "rf-overshoot-mlp") {
            throw ConfigError("checkpoint: unexpected format tag");
        }
        if (doc.at("activation").get<std::string>() != "silu") {
            throw ConfigError("checkpoint: unsupported activation");
        }
        MlpVelocity model(doc.at("widths").get<std::vector<std::size_t>>());
        const auto& layers = doc.at("layers");
        if (layers.size() != model.layer_count()) {
            throw ConfigError("checkpoint: layer count does not match widths");
        }
        auto params = model.parameters();
        for (std::size_t l = 0; l < model.layer_count(); ++l) {
            const auto w = layers[l].at("weights").get<std::vector<double>>();
            const auto b = layers[l].at("bias").get<std::vector<double>>();
            const std::size_t in = model.widths()[l];
            const std::size_t out = model.widths()[l + 1];
            if (w.size() != in * out || b.size() != out) {
                throw ConfigError("checkpoint: layer " + std::to_string(l) + " has wrong parameter count");
            }
            std::copy(w.begin(), w.end(), params.begin() + static_cast<std::ptrdiff_t>(model.weight_offset(l)));
            std::copy(b.begin(), b.end(), params.begin() + static_cast<std::ptrdiff_t>(model.bias_offset(l)));
        }
        if (!model.parameters_finite()) {
            throw ConfigError("checkpoint: non-finite parameters");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const MlpVelocity& model, const std::string& path) {
    write_file_atomic(path, checkpoint_to_json(model).dump(1) + "\n");
}

MlpVelocity load_checkpoint(const std::string& path) {
    return checkpoint_from_json(read_json_file(path));
}

}  // namespace rfo
