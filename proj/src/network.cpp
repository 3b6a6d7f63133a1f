#include "mcdrop/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcdrop/errors.hpp"
#include "mcdrop/text_format.hpp"

namespace mcdrop {

void NetworkConfig::validate() const {
    if (input_dim == 0) {
        throw InvalidArgument("network config: input_dim must be positive");
    }
    if (num_classes < 2) {
        throw InvalidArgument("network config: num_classes must be at least 2");
    }
    for (std::size_t w : hidden_layers) {
        if (w == 0) {
            throw InvalidArgument("network config: hidden layer widths must be positive");
        }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw InvalidArgument("network config: dropout rate must lie in [0, 1), got " +
                              format_double(dropout_rate));
    }
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += layer.weights.size() + layer.bias.size();
    }
    return n;
}

bool NetworkParams::all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
        return mcdrop::all_finite(l.weights.values()) && mcdrop::all_finite(l.bias);
    });
}

DropoutMaskSet DropoutMaskSet::all_ones(const NetworkConfig& config) {
    DropoutMaskSet set;
    set.keep_probability = config.keep_probability();
    for (std::size_t w : config.hidden_layers) {
        set.masks.emplace_back(w, std::uint8_t{1});
    }
    return set;
}

NetworkParams init_params(const NetworkConfig& config) {
    config.validate();
    NetworkParams params;
    params.config = config;
    RngStream rng(config.init_seed, /*stream_id=*/0x1A17);

    std::size_t fan_in = config.input_dim;
    auto make_layer = [&](std::size_t out, bool with_bias) {
        DenseLayer layer;
        layer.weights = Matrix(out, fan_in);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : layer.weights.values()) {
            w = rng.uniform(-bound, bound);
        }
        if (with_bias) {
            layer.bias.assign(out, 0.0);
        }
        fan_in = out;
        return layer;
    };
    for (std::size_t width : config.hidden_layers) {
        params.layers.push_back(make_layer(width, true));
    }
    params.layers.push_back(make_layer(config.num_classes, false));
    return params;
}

DropoutMaskSet sample_masks(const NetworkConfig& config, RngStream& rng) {
    DropoutMaskSet set;
    set.keep_probability = config.keep_probability();
    set.masks.reserve(config.hidden_layers.size());
    for (std::size_t width : config.hidden_layers) {
        std::vector<std::uint8_t> mask(width);
        for (auto& m : mask) {
            m = rng.bernoulli(set.keep_probability) ? 1 : 0;
        }
        set.masks.push_back(std::move(mask));
    }
    return set;
}

namespace {

void check_masks(const NetworkParams& params, const DropoutMaskSet& masks) {
    const auto& widths = params.config.hidden_layers;
    if (masks.masks.size() != widths.size()) {
        throw DimensionError("forward: mask set has " + std::to_string(masks.masks.size()) +
                             " layers, network has " + std::to_string(widths.size()));
    }
    for (std::size_t l = 0; l < widths.size(); ++l) {
        if (masks.masks[l].size() != widths[l]) {
            throw DimensionError("forward: mask for hidden layer " + std::to_string(l) +
                                 " has wrong length");
        }
    }
    if (!(masks.keep_probability > 0.0 && masks.keep_probability <= 1.0)) {
        throw InvalidArgument("forward: keep probability must lie in (0, 1]");
    }
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

ForwardResult forward(const NetworkParams& params, std::span<const double> x,
                      const DropoutMaskSet* masks) {
    if (x.size() != params.config.input_dim) {
        throw DimensionError("forward: input has " + std::to_string(x.size()) + " features, network expects " +
                             std::to_string(params.config.input_dim));
    }
    if (masks != nullptr) {
        check_masks(params, *masks);
    }
    const std::size_t hidden = params.layers.size() - 1;
    const double scale = masks != nullptr ? 1.0 / masks->keep_probability : 1.0;

    ForwardResult result;
    result.activations.reserve(hidden + 1);
    result.pre_activations.reserve(hidden);
    result.activations.emplace_back(x.begin(), x.end());

    for (std::size_t l = 0; l < hidden; ++l) {
        const DenseLayer& layer = params.layers[l];
        Vector a = matvec(layer.weights, result.activations.back());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] += layer.bias[i];
        }
        Vector h(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (masks == nullptr) {
                h[i] = relu(a[i]);
            } else {
                h[i] = masks->masks[l][i] != 0 ? relu(a[i]) * scale : 0.0;
            }
        }
        result.pre_activations.push_back(std::move(a));
        result.activations.push_back(std::move(h));
    }
    result.logits = matvec(params.layers.back().weights, result.activations.back());
    result.probs = softmax(result.logits);
    return result;
}

Vector predict(const NetworkParams& params, std::span<const double> x, const DropoutMaskSet* masks) {
    return forward(params, x, masks).probs;
}

Gradients zero_gradients(const NetworkParams& params) {
    Gradients g;
    g.reserve(params.layers.size());
    for (const auto& layer : params.layers) {
        DenseLayer z;
        z.weights = Matrix(layer.weights.rows(), layer.weights.cols());
        z.bias.assign(layer.bias.size(), 0.0);
        g.push_back(std::move(z));
    }
    return g;
}

BatchGradient compute_batch_gradient(const NetworkParams& params, const Matrix& x,
                                     std::span<const std::size_t> targets,
                                     std::span<const DropoutMaskSet> masks) {
    if (x.empty() || x.rows() != targets.size()) {
        throw DimensionError("backward: batch is empty or labels do not match rows");
    }
    if (!masks.empty() && masks.size() != x.rows()) {
        throw DimensionError("backward: need one mask set per sample");
    }
    const std::size_t classes = params.config.num_classes;
    const std::size_t hidden = params.layers.size() - 1;

    BatchGradient out;
    out.gradients = zero_gradients(params);
    double loss_sum = 0.0;

    for (std::size_t n = 0; n < x.rows(); ++n) {
        if (targets[n] >= classes) {
            throw InvalidArgument("backward: label " + std::to_string(targets[n]) + " out of range");
        }
        const DropoutMaskSet* m = masks.empty() ? nullptr : &masks[n];
        const ForwardResult f = forward(params, x.row(n), m);

        loss_sum += softmax_cross_entropy(f.logits, targets[n]);
        if (argmax(f.probs) == targets[n]) {
            ++out.correct;
        }

        // d loss / d logits for softmax + cross-entropy.
        Vector delta = f.probs;
        delta[targets[n]] -= 1.0;

        {
            DenseLayer& g = out.gradients.back();
            const Vector& h = f.activations.back();
            for (std::size_t i = 0; i < delta.size(); ++i) {
                auto grow = g.weights.row(i);
                for (std::size_t j = 0; j < h.size(); ++j) {
                    grow[j] += delta[i] * h[j];
                }
            }
        }
        Vector upstream = matvec_transposed(params.layers.back().weights, delta);

        const double scale = m != nullptr ? 1.0 / m->keep_probability : 1.0;
        for (std::size_t l = hidden; l-- > 0;) {
            const Vector& a = f.pre_activations[l];
            Vector da(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                double local = a[i] > 0.0 ? 1.0 : 0.0;
                if (m != nullptr) {
                    local = m->masks[l][i] != 0 ? local * scale : 0.0;
                }
                da[i] = upstream[i] * local;
            }
            DenseLayer& g = out.gradients[l];
            const Vector& below = f.activations[l];
            for (std::size_t i = 0; i < da.size(); ++i) {
                if (da[i] == 0.0) {
                    continue;
                }
                auto grow = g.weights.row(i);
                for (std::size_t j = 0; j < below.size(); ++j) {
                    grow[j] += da[i] * below[j];
                }
                g.bias[i] += da[i];
            }
            if (l > 0) {
                upstream = matvec_transposed(params.layers[l].weights, da);
            }
        }
    }

    const double inv = 1.0 / static_cast<double>(x.rows());
    for (auto& g : out.gradients) {
        for (double& w : g.weights.values()) {
            w *= inv;
        }
        for (double& b : g.bias) {
            b *= inv;
        }
    }
    out.mean_loss = loss_sum * inv;
    return out;
}

Gradients backward(const NetworkParams& params, const Matrix& x, std::span<const std::size_t> targets,
                   std::span<const DropoutMaskSet> masks) {
    return compute_batch_gradient(params, x, targets, masks).gradients;
}

double batch_loss(const NetworkParams& params, const Matrix& x, std::span<const std::size_t> targets,
                  std::span<const DropoutMaskSet> masks) {
    if (x.empty() || x.rows() != targets.size()) {
        throw DimensionError("batch_loss: batch is empty or labels do not match rows");
    }
    if (!masks.empty() && masks.size() != x.rows()) {
        throw DimensionError("batch_loss: need one mask set per sample");
    }
    double total = 0.0;
    for (std::size_t n = 0; n < x.rows(); ++n) {
        const DropoutMaskSet* m = masks.empty() ? nullptr : &masks[n];
        if (targets[n] >= params.config.num_classes) {
            throw InvalidArgument("batch_loss: label " + std::to_string(targets[n]) + " out of range");
        }
        total += softmax_cross_entropy(forward(params, x.row(n), m).logits, targets[n]);
    }
    return total / static_cast<double>(x.rows());
}

}  // namespace mcdrop
