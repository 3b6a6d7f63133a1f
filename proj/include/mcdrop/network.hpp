#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcdrop/math_core.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

// Shape and dropout rate of a ReLU classifier. dropout_rate == 0 is the
// plain (non-dropout) network.
struct NetworkConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden_layers{20, 20, 20, 20};
    std::size_t num_classes = 7;
    double dropout_rate = 0.0;
    std::uint64_t init_seed = 0;

    void validate() const;
    double keep_probability() const { return 1.0 - dropout_rate; }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// One affine map. The output layer has an empty bias: a constant added to
// every logit leaves the softmax unchanged.
struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct NetworkParams {
    NetworkConfig config;
    std::vector<DenseLayer> layers;  // hidden layers, then the output layer

    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

using Gradients = std::vector<DenseLayer>;

// Keep masks for the hidden layers of one stochastic pass.
struct DropoutMaskSet {
    std::vector<std::vector<std::uint8_t>> masks;
    double keep_probability = 1.0;

    static DropoutMaskSet all_ones(const NetworkConfig& config);
};

NetworkParams init_params(const NetworkConfig& config);

DropoutMaskSet sample_masks(const NetworkConfig& config, RngStream& rng);

struct ForwardResult {
    Vector probs;
    Vector logits;
    // activations[0] is the input, activations[l] the output of hidden layer l
    // (after masking and scaling).
    std::vector<Vector> activations;
    // Pre-activation of each hidden layer.
    std::vector<Vector> pre_activations;
};

// Masked layers compute mask * relu(W h + b) / keep_probability.
ForwardResult forward(const NetworkParams& params, std::span<const double> x,
                      const DropoutMaskSet* masks = nullptr);

// Probability vector only; cheaper when the cache is not needed.
Vector predict(const NetworkParams& params, std::span<const double> x,
               const DropoutMaskSet* masks = nullptr);

// Mean batch cross-entropy gradient. targets holds one label per row of x.
// masks is either empty (deterministic passes) or holds one mask set per row.
Gradients backward(const NetworkParams& params, const Matrix& x, std::span<const std::size_t> targets,
                   std::span<const DropoutMaskSet> masks);

struct BatchGradient {
    Gradients gradients;
    double mean_loss = 0.0;
    std::size_t correct = 0;  // rows whose argmax matched the target
};

// backward plus the loss and hit count of the same passes.
BatchGradient compute_batch_gradient(const NetworkParams& params, const Matrix& x,
                                     std::span<const std::size_t> targets,
                                     std::span<const DropoutMaskSet> masks);

// Mean batch cross-entropy loss under the same conventions as backward.
double batch_loss(const NetworkParams& params, const Matrix& x, std::span<const std::size_t> targets,
                  std::span<const DropoutMaskSet> masks);

Gradients zero_gradients(const NetworkParams& params);

}  // namespace mcdrop
