#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/math_core.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

inline constexpr std::size_t kDefaultMcSamples = 100;

// Per-class moments of T stochastic softmax outputs.
struct PredictiveSummary {
    Vector mean;
    Vector variance;  // population (1/T) variance
    Vector stddev;
    std::size_t samples = 0;
    std::size_t predicted_class = 0;  // argmax of mean

    friend bool operator==(const PredictiveSummary&, const PredictiveSummary&) = default;
};

// Runs T forward passes with fresh dropout masks. Pass k draws its masks
// from rng.derive(k), so the result depends only on the stream key.
// A network with dropout rate 0 has no randomness: the mean is the
// deterministic output and the variance is exactly zero.
PredictiveSummary mc_predict(const NetworkParams& params, std::span<const double> x,
                             std::size_t samples, const RngStream& rng);

// Row i is evaluated with rng.derive(row_keys[i]) (default: i). Rows may be
// spread over worker threads; results do not depend on the thread count.
std::vector<PredictiveSummary> mc_predict_batch(const NetworkParams& params, const Matrix& x,
                                                std::size_t samples, const RngStream& rng,
                                                std::span<const std::uint64_t> row_keys = {},
                                                std::size_t threads = 1);

// Builds a summary from explicit sample outputs (one row per pass).
PredictiveSummary summarize_samples(const Matrix& outputs);

struct ConditionGroup {
    std::string name;
    std::size_t true_label = 0;
    std::vector<PredictiveSummary> members;
};

// Heatmap rows, one per condition group, columns per class.
struct HeatmapRows {
    std::vector<std::string> conditions;
    std::vector<std::size_t> true_labels;
    Matrix mean;             // average of member means
    Matrix variance;         // average of member variances
    Matrix pooled_variance;  // variance over all members' passes pooled together
};

HeatmapRows mean_class_summary(std::span<const ConditionGroup> groups);

}  // namespace mcdrop
