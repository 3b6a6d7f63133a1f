#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mcdrop/data.hpp"
#include "mcdrop/network.hpp"

namespace mcdrop {

// Mini-batch Adam on mean cross-entropy. The dropout rate comes from the
// NetworkConfig being trained.
struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t shuffle_seed = 0;

    void validate() const;
};

struct TrainTrace {
    std::vector<double> loss;      // mean training loss per epoch
    std::vector<double> accuracy;  // training accuracy per epoch (dropout active)

    std::string to_csv() const;
};

struct TrainResult {
    NetworkParams params;
    TrainTrace trace;
};

// Deterministic in (init_seed, shuffle_seed, data). Throws DivergenceError
// carrying the epoch index if the loss becomes non-finite.
TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config, const LabeledDataset& data);

struct Evaluation {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    Matrix confusion;  // rows: true class, columns: predicted class
};

// Deterministic forward pass (no masks) on every row.
Evaluation evaluate(const NetworkParams& params, const LabeledDataset& data);

}  // namespace mcdrop
