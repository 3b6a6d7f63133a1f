#include "mcdrop/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcdrop/errors.hpp"
#include "mcdrop/text_format.hpp"

namespace mcdrop {

void TrainConfig::validate() const {
    if (epochs == 0) {
        throw InvalidArgument("train config: epochs must be at least 1");
    }
    if (batch_size == 0) {
        throw InvalidArgument("train config: batch_size must be at least 1");
    }
    if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(epsilon > 0.0)) {
        throw InvalidArgument("train config: invalid optimizer hyperparameters");
    }
}

std::string TrainTrace::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,accuracy\n";
    for (std::size_t e = 0; e < loss.size(); ++e) {
        out << e + 1 << ',' << format_double(loss[e]) << ',' << format_double(accuracy[e]) << '\n';
    }
    return out.str();
}

namespace {

class Adam {
public:
    Adam(const NetworkParams& params, const TrainConfig& cfg)
        : cfg_(cfg), m_(zero_gradients(params)), v_(zero_gradients(params)) {}

    void step(NetworkParams& params, const Gradients& grads) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            update(params.layers[l].weights.values(), grads[l].weights.values(), m_[l].weights.values(),
                   v_[l].weights.values(), c1, c2);
            update(params.layers[l].bias, grads[l].bias, m_[l].bias, v_[l].bias, c1, c2);
        }
    }

private:
    void update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                double c1, double c2) const {
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
        }
    }

    TrainConfig cfg_;
    Gradients m_;
    Gradients v_;
    std::size_t t_ = 0;
};

}  // namespace

TrainResult train(const NetworkConfig& net_config, const TrainConfig& train_config, const LabeledDataset& data) {
    net_config.validate();
    train_config.validate();
    if (data.size() == 0) {
        throw InvalidArgument("train: dataset is empty");
    }
    if (data.dim() != net_config.input_dim) {
        throw DimensionError("train: dataset has " + std::to_string(data.dim()) + " features, network expects " +
                             std::to_string(net_config.input_dim));
    }
    for (std::size_t l : data.labels) {
        if (l >= net_config.num_classes) {
            throw InvalidArgument("train: label " + std::to_string(l) + " outside [0, num_classes)");
        }
    }

    if (!all_finite(data.features.values())) {
        throw InvalidArgument("train: features contain non-finite values");
    }

    TrainResult result{init_params(net_config), {}};
    Adam adam(result.params, train_config);
    RngStream shuffle_rng(train_config.shuffle_seed, /*stream_id=*/0x5F);
    RngStream mask_rng(train_config.shuffle_seed, /*stream_id=*/0xD0);
    const bool use_dropout = net_config.dropout_rate > 0.0;

    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        // Fisher-Yates with our own stream keeps the permutation portable.
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += train_config.batch_size) {
            const std::size_t count = std::min(train_config.batch_size, n - start);
            Matrix batch(count, d);
            std::vector<std::size_t> targets(count);
            std::vector<DropoutMaskSet> masks;
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t r = order[start + k];
                std::copy(data.features.row(r).begin(), data.features.row(r).end(), batch.row(k).begin());
                targets[k] = data.labels[r];
                if (use_dropout) {
                    masks.push_back(sample_masks(net_config, mask_rng));
                }
            }
            BatchGradient bg;
            try {
                bg = compute_batch_gradient(result.params, batch, targets, masks);
            } catch (const InvalidArgument&) {
                // Inputs were checked above, so this is softmax refusing overflowed logits.
                throw DivergenceError(epoch, "train: logits overflowed in epoch " + std::to_string(epoch + 1));
            }
            if (!std::isfinite(bg.mean_loss)) {
                throw DivergenceError(epoch, "train: non-finite loss in epoch " + std::to_string(epoch + 1));
            }
            loss_sum += bg.mean_loss * static_cast<double>(count);
            correct += bg.correct;
            adam.step(result.params, bg.gradients);
            if (!result.params.all_finite()) {
                throw DivergenceError(epoch,
                                      "train: parameters became non-finite in epoch " + std::to_string(epoch + 1));
            }
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw DivergenceError(epoch, "train: non-finite loss in epoch " + std::to_string(epoch + 1));
        }
        result.trace.loss.push_back(epoch_loss);
        result.trace.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    return result;
}

Evaluation evaluate(const NetworkParams& params, const LabeledDataset& data) {
    if (data.size() == 0) {
        throw InvalidArgument("evaluate: dataset is empty");
    }
    const std::size_t c = params.config.num_classes;
    Evaluation ev;
    ev.confusion = Matrix(c, c);
    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardResult f = forward(params, data.features.row(i));
        const Vector& probs = f.probs;
        const std::size_t truth = data.labels[i];
        if (truth >= c) {
            throw InvalidArgument("evaluate: label outside the network's classes");
        }
        const auto pred = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        ev.confusion(truth, pred) += 1.0;
        correct += pred == truth ? 1 : 0;
        loss += softmax_cross_entropy(f.logits, truth);
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    ev.mean_loss = loss / static_cast<double>(data.size());
    return ev;
}

}  // namespace mcdrop
