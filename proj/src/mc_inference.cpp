#include "mcdrop/mc_inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "mcdrop/errors.hpp"

namespace mcdrop {

namespace {

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

PredictiveSummary deterministic_summary(Vector probs, std::size_t samples) {
    PredictiveSummary s;
    s.samples = samples;
    s.variance.assign(probs.size(), 0.0);
    s.stddev.assign(probs.size(), 0.0);
    s.predicted_class = argmax(probs);
    s.mean = std::move(probs);
    return s;
}

}  // namespace

PredictiveSummary summarize_samples(const Matrix& outputs) {
    if (outputs.empty()) {
        throw InvalidArgument("summarize_samples: no samples");
    }
    const std::size_t t = outputs.rows();
    const std::size_t c = outputs.cols();
    const double inv_t = 1.0 / static_cast<double>(t);

    PredictiveSummary s;
    s.samples = t;
    s.mean.resize(c);
    s.variance.resize(c);
    s.stddev.resize(c);
    Vector column(t);
    for (std::size_t j = 0; j < c; ++j) {
        for (std::size_t k = 0; k < t; ++k) {
            column[k] = outputs(k, j);
        }
        const double mean = pairwise_sum(column) * inv_t;
        for (std::size_t k = 0; k < t; ++k) {
            const double dev = outputs(k, j) - mean;
            column[k] = dev * dev;
        }
        s.mean[j] = mean;
        s.variance[j] = pairwise_sum(column) * inv_t;
        s.stddev[j] = std::sqrt(s.variance[j]);
    }
    s.predicted_class = argmax(s.mean);
    return s;
}

PredictiveSummary mc_predict(const NetworkParams& params, std::span<const double> x, std::size_t samples,
                             const RngStream& rng) {
    if (samples < 1) {
        throw InvalidArgument("mc_predict: need at least one sample");
    }
    if (params.config.dropout_rate == 0.0) {
        return deterministic_summary(predict(params, x), samples);
    }
    Matrix outputs(samples, params.config.num_classes);
    for (std::size_t k = 0; k < samples; ++k) {
        RngStream pass_rng = rng.derive(k);
        const DropoutMaskSet masks = sample_masks(params.config, pass_rng);
        const Vector probs = predict(params, x, &masks);
        std::copy(probs.begin(), probs.end(), outputs.row(k).begin());
    }
    return summarize_samples(outputs);
}

std::vector<PredictiveSummary> mc_predict_batch(const NetworkParams& params, const Matrix& x,
                                                std::size_t samples, const RngStream& rng,
                                                std::span<const std::uint64_t> row_keys, std::size_t threads) {
    if (samples < 1) {
        throw InvalidArgument("mc_predict_batch: need at least one sample");
    }
    if (!row_keys.empty() && row_keys.size() != x.rows()) {
        throw DimensionError("mc_predict_batch: need one key per row");
    }
    if (x.cols() != params.config.input_dim) {
        throw DimensionError("mc_predict_batch: rows have " + std::to_string(x.cols()) +
                             " features, network expects " + std::to_string(params.config.input_dim));
    }
    const std::size_t n = x.rows();
    std::vector<PredictiveSummary> out(n);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint64_t key = row_keys.empty() ? i : row_keys[i];
            out[i] = mc_predict(params, x.row(i), samples, rng.derive(key));
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        work(0, n);
        return out;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        pool.emplace_back(work, begin, std::min(n, begin + chunk));
    }
    return out;
}

HeatmapRows mean_class_summary(std::span<const ConditionGroup> groups) {
    if (groups.empty()) {
        throw InvalidArgument("mean_class_summary: no groups");
    }
    const std::size_t c = groups.front().members.empty() ? 0 : groups.front().members.front().mean.size();
    if (c == 0) {
        throw InvalidArgument("mean_class_summary: empty group");
    }
    HeatmapRows rows;
    rows.mean = Matrix(groups.size(), c);
    rows.variance = Matrix(groups.size(), c);
    rows.pooled_variance = Matrix(groups.size(), c);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& members = groups[g].members;
        if (members.empty()) {
            throw InvalidArgument("mean_class_summary: group " + groups[g].name + " is empty");
        }
        rows.conditions.push_back(groups[g].name);
        rows.true_labels.push_back(groups[g].true_label);
        const double inv = 1.0 / static_cast<double>(members.size());
        Vector means(members.size());
        Vector vars(members.size());
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t m = 0; m < members.size(); ++m) {
                if (members[m].mean.size() != c) {
                    throw DimensionError("mean_class_summary: class count differs between summaries");
                }
                means[m] = members[m].mean[j];
                vars[m] = members[m].variance[j];
            }
            const double grand = pairwise_sum(means) * inv;
            const double within = pairwise_sum(vars) * inv;
            for (double& v : means) {
                v = (v - grand) * (v - grand);
            }
            rows.mean(g, j) = grand;
            rows.variance(g, j) = within;
            // Law of total variance; exact when every member used the same T.
            rows.pooled_variance(g, j) = within + pairwise_sum(means) * inv;
        }
    }
    return rows;
}

}  // namespace mcdrop
