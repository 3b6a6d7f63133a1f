#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/data.hpp"
#include "mcdrop/diagnosis.hpp"
#include "mcdrop/mc_inference.hpp"
#include "mcdrop/network.hpp"
#include "mcdrop/text_format.hpp"
#include "mcdrop/trainer.hpp"

namespace mcdrop {

// ------------------------------------------------------------------- LDA

struct ScatterMatrices {
    Matrix within;   // pooled within-class scatter / n
    Matrix between;  // sum_c n_c (mu_c - mu)(mu_c - mu)^T / n
};

ScatterMatrices scatter_matrices(const Matrix& features, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

// trace(Sw^-1 Sb): the Fisher separability, invariant under invertible
// linear maps of the features.
double fisher_criterion(const Matrix& features, std::span<const std::size_t> labels, std::size_t num_classes);

struct LdaProjection {
    Matrix projection;   // d x k, columns Sw-orthonormal
    Vector eigenvalues;  // top k, descending
    Matrix class_means;  // C x k, in projected space
    std::string fingerprint;
    bool ridge_applied = false;
};

LdaProjection lda_fit(const LabeledDataset& data, std::size_t k = 2);
Matrix lda_transform(const LdaProjection& proj, const Matrix& x);

// ----------------------------------------------------------------- sweep

inline const std::vector<double>& default_dropout_rates() {
    static const std::vector<double> rates{0.0, 0.03, 0.1, 0.2, 0.5};
    return rates;
}

// Rows grouped by (label, severity) in first-appearance order; names are
// "NM" for severity 0 and "<class>-SL<s>" otherwise.
std::vector<ConditionGroup> group_by_condition(const LabeledDataset& data,
                                               std::span<const PredictiveSummary> summaries);

// Fraction of rows whose predictive-mean argmax equals the label.
double summary_accuracy(const LabeledDataset& data, std::span<const PredictiveSummary> summaries);

struct SweepEntry {
    double rate = 0.0;
    std::optional<NetworkParams> params;
    TrainTrace trace;
    HeatmapRows rows;
    double accuracy = 0.0;
    std::optional<std::string> error;  // training failure for this rate
};

struct SweepResult {
    std::vector<SweepEntry> entries;  // in request order
};

struct SweepOptions {
    std::size_t mc_samples = kDefaultMcSamples;
    std::uint64_t mc_seed = 0;
    std::size_t threads = 1;
};

// Trains one model per rate with identical data and seeds, then summarizes
// MC predictions on the evaluation rows by condition.
SweepResult sweep_dropout(std::span<const double> rates, const NetworkConfig& net_config,
                          const TrainConfig& train_config, const LabeledDataset& train_data,
                          const LabeledDataset& eval_data, const SweepOptions& options = {});

struct RateCurvePoint {
    double rate = 0.0;
    double diagonal_mean = 0.0;   // mean confidence on the true class over conditions
    double total_variance = 0.0;  // mean over conditions of summed class variance
    double relative_to_baseline = 0.0;
    bool passes = false;
};

struct RateSelection {
    double rate = 0.0;
    bool fallback = false;
    double knee = 0.95;
    double cap = 0.5;
    std::vector<RateCurvePoint> curve;  // ascending rate
    std::string rationale;
};

// Walks nonzero rates below `cap` in ascending order and keeps the last one
// whose diagonal mean stays >= knee * (diagonal mean at p = 0), stopping at
// the first rate that falls below. Falls back to the smallest nonzero rate
// if even that one degrades.
RateSelection select_dropout_rate(const SweepResult& sweep, double knee = 0.95, double cap = 0.5);

// ------------------------------------------------------------ field scan

struct GridBounds {
    double x_min = -1.2;
    double x_max = 1.2;
    double y_min = -1.2;
    double y_max = 1.2;
};

struct FieldScan {
    GridBounds bounds;
    std::size_t resolution = 0;  // cells per axis
    Vector xs;                   // cell centres
    Vector ys;
    std::vector<PredictiveSummary> cells;  // row-major, y outer

    const PredictiveSummary& at(std::size_t ix, std::size_t iy) const { return cells[iy * xs.size() + ix]; }
    // x,y,mean_1,variance_1,proximity (proximity = 1 - 2|mean_1 - 0.5|)
    std::string to_csv() const;
    // ny x nx matrices for rendering.
    CsvTable mean_table() const;
    CsvTable proximity_table() const;
    CsvTable variance_table() const;
};

// Evaluates mc_predict at every cell centre; cell i uses rng.derive(i).
// If `input_transform` is given, grid coordinates are standardized with it
// before entering the network.
FieldScan field_scan_2d(const NetworkParams& params, const GridBounds& bounds, std::size_t resolution,
                        std::size_t samples, const RngStream& rng,
                        const Standardization* input_transform = nullptr, std::size_t threads = 1);

// True when no 4-connected run of cells with one predicted class links a
// cell with radius < inner_radius to a cell with radius > outer_radius,
// i.e. the decision boundary encloses the inner disk.
bool decision_boundary_separates(const FieldScan& scan, double inner_radius, double outer_radius);

// Mean class-1 variance over the cells whose centre radius lies in [r_lo, r_hi).
double mean_variance_in_band(const FieldScan& scan, double r_lo, double r_hi);

// --------------------------------------------------------- severity grid

struct SeverityPanel {
    int severity = 0;
    HeatmapRows baseline;  // deterministic softmax of the non-dropout network
    HeatmapRows mc;        // MC-dropout predictive mean / variance
};

struct SeverityGrid {
    std::vector<SeverityPanel> panels;  // SL1..SL4 present in the data
    DiagnosisTable diagnosis;           // fault conditions at SL1 and SL2
};

// test_data holds NM rows plus faults at any of SL1..SL4.
SeverityGrid severity_grid(const NetworkParams& baseline, const NetworkParams& dropout_model,
                           const LabeledDataset& test_data, std::size_t samples, const RngStream& rng,
                           const DiagnosisThresholds& thresholds = {}, std::size_t threads = 1);

// Heatmap rows as a CSV table (condition column + one column per class).
CsvTable heatmap_table(const HeatmapRows& rows, const Matrix& values, const std::vector<std::string>& class_names);

}  // namespace mcdrop
