#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mcdrop/math_core.hpp"

namespace mcdrop {

// Severity tag: 0 is fault-free (NM), 1..4 are SL1..SL4.
inline constexpr int kMaxSeverity = 4;
inline constexpr const char* kNormalClassName = "NM";

struct Standardization {
    Vector mean;
    Vector stddev;  // constant columns keep 1

    friend bool operator==(const Standardization&, const Standardization&) = default;
};

struct LabeledDataset {
    Matrix features;  // n x d
    std::vector<std::size_t> labels;
    std::vector<int> severity;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::optional<Standardization> standardization;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::size_t num_classes() const noexcept { return class_names.size(); }

    // Throws FormatError when any structural invariant is broken.
    void validate() const;

    LabeledDataset subset(const std::vector<std::size_t>& rows) const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Two-class disk/annulus problem: NM inside r < 0.3, severe faults on
// 0.7 < r < 1.0 (severity 4) and unseen intermediate faults on
// 0.3 <= r <= 0.7 (severity 2). Points are uniform in area.
LabeledDataset gen_toy2d(std::size_t n_per_region, std::uint64_t seed);

inline constexpr double kToyHealthyRadius = 0.3;
inline constexpr double kToySevereRadius = 0.7;
inline constexpr double kToyOuterRadius = 1.0;

// Fault order in generated chiller data; class 0 is NM.
inline const std::vector<std::string>& chiller_fault_names() {
    static const std::vector<std::string> names{"FWE", "FWC", "RL", "RO", "CF", "NC"};
    return names;
}

// The sixteen steady-state sensor channels of the chiller feature set.
const std::vector<std::string>& chiller_feature_names();

struct ChillerSynthConfig {
    std::size_t samples_per_condition = 300; // per (operating condition, class, severity)
    std::size_t operating_conditions = 3;    // at most 27
    std::uint64_t direction_seed = 1043;
    // Full-severity (SL4) displacement per fault, in noise units, ordered as
    // chiller_fault_names().
    std::vector<double> fault_magnitudes{12.0, 11.0, 6.0, 6.5, 6.2, 10.0};
    // Isotropic noise per class (NM first).
    std::vector<double> noise_scale{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    // Fraction of the full displacement reached at SL1..SL4.
    std::vector<double> severity_profile{0.25, 0.5, 0.75, 1.0};
    // Faults whose signatures stay close to normal operation.
    std::vector<bool> near_fault{false, false, true, true, true, false};
    // Spread of operating-condition base points, in noise units.
    double condition_spread = 1.0;

    void validate() const;
};

LabeledDataset gen_chiller(const ChillerSynthConfig& config, std::uint64_t seed);

// CSV schema: feature columns, then `label` (class name), then optional
// `severity`. load_csv orders classes by name with NM forced first.
LabeledDataset load_csv(const std::filesystem::path& path);
LabeledDataset parse_csv(std::istream& in);
void save_csv(const LabeledDataset& data, const std::filesystem::path& path);
void write_csv(const LabeledDataset& data, std::ostream& out);

// Human-readable warnings for classes holding < 5% of the rows.
std::vector<std::string> class_balance_warnings(const LabeledDataset& data, double min_fraction = 0.05);

Standardization fit_standardization(const Matrix& features);
Matrix apply_standardization(const Standardization& stats, const Matrix& features);
Vector apply_standardization(const Standardization& stats, std::span<const double> x);
// Fits per-feature statistics on data and applies them.
LabeledDataset standardize(const LabeledDataset& data);
// Applies existing statistics (typically from the training split).
LabeledDataset standardize_with(const LabeledDataset& data, const Standardization& stats);

// Partitions rows by severity tag. Throws InvalidArgument when the sets
// overlap or either side ends up empty.
std::pair<LabeledDataset, LabeledDataset> split_by_severity(const LabeledDataset& data,
                                                            const std::set<int>& train_severities,
                                                            const std::set<int>& test_severities);

LabeledDataset filter_severity(const LabeledDataset& data, const std::set<int>& severities);

}  // namespace mcdrop
