#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcdrop/math_core.hpp"
#include "mcdrop/mc_inference.hpp"

namespace mcdrop {

enum class Trigger { None, Probability, Variance, Both };

// How a class's standard deviation is normalized before comparing it with
// the ratio threshold: against the sum over classes (ratios add up to 1) or
// against the largest class std.
enum class StdRatioMode { Sum, Max };

struct DiagnosisThresholds {
    double probability = 0.2;
    double std_ratio = 0.1;
    StdRatioMode ratio_mode = StdRatioMode::Sum;

    void validate() const;
};

struct LabelEvidence {
    double mean_prob = 0.0;
    double std_ratio = 0.0;
    Trigger triggered_by = Trigger::None;
};

struct DiagnosisReport {
    // Triggered classes, highest mean probability first.
    std::vector<std::size_t> candidate_labels;
    // Evidence for every class, indexed by class id.
    std::vector<LabelEvidence> evidence;
    DiagnosisThresholds thresholds;
    bool variance_rule = false;  // false for plain softmax reports
    std::optional<std::size_t> true_label;

    bool contains(std::size_t label) const;
};

// Classes whose probability exceeds the threshold.
DiagnosisReport diagnose_softmax(std::span<const double> probs, double prob_threshold = 0.2);

// Probability rule on the predictive mean, united with the std-ratio rule.
// When every std is zero the ratio rule contributes nothing.
DiagnosisReport diagnose_mc(const PredictiveSummary& summary, const DiagnosisThresholds& thresholds = {});

std::string trigger_name(Trigger t);

struct ConditionReports {
    std::string condition;
    std::size_t true_label = 0;
    std::vector<DiagnosisReport> softmax_reports;
    std::vector<DiagnosisReport> mc_reports;
};

struct DiagnosisRow {
    std::string condition;
    std::size_t true_label = 0;
    std::vector<std::size_t> softmax_set;  // ascending class id
    std::vector<std::size_t> mc_set;
    bool softmax_hit = false;
    bool mc_hit = false;
};

struct DiagnosisTable {
    std::vector<DiagnosisRow> rows;

    std::size_t softmax_hits() const;
    std::size_t mc_hits() const;
    // condition,true_label,non_dropout,mc_dropout,non_dropout_hit,mc_dropout_hit
    // Sets are space separated with the true label wrapped as **NAME**.
    std::string to_csv(const std::vector<std::string>& class_names) const;
};

// A label enters a condition's set when more than half of the member
// reports contain it. An empty set counts as a miss.
std::vector<std::size_t> majority_set(std::span<const DiagnosisReport> reports);
DiagnosisTable diagnosis_table(std::span<const ConditionReports> groups);

}  // namespace mcdrop
