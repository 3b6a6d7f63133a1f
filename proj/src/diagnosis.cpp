#include "mcdrop/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcdrop/errors.hpp"

namespace mcdrop {

void DiagnosisThresholds::validate() const {
    if (!(probability > 0.0 && probability < 1.0)) {
        throw InvalidArgument("diagnosis: probability threshold must lie in (0, 1)");
    }
    if (!(std_ratio > 0.0 && std_ratio < 1.0)) {
        throw InvalidArgument("diagnosis: std-ratio threshold must lie in (0, 1)");
    }
}

bool DiagnosisReport::contains(std::size_t label) const {
    return std::find(candidate_labels.begin(), candidate_labels.end(), label) != candidate_labels.end();
}

std::string trigger_name(Trigger t) {
    switch (t) {
        case Trigger::None:
            return "none";
        case Trigger::Probability:
            return "prob";
        case Trigger::Variance:
            return "variance";
        case Trigger::Both:
            return "both";
    }
    return "none";
}

namespace {

void check_distribution(std::span<const double> probs) {
    if (probs.size() < 2 || !all_finite(probs)) {
        throw InvalidArgument("diagnosis: probabilities must be a finite vector of length >= 2");
    }
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0) {
            throw InvalidArgument("diagnosis: negative probability");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw InvalidArgument("diagnosis: probabilities do not sum to 1");
    }
}

void collect_candidates(DiagnosisReport& report) {
    for (std::size_t i = 0; i < report.evidence.size(); ++i) {
        if (report.evidence[i].triggered_by != Trigger::None) {
            report.candidate_labels.push_back(i);
        }
    }
    std::stable_sort(report.candidate_labels.begin(), report.candidate_labels.end(),
                     [&](std::size_t a, std::size_t b) {
                         return report.evidence[a].mean_prob > report.evidence[b].mean_prob;
                     });
}

}  // namespace

DiagnosisReport diagnose_softmax(std::span<const double> probs, double prob_threshold) {
    DiagnosisReport report;
    report.thresholds.probability = prob_threshold;
    report.thresholds.validate();
    check_distribution(probs);
    report.evidence.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        report.evidence[i].mean_prob = probs[i];
        report.evidence[i].triggered_by = probs[i] > prob_threshold ? Trigger::Probability : Trigger::None;
    }
    collect_candidates(report);
    return report;
}

DiagnosisReport diagnose_mc(const PredictiveSummary& summary, const DiagnosisThresholds& thresholds) {
    thresholds.validate();
    check_distribution(summary.mean);
    if (summary.stddev.size() != summary.mean.size()) {
        throw DimensionError("diagnose_mc: mean and std lengths differ");
    }
    DiagnosisReport report;
    report.thresholds = thresholds;
    report.variance_rule = true;

    double denom = 0.0;
    if (thresholds.ratio_mode == StdRatioMode::Sum) {
        denom = std::accumulate(summary.stddev.begin(), summary.stddev.end(), 0.0);
    } else {
        denom = *std::max_element(summary.stddev.begin(), summary.stddev.end());
    }

    report.evidence.resize(summary.mean.size());
    for (std::size_t i = 0; i < summary.mean.size(); ++i) {
        LabelEvidence& ev = report.evidence[i];
        ev.mean_prob = summary.mean[i];
        ev.std_ratio = denom > 0.0 ? summary.stddev[i] / denom : 0.0;
        const bool by_prob = ev.mean_prob > thresholds.probability;
        const bool by_var = denom > 0.0 && ev.std_ratio > thresholds.std_ratio;
        ev.triggered_by = by_prob && by_var ? Trigger::Both
                          : by_prob         ? Trigger::Probability
                          : by_var          ? Trigger::Variance
                                            : Trigger::None;
    }
    collect_candidates(report);
    return report;
}

std::vector<std::size_t> majority_set(std::span<const DiagnosisReport> reports) {
    if (reports.empty()) {
        return {};
    }
    std::size_t classes = 0;
    for (const auto& r : reports) {
        classes = std::max(classes, r.evidence.size());
    }
    std::vector<std::size_t> votes(classes, 0);
    for (const auto& r : reports) {
        for (std::size_t l : r.candidate_labels) {
            ++votes.at(l);
        }
    }
    std::vector<std::size_t> set;
    for (std::size_t l = 0; l < classes; ++l) {
        if (2 * votes[l] > reports.size()) {
            set.push_back(l);
        }
    }
    return set;
}

DiagnosisTable diagnosis_table(std::span<const ConditionReports> groups) {
    DiagnosisTable table;
    for (const auto& g : groups) {
        DiagnosisRow row;
        row.condition = g.condition;
        row.true_label = g.true_label;
        row.softmax_set = majority_set(g.softmax_reports);
        row.mc_set = majority_set(g.mc_reports);
        auto has = [&](const std::vector<std::size_t>& s) {
            return std::find(s.begin(), s.end(), g.true_label) != s.end();
        };
        row.softmax_hit = has(row.softmax_set);
        row.mc_hit = has(row.mc_set);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::size_t DiagnosisTable::softmax_hits() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const DiagnosisRow& r) { return r.softmax_hit; }));
}

std::size_t DiagnosisTable::mc_hits() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const DiagnosisRow& r) { return r.mc_hit; }));
}

std::string DiagnosisTable::to_csv(const std::vector<std::string>& class_names) const {
    auto render = [&](const std::vector<std::size_t>& set, std::size_t truth) {
        std::string out;
        for (std::size_t l : set) {
            if (!out.empty()) {
                out += ' ';
            }
            const std::string& name = l < class_names.size() ? class_names[l] : std::to_string(l);
            out += l == truth ? "**" + name + "**" : name;
        }
        return out;
    };
    std::ostringstream csv;
    csv << "condition,true_label,non_dropout,mc_dropout,non_dropout_hit,mc_dropout_hit\n";
    for (const auto& r : rows) {
        const std::string truth =
            r.true_label < class_names.size() ? class_names[r.true_label] : std::to_string(r.true_label);
        csv << r.condition << ',' << truth << ',' << render(r.softmax_set, r.true_label) << ','
            << render(r.mc_set, r.true_label) << ',' << (r.softmax_hit ? 1 : 0) << ',' << (r.mc_hit ? 1 : 0)
            << '\n';
    }
    return csv.str();
}

}  // namespace mcdrop
