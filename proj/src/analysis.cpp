#include "mcdrop/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>

#include "mcdrop/errors.hpp"

namespace mcdrop {

// ------------------------------------------------------------------- LDA

ScatterMatrices scatter_matrices(const Matrix& features, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (n == 0 || labels.size() != n) {
        throw DimensionError("scatter_matrices: need one label per row");
    }
    Matrix class_sum(num_classes, d);
    std::vector<std::size_t> counts(num_classes, 0);
    Vector total(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= num_classes) {
            throw InvalidArgument("scatter_matrices: label out of range");
        }
        ++counts[labels[i]];
        for (std::size_t j = 0; j < d; ++j) {
            class_sum(labels[i], j) += features(i, j);
            total[j] += features(i, j);
        }
    }
    for (double& t : total) {
        t /= static_cast<double>(n);
    }
    Matrix means(num_classes, d);
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t j = 0; j < d && counts[c] > 0; ++j) {
            means(c, j) = class_sum(c, j) / static_cast<double>(counts[c]);
        }
    }

    ScatterMatrices s{Matrix(d, d), Matrix(d, d)};
    Vector dev(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            dev[j] = features(i, j) - means(labels[i], j);
        }
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                s.within(a, b) += dev[a] * dev[b];
            }
        }
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) {
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) {
            dev[j] = means(c, j) - total[j];
        }
        const double w = static_cast<double>(counts[c]);
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                s.between(a, b) += w * dev[a] * dev[b];
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : s.within.values()) {
        v *= inv_n;
    }
    for (double& v : s.between.values()) {
        v *= inv_n;
    }
    return s;
}

double fisher_criterion(const Matrix& features, std::span<const std::size_t> labels, std::size_t num_classes) {
    const ScatterMatrices s = scatter_matrices(features, labels, num_classes);
    const std::size_t d = features.cols();
    double trace = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const Vector col = solve_spd(s.within, s.between.column(j));
        trace += col[j];
    }
    return trace;
}

LdaProjection lda_fit(const LabeledDataset& data, std::size_t k) {
    data.validate();
    const std::size_t c = data.num_classes();
    const std::size_t d = data.dim();
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t l : data.labels) {
        ++counts[l];
    }
    for (std::size_t i = 0; i < c; ++i) {
        if (counts[i] < 2) {
            throw InvalidArgument("lda: class " + data.class_names[i] + " has fewer than 2 rows");
        }
    }
    if (k < 1 || k > std::min(c - 1, d)) {
        throw InvalidArgument("lda: k must lie in [1, min(C - 1, d)] = [1, " +
                              std::to_string(std::min(c - 1, d)) + "]");
    }

    const ScatterMatrices s = scatter_matrices(data.features, data.labels, c);
    const EigenDecomposition eig = symmetric_generalized_eig(s.between, s.within);

    LdaProjection proj;
    proj.ridge_applied = eig.ridge_applied;
    proj.projection = Matrix(d, k);
    proj.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            proj.projection(r, j) = eig.vectors(r, j);
        }
    }

    const Matrix z = lda_transform(proj, data.features);
    proj.class_means = Matrix(c, k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            proj.class_means(data.labels[i], j) += z(i, j);
        }
    }
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            proj.class_means(i, j) /= static_cast<double>(counts[i]);
        }
    }

    std::ostringstream fp;
    for (double v : data.features.values()) {
        fp << format_double(v) << ',';
    }
    for (std::size_t l : data.labels) {
        fp << l << ';';
    }
    proj.fingerprint = fnv1a_hex(fp.str());
    return proj;
}

Matrix lda_transform(const LdaProjection& proj, const Matrix& x) {
    if (x.cols() != proj.projection.rows()) {
        throw DimensionError("lda_transform: expected " + std::to_string(proj.projection.rows()) +
                             " features, got " + std::to_string(x.cols()));
    }
    return matmul(x, proj.projection);
}

// ----------------------------------------------------------------- sweep

std::vector<ConditionGroup> group_by_condition(const LabeledDataset& data,
                                               std::span<const PredictiveSummary> summaries) {
    if (summaries.size() != data.size()) {
        throw DimensionError("group_by_condition: need one summary per row");
    }
    std::vector<ConditionGroup> groups;
    std::map<std::pair<std::size_t, int>, std::size_t> index;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto key = std::make_pair(data.labels[i], data.severity[i]);
        auto it = index.find(key);
        if (it == index.end()) {
            ConditionGroup g;
            g.true_label = data.labels[i];
            g.name = data.severity[i] == 0 ? data.class_names[data.labels[i]]
                                           : data.class_names[data.labels[i]] + "-SL" +
                                                 std::to_string(data.severity[i]);
            it = index.emplace(key, groups.size()).first;
            groups.push_back(std::move(g));
        }
        groups[it->second].members.push_back(summaries[i]);
    }
    return groups;
}

double summary_accuracy(const LabeledDataset& data, std::span<const PredictiveSummary> summaries) {
    if (summaries.size() != data.size() || data.size() == 0) {
        throw DimensionError("summary_accuracy: need one summary per row");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        hits += summaries[i].predicted_class == data.labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

SweepResult sweep_dropout(std::span<const double> rates, const NetworkConfig& net_config,
                          const TrainConfig& train_config, const LabeledDataset& train_data,
                          const LabeledDataset& eval_data, const SweepOptions& options) {
    if (rates.empty()) {
        throw InvalidArgument("sweep: no dropout rates");
    }
    for (double r : rates) {
        if (!(r >= 0.0 && r < 1.0)) {
            throw InvalidArgument("sweep: dropout rate " + format_double(r) + " outside [0, 1)");
        }
    }
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (std::find(rates.begin(), rates.begin() + static_cast<std::ptrdiff_t>(i), rates[i]) !=
            rates.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw InvalidArgument("sweep: dropout rate " + format_double(rates[i]) + " listed twice");
        }
    }
    train_config.validate();
    eval_data.validate();
    const RngStream mc_rng(options.mc_seed, 0x5EE9);

    SweepResult result;
    for (double rate : rates) {
        SweepEntry entry;
        entry.rate = rate;
        NetworkConfig cfg = net_config;
        cfg.dropout_rate = rate;
        try {
            TrainResult trained = train(cfg, train_config, train_data);
            entry.trace = std::move(trained.trace);
            entry.params = std::move(trained.params);
        } catch (const DivergenceError& e) {
            entry.error = e.what();
            result.entries.push_back(std::move(entry));
            continue;
        }
        const auto summaries =
            mc_predict_batch(*entry.params, eval_data.features, options.mc_samples, mc_rng, {}, options.threads);
        entry.accuracy = summary_accuracy(eval_data, summaries);
        const auto groups = group_by_condition(eval_data, summaries);
        entry.rows = mean_class_summary(groups);
        result.entries.push_back(std::move(entry));
    }
    return result;
}

namespace {

RateCurvePoint curve_point(const SweepEntry& e) {
    RateCurvePoint p;
    p.rate = e.rate;
    if (e.error) {
        p.diagonal_mean = std::nan("");
        p.total_variance = std::nan("");
        return p;
    }
    const HeatmapRows& rows = e.rows;
    const std::size_t g = rows.conditions.size();
    double diag = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        diag += rows.mean(i, rows.true_labels[i]);
        for (std::size_t j = 0; j < rows.variance.cols(); ++j) {
            var += rows.variance(i, j);
        }
    }
    p.diagonal_mean = diag / static_cast<double>(g);
    p.total_variance = var / static_cast<double>(g);
    return p;
}

}  // namespace

RateSelection select_dropout_rate(const SweepResult& sweep, double knee, double cap) {
    if (!(knee > 0.0 && knee <= 1.0)) {
        throw InvalidArgument("select_dropout_rate: knee must lie in (0, 1]");
    }
    std::vector<const SweepEntry*> entries;
    for (const auto& e : sweep.entries) {
        entries.push_back(&e);
    }
    std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->rate < b->rate; });
    if (entries.size() < 3 || entries.front()->rate != 0.0) {
        throw InvalidArgument("select_dropout_rate: need at least three rates including 0");
    }
    if (entries.front()->error) {
        throw InvalidArgument("select_dropout_rate: the p = 0 baseline failed to train");
    }

    RateSelection sel;
    sel.knee = knee;
    sel.cap = cap;
    for (const auto* e : entries) {
        sel.curve.push_back(curve_point(*e));
    }
    const double base = sel.curve.front().diagonal_mean;
    for (auto& p : sel.curve) {
        p.relative_to_baseline = p.diagonal_mean / base;
        p.passes = std::isfinite(p.diagonal_mean) && p.diagonal_mean >= knee * base;
    }

    std::optional<double> chosen;
    std::optional<double> smallest;
    for (const auto& p : sel.curve) {
        if (p.rate == 0.0 || p.rate >= cap) {
            continue;
        }
        if (!smallest) {
            smallest = p.rate;
        }
        if (!p.passes) {
            break;
        }
        chosen = p.rate;
    }
    if (!smallest) {
        throw InvalidArgument("select_dropout_rate: no nonzero rate below the cap " + format_double(cap));
    }
    std::ostringstream why;
    if (chosen) {
        sel.rate = *chosen;
        why << "largest rate below " << format_double(cap) << " whose true-class confidence stays within "
            << format_double(knee) << " of the p=0 baseline (" << format_double(base) << ")";
    } else {
        sel.rate = *smallest;
        sel.fallback = true;
        why << "every nonzero rate falls below " << format_double(knee)
            << " of the p=0 baseline; using the smallest nonzero rate";
    }
    sel.rationale = why.str();
    return sel;
}

// ------------------------------------------------------------ field scan

namespace {

Vector cell_centres(double lo, double hi, std::size_t n) {
    Vector out(n);
    const double step = (hi - lo) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lo + (static_cast<double>(i) + 0.5) * step;
    }
    return out;
}

double proximity(const PredictiveSummary& s) {
    return 1.0 - 2.0 * std::abs(s.mean[1] - 0.5);
}

CsvTable field_table(const FieldScan& scan, double (*value)(const PredictiveSummary&)) {
    CsvTable t;
    const std::size_t nx = scan.xs.size();
    const std::size_t ny = scan.ys.size();
    t.header.push_back("y\\x");
    for (double x : scan.xs) {
        t.header.push_back(format_double(x));
    }
    t.values = Matrix(ny, nx);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        t.row_names.push_back(format_double(scan.ys[iy]));
        for (std::size_t ix = 0; ix < nx; ++ix) {
            t.values(iy, ix) = value(scan.at(ix, iy));
        }
    }
    return t;
}

}  // namespace

std::string FieldScan::to_csv() const {
    std::ostringstream out;
    out << "x,y,mean_1,variance_1,proximity\n";
    for (std::size_t iy = 0; iy < ys.size(); ++iy) {
        for (std::size_t ix = 0; ix < xs.size(); ++ix) {
            const auto& s = at(ix, iy);
            out << format_double(xs[ix]) << ',' << format_double(ys[iy]) << ',' << format_double(s.mean[1]) << ','
                << format_double(s.variance[1]) << ',' << format_double(proximity(s)) << '\n';
        }
    }
    return out.str();
}

CsvTable FieldScan::mean_table() const {
    return field_table(*this, [](const PredictiveSummary& s) { return s.mean[1]; });
}

CsvTable FieldScan::proximity_table() const {
    return field_table(*this, proximity);
}

CsvTable FieldScan::variance_table() const {
    return field_table(*this, [](const PredictiveSummary& s) { return s.variance[1]; });
}

FieldScan field_scan_2d(const NetworkParams& params, const GridBounds& bounds, std::size_t resolution,
                        std::size_t samples, const RngStream& rng, const Standardization* input_transform,
                        std::size_t threads) {
    if (params.config.input_dim != 2) {
        throw DimensionError("field_scan_2d: network takes " + std::to_string(params.config.input_dim) +
                             " inputs, the scan needs 2");
    }
    if (params.config.num_classes < 2) {
        throw DimensionError("field_scan_2d: need at least two classes");
    }
    if (resolution < 2) {
        throw InvalidArgument("field_scan_2d: resolution must be at least 2");
    }
    if (!(bounds.x_min < bounds.x_max && bounds.y_min < bounds.y_max)) {
        throw InvalidArgument("field_scan_2d: empty bounds");
    }
    FieldScan scan;
    scan.bounds = bounds;
    scan.resolution = resolution;
    scan.xs = cell_centres(bounds.x_min, bounds.x_max, resolution);
    scan.ys = cell_centres(bounds.y_min, bounds.y_max, resolution);
    Matrix points(resolution * resolution, 2);
    for (std::size_t iy = 0; iy < resolution; ++iy) {
        for (std::size_t ix = 0; ix < resolution; ++ix) {
            points(iy * resolution + ix, 0) = scan.xs[ix];
            points(iy * resolution + ix, 1) = scan.ys[iy];
        }
    }
    if (input_transform != nullptr) {
        points = apply_standardization(*input_transform, points);
    }
    scan.cells = mc_predict_batch(params, points, samples, rng, {}, threads);
    return scan;
}

bool decision_boundary_separates(const FieldScan& scan, double inner_radius, double outer_radius) {
    const std::size_t nx = scan.xs.size();
    const std::size_t ny = scan.ys.size();
    auto radius = [&](std::size_t ix, std::size_t iy) { return std::hypot(scan.xs[ix], scan.ys[iy]); };
    std::vector<char> seen(nx * ny, 0);
    std::deque<std::size_t> queue;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            if (radius(ix, iy) < inner_radius) {
                seen[iy * nx + ix] = 1;
                queue.push_back(iy * nx + ix);
            }
        }
    }
    if (queue.empty()) {
        throw InvalidArgument("decision_boundary_separates: no cell inside the inner radius");
    }
    // Flood through 4-neighbours that share the predicted class; reaching the
    // outer region means no class switch lies in between.
    while (!queue.empty()) {
        const std::size_t cell = queue.front();
        queue.pop_front();
        const std::size_t ix = cell % nx;
        const std::size_t iy = cell / nx;
        if (radius(ix, iy) > outer_radius) {
            return false;
        }
        const std::size_t cls = scan.cells[cell].predicted_class;
        const std::pair<long, long> steps[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (auto [dx, dy] : steps) {
            const long jx = static_cast<long>(ix) + dx;
            const long jy = static_cast<long>(iy) + dy;
            if (jx < 0 || jy < 0 || jx >= static_cast<long>(nx) || jy >= static_cast<long>(ny)) {
                continue;
            }
            const std::size_t next = static_cast<std::size_t>(jy) * nx + static_cast<std::size_t>(jx);
            if (!seen[next] && scan.cells[next].predicted_class == cls) {
                seen[next] = 1;
                queue.push_back(next);
            }
        }
    }
    return true;
}

double mean_variance_in_band(const FieldScan& scan, double r_lo, double r_hi) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t iy = 0; iy < scan.ys.size(); ++iy) {
        for (std::size_t ix = 0; ix < scan.xs.size(); ++ix) {
            const double r = std::hypot(scan.xs[ix], scan.ys[iy]);
            if (r >= r_lo && r < r_hi) {
                total += scan.at(ix, iy).variance[1];
                ++count;
            }
        }
    }
    if (count == 0) {
        throw InvalidArgument("mean_variance_in_band: no cells in band");
    }
    return total / static_cast<double>(count);
}

// --------------------------------------------------------- severity grid

SeverityGrid severity_grid(const NetworkParams& baseline, const NetworkParams& dropout_model,
                           const LabeledDataset& test_data, std::size_t samples, const RngStream& rng,
                           const DiagnosisThresholds& thresholds, std::size_t threads) {
    test_data.validate();
    thresholds.validate();
    if (baseline.config.num_classes != test_data.num_classes() ||
        dropout_model.config.num_classes != test_data.num_classes()) {
        throw DimensionError("severity_grid: model and data class counts differ");
    }
    const auto base = mc_predict_batch(baseline, test_data.features, 1, rng, {}, threads);
    const auto mc = mc_predict_batch(dropout_model, test_data.features, samples, rng, {}, threads);

    auto rows_for = [&](std::size_t label, int sev) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < test_data.size(); ++i) {
            if (test_data.labels[i] == label && test_data.severity[i] == sev) {
                out.push_back(i);
            }
        }
        return out;
    };
    auto condition_name = [&](std::size_t label, int sev) {
        return sev == 0 ? test_data.class_names[label] : test_data.class_names[label] + "-SL" + std::to_string(sev);
    };

    SeverityGrid grid;
    const auto normal_rows = rows_for(0, 0);
    for (int sev = 1; sev <= kMaxSeverity; ++sev) {
        std::vector<ConditionGroup> base_groups;
        std::vector<ConditionGroup> mc_groups;
        for (std::size_t c = 0; c < test_data.num_classes(); ++c) {
            const auto rows = c == 0 ? normal_rows : rows_for(c, sev);
            if (rows.empty()) {
                continue;
            }
            ConditionGroup b{condition_name(c, c == 0 ? 0 : sev), c, {}};
            ConditionGroup m{b.name, c, {}};
            for (std::size_t i : rows) {
                b.members.push_back(base[i]);
                m.members.push_back(mc[i]);
            }
            base_groups.push_back(std::move(b));
            mc_groups.push_back(std::move(m));
        }
        const bool has_fault = base_groups.size() > (normal_rows.empty() ? 0 : 1);
        if (!has_fault) {
            continue;
        }
        grid.panels.push_back({sev, mean_class_summary(base_groups), mean_class_summary(mc_groups)});
    }
    if (grid.panels.empty()) {
        throw InvalidArgument("severity_grid: no fault rows at SL1..SL4");
    }

    std::vector<ConditionReports> reports;
    for (int sev = 1; sev <= 2; ++sev) {
        for (std::size_t c = 1; c < test_data.num_classes(); ++c) {
            const auto rows = rows_for(c, sev);
            if (rows.empty()) {
                continue;
            }
            ConditionReports cr;
            cr.condition = condition_name(c, sev);
            cr.true_label = c;
            for (std::size_t i : rows) {
                cr.softmax_reports.push_back(diagnose_softmax(base[i].mean, thresholds.probability));
                cr.mc_reports.push_back(diagnose_mc(mc[i], thresholds));
            }
            reports.push_back(std::move(cr));
        }
    }
    grid.diagnosis = diagnosis_table(reports);
    return grid;
}

CsvTable heatmap_table(const HeatmapRows& rows, const Matrix& values, const std::vector<std::string>& class_names) {
    if (values.rows() != rows.conditions.size() || values.cols() != class_names.size()) {
        throw DimensionError("heatmap_table: shape does not match conditions x classes");
    }
    CsvTable t;
    t.header.push_back("condition");
    t.header.insert(t.header.end(), class_names.begin(), class_names.end());
    t.row_names = rows.conditions;
    t.values = values;
    return t;
}

}  // namespace mcdrop
