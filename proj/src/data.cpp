#include "mcdrop/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "mcdrop/errors.hpp"
#include "mcdrop/rng.hpp"
#include "mcdrop/text_format.hpp"

namespace mcdrop {

void LabeledDataset::validate() const {
    const std::size_t n = labels.size();
    if (n == 0) {
        throw FormatError("dataset: no rows");
    }
    if (features.rows() != n || severity.size() != n) {
        throw FormatError("dataset: features, labels and severity disagree on row count");
    }
    if (feature_names.size() != features.cols()) {
        throw FormatError("dataset: feature name count does not match feature columns");
    }
    if (class_names.size() < 2) {
        throw FormatError("dataset: need at least two classes");
    }
    const bool has_nm = class_names.front() == kNormalClassName;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= class_names.size()) {
            throw FormatError("dataset: label out of range at row " + std::to_string(i));
        }
        if (severity[i] < 0 || severity[i] > kMaxSeverity) {
            throw FormatError("dataset: severity out of range at row " + std::to_string(i));
        }
        const bool is_nm = has_nm && labels[i] == 0;
        if ((severity[i] == 0) != is_nm) {
            throw FormatError("dataset: severity 0 must coincide with the NM class (row " +
                              std::to_string(i) + ")");
        }
    }
    if (!all_finite(features.values())) {
        throw FormatError("dataset: non-finite feature value");
    }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
    if (rows.empty()) {
        throw InvalidArgument("dataset subset: no rows selected");
    }
    LabeledDataset out;
    out.features = Matrix(rows.size(), dim());
    out.labels.reserve(rows.size());
    out.severity.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const std::size_t r = rows[k];
        std::copy(features.row(r).begin(), features.row(r).end(), out.features.row(k).begin());
        out.labels.push_back(labels[r]);
        out.severity.push_back(severity[r]);
    }
    out.feature_names = feature_names;
    out.class_names = class_names;
    out.standardization = standardization;
    return out;
}

// ---------------------------------------------------------------- generators

LabeledDataset gen_toy2d(std::size_t n_per_region, std::uint64_t seed) {
    if (n_per_region == 0) {
        throw InvalidArgument("gen_toy2d: n_per_region must be positive");
    }
    RngStream rng(seed, /*stream_id=*/0x70F);
    LabeledDataset data;
    data.features = Matrix(3 * n_per_region, 2);
    data.feature_names = {"x1", "x2"};
    data.class_names = {kNormalClassName, "FAULT"};

    struct Region {
        double r_lo;
        double r_hi;
        bool closed;  // intermediate band includes both radii
        std::size_t label;
        int severity;
    };
    const Region regions[] = {
        {0.0, kToyHealthyRadius, false, 0, 0},
        {kToySevereRadius, kToyOuterRadius, false, 1, kMaxSeverity},
        {kToyHealthyRadius, kToySevereRadius, true, 1, 2},
    };

    std::size_t row = 0;
    for (const Region& region : regions) {
        for (std::size_t k = 0; k < n_per_region; ++k, ++row) {
            double x = 0.0;
            double y = 0.0;
            for (;;) {
                const double u = rng.uniform();
                const double r = std::sqrt(region.r_lo * region.r_lo +
                                           u * (region.r_hi * region.r_hi - region.r_lo * region.r_lo));
                const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
                x = r * std::cos(theta);
                y = r * std::sin(theta);
                // Reject on the realized norm so rounding never leaves the band.
                const double rr = std::hypot(x, y);
                const bool inside = region.closed ? (rr >= region.r_lo && rr <= region.r_hi)
                                                  : (rr > region.r_lo || region.r_lo == 0.0) && rr < region.r_hi;
                if (inside) {
                    break;
                }
            }
            data.features(row, 0) = x;
            data.features(row, 1) = y;
            data.labels.push_back(region.label);
            data.severity.push_back(region.severity);
        }
    }
    return data;
}

const std::vector<std::string>& chiller_feature_names() {
    static const std::vector<std::string> names{
        "TEI",     "TEO",   "TCI",     "TCO",     "Cond_Tons", "Cooling_Tons", "kW",     "FWC",
        "FWE",     "PRE",   "PRC",     "TRC_sub", "T_suc",     "Tsh_suc",      "TR_dis", "Tsh_dis"};
    return names;
}

namespace {

// Nominal steady-state operating point and spread per sensor; the latent
// model lives in noise units and is mapped onto these.
struct SensorScale {
    double nominal;
    double unit;
};

const std::vector<SensorScale>& chiller_sensor_scales() {
    static const std::vector<SensorScale> scales{
        {54.6, 1.2},  {44.5, 0.8},  {85.0, 1.5}, {94.5, 1.5}, {82.0, 4.0}, {70.0, 4.0},
        {61.0, 3.0},  {270.0, 6.0}, {216.0, 5.0}, {50.5, 1.5}, {131.0, 3.0}, {7.5, 0.6},
        {42.5, 0.9},  {1.8, 0.4},   {121.0, 2.5}, {20.5, 1.2}};
    return scales;
}

}  // namespace

void ChillerSynthConfig::validate() const {
    const std::size_t faults = chiller_fault_names().size();
    if (samples_per_condition == 0) {
        throw InvalidArgument("chiller config: samples_per_condition must be positive");
    }
    if (operating_conditions == 0 || operating_conditions > 27) {
        throw InvalidArgument("chiller config: operating_conditions must lie in [1, 27]");
    }
    if (fault_magnitudes.size() != faults || near_fault.size() != faults) {
        throw InvalidArgument("chiller config: need one magnitude and one near flag per fault");
    }
    if (noise_scale.size() != faults + 1) {
        throw InvalidArgument("chiller config: need one noise scale per class");
    }
    if (severity_profile.size() != static_cast<std::size_t>(kMaxSeverity)) {
        throw InvalidArgument("chiller config: severity profile needs four levels");
    }
    for (std::size_t s = 0; s < severity_profile.size(); ++s) {
        if (!(severity_profile[s] > 0.0) || (s > 0 && !(severity_profile[s] > severity_profile[s - 1]))) {
            throw InvalidArgument("chiller config: severity profile must be positive and strictly increasing");
        }
    }
    for (double m : fault_magnitudes) {
        if (!(m > 0.0)) {
            throw InvalidArgument("chiller config: fault magnitudes must be positive");
        }
    }
    for (double s : noise_scale) {
        if (!(s > 0.0)) {
            throw InvalidArgument("chiller config: noise scales must be positive");
        }
    }
    if (!(condition_spread >= 0.0)) {
        throw InvalidArgument("chiller config: condition_spread must be non-negative");
    }
    double max_near = 0.0;
    double min_far = INFINITY;
    for (std::size_t f = 0; f < faults; ++f) {
        if (near_fault[f]) {
            max_near = std::max(max_near, fault_magnitudes[f]);
        } else {
            min_far = std::min(min_far, fault_magnitudes[f]);
        }
    }
    if (!(max_near < min_far)) {
        throw InvalidArgument("chiller config: near faults must be displaced less than far faults");
    }
}

LabeledDataset gen_chiller(const ChillerSynthConfig& config, std::uint64_t seed) {
    config.validate();
    const auto& fault_names = chiller_fault_names();
    const auto& scales = chiller_sensor_scales();
    const std::size_t dim = chiller_feature_names().size();
    const std::size_t faults = fault_names.size();

    // Geometry: Gram-Schmidt on Gaussian draws gives orthonormal fault rays.
    RngStream geometry(config.direction_seed, /*stream_id=*/0xD12);
    std::vector<Vector> directions;
    while (directions.size() < faults) {
        Vector v(dim);
        for (double& x : v) {
            x = geometry.normal();
        }
        for (const Vector& u : directions) {
            const double proj = dot(v, u);
            for (std::size_t j = 0; j < dim; ++j) {
                v[j] -= proj * u[j];
            }
        }
        const double len = norm2(v);
        if (len < 1e-6) {
            continue;
        }
        for (double& x : v) {
            x /= len;
        }
        directions.push_back(std::move(v));
    }
    std::vector<Vector> bases(config.operating_conditions, Vector(dim, 0.0));
    for (Vector& b : bases) {
        for (double& x : b) {
            x = config.condition_spread * geometry.normal();
        }
    }

    const std::size_t per = config.samples_per_condition;
    const std::size_t rows = config.operating_conditions * per * (1 + faults * kMaxSeverity);
    LabeledDataset data;
    data.features = Matrix(rows, dim);
    data.feature_names = chiller_feature_names();
    data.class_names.push_back(kNormalClassName);
    data.class_names.insert(data.class_names.end(), fault_names.begin(), fault_names.end());
    data.labels.reserve(rows);
    data.severity.reserve(rows);

    RngStream noise(seed, /*stream_id=*/0xC41);
    std::size_t row = 0;
    auto emit = [&](const Vector& center, std::size_t label, int sev) {
        const double sigma = config.noise_scale[label];
        for (std::size_t k = 0; k < per; ++k, ++row) {
            auto out = data.features.row(row);
            for (std::size_t j = 0; j < dim; ++j) {
                const double latent = center[j] + sigma * noise.normal();
                out[j] = scales[j].nominal + scales[j].unit * latent;
            }
            data.labels.push_back(label);
            data.severity.push_back(sev);
        }
    };

    for (std::size_t c = 0; c < config.operating_conditions; ++c) {
        emit(bases[c], 0, 0);
        for (std::size_t f = 0; f < faults; ++f) {
            for (int s = 1; s <= kMaxSeverity; ++s) {
                const double reach = config.severity_profile[s - 1] * config.fault_magnitudes[f];
                Vector center = bases[c];
                for (std::size_t j = 0; j < dim; ++j) {
                    center[j] += reach * directions[f][j];
                }
                emit(center, f + 1, s);
            }
        }
    }
    return data;
}

// ----------------------------------------------------------------------- CSV

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

}  // namespace

LabeledDataset parse_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            have_header = true;
            break;
        }
    }
    if (!have_header) {
        throw CsvError(CsvErrorKind::EmptyFile, 0, "csv: file is empty");
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }

    const auto header = split_commas(line);
    const auto label_it = std::find(header.begin(), header.end(), "label");
    if (label_it == header.end()) {
        throw CsvError(CsvErrorKind::Schema, line_no, "csv: missing `label` column");
    }
    const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
    if (label_col == 0) {
        throw CsvError(CsvErrorKind::Schema, line_no, "csv: no feature columns before `label`");
    }
    bool has_severity = false;
    if (header.size() == label_col + 2) {
        if (header[label_col + 1] != "severity") {
            throw CsvError(CsvErrorKind::Schema, line_no,
                           "csv: unknown column `" + std::string(header[label_col + 1]) + "` after `label`");
        }
        has_severity = true;
    } else if (header.size() > label_col + 2) {
        throw CsvError(CsvErrorKind::Schema, line_no, "csv: unexpected columns after `label`");
    }
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < label_col; ++c) {
        if (header[c].empty()) {
            throw CsvError(CsvErrorKind::Schema, line_no, "csv: empty feature column name");
        }
        if (header[c] == "severity") {
            throw CsvError(CsvErrorKind::Schema, line_no, "csv: `severity` must follow `label`");
        }
        feature_names.emplace_back(header[c]);
    }

    const std::size_t d = feature_names.size();
    std::vector<double> values;
    std::vector<std::string> raw_labels;
    std::vector<int> severities;
    std::vector<std::size_t> source_lines;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() != header.size()) {
            throw CsvError(CsvErrorKind::MalformedRow, line_no,
                           "csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < d; ++c) {
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                throw CsvError(CsvErrorKind::NonNumeric, line_no,
                               "csv: line " + std::to_string(line_no) + ", column `" + feature_names[c] +
                                   "`: non-numeric value `" + std::string(cells[c]) + "`");
            }
            values.push_back(v);
        }
        if (cells[label_col].empty()) {
            throw CsvError(CsvErrorKind::MalformedRow, line_no,
                           "csv: line " + std::to_string(line_no) + " has an empty label");
        }
        raw_labels.emplace_back(cells[label_col]);
        if (has_severity) {
            const auto cell = cells[label_col + 1];
            int sev = -1;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), sev);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw CsvError(CsvErrorKind::NonNumeric, line_no,
                               "csv: line " + std::to_string(line_no) + ": severity `" + std::string(cell) +
                                   "` is not an integer");
            }
            if (sev < 0 || sev > kMaxSeverity) {
                throw CsvError(CsvErrorKind::MalformedRow, line_no,
                               "csv: line " + std::to_string(line_no) + ": severity out of range");
            }
            severities.push_back(sev);
        }
        source_lines.push_back(line_no);
    }
    if (raw_labels.empty()) {
        throw CsvError(CsvErrorKind::EmptyFile, line_no, "csv: no data rows");
    }

    std::vector<std::string> classes(raw_labels.begin(), raw_labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (auto nm = std::find(classes.begin(), classes.end(), kNormalClassName); nm != classes.end()) {
        std::rotate(classes.begin(), nm, nm + 1);
    }
    if (classes.size() < 2) {
        throw CsvError(CsvErrorKind::Schema, 0, "csv: need at least two distinct labels");
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        index[classes[i]] = i;
    }

    LabeledDataset data;
    data.features = Matrix(raw_labels.size(), d, std::move(values));
    data.feature_names = std::move(feature_names);
    data.class_names = classes;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        const bool is_nm = raw_labels[i] == kNormalClassName;
        data.labels.push_back(index[raw_labels[i]]);
        if (has_severity) {
            if ((severities[i] == 0) != is_nm) {
                throw CsvError(CsvErrorKind::MalformedRow, source_lines[i],
                               "csv: line " + std::to_string(source_lines[i]) +
                                   ": severity 0 must coincide with label NM");
            }
            data.severity.push_back(severities[i]);
        } else {
            // Without tags, labeled faults are treated as fully developed.
            data.severity.push_back(is_nm ? 0 : kMaxSeverity);
        }
    }
    return data;
}

LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_csv(in);
}

void write_csv(const LabeledDataset& data, std::ostream& out) {
    for (const auto& name : data.feature_names) {
        out << name << ',';
    }
    out << "label,severity\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (double v : data.features.row(i)) {
            out << format_double(v) << ',';
        }
        out << data.class_names.at(data.labels[i]) << ',' << data.severity[i] << '\n';
    }
}

void save_csv(const LabeledDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_csv(data, out);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::vector<std::string> class_balance_warnings(const LabeledDataset& data, double min_fraction) {
    std::vector<std::size_t> counts(data.num_classes(), 0);
    for (std::size_t l : data.labels) {
        ++counts.at(l);
    }
    std::vector<std::string> warnings;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double frac = static_cast<double>(counts[c]) / static_cast<double>(data.size());
        if (frac < min_fraction) {
            std::ostringstream msg;
            msg << "class " << data.class_names[c] << " holds " << counts[c] << " of " << data.size()
                << " rows (below " << min_fraction * 100.0 << "%)";
            warnings.push_back(msg.str());
        }
    }
    return warnings;
}

// ------------------------------------------------------------ standardization

Standardization fit_standardization(const Matrix& features) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    Standardization s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 1.0);
    Vector column(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = features(i, j);
        }
        const double mean = pairwise_sum(column) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = features(i, j) - mean;
            column[i] = dv * dv;
        }
        const double sd = std::sqrt(pairwise_sum(column) / static_cast<double>(n));
        s.mean[j] = mean;
        s.stddev[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    return s;
}

Vector apply_standardization(const Standardization& stats, std::span<const double> x) {
    if (x.size() != stats.mean.size()) {
        throw DimensionError("standardization: width mismatch");
    }
    Vector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        out[j] = (x[j] - stats.mean[j]) / stats.stddev[j];
    }
    return out;
}

Matrix apply_standardization(const Standardization& stats, const Matrix& features) {
    if (features.cols() != stats.mean.size()) {
        throw DimensionError("standardization: width mismatch");
    }
    Matrix out(features.rows(), features.cols());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        for (std::size_t j = 0; j < features.cols(); ++j) {
            out(i, j) = (features(i, j) - stats.mean[j]) / stats.stddev[j];
        }
    }
    return out;
}

LabeledDataset standardize(const LabeledDataset& data) {
    return standardize_with(data, fit_standardization(data.features));
}

LabeledDataset standardize_with(const LabeledDataset& data, const Standardization& stats) {
    if (data.standardization) {
        throw InvalidArgument("standardize: dataset is already standardized");
    }
    LabeledDataset out = data;
    out.features = apply_standardization(stats, data.features);
    out.standardization = stats;
    return out;
}

// -------------------------------------------------------------------- splits

LabeledDataset filter_severity(const LabeledDataset& data, const std::set<int>& severities) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (severities.contains(data.severity[i])) {
            rows.push_back(i);
        }
    }
    if (rows.empty()) {
        throw InvalidArgument("filter_severity: no rows with the requested severities");
    }
    return data.subset(rows);
}

std::pair<LabeledDataset, LabeledDataset> split_by_severity(const LabeledDataset& data,
                                                            const std::set<int>& train_severities,
                                                            const std::set<int>& test_severities) {
    for (int s : train_severities) {
        if (test_severities.contains(s)) {
            throw InvalidArgument("split_by_severity: severity " + std::to_string(s) + " is in both sets");
        }
    }
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (train_severities.contains(data.severity[i])) {
            train_rows.push_back(i);
        } else if (test_severities.contains(data.severity[i])) {
            test_rows.push_back(i);
        }
    }
    if (train_rows.empty() || test_rows.empty()) {
        throw InvalidArgument("split_by_severity: empty partition");
    }
    return {data.subset(train_rows), data.subset(test_rows)};
}

}  // namespace mcdrop
