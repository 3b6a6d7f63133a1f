#include "mcdrop/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mcdrop/errors.hpp"
#include "mcdrop/text_format.hpp"

namespace mcdrop {

namespace {

template <typename T>
T field(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) {
        throw FormatError(std::string(where) + ": missing field `" + key + "`");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string(where) + ": field `" + key + "` has the wrong type");
    }
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        rows.push_back(Vector(m.row(r).begin(), m.row(r).end()));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const std::string& where) {
    if (!j.is_array() || j.size() != rows) {
        throw FormatError(where + ": expected " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) {
            throw FormatError(where + ": row " + std::to_string(r) + " should hold " + std::to_string(cols) +
                              " values");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) {
                throw FormatError(where + ": non-numeric weight");
            }
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

}  // namespace

Json config_to_json(const NetworkConfig& config) {
    Json j;
    j["input_dim"] = config.input_dim;
    j["hidden_layers"] = config.hidden_layers;
    j["num_classes"] = config.num_classes;
    j["dropout_rate"] = config.dropout_rate;
    j["init_seed"] = config.init_seed;
    return j;
}

NetworkConfig config_from_json(const Json& j) {
    NetworkConfig c;
    c.input_dim = field<std::size_t>(j, "input_dim", "network config");
    c.hidden_layers = field<std::vector<std::size_t>>(j, "hidden_layers", "network config");
    c.num_classes = field<std::size_t>(j, "num_classes", "network config");
    c.dropout_rate = field<double>(j, "dropout_rate", "network config");
    c.init_seed = field<std::uint64_t>(j, "init_seed", "network config");
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("network config: ") + e.what());
    }
    return c;
}

Json standardization_to_json(const Standardization& s) {
    Json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    return j;
}

Standardization standardization_from_json(const Json& j) {
    Standardization s;
    s.mean = field<Vector>(j, "mean", "standardization");
    s.stddev = field<Vector>(j, "std", "standardization");
    if (s.mean.size() != s.stddev.size()) {
        throw FormatError("standardization: mean and std lengths differ");
    }
    for (double v : s.stddev) {
        if (!(v > 0.0)) {
            throw FormatError("standardization: std entries must be positive");
        }
    }
    return s;
}

Json model_to_json(const ModelFile& model) {
    Json j;
    j["format_version"] = kModelFormatVersion;
    j["config"] = config_to_json(model.params.config);
    Json layers = Json::array();
    for (const auto& layer : model.params.layers) {
        Json l;
        l["weights"] = matrix_to_json(layer.weights);
        l["bias"] = layer.bias;
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    if (!model.feature_names.empty() || !model.class_names.empty() || model.standardization) {
        Json pre;
        pre["feature_names"] = model.feature_names;
        pre["class_names"] = model.class_names;
        pre["standardization"] = model.standardization ? standardization_to_json(*model.standardization) : Json();
        j["preprocessing"] = std::move(pre);
    }
    return j;
}

ModelFile model_from_json(const Json& j) {
    const int version = field<int>(j, "format_version", "model");
    if (version != kModelFormatVersion) {
        throw FormatError("model: unsupported format_version " + std::to_string(version));
    }
    ModelFile model;
    model.params.config = config_from_json(field<Json>(j, "config", "model"));
    const NetworkConfig& cfg = model.params.config;
    const Json layers = field<Json>(j, "layers", "model");
    if (!layers.is_array() || layers.size() != cfg.hidden_layers.size() + 1) {
        throw FormatError("model: expected " + std::to_string(cfg.hidden_layers.size() + 1) + " layers");
    }
    std::size_t fan_in = cfg.input_dim;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const bool output = l == cfg.hidden_layers.size();
        const std::size_t width = output ? cfg.num_classes : cfg.hidden_layers[l];
        const std::string where = "model layer " + std::to_string(l);
        DenseLayer layer;
        layer.weights = matrix_from_json(field<Json>(layers[l], "weights", where.c_str()), width, fan_in, where);
        layer.bias = field<Vector>(layers[l], "bias", where.c_str());
        if (layer.bias.size() != (output ? 0 : width)) {
            throw FormatError(where + ": bias has the wrong length");
        }
        model.params.layers.push_back(std::move(layer));
        fan_in = width;
    }
    if (!model.params.all_finite()) {
        throw FormatError("model: non-finite parameter");
    }
    if (j.contains("preprocessing") && !j["preprocessing"].is_null()) {
        const Json& pre = j["preprocessing"];
        model.feature_names = field<std::vector<std::string>>(pre, "feature_names", "preprocessing");
        model.class_names = field<std::vector<std::string>>(pre, "class_names", "preprocessing");
        if (pre.contains("standardization") && !pre["standardization"].is_null()) {
            model.standardization = standardization_from_json(pre["standardization"]);
            if (model.standardization->mean.size() != cfg.input_dim) {
                throw FormatError("preprocessing: standardization width does not match input_dim");
            }
        }
        if (!model.feature_names.empty() && model.feature_names.size() != cfg.input_dim) {
            throw FormatError("preprocessing: feature_names length does not match input_dim");
        }
        if (!model.class_names.empty() && model.class_names.size() != cfg.num_classes) {
            throw FormatError("preprocessing: class_names length does not match num_classes");
        }
    }
    return model;
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
    write_json(path, model_to_json(model));
}

ModelFile load_model(const std::filesystem::path& path) {
    return model_from_json(read_json(path));
}

Json summary_to_json(const PredictiveSummary& s) {
    Json j;
    j["mean"] = s.mean;
    j["variance"] = s.variance;
    j["std"] = s.stddev;
    j["T"] = s.samples;
    j["predicted_class"] = s.predicted_class;
    return j;
}

PredictiveSummary summary_from_json(const Json& j) {
    PredictiveSummary s;
    s.mean = field<Vector>(j, "mean", "summary");
    s.variance = field<Vector>(j, "variance", "summary");
    s.stddev = field<Vector>(j, "std", "summary");
    s.samples = field<std::size_t>(j, "T", "summary");
    s.predicted_class = field<std::size_t>(j, "predicted_class", "summary");
    if (s.variance.size() != s.mean.size() || s.stddev.size() != s.mean.size()) {
        throw FormatError("summary: vector lengths differ");
    }
    return s;
}

Json report_to_json(const DiagnosisReport& r, const std::vector<std::string>& class_names) {
    auto name = [&](std::size_t l) { return l < class_names.size() ? class_names[l] : std::to_string(l); };
    Json j;
    Json labels = Json::array();
    for (std::size_t l : r.candidate_labels) {
        labels.push_back(name(l));
    }
    j["candidate_labels"] = std::move(labels);
    Json evidence = Json::array();
    for (std::size_t l = 0; l < r.evidence.size(); ++l) {
        Json e;
        e["label"] = name(l);
        e["mean_prob"] = r.evidence[l].mean_prob;
        if (r.variance_rule) {
            e["std_ratio"] = r.evidence[l].std_ratio;
        }
        e["triggered_by"] = trigger_name(r.evidence[l].triggered_by);
        evidence.push_back(std::move(e));
    }
    j["evidence"] = std::move(evidence);
    j["thresholds"] = {{"probability", r.thresholds.probability}};
    if (r.variance_rule) {
        j["thresholds"]["std_ratio"] = r.thresholds.std_ratio;
        j["thresholds"]["ratio_mode"] = r.thresholds.ratio_mode == StdRatioMode::Sum ? "sum" : "max";
    }
    if (r.true_label) {
        j["true_label"] = name(*r.true_label);
        j["hit"] = r.contains(*r.true_label);
    }
    return j;
}

Json selection_to_json(const RateSelection& sel) {
    Json j;
    j["selected_rate"] = sel.rate;
    j["fallback"] = sel.fallback;
    j["knee"] = sel.knee;
    j["cap"] = sel.cap;
    j["rationale"] = sel.rationale;
    Json curve = Json::array();
    for (const auto& p : sel.curve) {
        Json c;
        c["rate"] = p.rate;
        c["diagonal_mean"] = std::isfinite(p.diagonal_mean) ? Json(p.diagonal_mean) : Json();
        c["total_variance"] = std::isfinite(p.total_variance) ? Json(p.total_variance) : Json();
        c["relative_to_baseline"] =
            std::isfinite(p.relative_to_baseline) ? Json(p.relative_to_baseline) : Json();
        c["passes"] = p.passes;
        curve.push_back(std::move(c));
    }
    j["curve"] = std::move(curve);
    return j;
}

std::filesystem::path meta_path_for(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p += ".meta.json";
    return p;
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path) {
    save_csv(data, path);
    Json meta;
    meta["class_names"] = data.class_names;
    meta["feature_names"] = data.feature_names;
    meta["standardization"] = data.standardization ? standardization_to_json(*data.standardization) : Json();
    write_json(meta_path_for(path), meta);
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    LabeledDataset data = load_csv(path);
    const auto meta_path = meta_path_for(path);
    if (!std::filesystem::exists(meta_path)) {
        return data;
    }
    const Json meta = read_json(meta_path);
    const auto classes = field<std::vector<std::string>>(meta, "class_names", "dataset meta");
    const auto features = field<std::vector<std::string>>(meta, "feature_names", "dataset meta");
    if (features != data.feature_names) {
        throw FormatError("dataset meta: feature names do not match " + path.string());
    }
    std::map<std::string, std::size_t> order;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        order.emplace(classes[i], i);
    }
    if (order.size() != classes.size()) {
        throw FormatError("dataset meta: duplicate class names");
    }
    for (std::size_t& l : data.labels) {
        const auto it = order.find(data.class_names[l]);
        if (it == order.end()) {
            throw FormatError("dataset meta: class " + data.class_names[l] + " is not listed");
        }
        l = it->second;
    }
    data.class_names = classes;
    if (meta.contains("standardization") && !meta["standardization"].is_null()) {
        data.standardization = standardization_from_json(meta["standardization"]);
        if (data.standardization->mean.size() != data.dim()) {
            throw FormatError("dataset meta: standardization width does not match the features");
        }
    }
    data.validate();
    return data;
}

std::string dump_json(const Json& j) {
    return j.dump(2) + "\n";
}

Json read_json(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    write_file(path, dump_json(j));
}

}  // namespace mcdrop
