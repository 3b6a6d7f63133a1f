#include "mcdrop/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "mcdrop/analysis.hpp"
#include "mcdrop/data.hpp"
#include "mcdrop/diagnosis.hpp"
#include "mcdrop/errors.hpp"
#include "mcdrop/mc_inference.hpp"
#include "mcdrop/serialize.hpp"
#include "mcdrop/svg.hpp"
#include "mcdrop/text_format.hpp"
#include "mcdrop/trainer.hpp"

namespace mcdrop::cli {

namespace fs = std::filesystem;

namespace {

class ConfigError : public Error {
public:
    using Error::Error;
};

class ReplayMismatch : public Error {
public:
    using Error::Error;
};

// ----------------------------------------------------------- parameters

enum class Kind { Int, Real, Text, Bool, Path, RealList, IntList };

struct Param {
    std::string name;  // JSON key; the flag is --name with '_' -> '-'
    Kind kind;
    Json fallback;     // null: required
    std::string help;
    bool positional = false;
};

std::string flag_name(const std::string& key) {
    std::string out = key;
    std::replace(out.begin(), out.end(), '_', '-');
    return out;
}

std::uint64_t parse_uint(const std::string& text, const std::string& key) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("`" + key + "` expects a non-negative integer, got `" + text + "`");
    }
    return v;
}

double parse_real(const std::string& text, const std::string& key) {
    double v = 0.0;
    if (!parse_double(text, v)) {
        throw ConfigError("`" + key + "` expects a number, got `" + text + "`");
    }
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    if (!cur.empty() || !parts.empty()) {
        parts.push_back(cur);
    }
    return parts;
}

Json from_text(const Param& p, const std::string& text) {
    switch (p.kind) {
        case Kind::Int:
            return parse_uint(text, p.name);
        case Kind::Real:
            return parse_real(text, p.name);
        case Kind::Text:
        case Kind::Path:
            return text;
        case Kind::Bool:
            if (text == "true" || text == "1" || text == "yes") {
                return true;
            }
            if (text == "false" || text == "0" || text == "no") {
                return false;
            }
            throw ConfigError("`" + p.name + "` expects true or false, got `" + text + "`");
        case Kind::RealList: {
            Json arr = Json::array();
            for (const auto& part : split_list(text)) {
                arr.push_back(parse_real(part, p.name));
            }
            return arr;
        }
        case Kind::IntList: {
            Json arr = Json::array();
            for (const auto& part : split_list(text)) {
                arr.push_back(parse_uint(part, p.name));
            }
            return arr;
        }
    }
    return nullptr;
}

Json from_json(const Param& p, const Json& v) {
    auto bad = [&]() -> ConfigError { return ConfigError("config key `" + p.name + "` has the wrong type"); };
    switch (p.kind) {
        case Kind::Int:
            if (!v.is_number_unsigned()) {
                throw bad();
            }
            return v;
        case Kind::Real:
            if (!v.is_number()) {
                throw bad();
            }
            return v.get<double>();
        case Kind::Text:
        case Kind::Path:
            if (!v.is_string()) {
                throw bad();
            }
            return v;
        case Kind::Bool:
            if (!v.is_boolean()) {
                throw bad();
            }
            return v;
        case Kind::RealList:
        case Kind::IntList: {
            if (v.is_string()) {
                return from_text(p, v.get<std::string>());
            }
            if (!v.is_array()) {
                throw bad();
            }
            Json arr = Json::array();
            for (const auto& e : v) {
                if (p.kind == Kind::IntList ? !e.is_number_unsigned() : !e.is_number()) {
                    throw bad();
                }
                arr.push_back(p.kind == Kind::IntList ? e : Json(e.get<double>()));
            }
            return arr;
        }
    }
    return nullptr;
}

// ------------------------------------------------------------- run context

class RunContext {
public:
    RunContext(const Json& config, fs::path out_dir, std::size_t threads, std::ostream& out)
        : config_(config), out_dir_(std::move(out_dir)), threads_(threads), out_(out) {}

    const Json& config() const { return config_; }
    std::size_t threads() const { return threads_; }
    std::ostream& out() { return out_; }

    std::uint64_t uint(const char* key) const { return config_.at(key).get<std::uint64_t>(); }
    double real(const char* key) const { return config_.at(key).get<double>(); }
    std::string text(const char* key) const { return config_.at(key).get<std::string>(); }
    bool flag(const char* key) const { return config_.at(key).get<bool>(); }
    std::vector<double> reals(const char* key) const { return config_.at(key).get<std::vector<double>>(); }
    std::set<int> severities(const char* key) const {
        std::set<int> out;
        for (auto v : config_.at(key).get<std::vector<std::uint64_t>>()) {
            if (v > static_cast<std::uint64_t>(kMaxSeverity)) {
                throw ConfigError("`" + std::string(key) + "`: severity " + std::to_string(v) + " out of range");
            }
            out.insert(static_cast<int>(v));
        }
        return out;
    }

    void emit(const std::string& name, const std::string& contents) {
        fs::create_directories(out_dir_);
        write_file(out_dir_ / name, contents);
        outputs_[name] = fnv1a_hex(contents);
    }

    const std::map<std::string, std::string>& outputs() const { return outputs_; }

private:
    const Json& config_;
    fs::path out_dir_;
    std::size_t threads_;
    std::ostream& out_;
    std::map<std::string, std::string> outputs_;
};

LabeledDataset read_data(const RunContext& ctx, const char* key) {
    return load_dataset(ctx.text(key));
}

LabeledDataset select_rows(const LabeledDataset& data, const std::set<int>& severities) {
    return severities.empty() ? data : filter_severity(data, severities);
}

// Maps the data onto the model's class indices and feature scaling.
LabeledDataset align_to_model(LabeledDataset data, const ModelFile& model) {
    if (data.dim() != model.params.config.input_dim) {
        throw DimensionError("data has " + std::to_string(data.dim()) + " features, model expects " +
                             std::to_string(model.params.config.input_dim));
    }
    if (!model.feature_names.empty() && model.feature_names != data.feature_names) {
        throw FormatError("data feature names differ from the model's");
    }
    if (!model.class_names.empty() && model.class_names != data.class_names) {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < model.class_names.size(); ++i) {
            index.emplace(model.class_names[i], i);
        }
        for (std::size_t& l : data.labels) {
            const auto it = index.find(data.class_names[l]);
            if (it == index.end()) {
                throw FormatError("class " + data.class_names[l] + " is unknown to the model");
            }
            l = it->second;
        }
        data.class_names = model.class_names;
    }
    if (data.num_classes() != model.params.config.num_classes) {
        throw DimensionError("data has " + std::to_string(data.num_classes()) + " classes, model predicts " +
                             std::to_string(model.params.config.num_classes));
    }
    if (model.standardization) {
        if (data.standardization) {
            if (!(*data.standardization == *model.standardization)) {
                throw FormatError("data was standardized with statistics that differ from the model's");
            }
        } else {
            data = standardize_with(data, *model.standardization);
        }
    }
    return data;
}

std::string rate_tag(double rate) {
    return "p" + format_double(rate);
}

std::string percent(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100.0 * v << '%';
    return s.str();
}

// ---------------------------------------------------------------- commands

struct Command {
    std::string name;
    std::string help;
    std::vector<Param> params;
    std::function<void(RunContext&)> handler;
};

const Param kSeed{"seed", Kind::Int, 0, "master seed"};
const Param kSamples{"samples", Kind::Int, static_cast<std::uint64_t>(kDefaultMcSamples),
                     "stochastic passes T per input"};
const Param kSeverities{"severities", Kind::IntList, Json::array(),
                        "keep only rows with these severity tags (empty: all)"};

NetworkConfig network_from(const RunContext& ctx, const LabeledDataset& data, double rate) {
    NetworkConfig nc;
    nc.input_dim = data.dim();
    nc.num_classes = data.num_classes();
    nc.hidden_layers.clear();
    for (auto h : ctx.config().at("hidden").get<std::vector<std::uint64_t>>()) {
        nc.hidden_layers.push_back(static_cast<std::size_t>(h));
    }
    nc.dropout_rate = rate;
    nc.init_seed = ctx.uint("seed");
    nc.validate();
    return nc;
}

TrainConfig training_from(const RunContext& ctx) {
    TrainConfig tc;
    tc.epochs = ctx.uint("epochs");
    tc.batch_size = ctx.uint("batch_size");
    tc.learning_rate = ctx.real("lr");
    tc.shuffle_seed = ctx.uint("seed");
    tc.validate();
    return tc;
}

std::vector<Param> training_params() {
    return {
        {"epochs", Kind::Int, 30, "training epochs"},
        {"batch_size", Kind::Int, 64, "mini-batch size"},
        {"lr", Kind::Real, 1e-3, "Adam learning rate"},
        {"hidden", Kind::IntList, Json::array({20, 20, 20, 20}), "hidden layer widths"},
        {"standardize", Kind::Bool, true, "fit per-feature standardization on the training rows"},
        kSeed,
    };
}

DiagnosisThresholds thresholds_from(const RunContext& ctx) {
    DiagnosisThresholds t;
    t.probability = ctx.real("prob_threshold");
    t.std_ratio = ctx.real("std_ratio");
    const std::string mode = ctx.text("ratio_mode");
    if (mode == "sum") {
        t.ratio_mode = StdRatioMode::Sum;
    } else if (mode == "max") {
        t.ratio_mode = StdRatioMode::Max;
    } else {
        throw ConfigError("`ratio_mode` must be sum or max, got `" + mode + "`");
    }
    t.validate();
    return t;
}

std::vector<Param> threshold_params() {
    return {
        {"prob_threshold", Kind::Real, 0.2, "probability threshold"},
        {"std_ratio", Kind::Real, 0.1, "std-ratio threshold"},
        {"ratio_mode", Kind::Text, "sum", "std normalization: sum or max"},
    };
}

std::vector<Param> concat(std::vector<Param> a, const std::vector<Param>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void cmd_gen(RunContext& ctx) {
    const std::string kind = ctx.text("kind");
    LabeledDataset data;
    if (kind == "toy2d") {
        data = gen_toy2d(ctx.uint("n"), ctx.uint("seed"));
    } else if (kind == "chiller") {
        ChillerSynthConfig cc;
        cc.samples_per_condition = ctx.uint("samples_per_condition");
        cc.operating_conditions = ctx.uint("conditions");
        cc.direction_seed = ctx.uint("direction_seed");
        cc.validate();
        data = gen_chiller(cc, ctx.uint("seed"));
    } else {
        throw ConfigError("gen: unknown dataset kind `" + kind + "` (toy2d or chiller)");
    }
    std::ostringstream csv;
    write_csv(data, csv);
    ctx.emit("data.csv", csv.str());
    Json meta;
    meta["class_names"] = data.class_names;
    meta["feature_names"] = data.feature_names;
    meta["standardization"] = nullptr;
    ctx.emit("data.csv.meta.json", dump_json(meta));
    ctx.out() << "gen " << kind << ": " << data.size() << " rows, " << data.dim() << " features, "
              << data.num_classes() << " classes\n";
}

void cmd_train(RunContext& ctx) {
    LabeledDataset data = select_rows(read_data(ctx, "data"), ctx.severities("severities"));
    for (const auto& w : class_balance_warnings(data)) {
        ctx.out() << "warning: " << w << '\n';
    }
    ModelFile model;
    if (ctx.flag("standardize") && !data.standardization) {
        data = standardize(data);
    }
    const TrainResult r = train(network_from(ctx, data, ctx.real("dropout")), training_from(ctx), data);
    model.params = r.params;
    model.feature_names = data.feature_names;
    model.class_names = data.class_names;
    model.standardization = data.standardization;
    ctx.emit("model.json", dump_json(model_to_json(model)));
    ctx.emit("trace.csv", r.trace.to_csv());
    ctx.out() << "train: " << r.trace.loss.size() << " epochs, loss " << format_double(r.trace.loss.front())
              << " -> " << format_double(r.trace.loss.back()) << ", training accuracy "
              << percent(r.trace.accuracy.back()) << '\n';
}

void cmd_eval(RunContext& ctx) {
    const ModelFile model = load_model(ctx.text("model"));
    const LabeledDataset data =
        align_to_model(select_rows(read_data(ctx, "data"), ctx.severities("severities")), model);
    const Evaluation ev = evaluate(model.params, data);
    Json j;
    j["rows"] = data.size();
    j["accuracy"] = ev.accuracy;
    j["mean_loss"] = ev.mean_loss;
    j["class_names"] = data.class_names;
    Json conf = Json::array();
    for (std::size_t r = 0; r < ev.confusion.rows(); ++r) {
        conf.push_back(Vector(ev.confusion.row(r).begin(), ev.confusion.row(r).end()));
    }
    j["confusion"] = std::move(conf);
    ctx.emit("metrics.json", dump_json(j));
    CsvTable t;
    t.header.push_back("true\\predicted");
    t.header.insert(t.header.end(), data.class_names.begin(), data.class_names.end());
    t.row_names = data.class_names;
    t.values = ev.confusion;
    ctx.emit("confusion.csv", table_to_string(t));
    ctx.out() << "eval: " << data.size() << " rows, accuracy " << percent(ev.accuracy) << ", mean loss "
              << format_double(ev.mean_loss) << '\n';
}

void cmd_mc_infer(RunContext& ctx) {
    const ModelFile model = load_model(ctx.text("model"));
    const LabeledDataset data =
        align_to_model(select_rows(read_data(ctx, "data"), ctx.severities("severities")), model);
    const auto summaries =
        mc_predict_batch(model.params, data.features, ctx.uint("samples"), RngStream(ctx.uint("seed"), 0x3C1), {},
                         ctx.threads());

    std::ostringstream csv;
    csv << "row,label,severity,predicted";
    for (const auto& c : data.class_names) {
        csv << ",mean_" << c;
    }
    for (const auto& c : data.class_names) {
        csv << ",variance_" << c;
    }
    csv << '\n';
    Json all = Json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = summaries[i];
        csv << i << ',' << data.class_names[data.labels[i]] << ',' << data.severity[i] << ','
            << data.class_names[s.predicted_class];
        for (double v : s.mean) {
            csv << ',' << format_double(v);
        }
        for (double v : s.variance) {
            csv << ',' << format_double(v);
        }
        csv << '\n';
        all.push_back(summary_to_json(s));
    }
    ctx.emit("predictions.csv", csv.str());
    ctx.emit("summaries.json", dump_json(all));
    const HeatmapRows rows = mean_class_summary(group_by_condition(data, summaries));
    ctx.emit("heatmap_mean.csv", table_to_string(heatmap_table(rows, rows.mean, data.class_names)));
    ctx.emit("heatmap_variance.csv", table_to_string(heatmap_table(rows, rows.variance, data.class_names)));
    ctx.out() << "mc-infer: " << data.size() << " rows, T = " << ctx.uint("samples") << ", accuracy of mean "
              << percent(summary_accuracy(data, summaries)) << '\n';
}

void cmd_diagnose(RunContext& ctx) {
    const ModelFile model = load_model(ctx.text("model"));
    const LabeledDataset data =
        align_to_model(select_rows(read_data(ctx, "data"), ctx.severities("severities")), model);
    const DiagnosisThresholds th = thresholds_from(ctx);
    const bool mc = model.params.config.dropout_rate > 0.0;
    const auto summaries = mc_predict_batch(model.params, data.features, mc ? ctx.uint("samples") : 1,
                                            RngStream(ctx.uint("seed"), 0xD1A), {}, ctx.threads());
    Json reports = Json::array();
    std::map<std::pair<std::size_t, int>, ConditionReports> groups;
    std::vector<std::pair<std::size_t, int>> order;
    for (std::size_t i = 0; i < data.size(); ++i) {
        DiagnosisReport r = mc ? diagnose_mc(summaries[i], th) : diagnose_softmax(summaries[i].mean, th.probability);
        r.true_label = data.labels[i];
        Json j = report_to_json(r, data.class_names);
        j["row"] = i;
        j["severity"] = data.severity[i];
        reports.push_back(std::move(j));
        const auto key = std::make_pair(data.labels[i], data.severity[i]);
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) {
            order.push_back(key);
            it->second.true_label = data.labels[i];
            it->second.condition = data.severity[i] == 0
                                       ? data.class_names[data.labels[i]]
                                       : data.class_names[data.labels[i]] + "-SL" + std::to_string(data.severity[i]);
        }
        it->second.mc_reports.push_back(std::move(r));
    }
    ctx.emit("reports.json", dump_json(reports));

    std::ostringstream csv;
    csv << "condition,true_label,candidates,hit\n";
    std::size_t hits = 0;
    for (const auto& key : order) {
        const auto& g = groups.at(key);
        const auto set = majority_set(g.mc_reports);
        const bool hit = std::find(set.begin(), set.end(), g.true_label) != set.end();
        hits += hit ? 1 : 0;
        csv << g.condition << ',' << data.class_names[g.true_label] << ',';
        for (std::size_t k = 0; k < set.size(); ++k) {
            csv << (k ? " " : "") << data.class_names[set[k]];
        }
        csv << ',' << (hit ? 1 : 0) << '\n';
    }
    ctx.emit("conditions.csv", csv.str());
    ctx.out() << "diagnose (" << (mc ? "mc-dropout" : "softmax") << " rule): " << hits << " of " << order.size()
              << " conditions contain the true label\n";
}

void cmd_sweep(RunContext& ctx) {
    LabeledDataset train_data = select_rows(read_data(ctx, "data"), ctx.severities("train_severities"));
    const std::string eval_path = ctx.text("eval_data");
    LabeledDataset eval_data = select_rows(eval_path.empty() ? load_dataset(ctx.text("data")) : load_dataset(eval_path),
                                           ctx.severities("eval_severities"));
    if (ctx.flag("standardize") && !train_data.standardization) {
        train_data = standardize(train_data);
    }
    ModelFile frame;
    frame.params.config = network_from(ctx, train_data, 0.0);
    frame.feature_names = train_data.feature_names;
    frame.class_names = train_data.class_names;
    frame.standardization = train_data.standardization;
    eval_data = align_to_model(eval_data, frame);

    const std::vector<double> rates = ctx.reals("rates");
    SweepOptions opt;
    opt.mc_samples = ctx.uint("samples");
    opt.mc_seed = ctx.uint("seed");
    opt.threads = ctx.threads();
    const SweepResult sweep =
        sweep_dropout(rates, frame.params.config, training_from(ctx), train_data, eval_data, opt);

    Json entries = Json::array();
    for (const auto& e : sweep.entries) {
        const std::string tag = rate_tag(e.rate);
        Json j;
        j["rate"] = e.rate;
        if (e.error) {
            j["error"] = *e.error;
            entries.push_back(std::move(j));
            ctx.out() << "  " << tag << ": training diverged\n";
            continue;
        }
        ModelFile m = frame;
        m.params = *e.params;
        ctx.emit("model_" + tag + ".json", dump_json(model_to_json(m)));
        ctx.emit("trace_" + tag + ".csv", e.trace.to_csv());
        ctx.emit("heatmap_mean_" + tag + ".csv", table_to_string(heatmap_table(e.rows, e.rows.mean, frame.class_names)));
        ctx.emit("heatmap_variance_" + tag + ".csv",
                 table_to_string(heatmap_table(e.rows, e.rows.variance, frame.class_names)));
        j["accuracy"] = e.accuracy;
        j["final_loss"] = e.trace.loss.back();
        j["files"] = {"model_" + tag + ".json", "trace_" + tag + ".csv", "heatmap_mean_" + tag + ".csv",
                      "heatmap_variance_" + tag + ".csv"};
        entries.push_back(std::move(j));
        ctx.out() << "  " << tag << ": in-distribution accuracy " << percent(e.accuracy) << '\n';
    }
    Json summary;
    summary["rates"] = rates;
    summary["entries"] = std::move(entries);
    ctx.emit("sweep.json", dump_json(summary));

    bool baseline_ok = false;
    for (const auto& e : sweep.entries) {
        baseline_ok = baseline_ok || (e.rate == 0.0 && !e.error);
    }
    if (rates.size() >= 3 && baseline_ok) {
        const RateSelection sel = select_dropout_rate(sweep, ctx.real("knee"), ctx.real("cap"));
        ctx.emit("selection.json", dump_json(selection_to_json(sel)));
        ctx.out() << "sweep: selected p = " << format_double(sel.rate) << " (" << sel.rationale << ")\n";
    } else {
        ctx.out() << "sweep: no rate selection (needs three rates including a trained p = 0)\n";
    }
}

void cmd_scan2d(RunContext& ctx) {
    const ModelFile model = load_model(ctx.text("model"));
    const auto b = ctx.reals("bounds");
    if (b.size() != 4) {
        throw ConfigError("`bounds` expects x_min,x_max,y_min,y_max");
    }
    const GridBounds bounds{b[0], b[1], b[2], b[3]};
    const FieldScan scan =
        field_scan_2d(model.params, bounds, ctx.uint("resolution"), ctx.uint("samples"),
                      RngStream(ctx.uint("seed"), 0x5CA), model.standardization ? &*model.standardization : nullptr,
                      ctx.threads());
    ctx.emit("field.csv", scan.to_csv());
    ctx.emit("field_mean.csv", table_to_string(scan.mean_table()));
    ctx.emit("field_proximity.csv", table_to_string(scan.proximity_table()));
    ctx.emit("field_variance.csv", table_to_string(scan.variance_table()));
    double peak = 0.0;
    for (const auto& c : scan.cells) {
        peak = std::max(peak, c.variance[1]);
    }
    ctx.out() << "scan2d: " << scan.cells.size() << " cells, peak class-1 variance " << format_double(peak) << '\n';
}

void cmd_severity_grid(RunContext& ctx) {
    const ModelFile base = load_model(ctx.text("baseline_model"));
    const ModelFile mc = load_model(ctx.text("model"));
    if (base.class_names != mc.class_names || base.feature_names != mc.feature_names ||
        !(base.standardization == mc.standardization)) {
        throw FormatError("severity-grid: the two models were not trained on the same data layout");
    }
    const LabeledDataset data = align_to_model(read_data(ctx, "data"), mc);
    const SeverityGrid grid = severity_grid(base.params, mc.params, data, ctx.uint("samples"),
                                            RngStream(ctx.uint("seed"), 0x5E7), thresholds_from(ctx), ctx.threads());
    for (const auto& panel : grid.panels) {
        const std::string sl = "SL" + std::to_string(panel.severity);
        ctx.emit("softmax_" + sl + ".csv",
                 table_to_string(heatmap_table(panel.baseline, panel.baseline.mean, data.class_names)));
        ctx.emit("mc_mean_" + sl + ".csv", table_to_string(heatmap_table(panel.mc, panel.mc.mean, data.class_names)));
        ctx.emit("mc_variance_" + sl + ".csv",
                 table_to_string(heatmap_table(panel.mc, panel.mc.variance, data.class_names)));
    }
    ctx.emit("diagnosis_table.csv", grid.diagnosis.to_csv(data.class_names));
    Json j;
    j["cases"] = grid.diagnosis.rows.size();
    j["non_dropout_hits"] = grid.diagnosis.softmax_hits();
    j["mc_dropout_hits"] = grid.diagnosis.mc_hits();
    ctx.emit("summary.json", dump_json(j));
    ctx.out() << "severity-grid: incipient-fault hits, non-dropout " << grid.diagnosis.softmax_hits() << '/'
              << grid.diagnosis.rows.size() << ", mc-dropout " << grid.diagnosis.mc_hits() << '/'
              << grid.diagnosis.rows.size() << '\n';
}

void cmd_lda(RunContext& ctx) {
    const LabeledDataset data = select_rows(read_data(ctx, "data"), ctx.severities("severities"));
    const LdaProjection proj = lda_fit(data, ctx.uint("k"));
    const Matrix z = lda_transform(proj, data.features);
    Json j;
    j["k"] = proj.projection.cols();
    j["feature_names"] = data.feature_names;
    j["class_names"] = data.class_names;
    j["eigenvalues"] = proj.eigenvalues;
    Json rows = Json::array();
    for (std::size_t r = 0; r < proj.projection.rows(); ++r) {
        rows.push_back(Vector(proj.projection.row(r).begin(), proj.projection.row(r).end()));
    }
    j["projection"] = std::move(rows);
    j["fingerprint"] = proj.fingerprint;
    j["ridge_applied"] = proj.ridge_applied;
    ctx.emit("lda.json", dump_json(j));

    std::ostringstream csv;
    for (std::size_t c = 0; c < z.cols(); ++c) {
        csv << (c ? "," : "") << "z" << c + 1;
    }
    csv << ",label,severity\n";
    for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t c = 0; c < z.cols(); ++c) {
            csv << (c ? "," : "") << format_double(z(i, c));
        }
        csv << ',' << data.class_names[data.labels[i]] << ',' << data.severity[i] << '\n';
    }
    ctx.emit("projected.csv", csv.str());
    CsvTable means;
    means.header.push_back("class");
    for (std::size_t c = 0; c < z.cols(); ++c) {
        means.header.push_back("z" + std::to_string(c + 1));
    }
    means.row_names = data.class_names;
    means.values = proj.class_means;
    ctx.emit("class_means.csv", table_to_string(means));
    ctx.out() << "lda: " << data.size() << " rows projected to " << z.cols() << " dimensions\n";
}

void cmd_render(RunContext& ctx) {
    const fs::path input = ctx.text("input");
    const CsvTable table = parse_table(read_file(input));
    SvgOptions opt;
    opt.cell = ctx.uint("cell");
    std::string name = ctx.text("output");
    if (name.empty()) {
        name = input.stem().string() + ".svg";
    }
    if (fs::path(name).has_parent_path()) {
        throw ConfigError("`output` names a file inside the run directory, not a path");
    }
    ctx.emit(name, render_svg(table, opt));
    ctx.out() << "render: " << table.values.rows() << "x" << table.values.cols() << " cells -> " << name << '\n';
}

const std::vector<Command>& commands() {
    static const std::vector<Command> cmds = [] {
        std::vector<Command> c;
        c.push_back({"gen",
                     "generate a dataset (toy2d or chiller)",
                     {{"kind", Kind::Text, nullptr, "toy2d or chiller", true},
                      {"n", Kind::Int, 1000, "toy2d: points per region"},
                      {"samples_per_condition", Kind::Int, 300, "chiller: rows per operating condition, class, severity"},
                      {"conditions", Kind::Int, 3, "chiller: operating conditions"},
                      {"direction_seed", Kind::Int, 1043, "chiller: seed of the fault directions"},
                      kSeed},
                     cmd_gen});
        c.push_back({"train", "train a classifier",
                     concat({{"data", Kind::Path, nullptr, "training CSV"},
                             {"dropout", Kind::Real, 0.0, "dropout rate p"},
                             kSeverities},
                            training_params()),
                     cmd_train});
        c.push_back({"eval",
                     "deterministic accuracy and confusion matrix",
                     {{"model", Kind::Path, nullptr, "model JSON"}, {"data", Kind::Path, nullptr, "CSV"}, kSeverities},
                     cmd_eval});
        c.push_back({"mc-infer",
                     "MC-dropout predictive mean and variance per row",
                     {{"model", Kind::Path, nullptr, "model JSON"},
                      {"data", Kind::Path, nullptr, "CSV"},
                      kSeverities,
                      kSamples,
                      kSeed},
                     cmd_mc_infer});
        c.push_back({"diagnose", "candidate diagnosis sets per row and per condition",
                     concat({{"model", Kind::Path, nullptr, "model JSON"},
                             {"data", Kind::Path, nullptr, "CSV"},
                             kSeverities,
                             kSamples,
                             kSeed},
                            threshold_params()),
                     cmd_diagnose});
        c.push_back({"sweep", "train one model per dropout rate and pick a rate",
                     concat({{"data", Kind::Path, nullptr, "training CSV"},
                             {"eval_data", Kind::Path, "", "evaluation CSV (default: the training file)"},
                             {"rates", Kind::RealList, Json::array({0.0, 0.03, 0.1, 0.2, 0.5}), "dropout rates"},
                             {"train_severities", Kind::IntList, Json::array({0, 4}), "training severity tags"},
                             {"eval_severities", Kind::IntList, Json::array({0, 4}), "evaluation severity tags"},
                             {"knee", Kind::Real, 0.95, "fraction of baseline confidence a rate must keep"},
                             {"cap", Kind::Real, 0.5, "rates at or above the cap are never selected"},
                             kSamples},
                            training_params()),
                     cmd_sweep});
        c.push_back({"scan2d",
                     "predictive mean and variance over a 2D grid",
                     {{"model", Kind::Path, nullptr, "model JSON with two inputs"},
                      {"resolution", Kind::Int, 100, "cells per axis"},
                      {"bounds", Kind::RealList, Json::array({-1.2, 1.2, -1.2, 1.2}), "x_min,x_max,y_min,y_max"},
                      kSamples,
                      kSeed},
                     cmd_scan2d});
        c.push_back({"severity-grid", "compare a non-dropout and an MC-dropout model per severity level",
                     concat({{"baseline_model", Kind::Path, nullptr, "model JSON trained without dropout"},
                             {"model", Kind::Path, nullptr, "model JSON trained with dropout"},
                             {"data", Kind::Path, nullptr, "test CSV with SL1..SL4 rows"},
                             kSamples,
                             kSeed},
                            threshold_params()),
                     cmd_severity_grid});
        c.push_back({"lda",
                     "Fisher LDA projection",
                     {{"data", Kind::Path, nullptr, "CSV"}, {"k", Kind::Int, 2, "output dimensions"}, kSeverities},
                     cmd_lda});
        c.push_back({"render",
                     "SVG heatmap of a CSV matrix",
                     {{"input", Kind::Path, nullptr, "CSV table"},
                      {"output", Kind::Text, "", "file name in the run directory (default: <input stem>.svg)"},
                      {"cell", Kind::Int, 16, "pixels per cell"}},
                     cmd_render});
        return c;
    }();
    return cmds;
}

const Command& find_command(const std::string& name) {
    for (const auto& c : commands()) {
        if (c.name == name) {
            return c;
        }
    }
    throw ConfigError("unknown subcommand `" + name + "`");
}

// Defaults, then the config file, then flags. Paths become absolute.
Json resolve(const Command& cmd, const Json* file_config, const std::map<std::string, std::string>& flags) {
    Json cfg = Json::object();
    for (const auto& p : cmd.params) {
        cfg[p.name] = p.fallback;
    }
    if (file_config != nullptr) {
        const Json* section = file_config;
        if (file_config->contains(cmd.name) && (*file_config)[cmd.name].is_object()) {
            section = &(*file_config)[cmd.name];
        }
        if (!section->is_object()) {
            throw ConfigError("config file must hold a JSON object");
        }
        for (const auto& [key, value] : section->items()) {
            const auto it = std::find_if(cmd.params.begin(), cmd.params.end(),
                                         [&](const Param& p) { return p.name == key; });
            if (it == cmd.params.end()) {
                throw ConfigError("config key `" + key + "` is not a parameter of " + cmd.name);
            }
            cfg[key] = from_json(*it, value);
        }
    }
    for (const auto& p : cmd.params) {
        const auto it = flags.find(p.name);
        if (it != flags.end()) {
            cfg[p.name] = from_text(p, it->second);
        }
        if (cfg[p.name].is_null()) {
            throw ConfigError(cmd.name + ": missing required parameter `" + p.name + "`");
        }
        if (p.kind == Kind::Path && !cfg[p.name].get<std::string>().empty()) {
            cfg[p.name] = fs::absolute(cfg[p.name].get<std::string>()).lexically_normal().string();
        }
    }
    return cfg;
}

Json input_record(const Command& cmd, const Json& cfg) {
    Json inputs = Json::object();
    for (const auto& p : cmd.params) {
        if (p.kind != Kind::Path || cfg[p.name].get<std::string>().empty()) {
            continue;
        }
        const fs::path path = cfg[p.name].get<std::string>();
        if (!fs::exists(path)) {
            throw IoError(p.name + ": no such file " + path.string());
        }
        Json rec;
        rec["path"] = path.string();
        rec["fnv1a"] = fnv1a_hex(read_file(path));
        const fs::path meta = meta_path_for(path);
        if (fs::exists(meta)) {
            rec["meta_fnv1a"] = fnv1a_hex(read_file(meta));
        }
        inputs[p.name] = std::move(rec);
    }
    return inputs;
}

Json execute(const Command& cmd, const Json& cfg, const fs::path& out_dir, std::size_t threads,
             std::ostream& out) {
    Json manifest;
    manifest["tool"] = "mcdrop";
    manifest["version"] = kVersion;
    manifest["subcommand"] = cmd.name;
    manifest["config"] = cfg;
    Json seeds = Json::object();
    for (const auto& [key, value] : cfg.items()) {
        if (key == "seed" || key.ends_with("_seed")) {
            seeds[key] = value;
        }
    }
    manifest["seeds"] = std::move(seeds);
    manifest["inputs"] = input_record(cmd, cfg);

    RunContext ctx(cfg, out_dir, threads, out);
    cmd.handler(ctx);
    Json outputs = Json::object();
    for (const auto& [name, sum] : ctx.outputs()) {
        outputs[name] = sum;
    }
    manifest["outputs"] = std::move(outputs);
    fs::create_directories(out_dir);
    write_json(out_dir / "manifest.json", manifest);
    return manifest;
}

void replay(const fs::path& manifest_path, const fs::path& out_dir, std::size_t threads, std::ostream& out) {
    const Json manifest = read_json(manifest_path);
    if (!manifest.is_object() || !manifest.contains("subcommand") || !manifest.contains("config") ||
        !manifest.contains("outputs")) {
        throw FormatError("manifest: missing subcommand, config or outputs");
    }
    if (manifest.value("version", std::string()) != kVersion) {
        out << "note: manifest written by version " << manifest.value("version", std::string("?"))
            << ", replaying with " << kVersion << '\n';
    }
    const Command& cmd = find_command(manifest["subcommand"].get<std::string>());
    // Re-validate the stored config exactly as a config file.
    const Json cfg = resolve(cmd, &manifest["config"], {});
    const Json inputs = input_record(cmd, cfg);
    if (manifest.contains("inputs") && inputs != manifest["inputs"]) {
        throw ReplayMismatch("input files changed since the manifest was written");
    }
    const Json again = execute(cmd, cfg, out_dir, threads, out);
    if (again["outputs"] != manifest["outputs"]) {
        throw ReplayMismatch("replayed outputs differ from the manifest checksums");
    }
    out << "replay: " << again["outputs"].size() << " output files match the manifest\n";
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') {
            out += '\\';
        }
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

int fail(std::ostream& err, int code, const char* name, const std::string& message) {
    err << "error: code=" << name << " exit=" << code << " message=" << quote(message) << '\n';
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MC-dropout uncertainty toolkit for fault diagnosis", "mcdrop"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string out_dir = "run";
    std::size_t threads = 1;
    std::string config_path;
    app.add_option("--out", out_dir, "run directory for outputs and manifest.json")->capture_default_str();
    app.add_option("--threads", threads, "worker threads for batch inference (results do not depend on it)")
        ->capture_default_str();
    app.add_option("--config", config_path, "JSON file with parameter values; flags override it");

    std::map<std::string, std::map<std::string, std::string>> flags;
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : commands()) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->fallthrough();
        for (const auto& p : cmd.params) {
            const std::string flag = p.positional ? p.name : "--" + flag_name(p.name);
            std::string help = p.help;
            if (!p.fallback.is_null()) {
                help += " [default: " + (p.fallback.is_string() ? p.fallback.get<std::string>() : p.fallback.dump()) + "]";
            }
            sub->add_option_function<std::string>(
                flag, [&flags, cmd_name = cmd.name, key = p.name](const std::string& v) { flags[cmd_name][key] = v; },
                help);
        }
        subs[cmd.name] = sub;
    }
    std::string manifest_path;
    CLI::App* replay_cmd = app.add_subcommand("replay", "rerun a manifest and verify identical outputs");
    replay_cmd->fallthrough();
    replay_cmd->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();

    std::vector<const char*> argv{"mcdrop"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            if (dynamic_cast<const CLI::CallForVersion*>(&e) != nullptr) {
                out << kVersion << '\n';
            } else {
                out << app.help();
            }
            return kExitOk;
        }
        return fail(err, kExitConfig, "usage", e.what());
    }

    try {
        if (replay_cmd->parsed()) {
            replay(manifest_path, out_dir, threads, out);
            return kExitOk;
        }
        for (const auto& cmd : commands()) {
            if (!subs[cmd.name]->parsed()) {
                continue;
            }
            std::optional<Json> file_config;
            if (!config_path.empty()) {
                file_config = read_json(config_path);
            }
            const Json cfg = resolve(cmd, file_config ? &*file_config : nullptr, flags[cmd.name]);
            execute(cmd, cfg, out_dir, threads, out);
            out << "outputs written to " << out_dir << '\n';
            return kExitOk;
        }
        return fail(err, kExitConfig, "usage", "no subcommand");
    } catch (const ConfigError& e) {
        return fail(err, kExitConfig, "config", e.what());
    } catch (const InvalidArgument& e) {
        return fail(err, kExitConfig, "config", e.what());
    } catch (const IoError& e) {
        return fail(err, kExitIo, "io", e.what());
    } catch (const CsvError& e) {
        return fail(err, kExitFormat, "format", e.what());
    } catch (const FormatError& e) {
        return fail(err, kExitFormat, "format", e.what());
    } catch (const DimensionError& e) {
        return fail(err, kExitFormat, "format", e.what());
    } catch (const DivergenceError& e) {
        return fail(err, kExitDivergence, "divergence", e.what());
    } catch (const ReplayMismatch& e) {
        return fail(err, kExitReplay, "replay", e.what());
    } catch (const NotPositiveDefinite& e) {
        return fail(err, kExitNumeric, "numeric", e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(err, kExitIo, "io", e.what());
    } catch (const std::exception& e) {
        return fail(err, kExitInternal, "internal", e.what());
    }
}

}  // namespace mcdrop::cli
