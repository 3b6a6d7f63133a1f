#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcdrop/analysis.hpp"
#include "mcdrop/data.hpp"
#include "mcdrop/diagnosis.hpp"
#include "mcdrop/mc_inference.hpp"
#include "mcdrop/network.hpp"

namespace mcdrop {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

// A trained network plus what is needed to feed it raw rows.
struct ModelFile {
    NetworkParams params;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::optional<Standardization> standardization;

    friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

Json model_to_json(const ModelFile& model);
ModelFile model_from_json(const Json& j);
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

Json config_to_json(const NetworkConfig& config);
NetworkConfig config_from_json(const Json& j);

Json standardization_to_json(const Standardization& s);
Standardization standardization_from_json(const Json& j);

// {"mean": [...], "variance": [...], "std": [...], "T": n, "predicted_class": k}
Json summary_to_json(const PredictiveSummary& s);
PredictiveSummary summary_from_json(const Json& j);

Json report_to_json(const DiagnosisReport& r, const std::vector<std::string>& class_names);

Json selection_to_json(const RateSelection& sel);

// Dataset CSV plus a `<csv>.meta.json` sidecar holding class order, feature
// names and any standardization already applied.
std::filesystem::path meta_path_for(const std::filesystem::path& csv);
void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);
// Reads the CSV and, when the sidecar exists, restores its class order and
// standardization record.
LabeledDataset load_dataset(const std::filesystem::path& path);

// Pretty JSON text with a trailing newline.
std::string dump_json(const Json& j);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace mcdrop
