#pragma once

#include "concert/pipeline.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace concert {

inline constexpr int kBundleFormatVersion = 1;

struct BundleMetadata {
    std::uint64_t seed = 0;
    std::string data_fingerprint;  // FNV-1a of the training CSV bytes
    std::string preset = "default";
    std::size_t rows = 0;
};

/// Everything needed to predict: preprocessing, fitted models, city classes.
struct ModelBundle {
    int format_version = kBundleFormatVersion;
    std::vector<std::string> schema_columns;
    std::vector<ColumnKind> schema_kinds;
    std::optional<KMeansModel> kmeans;
    std::vector<ClassProfile> class_profiles;
    std::optional<TaskEntry> location;
    std::optional<TaskEntry> price;
    BundleMetadata metadata;

    /// Throws bundle when the task has no model.
    const TaskEntry& entry(Task task) const;
};

/// Bundle with the concert schema filled in.
ModelBundle make_bundle();

std::string bundle_to_json(const ModelBundle& bundle);
/// Throws bundle on malformed text, an unknown version or a column that is
/// not in the bundled schema.
ModelBundle bundle_from_json(std::string_view text);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

std::string fingerprint(std::string_view bytes);

/// Hyperparameters of an entry's fitted model.
Hyperparameters hyperparameters_of(const TaskEntry& entry);

/// Metadata, hyperparameters, scores and class profiles as JSON text.
std::string model_card_json(const ModelBundle& bundle);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace concert
