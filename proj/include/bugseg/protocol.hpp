#pragma once

#include "bugseg/learners.hpp"
#include "bugseg/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bugseg {

struct SplitFractions {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
};

struct SplitIndices {
    std::vector<std::size_t> train, validation, test; // ascending
};

// Stratified, seeded split of row indices. Part sizes come from largest-
// remainder rounding of the fractions; buggy rows are apportioned to parts
// the same way, so every part's class count is within one of exact
// proportionality. Needs at least 10 rows of each class.
SplitIndices stratified_split(std::span<const int> labels, std::uint64_t seed, const SplitFractions& fractions = {});

struct DataSplit {
    std::vector<SegmentFeatures> train, validation, test;
    std::uint64_t seed = 0;
    SplitFractions fractions;
};

DataSplit split(std::span<const SegmentFeatures> features, std::uint64_t seed, const SplitFractions& fractions = {});

// `video_id,segment_index,part` with part in {train,validation,test}.
void write_split_csv(const std::filesystem::path& path, const DataSplit& split);
DataSplit read_split_csv(const std::filesystem::path& path, std::span<const SegmentFeatures> features);

// Hyperparameter grids searched on validation F1; the first best wins.
struct ModelGrid {
    std::vector<LinearHyper> linear;
    std::vector<KnnHyper> knn;
    std::vector<ForestHyper> forest; // shared by RandomForest and ExtraTrees; seeds are overwritten
    EnsembleHyper ensemble;

    static ModelGrid defaults();
};

struct ProtocolConfig {
    SplitFractions fractions;
    std::uint64_t seed = 42; // root; stage seeds are derived from it
    std::vector<ModelKind> models{ModelKind::Linear, ModelKind::KNN, ModelKind::RandomForest, ModelKind::ExtraTrees,
                                  ModelKind::WeightedEnsemble};
    ModelGrid grid = ModelGrid::defaults();
    bool standardize = false;
    int threads = 1;
};

struct TrainedModel {
    ModelPtr model;
    double validation_f1 = 0.0;
};

struct TrainedSet {
    DataSplit split;
    std::optional<Standardizer> standardizer;
    std::vector<TrainedModel> models; // in ProtocolConfig::models order
};

// Splits, tunes each requested family on validation F1 and, when requested,
// builds the weighted ensemble over the tuned base models.
TrainedSet train_models(std::span<const SegmentFeatures> features, const ProtocolConfig& config);

// Trains base models on an existing split.
TrainedSet train_on_split(DataSplit split, const ProtocolConfig& config);

std::vector<EvaluationReport> evaluate_models(const TrainedSet& trained, const std::string& dataset_id);

struct SubsetFilter {
    enum class Field { Genre, Game };
    Field field = Field::Genre;
    std::string value;

    std::string label() const; // e.g. "genre=Sports"
};

SubsetFilter parse_subset_filter(std::string_view text); // "genre=Sports" or "game=FIFA 17"

// Rows whose video matches the filter. Throws DataError when no video matches
// or the matching videos contribute no rows.
std::vector<SegmentFeatures> filter_subset(std::span<const SegmentFeatures> features,
                                           std::span<const VideoMeta> metas, const SubsetFilter& filter);

std::vector<EvaluationReport> subset_run(std::span<const SegmentFeatures> features, std::span<const VideoMeta> metas,
                                         const SubsetFilter& filter, const ProtocolConfig& config);

} // namespace bugseg
