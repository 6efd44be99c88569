#pragma once

#include "bugseg/features.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bugseg {

// Predictions at or above this probability count as buggy.
inline constexpr double kDecisionThreshold = 0.5;

// Dense row-major design matrix with 0/1 targets (1 = buggy).
struct Dataset {
    std::size_t dim = 0;
    std::vector<double> x;
    std::vector<int> y;

    Dataset() = default;
    explicit Dataset(std::size_t dimension) : dim(dimension) {}

    std::size_t size() const { return y.size(); }
    bool empty() const { return y.empty(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
    void add(std::span<const double> features, int label);
    std::size_t positives() const;
};

Dataset to_dataset(std::span<const SegmentFeatures> rows);

enum class ModelKind { Linear, KNN, RandomForest, ExtraTrees, WeightedEnsemble };

// Report names, matching the usual table rows.
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

class Model {
public:
    virtual ~Model() = default;

    virtual ModelKind kind() const = 0;
    virtual std::size_t dim() const = 0;
    // Probability of the buggy class, always within [0, 1].
    virtual double predict_proba(std::span<const double> features) const = 0;
    virtual nlohmann::json hyperparameters() const = 0;
    virtual nlohmann::json state() const = 0;
    virtual std::uint64_t seed() const { return 0; }

    int predict(std::span<const double> features) const { return predict_proba(features) >= kDecisionThreshold; }
    std::vector<double> predict_proba(const Dataset& data) const;
};

using ModelPtr = std::shared_ptr<const Model>;

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Buggy-class metrics; a zero denominator yields 0.
Metrics metrics_from(const Confusion& c);
Confusion confusion_from(std::span<const double> probabilities, std::span<const int> labels);
double f1_score(std::span<const double> probabilities, std::span<const int> labels);

struct EvaluationReport {
    std::string model;
    std::string dataset;
    Confusion confusion;
    Metrics metrics;
};

EvaluationReport evaluate(const Model& model, const Dataset& test, std::string dataset_id = "full");

void write_report_csv(const std::filesystem::path& path, std::span<const EvaluationReport> reports);
std::vector<EvaluationReport> read_report_csv(const std::filesystem::path& path);
// Fixed-width table with columns Model, F1, Precision, Recall.
std::string format_report_table(std::span<const EvaluationReport> reports);

// Versioned JSON: {format, version, kind, seed, hyperparameters, state}.
nlohmann::json model_to_json(const Model& model);
ModelPtr model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const Model& model);
ModelPtr load_model(const std::filesystem::path& path);

} // namespace bugseg
