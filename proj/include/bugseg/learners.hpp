#pragma once

#include "bugseg/model.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace bugseg {

// --- logistic regression ---------------------------------------------------

struct LinearHyper {
    double l2 = 1e-4;
    double learning_rate = 0.1;
    int max_epochs = 500;
    double tolerance = 1e-6; // on the norm of the full objective gradient
};

class LinearModel final : public Model {
public:
    LinearModel(std::vector<double> weights, double bias, LinearHyper hyper, int epochs, std::uint64_t seed);

    ModelKind kind() const override { return ModelKind::Linear; }
    std::size_t dim() const override { return weights_.size(); }
    using Model::predict_proba;
    double predict_proba(std::span<const double> features) const override;
    nlohmann::json hyperparameters() const override;
    nlohmann::json state() const override;
    std::uint64_t seed() const override { return seed_; }

    const std::vector<double>& weights() const { return weights_; }
    double bias() const { return bias_; }
    int epochs() const { return epochs_; }
    static LinearHyper hyper_from_json(const nlohmann::json& j);

private:
    std::vector<double> weights_;
    double bias_;
    LinearHyper hyper_;
    int epochs_;
    std::uint64_t seed_;
};

// Mean log loss plus (l2 / 2) * |w|^2; the bias is not penalised.
struct LogisticObjective {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

LogisticObjective logistic_objective(std::span<const double> weights, double bias, const Dataset& data, double l2);

// Full-batch gradient descent from zero. The L2 term is applied as a
// proximal (shrinkage) step, which stays stable for any penalty strength.
// Throws DivergenceError if the loss stops being finite.
std::shared_ptr<LinearModel> train_linear(const Dataset& train, const LinearHyper& hyper = {}, std::uint64_t seed = 0);

// --- k nearest neighbours --------------------------------------------------

struct KnnHyper {
    std::size_t k = 5;
};

// Euclidean; predicts the buggy fraction among the k nearest training rows,
// distance ties broken by lower training index.
class KnnModel final : public Model {
public:
    KnnModel(Dataset train, KnnHyper hyper);

    ModelKind kind() const override { return ModelKind::KNN; }
    std::size_t dim() const override { return train_.dim; }
    using Model::predict_proba;
    double predict_proba(std::span<const double> features) const override;
    nlohmann::json hyperparameters() const override;
    nlohmann::json state() const override;

    // Training indices of the k nearest rows, nearest first.
    std::vector<std::size_t> neighbours(std::span<const double> features) const;

private:
    Dataset train_;
    KnnHyper hyper_;
};

std::shared_ptr<KnnModel> train_knn(const Dataset& train, const KnnHyper& hyper = {});

// --- tree ensembles --------------------------------------------------------

enum class ForestVariant { RandomForest, ExtraTrees };

struct ForestHyper {
    int trees = 100;
    std::size_t max_features = 0;  // 0 means floor(sqrt(dim))
    std::optional<bool> bootstrap; // default: on for RandomForest, off for ExtraTrees
    std::size_t min_leaf = 1;
    std::uint64_t seed = 0;
    int threads = 1; // training only; never changes the result
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // rows with value <= threshold
    int right = -1;
    double value = 0.0; // buggy fraction of the training rows reaching the node
};

using Tree = std::vector<TreeNode>; // node 0 is the root

// CART trees on Gini impurity. RandomForest searches the best threshold of
// each candidate feature; ExtraTrees draws one uniform threshold per feature.
// The forest probability is the mean of the trees' leaf values.
class ForestModel final : public Model {
public:
    ForestModel(ForestVariant variant, std::size_t dim, std::vector<Tree> trees, ForestHyper hyper);

    ModelKind kind() const override;
    std::size_t dim() const override { return dim_; }
    using Model::predict_proba;
    double predict_proba(std::span<const double> features) const override;
    nlohmann::json hyperparameters() const override;
    nlohmann::json state() const override;
    std::uint64_t seed() const override { return hyper_.seed; }

    const std::vector<Tree>& trees() const { return trees_; }
    static ForestHyper hyper_from_json(const nlohmann::json& j);

private:
    ForestVariant variant_;
    std::size_t dim_;
    std::vector<Tree> trees_;
    ForestHyper hyper_;
};

std::shared_ptr<ForestModel> train_forest(const Dataset& train, const ForestHyper& hyper, ForestVariant variant);

// --- ensemble selection ----------------------------------------------------

struct EnsembleHyper {
    int rounds = 20;
};

// Greedy forward selection with replacement over base-model probabilities.
// Each round adds the model whose inclusion maximises validation F1 of the
// count-weighted mean probability (lowest index on ties); the best-scoring
// prefix of the selection sequence is kept (shortest on ties).
struct EnsembleSelection {
    std::vector<int> counts;            // per base model
    std::vector<std::size_t> order;     // kept prefix of the selection sequence
    std::vector<double> round_f1;       // validation F1 after every round
    double validation_f1 = 0.0;         // of the kept prefix
};

EnsembleSelection select_ensemble(const std::vector<std::vector<double>>& validation_probabilities,
                                  std::span<const int> labels, const EnsembleHyper& hyper = {});

class EnsembleModel final : public Model {
public:
    EnsembleModel(std::vector<ModelPtr> members, std::vector<double> weights, double validation_f1);

    ModelKind kind() const override { return ModelKind::WeightedEnsemble; }
    std::size_t dim() const override;
    using Model::predict_proba;
    double predict_proba(std::span<const double> features) const override;
    nlohmann::json hyperparameters() const override;
    nlohmann::json state() const override;

    const std::vector<ModelPtr>& members() const { return members_; }
    const std::vector<double>& weights() const { return weights_; }
    double validation_f1() const { return validation_f1_; }

private:
    std::vector<ModelPtr> members_;
    std::vector<double> weights_;
    double validation_f1_;
};

// Members with zero selections are dropped from the returned model.
std::shared_ptr<EnsembleModel> train_ensemble(std::span<const ModelPtr> models, const Dataset& validation,
                                              const EnsembleHyper& hyper = {});

} // namespace bugseg
