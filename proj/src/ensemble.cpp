#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"

namespace bugseg {

EnsembleSelection select_ensemble(const std::vector<std::vector<double>>& probs, std::span<const int> labels,
                                  const EnsembleHyper& hyper) {
    if (probs.empty()) throw ParameterError("ensemble selection needs at least one base model");
    if (labels.empty()) throw ParameterError("ensemble selection needs a non-empty validation set");
    for (const auto& p : probs) {
        if (p.size() != labels.size()) throw DimensionError("base model predictions do not match validation size");
    }
    const std::size_t m = probs.size();
    const std::size_t n = labels.size();

    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> sequence;
    EnsembleSelection sel;
    std::size_t best_len = 0;
    double best_f1 = -1.0;
    std::vector<double> candidate(n);
    for (int round = 0; round < std::max(1, hyper.rounds); ++round) {
        const double count = static_cast<double>(sequence.size() + 1);
        std::size_t pick = 0;
        double pick_f1 = -1.0;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t i = 0; i < n; ++i) candidate[i] = (sum[i] + probs[j][i]) / count;
            const double f1 = f1_score(candidate, labels);
            if (f1 > pick_f1) {
                pick_f1 = f1;
                pick = j;
            }
        }
        for (std::size_t i = 0; i < n; ++i) sum[i] += probs[pick][i];
        sequence.push_back(pick);
        sel.round_f1.push_back(pick_f1);
        if (pick_f1 > best_f1) {
            best_f1 = pick_f1;
            best_len = sequence.size();
        }
    }

    sel.order.assign(sequence.begin(), sequence.begin() + static_cast<std::ptrdiff_t>(best_len));
    sel.counts.assign(m, 0);
    for (auto j : sel.order) ++sel.counts[j];
    sel.validation_f1 = best_f1;
    return sel;
}

EnsembleModel::EnsembleModel(std::vector<ModelPtr> members, std::vector<double> weights, double validation_f1)
    : members_(std::move(members)), weights_(std::move(weights)), validation_f1_(validation_f1) {
    if (members_.empty() || members_.size() != weights_.size()) throw ParameterError("ensemble: members and weights differ");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw ParameterError("ensemble: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw ParameterError("ensemble: weights sum to zero");
    for (const auto& m : members_) {
        if (m->dim() != members_.front()->dim()) throw DimensionError("ensemble members disagree on feature count");
    }
}

std::size_t EnsembleModel::dim() const {
    return members_.front()->dim();
}

double EnsembleModel::predict_proba(std::span<const double> features) const {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
        num += weights_[i] * members_[i]->predict_proba(features);
        den += weights_[i];
    }
    return num / den;
}

nlohmann::json EnsembleModel::hyperparameters() const {
    return {{"selection", "greedy-forward-with-replacement"}};
}

nlohmann::json EnsembleModel::state() const {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : members_) members.push_back(model_to_json(*m));
    return {{"members", std::move(members)}, {"weights", weights_}, {"validation_f1", validation_f1_}};
}

std::shared_ptr<EnsembleModel> train_ensemble(std::span<const ModelPtr> models, const Dataset& validation,
                                              const EnsembleHyper& hyper) {
    std::vector<std::vector<double>> probs;
    probs.reserve(models.size());
    for (const auto& m : models) probs.push_back(m->predict_proba(validation));
    auto sel = select_ensemble(probs, validation.y, hyper);

    std::vector<ModelPtr> members;
    std::vector<double> weights;
    for (std::size_t j = 0; j < models.size(); ++j) {
        if (sel.counts[j] == 0) continue;
        members.push_back(models[j]);
        weights.push_back(static_cast<double>(sel.counts[j]));
    }
    return std::make_shared<EnsembleModel>(std::move(members), std::move(weights), sel.validation_f1);
}

} // namespace bugseg
