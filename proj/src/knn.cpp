#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"

#include <algorithm>
#include <utility>

namespace bugseg {

KnnModel::KnnModel(Dataset train, KnnHyper hyper) : train_(std::move(train)), hyper_(hyper) {
    if (hyper_.k == 0) throw ParameterError("knn: k must be positive");
    if (hyper_.k > train_.size()) {
        throw ParameterError("knn: k=" + std::to_string(hyper_.k) + " exceeds training size " +
                             std::to_string(train_.size()));
    }
}

std::vector<std::size_t> KnnModel::neighbours(std::span<const double> features) const {
    if (features.size() != train_.dim) throw DimensionError("knn: wrong feature count");
    std::vector<std::pair<double, std::size_t>> dist(train_.size());
    for (std::size_t i = 0; i < train_.size(); ++i) {
        const auto row = train_.row(i);
        double d = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double diff = row[j] - features[j];
            d += diff * diff;
        }
        dist[i] = {d, i};
    }
    const auto k = static_cast<std::ptrdiff_t>(hyper_.k);
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<std::size_t> out;
    out.reserve(hyper_.k);
    for (std::ptrdiff_t i = 0; i < k; ++i) out.push_back(dist[static_cast<std::size_t>(i)].second);
    return out;
}

double KnnModel::predict_proba(std::span<const double> features) const {
    std::size_t positive = 0;
    for (auto i : neighbours(features)) positive += train_.y[i];
    return static_cast<double>(positive) / static_cast<double>(hyper_.k);
}

nlohmann::json KnnModel::hyperparameters() const {
    return {{"k", hyper_.k}, {"metric", "euclidean"}};
}

nlohmann::json KnnModel::state() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < train_.size(); ++i) {
        auto r = train_.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"rows", std::move(rows)}, {"labels", train_.y}};
}

std::shared_ptr<KnnModel> train_knn(const Dataset& train, const KnnHyper& hyper) {
    return std::make_shared<KnnModel>(train, hyper);
}

} // namespace bugseg
