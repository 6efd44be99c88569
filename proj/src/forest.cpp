#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"
#include "bugseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace bugseg {

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0; // weighted child impurity, lower is better
};

// n * gini for a node with `pos` buggy rows out of `n`.
double weighted_gini(double pos, double n) {
    if (n <= 0.0) return 0.0;
    const double neg = n - pos;
    return n - (pos * pos + neg * neg) / n;
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const ForestHyper& hyper, ForestVariant variant, std::size_t max_features,
                std::uint64_t seed)
        : data_(data), hyper_(hyper), variant_(variant), max_features_(max_features), rng_(seed) {}

    Tree build(std::vector<std::size_t> rows) {
        tree_.clear();
        grow(std::move(rows));
        return std::move(tree_);
    }

private:
    double value(std::size_t i, std::size_t f) const { return data_.x[i * data_.dim + f]; }

    int grow(std::vector<std::size_t> rows) {
        const int id = static_cast<int>(tree_.size());
        tree_.emplace_back();
        std::size_t pos = 0;
        for (auto i : rows) pos += data_.y[i];
        tree_[id].value = static_cast<double>(pos) / static_cast<double>(rows.size());

        if (pos == 0 || pos == rows.size() || rows.size() < 2 * hyper_.min_leaf) return id;
        auto choice = choose_split(rows, pos);
        if (choice.feature < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto i : rows) (value(i, choice.feature) <= choice.threshold ? left : right).push_back(i);
        rows.clear();
        rows.shrink_to_fit();
        tree_[id].feature = choice.feature;
        tree_[id].threshold = choice.threshold;
        const int l = grow(std::move(left));
        tree_[id].left = l;
        const int r = grow(std::move(right));
        tree_[id].right = r;
        return id;
    }

    // Visits features in random order until max_features non-constant ones
    // have been evaluated, so constant features never use up the budget.
    SplitChoice choose_split(const std::vector<std::size_t>& rows, std::size_t pos) {
        std::vector<std::size_t> order(data_.dim);
        std::iota(order.begin(), order.end(), 0);
        SplitChoice best;
        best.score = weighted_gini(static_cast<double>(pos), static_cast<double>(rows.size()));
        bool found = false;
        std::size_t evaluated = 0;
        for (std::size_t n = 0; n < order.size() && evaluated < max_features_; ++n) {
            // Incremental Fisher-Yates: draw the next feature without replacement.
            std::swap(order[n], order[uniform_int<std::size_t>(rng_, n, order.size() - 1)]);
            const std::size_t f = order[n];
            double lo = value(rows[0], f), hi = lo;
            for (auto i : rows) {
                lo = std::min(lo, value(i, f));
                hi = std::max(hi, value(i, f));
            }
            if (!(lo < hi)) continue;
            ++evaluated;
            auto cand = variant_ == ForestVariant::RandomForest ? best_threshold(rows, f) : random_threshold(rows, f, lo, hi);
            if (cand.feature >= 0 && (!found || cand.score < best.score)) {
                best = cand;
                found = true;
            }
        }
        return found ? best : SplitChoice{};
    }

    SplitChoice best_threshold(const std::vector<std::size_t>& rows, std::size_t f) const {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (auto i : rows) vals.emplace_back(value(i, f), data_.y[i]);
        std::sort(vals.begin(), vals.end());
        const double n = static_cast<double>(vals.size());
        double total_pos = 0.0;
        for (const auto& v : vals) total_pos += v.second;

        SplitChoice best;
        double left_pos = 0.0;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            left_pos += vals[i].second;
            const std::size_t nl = i + 1;
            if (vals[i].first == vals[i + 1].first) continue;
            if (nl < hyper_.min_leaf || vals.size() - nl < hyper_.min_leaf) continue;
            const double score = weighted_gini(left_pos, static_cast<double>(nl)) +
                                 weighted_gini(total_pos - left_pos, n - static_cast<double>(nl));
            if (best.feature < 0 || score < best.score) {
                best.feature = static_cast<int>(f);
                best.score = score;
                best.threshold = vals[i].first + (vals[i + 1].first - vals[i].first) / 2.0;
                // Midpoint can round up to the right value for adjacent doubles.
                if (!(best.threshold < vals[i + 1].first)) best.threshold = vals[i].first;
            }
        }
        return best;
    }

    SplitChoice random_threshold(const std::vector<std::size_t>& rows, std::size_t f, double lo, double hi) {
        double t = lo + uniform01(rng_) * (hi - lo);
        if (!(t < hi)) t = lo;
        double nl = 0.0, pl = 0.0, n = 0.0, p = 0.0;
        for (auto i : rows) {
            const int y = data_.y[i];
            n += 1.0;
            p += y;
            if (value(i, f) <= t) {
                nl += 1.0;
                pl += y;
            }
        }
        const auto min_leaf = static_cast<double>(hyper_.min_leaf);
        if (nl < min_leaf || n - nl < min_leaf) return {};
        return {static_cast<int>(f), t, weighted_gini(pl, nl) + weighted_gini(p - pl, n - nl)};
    }

    const Dataset& data_;
    const ForestHyper& hyper_;
    ForestVariant variant_;
    std::size_t max_features_;
    Rng rng_;
    Tree tree_;
};

} // namespace

ForestModel::ForestModel(ForestVariant variant, std::size_t dim, std::vector<Tree> trees, ForestHyper hyper)
    : variant_(variant), dim_(dim), trees_(std::move(trees)), hyper_(hyper) {
    if (trees_.empty()) throw ParameterError("forest has no trees");
}

ModelKind ForestModel::kind() const {
    return variant_ == ForestVariant::RandomForest ? ModelKind::RandomForest : ModelKind::ExtraTrees;
}

double ForestModel::predict_proba(std::span<const double> features) const {
    if (features.size() != dim_) throw DimensionError("forest: wrong feature count");
    double sum = 0.0;
    for (const auto& tree : trees_) {
        int node = 0;
        while (tree[node].feature >= 0) {
            node = features[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
        }
        sum += tree[node].value;
    }
    return sum / static_cast<double>(trees_.size());
}

nlohmann::json ForestModel::hyperparameters() const {
    nlohmann::json j = {{"trees", hyper_.trees},
                        {"max_features", hyper_.max_features},
                        {"min_leaf", hyper_.min_leaf},
                        {"seed", hyper_.seed}};
    j["bootstrap"] = hyper_.bootstrap.value_or(variant_ == ForestVariant::RandomForest);
    return j;
}

nlohmann::json ForestModel::state() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        trees.push_back(std::move(nodes));
    }
    return {{"trees", std::move(trees)}};
}

ForestHyper ForestModel::hyper_from_json(const nlohmann::json& j) {
    ForestHyper h;
    h.trees = j.value("trees", h.trees);
    h.max_features = j.value("max_features", h.max_features);
    h.min_leaf = j.value("min_leaf", h.min_leaf);
    h.seed = j.value("seed", h.seed);
    if (j.contains("bootstrap")) h.bootstrap = j.at("bootstrap").get<bool>();
    return h;
}

std::shared_ptr<ForestModel> train_forest(const Dataset& train, const ForestHyper& hyper, ForestVariant variant) {
    if (train.empty()) throw ParameterError("forest: empty training set");
    if (hyper.trees < 1) throw ParameterError("forest: need at least one tree");
    if (hyper.min_leaf < 1) throw ParameterError("forest: min_leaf must be at least 1");
    const std::size_t max_features =
        hyper.max_features ? std::min(hyper.max_features, train.dim)
                           : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(train.dim))));
    const bool bootstrap = hyper.bootstrap.value_or(variant == ForestVariant::RandomForest);

    // Each tree owns a seed derived from (forest seed, tree index), so trees
    // can be built in any order or in parallel with identical results.
    auto build_tree = [&](int t) {
        const auto tree_seed = derive_seed(hyper.seed, static_cast<std::uint64_t>(t));
        Rng rng(derive_seed(tree_seed, "bootstrap"));
        std::vector<std::size_t> rows(train.size());
        if (bootstrap) {
            for (auto& r : rows) r = uniform_int<std::size_t>(rng, 0, train.size() - 1);
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        TreeBuilder builder(train, hyper, variant, max_features, derive_seed(tree_seed, "splits"));
        return builder.build(std::move(rows));
    };

    std::vector<Tree> trees(static_cast<std::size_t>(hyper.trees));
    const int threads = std::max(1, std::min(hyper.threads, hyper.trees));
    if (threads == 1) {
        for (int t = 0; t < hyper.trees; ++t) trees[static_cast<std::size_t>(t)] = build_tree(t);
    } else {
        std::vector<std::future<void>> tasks;
        for (int w = 0; w < threads; ++w) {
            tasks.push_back(std::async(std::launch::async, [&, w] {
                for (int t = w; t < hyper.trees; t += threads) trees[static_cast<std::size_t>(t)] = build_tree(t);
            }));
        }
        for (auto& task : tasks) task.get();
    }
    return std::make_shared<ForestModel>(variant, train.dim, std::move(trees), hyper);
}

} // namespace bugseg
