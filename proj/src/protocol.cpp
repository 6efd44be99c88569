#include "bugseg/protocol.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace bugseg {

namespace {

// Largest-remainder rounding of `total * weights[i] / sum(weights)`; ties in
// the remainder go to the earlier part.
std::array<std::size_t, 3> apportion(std::size_t total, const std::array<double, 3>& quotas) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t p = 0; p < 3; ++p) {
        out[p] = static_cast<std::size_t>(std::floor(quotas[p] + 1e-9));
        rem[p] = quotas[p] - static_cast<double>(out[p]);
        assigned += out[p];
    }
    while (assigned < total) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < 3; ++p) {
            if (rem[p] > rem[best] + 1e-12) best = p;
        }
        ++out[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return out;
}

} // namespace

SplitIndices stratified_split(std::span<const int> labels, std::uint64_t seed, const SplitFractions& fractions) {
    const double fsum = fractions.train + fractions.validation + fractions.test;
    if (!(fractions.train > 0.0) || !(fractions.validation > 0.0) || !(fractions.test > 0.0) ||
        std::abs(fsum - 1.0) > 1e-9) {
        throw ParameterError("split fractions must be positive and sum to 1");
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
        throw DataError(std::string("cannot stratify: no ") + (pos.empty() ? "buggy" : "clean") + " samples");
    }
    if (pos.size() < 10 || neg.size() < 10) {
        throw DataError("need at least 10 samples per class to split, found " + std::to_string(pos.size()) +
                        " buggy and " + std::to_string(neg.size()) + " clean");
    }

    const auto n = static_cast<double>(labels.size());
    const std::array<double, 3> f{fractions.train, fractions.validation, fractions.test};
    const auto totals = apportion(labels.size(), {n * f[0], n * f[1], n * f[2]});
    std::array<double, 3> pos_quota{};
    for (std::size_t p = 0; p < 3; ++p) pos_quota[p] = static_cast<double>(pos.size()) * static_cast<double>(totals[p]) / n;
    const auto pos_counts = apportion(pos.size(), pos_quota);

    Rng rng(seed);
    stable_shuffle(pos.begin(), pos.end(), rng);
    stable_shuffle(neg.begin(), neg.end(), rng);

    SplitIndices out;
    std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.validation, &out.test};
    std::size_t pi = 0, ni = 0;
    for (std::size_t p = 0; p < 3; ++p) {
        for (std::size_t c = 0; c < pos_counts[p]; ++c) parts[p]->push_back(pos[pi++]);
        for (std::size_t c = 0; c < totals[p] - pos_counts[p]; ++c) parts[p]->push_back(neg[ni++]);
        std::sort(parts[p]->begin(), parts[p]->end());
    }
    return out;
}

DataSplit split(std::span<const SegmentFeatures> features, std::uint64_t seed, const SplitFractions& fractions) {
    std::vector<int> labels;
    labels.reserve(features.size());
    for (const auto& f : features) labels.push_back(f.label == Label::Buggy);
    const auto idx = stratified_split(labels, seed, fractions);
    DataSplit s;
    s.seed = seed;
    s.fractions = fractions;
    for (auto i : idx.train) s.train.push_back(features[i]);
    for (auto i : idx.validation) s.validation.push_back(features[i]);
    for (auto i : idx.test) s.test.push_back(features[i]);
    return s;
}

void write_split_csv(const std::filesystem::path& path, const DataSplit& split) {
    std::ostringstream out;
    out << "# seed=" << split.seed << " fractions=" << csv::format_double(split.fractions.train) << ","
        << csv::format_double(split.fractions.validation) << "," << csv::format_double(split.fractions.test) << "\n";
    csv::write_row(out, {"video_id", "segment_index", "part"});
    auto emit = [&](const std::vector<SegmentFeatures>& rows, const char* part) {
        for (const auto& r : rows) csv::write_row(out, {r.video_id, std::to_string(r.segment_index), part});
    };
    emit(split.train, "train");
    emit(split.validation, "validation");
    emit(split.test, "test");
    csv::write_text_file(path, out.str());
}

DataSplit read_split_csv(const std::filesystem::path& path, std::span<const SegmentFeatures> features) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "segment_index", "part"}, path.string());
    std::map<SegmentKey, const SegmentFeatures*> by_key;
    for (const auto& f : features) by_key.emplace(f.key(), &f);

    DataSplit s;
    for (const auto& c : table.comments) {
        if (auto p = c.find("seed="); p != std::string::npos) {
            s.seed = static_cast<std::uint64_t>(std::stoull(c.substr(p + 5)));
        }
    }
    std::vector<std::string> missing;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        SegmentKey key{row[table.column("video_id")],
                       static_cast<int>(csv::parse_int(row[table.column("segment_index")], line, "segment_index"))};
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            missing.push_back(to_string(key));
            continue;
        }
        const auto& part = row[table.column("part")];
        if (part == "train") s.train.push_back(*it->second);
        else if (part == "validation") s.validation.push_back(*it->second);
        else if (part == "test") s.test.push_back(*it->second);
        else throw ParseError("unknown split part '" + part + "'", line);
    }
    if (!missing.empty()) {
        std::string msg = "split references rows absent from the feature file:";
        for (const auto& m : missing) msg += " " + m;
        throw IntegrityError(msg);
    }
    return s;
}

ModelGrid ModelGrid::defaults() {
    ModelGrid g;
    g.linear = {LinearHyper{1e-4, 0.1, 500, 1e-6}, LinearHyper{1e-4, 1.0, 500, 1e-6}, LinearHyper{1e-2, 1.0, 500, 1e-6}};
    g.knn = {KnnHyper{5}, KnnHyper{11}};
    ForestHyper f;
    f.trees = 100;
    f.min_leaf = 1;
    g.forest = {f};
    return g;
}

namespace {

struct Tuned {
    ModelPtr model;
    double f1 = -1.0;
};

template <typename Train>
Tuned tune(std::size_t grid_size, const Dataset& validation, Train&& train) {
    Tuned best;
    for (std::size_t g = 0; g < grid_size; ++g) {
        ModelPtr m = train(g);
        const double f1 = f1_score(m->predict_proba(validation), validation.y);
        if (f1 > best.f1) best = {std::move(m), f1};
    }
    return best;
}

} // namespace

TrainedSet train_on_split(DataSplit split, const ProtocolConfig& config) {
    TrainedSet out;
    if (config.standardize) {
        auto st = Standardizer::fit(split.train);
        split.train = st.apply(split.train);
        split.validation = st.apply(split.validation);
        split.test = st.apply(split.test);
        out.standardizer = std::move(st);
    }
    const Dataset train = to_dataset(split.train);
    const Dataset validation = to_dataset(split.validation);
    if (train.empty() || validation.empty()) throw DataError("training and validation parts must be non-empty");

    std::map<ModelKind, Tuned> tuned;
    auto need = [&](ModelKind k) {
        return std::find(config.models.begin(), config.models.end(), k) != config.models.end();
    };
    const bool ensemble = need(ModelKind::WeightedEnsemble);

    if (need(ModelKind::Linear) || ensemble) {
        if (config.grid.linear.empty()) throw ParameterError("empty linear grid");
        const auto seed = derive_seed(config.seed, "linear");
        tuned[ModelKind::Linear] = tune(config.grid.linear.size(), validation,
                                        [&](std::size_t g) { return train_linear(train, config.grid.linear[g], seed); });
    }
    if (need(ModelKind::KNN) || ensemble) {
        if (config.grid.knn.empty()) throw ParameterError("empty knn grid");
        tuned[ModelKind::KNN] = tune(config.grid.knn.size(), validation, [&](std::size_t g) {
            auto h = config.grid.knn[g];
            h.k = std::min(h.k, train.size());
            return train_knn(train, h);
        });
    }
    for (auto [kind, variant, stage] : {std::tuple{ModelKind::RandomForest, ForestVariant::RandomForest, "random_forest"},
                                        std::tuple{ModelKind::ExtraTrees, ForestVariant::ExtraTrees, "extra_trees"}}) {
        if (!need(kind) && !ensemble) continue;
        if (config.grid.forest.empty()) throw ParameterError("empty forest grid");
        const auto seed = derive_seed(config.seed, stage);
        tuned[kind] = tune(config.grid.forest.size(), validation, [&, variant = variant](std::size_t g) {
            auto h = config.grid.forest[g];
            h.seed = derive_seed(seed, static_cast<std::uint64_t>(g));
            h.threads = config.threads;
            return train_forest(train, h, variant);
        });
    }

    for (auto kind : config.models) {
        if (kind == ModelKind::WeightedEnsemble) {
            std::vector<ModelPtr> base;
            for (auto k : {ModelKind::Linear, ModelKind::KNN, ModelKind::RandomForest, ModelKind::ExtraTrees}) {
                base.push_back(tuned.at(k).model);
            }
            auto ens = train_ensemble(base, validation, config.grid.ensemble);
            out.models.push_back({ens, ens->validation_f1()});
        } else {
            out.models.push_back({tuned.at(kind).model, tuned.at(kind).f1});
        }
    }
    out.split = std::move(split);
    return out;
}

TrainedSet train_models(std::span<const SegmentFeatures> features, const ProtocolConfig& config) {
    return train_on_split(split(features, derive_seed(config.seed, "split"), config.fractions), config);
}

std::vector<EvaluationReport> evaluate_models(const TrainedSet& trained, const std::string& dataset_id) {
    const Dataset test = to_dataset(trained.split.test);
    std::vector<EvaluationReport> out;
    for (const auto& m : trained.models) out.push_back(evaluate(*m.model, test, dataset_id));
    return out;
}

std::string SubsetFilter::label() const {
    return (field == Field::Genre ? "genre=" : "game=") + value;
}

SubsetFilter parse_subset_filter(std::string_view text) {
    auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParameterError("subset filter must look like genre=<name> or game=<title>");
    auto field = text.substr(0, eq);
    SubsetFilter f;
    f.value = std::string(text.substr(eq + 1));
    if (field == "genre") f.field = SubsetFilter::Field::Genre;
    else if (field == "game") f.field = SubsetFilter::Field::Game;
    else throw ParameterError("unknown subset field '" + std::string(field) + "'");
    if (f.value.empty()) throw ParameterError("empty subset value");
    return f;
}

std::vector<SegmentFeatures> filter_subset(std::span<const SegmentFeatures> features, std::span<const VideoMeta> metas,
                                           const SubsetFilter& filter) {
    std::set<std::string> videos;
    std::optional<Genre> genre;
    if (filter.field == SubsetFilter::Field::Genre) genre = parse_genre(filter.value);
    for (const auto& m : metas) {
        const bool match = genre ? m.genre == *genre : m.game_title == filter.value;
        if (match) videos.insert(m.video_id);
    }
    if (videos.empty()) throw DataError("subset " + filter.label() + " matches no video");
    std::vector<SegmentFeatures> out;
    for (const auto& f : features) {
        if (videos.count(f.video_id)) out.push_back(f);
    }
    if (out.empty()) throw DataError("subset " + filter.label() + " has no labeled segments");
    return out;
}

std::vector<EvaluationReport> subset_run(std::span<const SegmentFeatures> features, std::span<const VideoMeta> metas,
                                         const SubsetFilter& filter, const ProtocolConfig& config) {
    const auto subset = filter_subset(features, metas, filter);
    return evaluate_models(train_models(subset, config), filter.label());
}

} // namespace bugseg
