#include "bugseg/model.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace bugseg {

void Dataset::add(std::span<const double> features, int label) {
    if (features.size() != dim) {
        throw DimensionError("row has " + std::to_string(features.size()) + " features, expected " + std::to_string(dim));
    }
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label ? 1 : 0);
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

Dataset to_dataset(std::span<const SegmentFeatures> rows) {
    Dataset data(rows.empty() ? 0 : rows.front().size());
    data.x.reserve(rows.size() * data.dim);
    for (const auto& r : rows) data.add(r.concatenated(), r.label == Label::Buggy);
    return data;
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Linear: return "LinearModel";
    case ModelKind::KNN: return "KNeighbors";
    case ModelKind::RandomForest: return "RandomForest";
    case ModelKind::ExtraTrees: return "ExtraTrees";
    case ModelKind::WeightedEnsemble: return "WeightedEnsemble";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view text) {
    std::string t;
    for (char c : text) {
        if (c != '_' && c != '-' && c != ' ') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (t == "linear" || t == "linearmodel" || t == "logistic") return ModelKind::Linear;
    if (t == "knn" || t == "kneighbors") return ModelKind::KNN;
    if (t == "randomforest" || t == "forest" || t == "rf") return ModelKind::RandomForest;
    if (t == "extratrees" || t == "et") return ModelKind::ExtraTrees;
    if (t == "weightedensemble" || t == "ensemble") return ModelKind::WeightedEnsemble;
    throw ParameterError("unknown model kind '" + std::string(text) + "'");
}

std::vector<double> Model::predict_proba(const Dataset& data) const {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out[i] = predict_proba(data.row(i));
    return out;
}

Metrics metrics_from(const Confusion& c) {
    Metrics m;
    m.precision = (c.tp + c.fp) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    m.recall = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

Confusion confusion_from(std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size()) throw DimensionError("prediction and label counts differ");
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] >= kDecisionThreshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual) ++c.tp;
        else if (predicted) ++c.fp;
        else if (actual) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_score(std::span<const double> probabilities, std::span<const int> labels) {
    return metrics_from(confusion_from(probabilities, labels)).f1;
}

EvaluationReport evaluate(const Model& model, const Dataset& test, std::string dataset_id) {
    if (test.empty()) throw ParameterError("cannot evaluate on an empty test set");
    if (test.dim != model.dim()) {
        throw DimensionError("test rows have " + std::to_string(test.dim) + " features, model expects " +
                             std::to_string(model.dim()));
    }
    EvaluationReport r;
    r.model = std::string(to_string(model.kind()));
    r.dataset = std::move(dataset_id);
    r.confusion = confusion_from(model.predict_proba(test), test.y);
    r.metrics = metrics_from(r.confusion);
    return r;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace

void write_report_csv(const std::filesystem::path& path, std::span<const EvaluationReport> reports) {
    std::ostringstream out;
    csv::write_row(out, {"dataset", "model", "f1", "precision", "recall", "tp", "fp", "fn", "tn"});
    for (const auto& r : reports) {
        csv::write_row(out, {r.dataset, r.model, fixed(r.metrics.f1, 6), fixed(r.metrics.precision, 6),
                             fixed(r.metrics.recall, 6), std::to_string(r.confusion.tp), std::to_string(r.confusion.fp),
                             std::to_string(r.confusion.fn), std::to_string(r.confusion.tn)});
    }
    csv::write_text_file(path, out.str());
}

std::vector<EvaluationReport> read_report_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"dataset", "model", "tp", "fp", "fn", "tn"}, path.string());
    std::vector<EvaluationReport> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        EvaluationReport rep;
        rep.dataset = row[table.column("dataset")];
        rep.model = row[table.column("model")];
        rep.confusion.tp = static_cast<std::size_t>(csv::parse_int(row[table.column("tp")], line, "tp"));
        rep.confusion.fp = static_cast<std::size_t>(csv::parse_int(row[table.column("fp")], line, "fp"));
        rep.confusion.fn = static_cast<std::size_t>(csv::parse_int(row[table.column("fn")], line, "fn"));
        rep.confusion.tn = static_cast<std::size_t>(csv::parse_int(row[table.column("tn")], line, "tn"));
        rep.metrics = metrics_from(rep.confusion);
        out.push_back(std::move(rep));
    }
    return out;
}

std::string format_report_table(std::span<const EvaluationReport> reports) {
    std::size_t width = 5;
    for (const auto& r : reports) width = std::max(width, r.model.size());
    std::ostringstream out;
    std::string last_dataset;
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    for (const auto& r : reports) {
        if (r.dataset != last_dataset) {
            if (!last_dataset.empty()) out << "\n";
            out << "Dataset: " << r.dataset << "\n";
            out << pad("Model", width) << "  F1    Precision  Recall\n";
            last_dataset = r.dataset;
        }
        out << pad(r.model, width) << "  " << fixed(r.metrics.f1, 2) << "  " << fixed(r.metrics.precision, 2)
            << "       " << fixed(r.metrics.recall, 2) << "\n";
    }
    return out.str();
}

nlohmann::json model_to_json(const Model& model) {
    return {{"format", "bugseg-model"},
            {"version", 1},
            {"kind", to_string(model.kind())},
            {"dim", model.dim()},
            {"seed", model.seed()},
            {"hyperparameters", model.hyperparameters()},
            {"state", model.state()}};
}

ModelPtr model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "bugseg-model") throw DataError("not a bugseg model file");
        if (j.at("version").get<int>() != 1) throw DataError("unsupported model version " + j.at("version").dump());
        const auto kind = parse_model_kind(j.at("kind").get<std::string>());
        const auto dim = j.at("dim").get<std::size_t>();
        const auto& hyper = j.at("hyperparameters");
        const auto& state = j.at("state");
        switch (kind) {
        case ModelKind::Linear: {
            auto weights = state.at("weights").get<std::vector<double>>();
            if (weights.size() != dim) throw DimensionError("linear model weight count does not match dim");
            return std::make_shared<LinearModel>(std::move(weights), state.at("bias").get<double>(),
                                                 LinearModel::hyper_from_json(hyper), state.at("epochs").get<int>(),
                                                 j.at("seed").get<std::uint64_t>());
        }
        case ModelKind::KNN: {
            Dataset train(dim);
            const auto& rows = state.at("rows");
            const auto labels = state.at("labels").get<std::vector<int>>();
            if (rows.size() != labels.size()) throw DataError("knn rows and labels differ in length");
            for (std::size_t i = 0; i < rows.size(); ++i) train.add(rows[i].get<std::vector<double>>(), labels[i]);
            return std::make_shared<KnnModel>(std::move(train), KnnHyper{hyper.at("k").get<std::size_t>()});
        }
        case ModelKind::RandomForest:
        case ModelKind::ExtraTrees: {
            std::vector<Tree> trees;
            for (const auto& t : state.at("trees")) {
                Tree tree;
                for (const auto& n : t) {
                    tree.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                    n.at(4).get<double>()});
                }
                trees.push_back(std::move(tree));
            }
            auto variant = kind == ModelKind::RandomForest ? ForestVariant::RandomForest : ForestVariant::ExtraTrees;
            return std::make_shared<ForestModel>(variant, dim, std::move(trees), ForestModel::hyper_from_json(hyper));
        }
        case ModelKind::WeightedEnsemble: {
            std::vector<ModelPtr> members;
            for (const auto& m : state.at("members")) members.push_back(model_from_json(m));
            return std::make_shared<EnsembleModel>(std::move(members), state.at("weights").get<std::vector<double>>(),
                                                   state.at("validation_f1").get<double>());
        }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    throw DataError("malformed model file");
}

void save_model(const std::filesystem::path& path, const Model& model) {
    csv::write_text_file(path, model_to_json(model).dump() + "\n");
}

ModelPtr load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("model file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return model_from_json(j);
}

} // namespace bugseg
