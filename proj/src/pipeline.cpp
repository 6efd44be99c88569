#include "bugseg/pipeline.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/random.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <sstream>

namespace bugseg {

namespace fs = std::filesystem;

Manifest Manifest::load(const fs::path& file) {
    if (!fs::exists(file)) throw DataError("manifest not found: " + file.string());
    Manifest m;
    try {
        m.json_ = nlohmann::json::parse(csv::read_text_file(file));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("malformed manifest " + file.string() + ": " + e.what());
    }
    if (m.json_.value("format", "") != "bugseg-manifest") throw DataError(file.string() + " is not a bugseg manifest");
    return m;
}

Manifest Manifest::load_or_new(const fs::path& dir) {
    if (fs::exists(dir / "manifest.json")) return load(dir / "manifest.json");
    Manifest m;
    m.json_ = {{"format", "bugseg-manifest"}, {"version", 1}, {"stages", nlohmann::json::object()}};
    return m;
}

void Manifest::record(const std::string& stage, const nlohmann::json& options, const nlohmann::json& seeds,
                      const fs::path& dir, const std::vector<fs::path>& artifacts) {
    nlohmann::json digests = nlohmann::json::object();
    for (const auto& a : artifacts) digests[a.generic_string()] = file_sha256(dir / a);
    json_["tool_version"] = std::string(version());
    json_["stages"][stage] = {{"options", options},
                              {"options_hash", sha256_hex(options.dump())},
                              {"seeds", seeds},
                              {"artifacts", digests}};
}

void Manifest::save(const fs::path& dir) const {
    csv::write_text_file(dir / "manifest.json", json_.dump(2) + "\n");
}

namespace {

const ModelKind kAllModels[] = {ModelKind::Linear, ModelKind::KNN, ModelKind::RandomForest, ModelKind::ExtraTrees,
                                ModelKind::WeightedEnsemble};

fs::path model_file(ModelKind kind) {
    return fs::path("models") / (std::string(to_string(kind)) + ".json");
}

} // namespace

std::vector<fs::path> save_trained(const fs::path& dir, const TrainedSet& trained) {
    std::vector<fs::path> written;
    for (const auto& m : trained.models) {
        save_model(dir / model_file(m.model->kind()), *m.model);
        written.push_back(model_file(m.model->kind()));
    }
    write_split_csv(dir / "split.csv", trained.split);
    written.emplace_back("split.csv");
    if (trained.standardizer) {
        csv::write_text_file(dir / "standardizer.json", trained.standardizer->to_json().dump() + "\n");
        written.emplace_back("standardizer.json");
    } else if (fs::exists(dir / "standardizer.json")) {
        fs::remove(dir / "standardizer.json");
    }
    return written;
}

TrainedSet load_trained(const fs::path& dir, std::span<const SegmentFeatures> features,
                        std::span<const ModelKind> models) {
    TrainedSet out;
    if (!fs::exists(dir / "split.csv")) throw DataError("missing artifact: " + (dir / "split.csv").string());
    out.split = read_split_csv(dir / "split.csv", features);
    if (fs::exists(dir / "standardizer.json")) {
        try {
            out.standardizer = Standardizer::from_json(nlohmann::json::parse(csv::read_text_file(dir / "standardizer.json")));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed standardizer.json: " + std::string(e.what()));
        }
        out.split.train = out.standardizer->apply(out.split.train);
        out.split.validation = out.standardizer->apply(out.split.validation);
        out.split.test = out.standardizer->apply(out.split.test);
    }

    std::vector<ModelKind> wanted(models.begin(), models.end());
    if (wanted.empty()) {
        for (auto k : kAllModels) {
            if (fs::exists(dir / model_file(k))) wanted.push_back(k);
        }
        if (wanted.empty()) throw DataError("no trained model found in " + (dir / "models").string());
    }
    for (auto k : wanted) {
        auto model = load_model(dir / model_file(k));
        if (model->kind() != k) throw IntegrityError((dir / model_file(k)).string() + " holds a different model kind");
        out.models.push_back({model, 0.0});
    }
    return out;
}

void write_predictions_csv(const fs::path& path, const Model& model, std::span<const SegmentFeatures> rows) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "segment_index", "label", "probability"});
    for (const auto& r : rows) {
        const double p = model.predict_proba(r.concatenated());
        csv::write_row(out, {r.video_id, std::to_string(r.segment_index), p >= kDecisionThreshold ? "1" : "0",
                             csv::format_double(p)});
    }
    csv::write_text_file(path, out.str());
}

namespace {

void log_warnings(const std::vector<std::string>& warnings, std::vector<std::string>& sink, std::size_t limit = 10) {
    for (std::size_t i = 0; i < warnings.size(); ++i) {
        if (i < limit) spdlog::warn("{}", warnings[i]);
        sink.push_back(warnings[i]);
    }
    if (warnings.size() > limit) spdlog::warn("... and {} more warnings", warnings.size() - limit);
}

// Attributes of every video whose segments are all labeled.
std::vector<VideoAttributes> labeled_attributes(const std::vector<Segment>& segments, const std::vector<VideoMeta>& metas,
                                                std::vector<std::string>& warnings) {
    std::map<std::string, std::vector<Segment>> by_video;
    for (const auto& s : segments) by_video[s.video_id].push_back(s);
    std::vector<VideoAttributes> out;
    for (const auto& m : metas) {
        auto it = by_video.find(m.video_id);
        if (it == by_video.end()) continue;
        const bool complete =
            std::all_of(it->second.begin(), it->second.end(), [](const Segment& s) { return s.label.has_value(); });
        if (!complete) {
            warnings.push_back("video " + m.video_id + " has unlabeled segments; left out of the attributes");
            continue;
        }
        out.push_back(video_attributes(it->second, m));
    }
    return out;
}

} // namespace

RunResult run_pipeline(const RunConfig& config) {
    validate_config(config);
    const auto& out = config.output;
    RunResult result;
    const auto seeds = stage_seeds(config.seed);

    spdlog::info("segmenting transcripts in {}", config.data.transcripts.string());
    const auto metas = read_video_meta(config.data.meta);
    auto segments = segment_corpus(config.data.transcripts, metas, config.jobs);
    segments = attach_labels(std::move(segments), read_labels(config.data.labels));
    write_segments(out / "segments.csv", segments);
    result.artifacts.emplace_back("segments.csv");
    spdlog::info("{} segments from {} videos", segments.size(), metas.size());

    const auto dataset = load_embeddings(config.data.frames, config.data.texts, segments);
    log_warnings(dataset.warnings(), result.warnings);

    Codebook codebook;
    if (config.codebook_mode == CodebookMode::Automatic) {
        std::vector<FrameVector> points;
        points.reserve(dataset.frames().size());
        for (const auto& f : dataset.frames()) points.push_back(f.vector);
        spdlog::info("k-means: {} frames, k={}", points.size(), config.k);
        codebook = kmeans_codebook(points, config.k, derive_seed(config.seed, "codebook"));
    } else {
        codebook = manual_codebook(dataset, read_designations(config.data.designations));
        spdlog::info("manual codebook: {} clusters", codebook.k());
    }
    save_codebook(out / "codebook.json", codebook);
    result.artifacts.emplace_back("codebook.json");

    const auto visual = tfidf_features(dataset, codebook, config.idf);
    log_warnings(visual.warnings, result.warnings);
    auto features = assemble_features(visual, dataset.texts(), dataset.segments());
    log_warnings(features.warnings, result.warnings);
    write_features_csv(out / "features.csv", features);
    result.artifacts.emplace_back("features.csv");

    std::vector<SegmentFeatures> rows = std::move(features.rows);
    std::string dataset_id = "full";
    if (config.subset) {
        rows = filter_subset(rows, metas, *config.subset);
        dataset_id = config.subset->label();
        spdlog::info("subset {}: {} rows", dataset_id, rows.size());
    }

    ProtocolConfig protocol;
    protocol.fractions = config.fractions;
    protocol.seed = config.seed;
    protocol.models = config.models;
    protocol.grid = config.grid;
    protocol.standardize = config.standardize;
    protocol.threads = config.jobs;
    spdlog::info("training {} model(s) on {} rows", config.models.size(), rows.size());
    const auto trained = train_models(rows, protocol);
    for (auto& p : save_trained(out, trained)) result.artifacts.push_back(std::move(p));

    result.reports = evaluate_models(trained, dataset_id);
    write_report_csv(out / "report.csv", result.reports);
    result.artifacts.emplace_back("report.csv");
    for (const auto& m : trained.models) {
        const auto name = fs::path("predictions") / (std::string(to_string(m.model->kind())) + ".csv");
        write_predictions_csv(out / name, *m.model, trained.split.test);
        result.artifacts.push_back(name);
    }
    spdlog::info("test-split results:\n{}", format_report_table(result.reports));

    std::vector<std::string> attr_warnings;
    const auto attributes = labeled_attributes(segments, metas, attr_warnings);
    log_warnings(attr_warnings, result.warnings);
    write_attributes_csv(out / "attributes.csv", attributes);
    result.artifacts.emplace_back("attributes.csv");
    try {
        const auto stats = genre_comparison(attributes, metas, config.alpha, config.t_test);
        log_warnings(stats.warnings, result.warnings);
        write_stats_csv(out / "stats.csv", stats);
        csv::write_text_file(out / "stats.json", stats_to_json(stats).dump(2) + "\n");
        result.artifacts.emplace_back("stats.csv");
        result.artifacts.emplace_back("stats.json");
    } catch (const DataError& e) {
        spdlog::warn("genre comparison skipped: {}", e.what());
        result.warnings.push_back(std::string("genre comparison skipped: ") + e.what());
    }

    auto manifest = Manifest::load_or_new(out);
    auto options = config_to_json(config);
    manifest.record("run", options, seeds, out, result.artifacts);
    manifest.save(out);
    spdlog::info("config hash {}", config_hash(config));
    return result;
}

std::vector<std::string> replay(const fs::path& manifest_file, const fs::path& output, int jobs) {
    const auto manifest = Manifest::load(manifest_file);
    const auto& stages = manifest.json().at("stages");
    if (!stages.contains("run")) throw DataError(manifest_file.string() + " has no run stage to replay");
    const auto& stage = stages.at("run");
    auto config = config_from_json(stage.at("options"));
    const auto recorded = stage.at("options_hash").get<std::string>();
    if (config_hash(config) != recorded) {
        throw IntegrityError("config hash mismatch: manifest records " + recorded + ", options hash to " +
                             config_hash(config));
    }
    config.output = output;
    config.jobs = jobs;
    run_pipeline(config);

    std::vector<std::string> mismatched;
    for (const auto& [name, digest] : stage.at("artifacts").items()) {
        const auto path = output / name;
        if (!fs::exists(path) || file_sha256(path) != digest.get<std::string>()) mismatched.push_back(name);
    }
    return mismatched;
}

} // namespace bugseg
