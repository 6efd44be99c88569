#include "bugseg/analytics.hpp"
#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/pipeline.hpp"
#include "bugseg/random.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bugseg;

namespace {

struct Common {
    int jobs = 1;
    bool verbose = false;
    bool quiet = false;
};

std::vector<ModelKind> parse_models(const std::vector<std::string>& names) {
    std::vector<ModelKind> out;
    for (const auto& n : names) out.push_back(parse_model_kind(n));
    return out;
}

std::vector<Segment> load_segments(const fs::path& segments, const std::string& labels) {
    auto out = read_segments(segments);
    if (!labels.empty()) out = attach_labels(std::move(out), read_labels(labels));
    return out;
}

void log_all(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) spdlog::warn("{}", w);
}

std::string abs_str(const std::string& p) {
    return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

// --- segment ---------------------------------------------------------------

struct SegmentArgs {
    std::string transcripts, meta, labels, output;
};

void cmd_segment(const SegmentArgs& a, const Common& common) {
    const auto metas = read_video_meta(a.meta);
    auto segments = segment_corpus(a.transcripts, metas, common.jobs);
    if (!a.labels.empty()) segments = attach_labels(std::move(segments), read_labels(a.labels));
    write_segments(fs::path(a.output) / "segments.csv", segments);
    auto manifest = Manifest::load_or_new(a.output);
    manifest.record("segment",
                    {{"transcripts", abs_str(a.transcripts)}, {"meta", abs_str(a.meta)}, {"labels", abs_str(a.labels)}},
                    nlohmann::json::object(), a.output, {"segments.csv"});
    manifest.save(a.output);
    spdlog::info("{} segments from {} videos -> {}", segments.size(), metas.size(),
                 (fs::path(a.output) / "segments.csv").string());
}

// --- validate --------------------------------------------------------------

struct ValidateArgs {
    std::string segments, frames, texts, labels, meta;
    bool strict = false;
};

int cmd_validate(const ValidateArgs& a) {
    auto segments = load_segments(a.segments, a.labels);
    std::vector<std::string> problems;
    if (!a.meta.empty()) problems = check_segments(segments, read_video_meta(a.meta));
    const auto dataset = load_embeddings(a.frames, a.texts, std::move(segments));
    for (const auto& p : problems) spdlog::error("{}", p);
    log_all(dataset.warnings());
    spdlog::info("{} segments, {} frame records, {} text records, {} warning(s)", dataset.segments().size(),
                 dataset.frames().size(), dataset.texts().size(), dataset.warnings().size());
    if (!problems.empty()) throw IntegrityError(std::to_string(problems.size()) + " segment problem(s)");
    if (a.strict && !dataset.warnings().empty()) {
        throw DataError(std::to_string(dataset.warnings().size()) + " warning(s) under --strict");
    }
    std::cout << "ok\n";
    return 0;
}

// --- codebook --------------------------------------------------------------

struct CodebookArgs {
    std::string segments, frames, texts, labels, designations, output;
    std::string mode = "automatic";
    std::size_t k = 64;
    std::uint64_t seed = 42;
};

void cmd_codebook(const CodebookArgs& a) {
    const auto mode = parse_codebook_mode(a.mode);
    auto segments = load_segments(a.segments, a.labels);
    auto frames = read_frame_jsonl(a.frames);
    std::vector<TextEmbedding> texts;
    if (!a.texts.empty()) texts = read_text_jsonl(a.texts);
    const EmbeddingDataset dataset(std::move(segments), std::move(frames), std::move(texts));

    Codebook codebook;
    nlohmann::json seeds = nlohmann::json::object();
    if (mode == CodebookMode::Automatic) {
        std::vector<FrameVector> points;
        for (const auto& f : dataset.frames()) points.push_back(f.vector);
        seeds = {{"root", a.seed}, {"codebook", derive_seed(a.seed, "codebook")}};
        codebook = kmeans_codebook(points, a.k, derive_seed(a.seed, "codebook"));
    } else {
        if (a.designations.empty()) throw ParameterError("manual codebook needs --designations");
        codebook = manual_codebook(dataset, read_designations(a.designations));
    }
    save_codebook(fs::path(a.output) / "codebook.json", codebook);
    auto manifest = Manifest::load_or_new(a.output);
    nlohmann::json options = {{"segments", abs_str(a.segments)}, {"frames", abs_str(a.frames)},
                              {"mode", std::string(to_string(mode))}};
    if (mode == CodebookMode::Automatic) options["k"] = a.k;
    else options["designations"] = abs_str(a.designations);
    manifest.record("codebook", options, seeds, a.output, {"codebook.json"});
    manifest.save(a.output);
    spdlog::info("{} codebook with {} centroids", to_string(mode), codebook.k());
}

// --- featurize -------------------------------------------------------------

struct FeaturizeArgs {
    std::string segments, frames, texts, labels, codebook, output;
    std::string idf = "smooth";
};

void cmd_featurize(const FeaturizeArgs& a) {
    const auto form = parse_idf_form(a.idf);
    const auto dataset = load_embeddings(a.frames, a.texts, load_segments(a.segments, a.labels));
    log_all(dataset.warnings());
    if (!fs::exists(a.codebook)) throw DataError("codebook not found: " + a.codebook);
    const auto codebook = load_codebook(a.codebook);
    const auto visual = tfidf_features(dataset, codebook, form);
    log_all(visual.warnings);
    const auto features = assemble_features(visual, dataset.texts(), dataset.segments());
    log_all(features.warnings);
    write_features_csv(fs::path(a.output) / "features.csv", features);
    auto manifest = Manifest::load_or_new(a.output);
    manifest.record("featurize",
                    {{"segments", abs_str(a.segments)},
                     {"frames", abs_str(a.frames)},
                     {"texts", abs_str(a.texts)},
                     {"codebook_sha256", file_sha256(a.codebook)},
                     {"idf", std::string(to_string(form))}},
                    nlohmann::json::object(), a.output, {"features.csv"});
    manifest.save(a.output);
    spdlog::info("{} feature rows of width {}", features.rows.size(), features.k + kTextDim);
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string features, meta, subset, output;
    std::vector<std::string> models;
    std::uint64_t seed = 42;
    bool standardize = false;
};

void cmd_train(const TrainArgs& a, const Common& common) {
    auto features = read_features_csv(a.features);
    std::vector<SegmentFeatures> rows = std::move(features.rows);
    if (!a.subset.empty()) {
        if (a.meta.empty()) throw ParameterError("--subset needs --meta");
        rows = filter_subset(rows, read_video_meta(a.meta), parse_subset_filter(a.subset));
    }
    ProtocolConfig protocol;
    protocol.seed = a.seed;
    if (!a.models.empty()) protocol.models = parse_models(a.models);
    protocol.standardize = a.standardize;
    protocol.threads = common.jobs;
    const auto trained = train_models(rows, protocol);
    const auto written = save_trained(a.output, trained);
    for (const auto& m : trained.models) {
        spdlog::info("{:<18} validation F1 {:.4f}", to_string(m.model->kind()), m.validation_f1);
    }
    nlohmann::json models = nlohmann::json::array();
    for (auto k : protocol.models) models.push_back(std::string(to_string(k)));
    auto manifest = Manifest::load_or_new(a.output);
    manifest.record("train",
                    {{"features_sha256", file_sha256(a.features)},
                     {"subset", a.subset},
                     {"models", models},
                     {"standardize", a.standardize}},
                    stage_seeds(a.seed), a.output, written);
    manifest.save(a.output);
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
    std::string features, trained, output, dataset = "full";
    std::vector<std::string> models;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const fs::path trained_dir = a.trained.empty() ? fs::path(a.output) : fs::path(a.trained);
    if (!fs::exists(trained_dir / "models")) throw DataError("no trained model found: " + (trained_dir / "models").string() + " does not exist");
    auto features = read_features_csv(a.features);
    const auto kinds = parse_models(a.models);
    const auto trained = load_trained(trained_dir, features.rows, kinds);
    const auto reports = evaluate_models(trained, a.dataset);
    const fs::path out(a.output);
    write_report_csv(out / "report.csv", reports);
    std::vector<fs::path> written{"report.csv"};
    for (const auto& m : trained.models) {
        const auto name = fs::path("predictions") / (std::string(to_string(m.model->kind())) + ".csv");
        write_predictions_csv(out / name, *m.model, trained.split.test);
        written.push_back(name);
    }
    auto manifest = Manifest::load_or_new(out);
    manifest.record("evaluate", {{"features_sha256", file_sha256(a.features)}, {"dataset", a.dataset}},
                    nlohmann::json::object(), out, written);
    manifest.save(out);
    std::cerr << format_report_table(reports);
}

// --- attributes / stats ----------------------------------------------------

struct AttributesArgs {
    std::string segments, labels, meta, output;
};

void cmd_attributes(const AttributesArgs& a) {
    const auto segments = load_segments(a.segments, a.labels);
    const auto metas = read_video_meta(a.meta);
    const auto attrs = corpus_attributes(segments, metas);
    write_attributes_csv(fs::path(a.output) / "attributes.csv", attrs);
    auto manifest = Manifest::load_or_new(a.output);
    manifest.record("attributes", {{"segments", abs_str(a.segments)}, {"labels", abs_str(a.labels)}},
                    nlohmann::json::object(), a.output, {"attributes.csv"});
    manifest.save(a.output);
    spdlog::info("attributes for {} videos", attrs.size());
}

struct StatsArgs {
    std::string attributes, meta, output;
    double alpha = 0.05;
    std::string t_test = "welch";
};

void cmd_stats(const StatsArgs& a) {
    const auto variant = a.t_test == "student" ? TTestVariant::Student : TTestVariant::Welch;
    const auto cmp = genre_comparison(read_attributes_csv(a.attributes), read_video_meta(a.meta), a.alpha, variant);
    log_all(cmp.warnings);
    const fs::path out(a.output);
    write_stats_csv(out / "stats.csv", cmp);
    csv::write_text_file(out / "stats.json", stats_to_json(cmp).dump(2) + "\n");
    auto manifest = Manifest::load_or_new(out);
    manifest.record("stats", {{"attributes_sha256", file_sha256(a.attributes)}, {"alpha", a.alpha}, {"t_test", a.t_test}},
                    nlohmann::json::object(), out, {"stats.csv", "stats.json"});
    manifest.save(out);
    for (const auto& c : cmp.attributes) {
        spdlog::info("{:<17} Action {:.4f} vs Sports {:.4f}  p={}  {}", c.attribute, c.mean_action, c.mean_sports,
                     c.t ? csv::format_double(c.t->p_value) : "n/a", c.reject ? "reject" : "keep");
    }
}

// --- user study ------------------------------------------------------------

struct UserStudyArgs {
    std::string windows, segments, meta, pipeline_labels, output;
};

void cmd_user_study(const UserStudyArgs& a) {
    const auto windows = read_user_windows(a.windows);
    const auto segments = load_segments(a.segments, a.pipeline_labels);
    std::map<std::string, VideoMeta> metas;
    for (auto& m : read_video_meta(a.meta)) metas.emplace(m.video_id, m);
    std::map<std::string, std::vector<Segment>> by_video;
    for (const auto& s : segments) by_video[s.video_id].push_back(s);
    std::map<std::string, std::vector<UserWindow>> windows_of;
    for (const auto& w : windows) windows_of[w.video_id].push_back(w);

    std::map<std::string, std::map<std::string, VideoAttributes>> per_participant;
    std::map<std::string, VideoAttributes> pipeline;
    std::vector<std::string> videos;
    for (const auto& [video, ws] : windows_of) {
        auto meta = metas.find(video);
        if (meta == metas.end()) throw IntegrityError("user window names unknown video " + video);
        auto segs = by_video.find(video);
        if (segs == by_video.end()) throw IntegrityError("no segments for user-study video " + video);
        for (const auto& [pid, labels] : map_user_windows(ws, segs->second, meta->second.duration)) {
            auto relabeled = segs->second;
            std::sort(relabeled.begin(), relabeled.end(), [](const Segment& x, const Segment& y) { return x.index < y.index; });
            for (std::size_t i = 0; i < relabeled.size(); ++i) relabeled[i].label = labels[i];
            per_participant[video][pid] = video_attributes(relabeled, meta->second);
        }
        pipeline[video] = video_attributes(segs->second, meta->second);
        videos.push_back(video);
    }
    const auto summary = user_study_summary(per_participant, pipeline, videos);
    const fs::path out(a.output);
    write_user_study_csv(out / "user_study.csv", summary);
    auto manifest = Manifest::load_or_new(out);
    manifest.record("user-study",
                    {{"windows_sha256", file_sha256(a.windows)},
                     {"segments", abs_str(a.segments)},
                     {"pipeline_labels", abs_str(a.pipeline_labels)}},
                    nlohmann::json::object(), out, {"user_study.csv"});
    manifest.save(out);
    std::cerr << format_user_study_table(summary);
}

// --- synth / run -----------------------------------------------------------

void cmd_synth(const SynthOptions& options, const std::string& output) {
    const auto summary = write_synthetic_corpus(output, options);
    spdlog::info("synthetic corpus: {} videos, {} segments, {} buggy -> {}", summary.videos, summary.segments,
                 summary.buggy, output);
}

struct RunArgs {
    std::string config, replay, output, subset, codebook_mode, idf;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::vector<std::string> models;
    bool standardize = false;
};

int cmd_run(const RunArgs& a, const Common& common, bool jobs_given) {
    const auto started = std::chrono::steady_clock::now();
    if (!a.replay.empty()) {
        const fs::path out = a.output.empty() ? fs::path("replay") : fs::path(a.output);
        const auto mismatched = replay(a.replay, out, common.jobs);
        if (!mismatched.empty()) {
            for (const auto& m : mismatched) spdlog::error("replay differs: {}", m);
            return 1;
        }
        spdlog::info("replay matches every recorded artifact");
        return 0;
    }
    auto config = load_run_config(a.config);
    if (a.seed) config.seed = *a.seed;
    if (a.k) config.k = *a.k;
    if (!a.codebook_mode.empty()) config.codebook_mode = parse_codebook_mode(a.codebook_mode);
    if (!a.idf.empty()) config.idf = parse_idf_form(a.idf);
    if (!a.subset.empty()) config.subset = parse_subset_filter(a.subset);
    if (!a.models.empty()) config.models = parse_models(a.models);
    if (a.standardize) config.standardize = true;
    if (!a.output.empty()) config.output = a.output;
    if (jobs_given) config.jobs = common.jobs;
    run_pipeline(config);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - started;
    spdlog::info("run finished in {:.1f} s -> {}", took.count(), config.output.string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("bugseg");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);

    CLI::App app{"Gameplay-video bug segment pipeline", "bugseg"};
    app.set_version_flag("--version", std::string("bugseg ") + std::string(version()));
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    auto* jobs_opt = app.add_option("--jobs,-j", common.jobs, "Worker threads for per-video and per-tree work")
                         ->check(CLI::PositiveNumber);
    app.add_flag("--verbose,-v", common.verbose, "Debug logging");
    app.add_flag("--quiet,-q", common.quiet, "Only warnings and errors");

    SegmentArgs seg;
    auto* segment = app.add_subcommand("segment", "Split transcripts into >=5 s segments");
    segment->add_option("--transcripts", seg.transcripts, "Directory of <video_id>.{srt,vtt,tsv}")->required();
    segment->add_option("--meta", seg.meta, "Video metadata CSV")->required();
    segment->add_option("--labels", seg.labels, "Segment label CSV to attach");
    segment->add_option("--output,-o", seg.output, "Output directory")->required();

    ValidateArgs val;
    auto* validate = app.add_subcommand("validate", "Check segments and embedding files for consistency");
    validate->add_option("--segments", val.segments, "Segment CSV")->required();
    validate->add_option("--frames", val.frames, "Frame embedding JSONL")->required();
    validate->add_option("--texts", val.texts, "Text embedding JSONL")->required();
    validate->add_option("--labels", val.labels, "Segment label CSV");
    validate->add_option("--meta", val.meta, "Video metadata CSV; enables the tiling check");
    validate->add_flag("--strict", val.strict, "Treat warnings as errors");

    CodebookArgs cb;
    auto* codebook = app.add_subcommand("codebook", "Build the visual-word codebook");
    codebook->add_option("--segments", cb.segments, "Segment CSV")->required();
    codebook->add_option("--frames", cb.frames, "Frame embedding JSONL")->required();
    codebook->add_option("--texts", cb.texts, "Text embedding JSONL");
    codebook->add_option("--labels", cb.labels, "Segment label CSV");
    codebook->add_option("--mode", cb.mode, "automatic or manual")->capture_default_str();
    codebook->add_option("--k", cb.k, "Centroid count for automatic mode")->capture_default_str();
    codebook->add_option("--seed", cb.seed, "Root seed")->capture_default_str();
    codebook->add_option("--designations", cb.designations, "Buggy-frame designations for manual mode");
    codebook->add_option("--output,-o", cb.output, "Output directory")->required();

    FeaturizeArgs ft;
    auto* featurize = app.add_subcommand("featurize", "Compute TF-IDF + text feature rows");
    featurize->add_option("--segments", ft.segments, "Segment CSV")->required();
    featurize->add_option("--frames", ft.frames, "Frame embedding JSONL")->required();
    featurize->add_option("--texts", ft.texts, "Text embedding JSONL")->required();
    featurize->add_option("--labels", ft.labels, "Segment label CSV");
    featurize->add_option("--codebook", ft.codebook, "codebook.json")->required();
    featurize->add_option("--idf", ft.idf, "raw or smooth")->capture_default_str();
    featurize->add_option("--output,-o", ft.output, "Output directory")->required();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Split, tune and train classifiers");
    train->add_option("--features", tr.features, "features.csv")->required();
    train->add_option("--seed", tr.seed, "Root seed")->capture_default_str();
    train->add_option("--models", tr.models, "Model names (default: all)")->delimiter(',');
    train->add_flag("--standardize", tr.standardize, "z-score features on the training part");
    train->add_option("--subset", tr.subset, "genre=<Genre> or game=<title>");
    train->add_option("--meta", tr.meta, "Video metadata CSV (for --subset)");
    train->add_option("--output,-o", tr.output, "Output directory")->required();

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test part");
    evaluate->add_option("--features", ev.features, "features.csv")->required();
    evaluate->add_option("--trained", ev.trained, "Directory written by train (default: --output)");
    evaluate->add_option("--models", ev.models, "Model names (default: every trained model)")->delimiter(',');
    evaluate->add_option("--dataset", ev.dataset, "Dataset id for the report")->capture_default_str();
    evaluate->add_option("--output,-o", ev.output, "Output directory")->required();

    AttributesArgs at;
    auto* attributes = app.add_subcommand("attributes", "Per-video bug-distribution attributes");
    attributes->add_option("--segments", at.segments, "Segment CSV")->required();
    attributes->add_option("--labels", at.labels, "Label or prediction CSV");
    attributes->add_option("--meta", at.meta, "Video metadata CSV")->required();
    attributes->add_option("--output,-o", at.output, "Output directory")->required();

    StatsArgs st;
    auto* stats = app.add_subcommand("stats", "Action vs Sports attribute tests");
    stats->add_option("--attributes", st.attributes, "attributes.csv")->required();
    stats->add_option("--meta", st.meta, "Video metadata CSV")->required();
    stats->add_option("--alpha", st.alpha, "Family-wise significance level")->capture_default_str();
    stats->add_option("--t-test", st.t_test, "welch or student")
        ->check(CLI::IsMember({"welch", "student"}))
        ->capture_default_str();
    stats->add_option("--output,-o", st.output, "Output directory")->required();

    UserStudyArgs us;
    auto* user_study = app.add_subcommand("user-study", "Compare participant bug windows with pipeline labels");
    user_study->add_option("--windows", us.windows, "participant_id,video_id,start_seconds,end_seconds")->required();
    user_study->add_option("--segments", us.segments, "Segment CSV")->required();
    user_study->add_option("--meta", us.meta, "Video metadata CSV")->required();
    user_study->add_option("--pipeline-labels", us.pipeline_labels, "Label or prediction CSV for the pipeline side");
    user_study->add_option("--output,-o", us.output, "Output directory")->required();

    SynthOptions so;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    synth->add_option("--videos", so.videos, "Video count")->capture_default_str();
    synth->add_option("--separation", so.separation, "Shift of buggy frames along the bug direction")
        ->capture_default_str();
    synth->add_option("--seed", so.seed, "Root seed")->capture_default_str();
    synth->add_option("--cues", so.segments_per_video, "Caption cues per video")->capture_default_str();
    synth->add_option("--output,-o", synth_out, "Output directory")->required();

    RunArgs ra;
    auto* run = app.add_subcommand("run", "Run the whole pipeline from a config file");
    auto* config_opt = run->add_option("--config,-c", ra.config, "Run config file")->check(CLI::ExistingFile);
    auto* replay_opt = run->add_option("--replay", ra.replay, "Re-run from a manifest and compare artifacts");
    config_opt->excludes(replay_opt);
    run->add_option("--seed", ra.seed, "Override the root seed");
    run->add_option("--k", ra.k, "Override the codebook size");
    run->add_option("--codebook-mode", ra.codebook_mode, "Override the codebook mode");
    run->add_option("--idf", ra.idf, "Override the IDF form");
    run->add_option("--subset", ra.subset, "Override the subset filter");
    run->add_option("--models", ra.models, "Override the model list")->delimiter(',');
    run->add_flag("--standardize", ra.standardize, "z-score features");
    run->add_option("--output,-o", ra.output, "Override the output directory");

    try {
        app.parse(argc, argv);
        if (run->parsed() && ra.config.empty() && ra.replay.empty()) {
            throw CLI::RequiredError("run needs --config or --replay");
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const CLI::App* failing = &app;
        for (const auto* sub : app.get_subcommands()) failing = sub;
        std::cerr << "error: " << e.what() << "\n\n" << failing->help();
        return 2;
    }

    if (common.verbose) spdlog::set_level(spdlog::level::debug);
    if (common.quiet) spdlog::set_level(spdlog::level::warn);

    try {
        if (segment->parsed()) cmd_segment(seg, common);
        else if (validate->parsed()) return cmd_validate(val);
        else if (codebook->parsed()) cmd_codebook(cb);
        else if (featurize->parsed()) cmd_featurize(ft);
        else if (train->parsed()) cmd_train(tr, common);
        else if (evaluate->parsed()) cmd_evaluate(ev);
        else if (attributes->parsed()) cmd_attributes(at);
        else if (stats->parsed()) cmd_stats(st);
        else if (user_study->parsed()) cmd_user_study(us);
        else if (synth->parsed()) cmd_synth(so, synth_out);
        else if (run->parsed()) return cmd_run(ra, common, jobs_opt->count() > 0);
        return 0;
    } catch (const bugseg::Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::critical("internal error: {}", e.what());
        return 1;
    }
}
