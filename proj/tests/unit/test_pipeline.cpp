#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/pipeline.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace bugseg;

TEST(RunConfig, ParsesSectionsAndResolvesPaths) {
    const std::string text = R"(# demo
[data]
transcripts = "t"
meta = "/abs/meta.csv"
labels = "labels.csv"
frames = "frames.jsonl"
texts = "texts.jsonl"

[codebook]
mode = "automatic"
k = 16
idf = "raw"

[split]
train = 0.6
validation = 0.2
test = 0.2

[classifiers]
models = ["Linear", "KNN"]
standardize = true

[grid]
linear_l2 = [0.001, 0.1]
linear_lr = [0.5, 1.0, 2.0]
knn_k = [3]
forest_trees = [10, 20]
forest_max_features = [0]
forest_min_leaf = [1, 2]

[subset]
filter = "genre=Sports"

[stats]
alpha = 0.01
t_test = "student"

[run]
seed = 7
output = "runs/a"
jobs = 2
)";
    const auto c = parse_run_config(text, "/base");
    EXPECT_EQ(c.data.transcripts, std::filesystem::path("/base/t"));
    EXPECT_EQ(c.data.meta, std::filesystem::path("/abs/meta.csv"));
    EXPECT_EQ(c.output, std::filesystem::path("/base/runs/a"));
    EXPECT_EQ(c.k, 16u);
    EXPECT_EQ(c.idf, IdfForm::Raw);
    EXPECT_DOUBLE_EQ(c.fractions.train, 0.6);
    EXPECT_EQ(c.models, (std::vector<ModelKind>{ModelKind::Linear, ModelKind::KNN}));
    EXPECT_TRUE(c.standardize);
    EXPECT_EQ(c.grid.linear.size(), 6u);
    EXPECT_EQ(c.grid.knn.size(), 1u);
    EXPECT_EQ(c.grid.forest.size(), 4u);
    ASSERT_TRUE(c.subset.has_value());
    EXPECT_EQ(c.subset->label(), "genre=Sports");
    EXPECT_DOUBLE_EQ(c.alpha, 0.01);
    EXPECT_EQ(c.t_test, TTestVariant::Student);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.jobs, 2);
}

TEST(RunConfig, RejectsUnknownAndMalformed) {
    EXPECT_THROW(parse_run_config("[data]\nframez = \"x\"\n", "/"), Error);
    EXPECT_THROW(parse_run_config("[nope]\n", "/"), Error);
    EXPECT_THROW(parse_run_config("seed = 1\n", "/"), Error);
    EXPECT_THROW(parse_run_config("[run]\nseed = 1\nseed = 2\n", "/"), Error);
    EXPECT_THROW(parse_run_config("[run]\nseed = \n", "/"), ParseError);
    EXPECT_THROW(parse_run_config("[codebook]\nmode = \"fuzzy\"\n", "/"), Error);
    EXPECT_THROW(load_run_config("/nonexistent/bugseg.toml"), DataError);
}

TEST(RunConfig, JsonRoundTripAndHash) {
    RunConfig c;
    c.data.meta = "/x/meta.csv";
    c.k = 12;
    c.subset = parse_subset_filter("game=Pitch Masters");
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 64u);

    auto moved = c;
    moved.output = "/elsewhere";
    moved.jobs = 8;
    EXPECT_EQ(config_hash(moved), config_hash(c));
    auto reseeded = c;
    reseeded.seed = 43;
    EXPECT_NE(config_hash(reseeded), config_hash(c));
}

TEST(RunConfig, ValidateListsEveryProblem) {
    RunConfig c;
    c.data.transcripts = "/nonexistent/t";
    c.data.meta = "/nonexistent/meta.csv";
    c.codebook_mode = CodebookMode::Manual;
    try {
        validate_config(c);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("/nonexistent/t"), std::string::npos) << msg;
        EXPECT_NE(msg.find("/nonexistent/meta.csv"), std::string::npos) << msg;
        EXPECT_NE(msg.find("designations"), std::string::npos) << msg;
    }
}

TEST(Hashing, Sha256) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = fixture::temp_dir("sha");
    csv::write_text_file(dir / "a", "abc");
    EXPECT_EQ(file_sha256(dir / "a"), sha256_hex("abc"));
}

TEST(StageSeeds, DerivedFromRoot) {
    const auto s = stage_seeds(42);
    EXPECT_EQ(s["codebook"].get<std::uint64_t>(), derive_seed(42, "codebook"));
    EXPECT_EQ(s["split"].get<std::uint64_t>(), derive_seed(42, "split"));
    EXPECT_NE(stage_seeds(43), s);
}

TEST(Manifest, RecordsAndMergesStages) {
    const auto dir = fixture::temp_dir("manifest");
    csv::write_text_file(dir / "a.csv", "x\n");
    auto m = Manifest::load_or_new(dir);
    m.record("segment", {{"k", 1}}, {}, dir, {"a.csv"});
    m.save(dir);
    auto again = Manifest::load_or_new(dir);
    csv::write_text_file(dir / "b.csv", "y\n");
    again.record("codebook", {{"k", 2}}, {{"codebook", 5}}, dir, {"b.csv"});
    again.save(dir);
    const auto j = Manifest::load(dir / "manifest.json").json();
    EXPECT_EQ(j["format"], "bugseg-manifest");
    EXPECT_EQ(j["stages"].size(), 2u);
    EXPECT_EQ(j["stages"]["segment"]["artifacts"]["a.csv"], sha256_hex("x\n"));
    EXPECT_EQ(j["stages"]["codebook"]["seeds"]["codebook"], 5);
    EXPECT_THROW(Manifest::load(dir / "missing.json"), Error);
}

TEST(Synthetic, WritesCompleteCorpus) {
    const auto dir = fixture::temp_dir("synth");
    SynthOptions o;
    o.videos = 4;
    o.seed = 3;
    const auto s = write_synthetic_corpus(dir, o);
    EXPECT_EQ(s.videos, 4u);
    EXPECT_GT(s.segments, 4u);
    for (const char* f : {"meta.csv", "labels.csv", "frames.jsonl", "texts.jsonl", "designations.csv", "windows.csv",
                          "demo.toml", "transcripts/vid000.tsv"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    const auto cfg = load_run_config(dir / "demo.toml");
    EXPECT_NO_THROW(validate_config(cfg));
    const auto other = fixture::temp_dir("synth-again");
    write_synthetic_corpus(other, o);
    EXPECT_EQ(file_sha256(dir / "frames.jsonl"), file_sha256(other / "frames.jsonl"));
    EXPECT_EQ(file_sha256(dir / "labels.csv"), file_sha256(other / "labels.csv"));
}

TEST(RunPipeline, SmallCorpusEndToEnd) {
    const auto dir = fixture::temp_dir("pipeline");
    SynthOptions o;
    o.videos = 12;
    o.seed = 5;
    write_synthetic_corpus(dir / "data", o);
    auto cfg = load_run_config(dir / "data" / "demo.toml");
    cfg.k = 8;
    cfg.models = {ModelKind::Linear, ModelKind::KNN, ModelKind::WeightedEnsemble};
    cfg.output = dir / "out";
    const auto r = run_pipeline(cfg);
    ASSERT_EQ(r.reports.size(), 3u);
    for (const char* f : {"segments.csv", "codebook.json", "features.csv", "split.csv", "report.csv",
                          "models/LinearModel.json", "predictions/LinearModel.csv", "attributes.csv", "manifest.json"}) {
        EXPECT_TRUE(std::filesystem::exists(cfg.output / f)) << f;
    }
    const auto trained = load_trained(cfg.output, read_features_csv(cfg.output / "features.csv").rows);
    EXPECT_EQ(trained.models.size(), 3u);
    EXPECT_TRUE(replay(cfg.output / "manifest.json", dir / "replayed", 2).empty());
}

TEST(RunPipeline, FeatureRowsMatchLabeledSegments) {
    const auto dir = fixture::temp_dir("feature-count");
    SynthOptions o;
    o.videos = 6;
    o.seed = 11;
    const auto s = write_synthetic_corpus(dir / "data", o);
    auto cfg = load_run_config(dir / "data" / "demo.toml");
    cfg.k = 6;
    cfg.models = {ModelKind::Linear};
    cfg.output = dir / "out";
    run_pipeline(cfg);
    const auto fs = read_features_csv(cfg.output / "features.csv");
    EXPECT_EQ(fs.rows.size(), s.segments);
    std::size_t buggy = 0;
    for (const auto& r : fs.rows) buggy += r.label == Label::Buggy;
    EXPECT_EQ(buggy, s.buggy);
}
