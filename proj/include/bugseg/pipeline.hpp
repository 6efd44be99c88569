#pragma once

#include "bugseg/analytics.hpp"
#include "bugseg/codebook.hpp"
#include "bugseg/protocol.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bugseg {

std::string_view version();

// Declarative description of one full pipeline run. Relative paths in a
// config file resolve against the file's directory.
struct RunConfig {
    struct Data {
        std::filesystem::path transcripts; // directory of <video_id>.{srt,vtt,tsv}
        std::filesystem::path meta;
        std::filesystem::path labels;
        std::filesystem::path frames;       // frame JSONL
        std::filesystem::path texts;        // text JSONL
        std::filesystem::path designations; // manual codebook only
    } data;
    CodebookMode codebook_mode = CodebookMode::Automatic;
    std::size_t k = 64;
    IdfForm idf = IdfForm::Smooth;
    std::uint64_t seed = 42;
    SplitFractions fractions;
    std::vector<ModelKind> models{ModelKind::Linear, ModelKind::KNN, ModelKind::RandomForest, ModelKind::ExtraTrees,
                                  ModelKind::WeightedEnsemble};
    ModelGrid grid = ModelGrid::defaults();
    bool standardize = false;
    std::optional<SubsetFilter> subset;
    double alpha = 0.05;
    TTestVariant t_test = TTestVariant::Welch;
    std::filesystem::path output = "out";
    int jobs = 1; // never changes results
};

// Parses the INI/TOML-like config format:
//
//   [section]
//   key = "string" | 12 | 0.5 | true | [1, 2] | ["a", "b"]
//
// Unknown sections or keys are errors.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical JSON of everything that can change results. Output directory and
// job count are left out so relocating a run keeps its hash.
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const RunConfig& config);

// Throws DataError naming every missing input.
void validate_config(const RunConfig& config);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

// Seeds of every randomized stage, derived from the root seed:
//   codebook       derive_seed(root, "codebook")
//   split          derive_seed(root, "split")
//   linear         derive_seed(root, "linear")
//   random_forest  derive_seed(root, "random_forest"), then per grid entry
//   extra_trees    derive_seed(root, "extra_trees"), then per grid entry
nlohmann::json stage_seeds(std::uint64_t root);

// manifest.json in an output directory. Each stage records the options it ran
// with, their hash, its seeds and a digest of every artifact it wrote.
class Manifest {
public:
    static Manifest load_or_new(const std::filesystem::path& dir);
    static Manifest load(const std::filesystem::path& file);

    void record(const std::string& stage, const nlohmann::json& options, const nlohmann::json& seeds,
                const std::filesystem::path& dir, const std::vector<std::filesystem::path>& artifacts);
    void save(const std::filesystem::path& dir) const;

    const nlohmann::json& json() const { return json_; }

private:
    nlohmann::json json_;
};

// Trained artifacts: models/<Model>.json, split.csv and, when used,
// standardizer.json. Returns the written paths relative to `dir`.
std::vector<std::filesystem::path> save_trained(const std::filesystem::path& dir, const TrainedSet& trained);

// Reads back what save_trained wrote. `models` empty means every model file
// present; naming a model whose file is missing is a DataError.
TrainedSet load_trained(const std::filesystem::path& dir, std::span<const SegmentFeatures> features,
                        std::span<const ModelKind> models = {});

// Labels-compatible CSV `video_id,segment_index,label,probability`.
void write_predictions_csv(const std::filesystem::path& path, const Model& model, std::span<const SegmentFeatures> rows);

struct RunResult {
    std::vector<EvaluationReport> reports;
    std::vector<std::filesystem::path> artifacts; // relative to the output dir
    std::vector<std::string> warnings;
};

// segment -> label -> embed -> codebook -> featurize -> train -> evaluate ->
// attributes -> stats, all under config.output.
RunResult run_pipeline(const RunConfig& config);

// Re-runs the "run" stage of a manifest into `output` after checking the
// recorded config hash. Returns the artifacts whose digest differs.
std::vector<std::string> replay(const std::filesystem::path& manifest_file, const std::filesystem::path& output,
                                int jobs);

// --- synthetic corpus --------------------------------------------------------

struct SynthOptions {
    int videos = 50;
    double separation = 4.0;
    std::uint64_t seed = 42;
    int segments_per_video = 22; // caption cues per video, before merging
};

struct SynthSummary {
    std::size_t videos = 0;
    std::size_t segments = 0;
    std::size_t buggy = 0;
};

// Writes transcripts/<id>.tsv, meta.csv, labels.csv, frames.jsonl,
// texts.jsonl, designations.csv, windows.csv and demo.toml into `dir`.
SynthSummary write_synthetic_corpus(const std::filesystem::path& dir, const SynthOptions& options);

} // namespace bugseg
