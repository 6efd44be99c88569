#pragma once

#include "bugseg/codebook.hpp"
#include "bugseg/embedding.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bugseg {

// One classifier input row: the TF-IDF visual block followed by the text block.
struct SegmentFeatures {
    std::string video_id;
    int segment_index = 0;
    std::vector<double> visual; // k weights
    std::vector<double> text;   // kTextDim components
    Label label = Label::Clean;

    SegmentKey key() const { return {video_id, segment_index}; }
    std::size_t size() const { return visual.size() + text.size(); }
    std::vector<double> concatenated() const;
    bool operator==(const SegmentFeatures&) const = default;
};

struct FeatureSet {
    std::size_t k = 0; // visual block width
    std::vector<SegmentFeatures> rows;
    std::vector<std::string> warnings;
};

// Joins the visual and text blocks of every labeled segment. Segments missing
// either block are left out with a warning naming them; unlabeled segments
// are skipped silently since they cannot be trained on.
FeatureSet assemble_features(const VisualFeatures& visual, std::span<const TextEmbedding> texts,
                             std::span<const Segment> segments);

// Hashed bag-of-words projection used when no sentence encoder output is
// available: lowercase whitespace tokens, each hashed to two distinct buckets
// with +-1 signs, then L2-normalized. Empty text gives the zero vector.
TextVector fallback_text_encode(std::string_view text, std::uint64_t seed);

// Train-set z-scoring of every feature column. Columns with zero variance are
// only centered.
class Standardizer {
public:
    Standardizer() = default;
    static Standardizer fit(std::span<const SegmentFeatures> rows);

    SegmentFeatures apply(const SegmentFeatures& row) const;
    std::vector<SegmentFeatures> apply(std::span<const SegmentFeatures> rows) const;

    nlohmann::json to_json() const;
    static Standardizer from_json(const nlohmann::json& j);

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& scale() const { return scale_; }

private:
    std::size_t k_ = 0;
    std::vector<double> mean_;
    std::vector<double> scale_;
};

// CSV with a `# k=<k> visual=0:<k> text=<k>:<k+512>` comment line followed by
// `video_id,segment_index,label,v0..,t0..`.
void write_features_csv(const std::filesystem::path& path, const FeatureSet& features);
FeatureSet read_features_csv(const std::filesystem::path& path);

} // namespace bugseg
