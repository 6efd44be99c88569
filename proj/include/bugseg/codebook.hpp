#pragma once

#include "bugseg/embedding.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bugseg {

enum class CodebookMode { Automatic, Manual };

std::string_view to_string(CodebookMode mode);
CodebookMode parse_codebook_mode(std::string_view text);

// Visual-word centroids. Immutable once built; centroid norms are cached for
// cosine assignment.
class Codebook {
public:
    Codebook() = default;
    Codebook(CodebookMode mode, std::vector<FrameVector> centroids, std::uint64_t seed);

    CodebookMode mode() const { return mode_; }
    std::size_t k() const { return centroids_.size(); }
    std::uint64_t seed() const { return seed_; }
    const std::vector<FrameVector>& centroids() const { return centroids_; }
    const std::vector<double>& norms() const { return norms_; }

    nlohmann::json to_json() const;
    static Codebook from_json(const nlohmann::json& j);

    bool operator==(const Codebook& o) const {
        return mode_ == o.mode_ && seed_ == o.seed_ && centroids_ == o.centroids_;
    }

private:
    CodebookMode mode_ = CodebookMode::Automatic;
    std::vector<FrameVector> centroids_;
    std::vector<double> norms_;
    std::uint64_t seed_ = 0;
};

void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

struct KMeansOptions {
    int max_iterations = 100;
    double tolerance = 1e-6; // stop once no centroid moves further than this
};

struct KMeansResult {
    Codebook codebook;
    std::vector<double> inertia; // after each assignment step
    int iterations = 0;
};

// Euclidean k-means with k-means++ seeding and Lloyd iterations. A cluster
// that ends up empty is reseeded at the point farthest from its assigned
// centroid. Throws ParameterError when k < 2 or k exceeds the point count;
// throws std::logic_error if inertia ever increases.
KMeansResult kmeans(std::span<const FrameVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

inline Codebook kmeans_codebook(std::span<const FrameVector> points, std::size_t k, std::uint64_t seed) {
    return kmeans(points, k, seed).codebook;
}

// Squared Euclidean distance; shared by k-means and tests.
double squared_distance(const FrameVector& a, const FrameVector& b);

// Buggy segment -> second offset of the frame where the bug first shows.
using BuggyCentroidDesignation = std::map<SegmentKey, int>;

BuggyCentroidDesignation read_designations(const std::filesystem::path& path);
void write_designations(const std::filesystem::path& path, const BuggyCentroidDesignation& designations);

// One cluster per frame-bearing segment, in dataset order. A buggy segment's
// centroid is its designated frame; any other segment's centroid is the mean
// of its frames.
Codebook manual_codebook(const EmbeddingDataset& dataset, const BuggyCentroidDesignation& designations);

// Index of the centroid with the highest cosine similarity. Ties go to the
// lowest index; a zero vector on either side has similarity 0.
std::size_t assign_frame(const FrameVector& frame, const Codebook& codebook);

enum class IdfForm {
    Raw,    // F_total / max(M(c), 1)
    Smooth, // ln((1 + F_total) / (1 + M(c))) + 1
};

std::string_view to_string(IdfForm form);
IdfForm parse_idf_form(std::string_view text);

double inverse_document_frequency(std::size_t total_frames, std::size_t matches, IdfForm form);

// Per-segment TF-IDF visual-word weights. Row order follows the dataset's
// segment order; segments without frames are skipped with a warning.
struct VisualFeatures {
    std::size_t k = 0;
    std::vector<SegmentKey> keys;
    std::vector<std::vector<double>> weights;
    std::vector<double> idf; // per centroid
    std::vector<std::string> warnings;

    const std::vector<double>* find(const SegmentKey& key) const;
};

// TF(s,c) = matches of c in s / frames in s; weight = TF(s,c) * IDF(c), with
// IDF computed from corpus-wide match counts.
VisualFeatures tfidf_features(const EmbeddingDataset& dataset, const Codebook& codebook,
                              IdfForm form = IdfForm::Smooth);

} // namespace bugseg
