#include "bugseg/codebook.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bugseg {

std::string_view to_string(CodebookMode mode) {
    return mode == CodebookMode::Manual ? "manual" : "automatic";
}

CodebookMode parse_codebook_mode(std::string_view text) {
    if (text == "automatic" || text == "Automatic" || text == "auto") return CodebookMode::Automatic;
    if (text == "manual" || text == "Manual") return CodebookMode::Manual;
    throw ParameterError("unknown codebook mode '" + std::string(text) + "'");
}

namespace {

double norm(const FrameVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const FrameVector& a, const FrameVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kFrameDim; ++i) s += a[i] * b[i];
    return s;
}

} // namespace

Codebook::Codebook(CodebookMode mode, std::vector<FrameVector> centroids, std::uint64_t seed)
    : mode_(mode), centroids_(std::move(centroids)), seed_(seed) {
    if (centroids_.empty()) throw ParameterError("codebook needs at least one centroid");
    norms_.reserve(centroids_.size());
    for (const auto& c : centroids_) {
        if (!std::all_of(c.begin(), c.end(), [](double x) { return std::isfinite(x); })) {
            throw DataError("codebook centroid has a non-finite component");
        }
        norms_.push_back(norm(c));
    }
}

nlohmann::json Codebook::to_json() const {
    return {{"mode", to_string(mode_)}, {"k", k()}, {"seed", seed_}, {"centroids", centroids_}};
}

Codebook Codebook::from_json(const nlohmann::json& j) {
    try {
        auto mode = parse_codebook_mode(j.at("mode").get<std::string>());
        auto seed = j.at("seed").get<std::uint64_t>();
        std::vector<FrameVector> centroids;
        for (const auto& c : j.at("centroids")) {
            if (c.size() != kFrameDim) {
                throw DimensionError("codebook centroid has " + std::to_string(c.size()) + " components, expected " +
                                     std::to_string(kFrameDim));
            }
            centroids.push_back(c.get<FrameVector>());
        }
        if (j.at("k").get<std::size_t>() != centroids.size()) throw DataError("codebook k does not match centroid count");
        return Codebook(mode, std::move(centroids), seed);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed codebook: ") + e.what());
    }
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
    csv::write_text_file(path, codebook.to_json().dump() + "\n");
}

Codebook load_codebook(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
    return Codebook::from_json(j);
}

double squared_distance(const FrameVector& a, const FrameVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kFrameDim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

namespace {

std::vector<FrameVector> kmeanspp_init(std::span<const FrameVector> points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    std::vector<FrameVector> centers;
    centers.reserve(k);
    centers.push_back(points[uniform_int<std::size_t>(rng, 0, n - 1)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers[0]);

    while (centers.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > r && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0 && pick > 0) --pick; // guard against rounding at the tail
        } else {
            pick = uniform_int<std::size_t>(rng, 0, n - 1); // fewer distinct points than k
        }
        centers.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
    return centers;
}

std::size_t nearest(const FrameVector& p, const std::vector<FrameVector>& centers, double& best_d2) {
    std::size_t best = 0;
    best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = squared_distance(p, centers[c]);
        if (d < best_d2) {
            best_d2 = d;
            best = c;
        }
    }
    return best;
}

} // namespace

KMeansResult kmeans(std::span<const FrameVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
    if (k < 2) throw ParameterError("k-means needs k >= 2, got " + std::to_string(k));
    if (points.size() < k) {
        throw ParameterError("k-means needs at least k points: k=" + std::to_string(k) + ", points=" +
                             std::to_string(points.size()));
    }
    const std::size_t n = points.size();
    Rng rng(seed);
    auto centers = kmeanspp_init(points, k, rng);

    KMeansResult result;
    std::vector<std::size_t> assignment(n);
    std::vector<double> dist(n);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = nearest(points[i], centers, dist[i]);
            inertia += dist[i];
        }
        if (!result.inertia.empty()) {
            const double prev = result.inertia.back();
            if (inertia > prev + 1e-9 * std::max(prev, 1.0)) {
                throw std::logic_error("k-means inertia increased from " + std::to_string(prev) + " to " +
                                       std::to_string(inertia));
            }
        }
        result.inertia.push_back(inertia);
        result.iterations = iter + 1;

        // Update step: means in point order so the reduction is reproducible.
        std::vector<FrameVector> sums(k, FrameVector{});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[assignment[i]];
            for (std::size_t d = 0; d < kFrameDim; ++d) s[d] += points[i][d];
            ++counts[assignment[i]];
        }
        std::vector<FrameVector> updated(k);
        std::vector<std::size_t> empty;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                empty.push_back(c);
                updated[c] = centers[c];
                continue;
            }
            for (std::size_t d = 0; d < kFrameDim; ++d) updated[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        if (!empty.empty()) {
            std::vector<double> far(n);
            for (std::size_t i = 0; i < n; ++i) far[i] = squared_distance(points[i], updated[assignment[i]]);
            for (auto c : empty) {
                auto it = std::max_element(far.begin(), far.end()); // first maximum on ties
                const auto i = static_cast<std::size_t>(it - far.begin());
                updated[c] = points[i];
                far[i] = -1.0;
            }
        }

        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) movement = std::max(movement, std::sqrt(squared_distance(updated[c], centers[c])));
        centers = std::move(updated);
        if (movement < options.tolerance) break;
    }
    result.codebook = Codebook(CodebookMode::Automatic, std::move(centers), seed);
    return result;
}

BuggyCentroidDesignation read_designations(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "segment_index", "second_offset"}, path.string());
    const auto c_id = table.column("video_id");
    const auto c_idx = table.column("segment_index");
    const auto c_off = table.column("second_offset");
    BuggyCentroidDesignation out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        SegmentKey key{row[c_id], static_cast<int>(csv::parse_int(row[c_idx], line, "segment_index"))};
        const auto offset = static_cast<int>(csv::parse_int(row[c_off], line, "second_offset"));
        if (!out.emplace(key, offset).second) throw IntegrityError("duplicate designation for " + to_string(key));
    }
    return out;
}

void write_designations(const std::filesystem::path& path, const BuggyCentroidDesignation& designations) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "segment_index", "second_offset"});
    for (const auto& [key, offset] : designations) {
        csv::write_row(out, {key.first, std::to_string(key.second), std::to_string(offset)});
    }
    csv::write_text_file(path, out.str());
}

Codebook manual_codebook(const EmbeddingDataset& dataset, const BuggyCentroidDesignation& designations) {
    std::vector<std::string> problems;
    for (const auto& [key, offset] : designations) {
        const auto* seg = dataset.segment(key);
        if (!seg) {
            problems.push_back(to_string(key) + " (no such segment)");
        } else if (!seg->is_buggy()) {
            problems.push_back(to_string(key) + " (segment is not buggy)");
        } else {
            auto frames = dataset.frames_of(key);
            if (std::none_of(frames.begin(), frames.end(), [&](const FrameEmbedding& f) { return f.second_offset == offset; })) {
                problems.push_back(to_string(key) + " (no frame at +" + std::to_string(offset) + "s)");
            }
        }
    }
    for (const auto& s : dataset.segments()) {
        if (s.is_buggy() && !dataset.frames_of(key_of(s)).empty() && !designations.count(key_of(s))) {
            problems.push_back(to_string(key_of(s)) + " (buggy segment without designation)");
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid bug-frame designations:";
        for (const auto& p : problems) msg += " " + p;
        throw IntegrityError(msg);
    }

    std::vector<FrameVector> centroids;
    for (const auto& s : dataset.segments()) {
        auto frames = dataset.frames_of(key_of(s));
        if (frames.empty()) continue;
        if (s.is_buggy()) {
            const int offset = designations.at(key_of(s));
            auto it = std::find_if(frames.begin(), frames.end(), [&](const FrameEmbedding& f) { return f.second_offset == offset; });
            centroids.push_back(it->vector);
            continue;
        }
        FrameVector mean{};
        for (const auto& f : frames) {
            for (std::size_t d = 0; d < kFrameDim; ++d) mean[d] += f.vector[d];
        }
        for (auto& x : mean) x /= static_cast<double>(frames.size());
        centroids.push_back(mean);
    }
    if (centroids.empty()) throw DataError("manual codebook: no segment has frames");
    return Codebook(CodebookMode::Manual, std::move(centroids), 0);
}

std::size_t assign_frame(const FrameVector& frame, const Codebook& codebook) {
    // The frame norm is common to every candidate, so only the centroid norm
    // is divided out; the sign, and therefore the zero-similarity rule, is kept.
    const auto& centroids = codebook.centroids();
    const auto& norms = codebook.norms();
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double score = norms[c] > 0.0 ? dot(frame, centroids[c]) / norms[c] : 0.0;
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    return best;
}

std::string_view to_string(IdfForm form) {
    return form == IdfForm::Raw ? "raw" : "smooth";
}

IdfForm parse_idf_form(std::string_view text) {
    if (text == "raw") return IdfForm::Raw;
    if (text == "smooth") return IdfForm::Smooth;
    throw ParameterError("unknown IDF form '" + std::string(text) + "' (expected raw or smooth)");
}

double inverse_document_frequency(std::size_t total_frames, std::size_t matches, IdfForm form) {
    const auto f = static_cast<double>(total_frames);
    const auto m = static_cast<double>(matches);
    if (form == IdfForm::Raw) return f / std::max(m, 1.0);
    return std::log((1.0 + f) / (1.0 + m)) + 1.0;
}

const std::vector<double>* VisualFeatures::find(const SegmentKey& key) const {
    auto it = std::find(keys.begin(), keys.end(), key);
    return it == keys.end() ? nullptr : &weights[static_cast<std::size_t>(it - keys.begin())];
}

VisualFeatures tfidf_features(const EmbeddingDataset& dataset, const Codebook& codebook, IdfForm form) {
    const std::size_t k = codebook.k();
    VisualFeatures out;
    out.k = k;

    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::size_t> frame_totals;
    std::vector<std::size_t> matches(k, 0);
    std::size_t total_frames = 0;
    for (const auto& s : dataset.segments()) {
        auto frames = dataset.frames_of(key_of(s));
        if (frames.empty()) {
            out.warnings.push_back("segment " + to_string(key_of(s)) + " has no frames; excluded from visual features");
            continue;
        }
        std::vector<std::size_t> row(k, 0);
        for (const auto& f : frames) {
            const auto c = assign_frame(f.vector, codebook);
            ++row[c];
            ++matches[c];
        }
        total_frames += frames.size();
        out.keys.push_back(key_of(s));
        counts.push_back(std::move(row));
        frame_totals.push_back(frames.size());
    }

    out.idf.resize(k);
    for (std::size_t c = 0; c < k; ++c) out.idf[c] = inverse_document_frequency(total_frames, matches[c], form);

    out.weights.reserve(counts.size());
    for (std::size_t s = 0; s < counts.size(); ++s) {
        std::vector<double> w(k, 0.0);
        const auto n = static_cast<double>(frame_totals[s]);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[s][c]) w[c] = (static_cast<double>(counts[s][c]) / n) * out.idf[c];
        }
        out.weights.push_back(std::move(w));
    }
    return out;
}

} // namespace bugseg
