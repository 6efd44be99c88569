#include "bugseg/embedding.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/features.hpp"
#include "bugseg/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bugseg {

namespace {

template <typename T>
bool key_less(const T& a, const T& b) {
    return std::tie(a.video_id, a.segment_index) < std::tie(b.video_id, b.segment_index);
}

bool frame_less(const FrameEmbedding& a, const FrameEmbedding& b) {
    return std::tie(a.video_id, a.segment_index, a.second_offset) <
           std::tie(b.video_id, b.segment_index, b.second_offset);
}

std::string frame_name(const FrameEmbedding& f) {
    return "(" + f.video_id + "," + std::to_string(f.segment_index) + ",+" + std::to_string(f.second_offset) + "s)";
}

template <std::size_t N>
bool all_finite(const std::array<double, N>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

EmbeddingDataset::EmbeddingDataset(std::vector<Segment> segments, std::vector<FrameEmbedding> frames,
                                   std::vector<TextEmbedding> texts)
    : segments_(std::move(segments)), frames_(std::move(frames)), texts_(std::move(texts)) {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        if (!segment_pos_.emplace(key_of(segments_[i]), i).second) {
            throw IntegrityError("duplicate segment " + to_string(key_of(segments_[i])));
        }
    }

    std::stable_sort(frames_.begin(), frames_.end(), frame_less);
    std::vector<std::string> dangling;
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        const auto& f = frames_[i];
        if (i > 0 && !frame_less(frames_[i - 1], f)) throw IntegrityError("duplicate frame " + frame_name(f));
        if (!all_finite(f.vector)) throw DataError("non-finite component in frame " + frame_name(f));
        if (f.second_offset < 0) throw DataError("negative second_offset in frame " + frame_name(f));
        if (!segment_pos_.count(f.segment())) dangling.push_back("frame " + frame_name(f));
    }

    std::stable_sort(texts_.begin(), texts_.end(), key_less<TextEmbedding>);
    for (std::size_t i = 0; i < texts_.size(); ++i) {
        const auto& t = texts_[i];
        if (i > 0 && !key_less(texts_[i - 1], t)) throw IntegrityError("duplicate text vector " + to_string(t.segment()));
        if (!all_finite(t.vector)) throw DataError("non-finite component in text vector " + to_string(t.segment()));
        if (!segment_pos_.count(t.segment())) dangling.push_back("text " + to_string(t.segment()));
    }
    if (!dangling.empty()) {
        std::string msg = "embeddings reference missing segments:";
        for (const auto& d : dangling) msg += " " + d;
        throw IntegrityError(msg);
    }

    for (const auto& s : segments_) {
        const auto frames_here = frames_of(key_of(s));
        const auto whole_seconds = static_cast<long long>(std::floor(s.length()));
        if (frames_here.empty()) {
            warnings_.push_back("segment " + to_string(key_of(s)) + " has no frames and will not be featurized");
        } else if (static_cast<long long>(frames_here.size()) > whole_seconds) {
            warnings_.push_back("segment " + to_string(key_of(s)) + " has " + std::to_string(frames_here.size()) +
                                " frames for " + std::to_string(whole_seconds) + " whole seconds");
        }
        for (const auto& f : frames_here) {
            if (f.second_offset >= std::max(whole_seconds, 1LL)) {
                warnings_.push_back("frame " + frame_name(f) + " lies past the segment end");
            }
        }
        if (s.label && !text_of(key_of(s))) {
            warnings_.push_back("labeled segment " + to_string(key_of(s)) + " has no text vector");
        }
    }
}

std::span<const FrameEmbedding> EmbeddingDataset::frames_of(const SegmentKey& key) const {
    auto lo = std::lower_bound(frames_.begin(), frames_.end(), key, [](const FrameEmbedding& f, const SegmentKey& k) {
        return f.segment() < k;
    });
    auto hi = std::upper_bound(lo, frames_.end(), key, [](const SegmentKey& k, const FrameEmbedding& f) {
        return k < f.segment();
    });
    return {lo, hi};
}

const TextEmbedding* EmbeddingDataset::text_of(const SegmentKey& key) const {
    auto it = std::lower_bound(texts_.begin(), texts_.end(), key,
                               [](const TextEmbedding& t, const SegmentKey& k) { return t.segment() < k; });
    return (it != texts_.end() && it->segment() == key) ? &*it : nullptr;
}

const Segment* EmbeddingDataset::segment(const SegmentKey& key) const {
    auto it = segment_pos_.find(key);
    return it == segment_pos_.end() ? nullptr : &segments_[it->second];
}

namespace {

template <std::size_t N>
std::array<double, N> read_vector(const nlohmann::json& record, const std::string& where) {
    const auto& v = record.at("vector");
    if (!v.is_array()) throw DataError(where + ": 'vector' is not an array");
    if (v.size() != N) {
        throw DimensionError(where + ": expected " + std::to_string(N) + " components, found " +
                             std::to_string(v.size()));
    }
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!v[i].is_number()) throw DataError(where + ": component " + std::to_string(i) + " is not a number");
        out[i] = v[i].get<double>();
        if (!std::isfinite(out[i])) throw DataError(where + ": component " + std::to_string(i) + " is not finite");
    }
    return out;
}

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    const auto text = csv::read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string() + ": invalid JSON: " + e.what(), line_no);
        }
        const std::string where = path.filename().string() + " line " + std::to_string(line_no);
        try {
            fn(record, where);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
    }
}

} // namespace

std::vector<FrameEmbedding> read_frame_jsonl(const std::filesystem::path& path) {
    std::vector<FrameEmbedding> frames;
    for_each_jsonl(path, [&](const nlohmann::json& r, const std::string& where) {
        FrameEmbedding f;
        f.video_id = r.at("video_id").get<std::string>();
        f.segment_index = r.at("segment_index").get<int>();
        f.second_offset = r.at("second_offset").get<int>();
        f.vector = read_vector<kFrameDim>(r, where + " " + frame_name(f));
        frames.push_back(std::move(f));
    });
    return frames;
}

std::vector<TextEmbedding> read_text_jsonl(const std::filesystem::path& path) {
    std::vector<TextEmbedding> texts;
    for_each_jsonl(path, [&](const nlohmann::json& r, const std::string& where) {
        TextEmbedding t;
        t.video_id = r.at("video_id").get<std::string>();
        t.segment_index = r.at("segment_index").get<int>();
        t.vector = read_vector<kTextDim>(r, where + " " + to_string(t.segment()));
        texts.push_back(std::move(t));
    });
    return texts;
}

EmbeddingDataset load_embeddings(const std::filesystem::path& frame_file, const std::filesystem::path& text_file,
                                 std::vector<Segment> segments) {
    return EmbeddingDataset(std::move(segments), read_frame_jsonl(frame_file), read_text_jsonl(text_file));
}

void write_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& frame_file,
                      const std::filesystem::path& text_file) {
    std::string frames;
    for (const auto& f : dataset.frames()) {
        nlohmann::json r = {{"video_id", f.video_id},
                            {"segment_index", f.segment_index},
                            {"second_offset", f.second_offset},
                            {"vector", f.vector}};
        frames += r.dump() + "\n";
    }
    csv::write_text_file(frame_file, frames);

    std::string texts;
    for (const auto& t : dataset.texts()) {
        nlohmann::json r = {{"video_id", t.video_id}, {"segment_index", t.segment_index}, {"vector", t.vector}};
        texts += r.dump() + "\n";
    }
    csv::write_text_file(text_file, texts);
}

const FrameVector& synthetic_bug_direction() {
    static const FrameVector direction = [] {
        FrameVector d;
        d.fill(1.0 / std::sqrt(static_cast<double>(kFrameDim)));
        return d;
    }();
    return direction;
}

EmbeddingDataset synthetic_embed(const std::vector<Segment>& segments, std::uint64_t seed, double separation) {
    if (!(separation >= 0.0)) throw ParameterError("separation must be non-negative");
    std::vector<std::string> unlabeled;
    for (const auto& s : segments) {
        if (!s.label) unlabeled.push_back(to_string(key_of(s)));
    }
    if (!unlabeled.empty()) {
        std::string msg = "synthetic embedding needs labels; unlabeled:";
        for (const auto& u : unlabeled) msg += " " + u;
        throw ParameterError(msg);
    }

    const auto frame_seed = derive_seed(seed, "synthetic-frames");
    const auto& direction = synthetic_bug_direction();
    std::vector<FrameEmbedding> frames;
    std::vector<TextEmbedding> texts;
    for (const auto& s : segments) {
        // Seeded per segment so a segment's vectors do not depend on its position.
        Rng rng(derive_seed(frame_seed, fnv1a64(s.video_id) ^ static_cast<std::uint64_t>(s.index)));
        const auto count = static_cast<int>(std::floor(s.length()));
        const double shift = s.is_buggy() ? separation : 0.0;
        for (int t = 0; t < count; ++t) {
            FrameEmbedding f{s.video_id, s.index, t, {}};
            for (std::size_t d = 0; d < kFrameDim; ++d) f.vector[d] = standard_normal(rng) + shift * direction[d];
            frames.push_back(std::move(f));
        }
        texts.push_back({s.video_id, s.index, fallback_text_encode(s.text, seed)});
    }
    return EmbeddingDataset(segments, std::move(frames), std::move(texts));
}

} // namespace bugseg
