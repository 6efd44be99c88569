#pragma once

#include "bugseg/transcript.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace bugseg {

inline constexpr std::size_t kFrameDim = 64;
inline constexpr std::size_t kTextDim = 512;

using FrameVector = std::array<double, kFrameDim>;
using TextVector = std::array<double, kTextDim>;

// One sampled frame; frames are keyed by whole seconds from the segment start.
struct FrameEmbedding {
    std::string video_id;
    int segment_index = 0;
    int second_offset = 0;
    FrameVector vector{};

    SegmentKey segment() const { return {video_id, segment_index}; }
    bool operator==(const FrameEmbedding&) const = default;
};

struct TextEmbedding {
    std::string video_id;
    int segment_index = 0;
    TextVector vector{};

    SegmentKey segment() const { return {video_id, segment_index}; }
    bool operator==(const TextEmbedding&) const = default;
};

// Validated, immutable collection of segments and their embeddings.
//
// Construction enforces the hard invariants (referential integrity, unique
// keys, finite components, non-negative offsets) and throws on violation.
// Soft mismatches against the 1 fps sampling contract are collected as
// warnings: a segment with no frames, more frames than whole seconds, an
// offset past the segment end, or a labeled segment without a text vector.
class EmbeddingDataset {
public:
    EmbeddingDataset() = default;
    EmbeddingDataset(std::vector<Segment> segments, std::vector<FrameEmbedding> frames,
                     std::vector<TextEmbedding> texts);

    const std::vector<Segment>& segments() const { return segments_; }
    // Sorted by (video_id, segment_index, second_offset).
    const std::vector<FrameEmbedding>& frames() const { return frames_; }
    // Sorted by (video_id, segment_index).
    const std::vector<TextEmbedding>& texts() const { return texts_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::span<const FrameEmbedding> frames_of(const SegmentKey& key) const;
    const TextEmbedding* text_of(const SegmentKey& key) const;
    const Segment* segment(const SegmentKey& key) const;

    bool operator==(const EmbeddingDataset& other) const {
        return segments_ == other.segments_ && frames_ == other.frames_ && texts_ == other.texts_;
    }

private:
    std::vector<Segment> segments_;
    std::vector<FrameEmbedding> frames_;
    std::vector<TextEmbedding> texts_;
    std::map<SegmentKey, std::size_t> segment_pos_;
    std::vector<std::string> warnings_;
};

// Reads the frame and text JSON Lines files and validates them against
// `segments`. Record errors name the file, line and key of the offending
// record.
EmbeddingDataset load_embeddings(const std::filesystem::path& frame_file, const std::filesystem::path& text_file,
                                 std::vector<Segment> segments);

std::vector<FrameEmbedding> read_frame_jsonl(const std::filesystem::path& path);
std::vector<TextEmbedding> read_text_jsonl(const std::filesystem::path& path);
void write_embeddings(const EmbeddingDataset& dataset, const std::filesystem::path& frame_file,
                      const std::filesystem::path& text_file);

// Deterministic stand-in for the neural encoders. Every labeled segment gets
// one frame per whole second drawn from N(0, I), shifted by `separation`
// along a fixed unit direction when the segment is buggy, and a text vector
// from fallback_text_encode(segment.text, seed).
EmbeddingDataset synthetic_embed(const std::vector<Segment>& segments, std::uint64_t seed, double separation);

// The unit direction buggy frames are shifted along.
const FrameVector& synthetic_bug_direction();

} // namespace bugseg
