#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bugseg {

// Shortest segment length, in seconds, kept after merging.
inline constexpr double kMinSegmentSeconds = 5.0;

struct TranscriptCue {
    double start = 0.0; // seconds
    double end = 0.0;
    std::string text;

    bool operator==(const TranscriptCue&) const = default;
};

enum class Genre { Action, Sports, Other };

std::string_view to_string(Genre genre);
Genre parse_genre(std::string_view text); // case-insensitive; throws ParseError

struct VideoMeta {
    std::string video_id;
    double duration = 0.0; // seconds
    Genre genre = Genre::Other;
    std::string game_title;
};

enum class Label { Clean = 0, Buggy = 1 };

struct Segment {
    std::string video_id;
    int index = 0;
    double start = 0.0;
    double end = 0.0;
    std::string text;
    std::optional<Label> label;
    bool short_video = false; // video shorter than kMinSegmentSeconds

    double length() const { return end - start; }
    bool is_buggy() const { return label == Label::Buggy; }
    bool operator==(const Segment&) const = default;
};

using SegmentKey = std::pair<std::string, int>; // (video_id, segment index)

inline SegmentKey key_of(const Segment& s) { return {s.video_id, s.index}; }
std::string to_string(const SegmentKey& key);

enum class TranscriptFormat { Srt, WebVtt, Tsv };

// Maps a file extension (".srt", ".vtt", ".tsv") to a format.
std::optional<TranscriptFormat> format_from_extension(const std::filesystem::path& path);

// Sorts by start and clamps overlaps so each cue starts no earlier than the
// previous one ends. A cue swallowed entirely by its predecessor is folded
// into it (its text is appended) rather than dropped.
std::vector<TranscriptCue> normalize_cues(std::vector<TranscriptCue> cues);

// Parses a caption document. TSV rows carry only a start time (seconds or
// [HH:]MM:SS); each cue ends where the next starts and the last ends at `duration`, which is therefore
// required for non-empty TSV input.
std::vector<TranscriptCue> parse_transcript(std::string_view raw, TranscriptFormat format,
                                            std::optional<double> duration = std::nullopt);

// Splits one video into segments bounded by cue start times, then merges
// sub-5 s pieces until none remain. See merge_short_segments for the rule.
std::vector<Segment> segment_video(const std::vector<TranscriptCue>& cues, const VideoMeta& meta);

// One full merge pass to a fixed point: while some segment is shorter than
// kMinSegmentSeconds, take the shortest such segment (leftmost on ties) and
// merge it with its shorter neighbour (left neighbour on ties). Indices are
// renumbered from 0. Idempotent on its own output.
std::vector<Segment> merge_short_segments(std::vector<Segment> segments);

// Checks that each video's segments are numbered from 0, tile
// [0, duration] exactly and are at least kMinSegmentSeconds long (unless the
// video itself is shorter). Returns one message per violation; segments of
// videos missing from `metas` are reported too.
std::vector<std::string> check_segments(const std::vector<Segment>& segments, const std::vector<VideoMeta>& metas);

using LabelTable = std::map<SegmentKey, Label>;

// Assigns labels by (video_id, index). Throws IntegrityError listing every key
// that does not name a segment.
std::vector<Segment> attach_labels(std::vector<Segment> segments, const LabelTable& labels);

// --- file formats ---------------------------------------------------------

// CSV `video_id,duration_seconds,genre,game_title`.
std::vector<VideoMeta> read_video_meta(const std::filesystem::path& path);
void write_video_meta(const std::filesystem::path& path, const std::vector<VideoMeta>& metas);

// CSV `video_id,segment_index,label` with label in {0,1}. Extra columns are
// ignored so prediction files can be read back as label tables.
LabelTable read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelTable& labels);

// CSV `video_id,segment_index,start,end,short,text[,label]`.
std::vector<Segment> read_segments(const std::filesystem::path& path);
void write_segments(const std::filesystem::path& path, const std::vector<Segment>& segments);

// Reads `<dir>/<video_id>.{srt,vtt,tsv}` for every video in `metas` and
// segments it. Videos are processed in metadata order; `jobs` > 1 fans the
// work out over threads without changing the output.
std::vector<Segment> segment_corpus(const std::filesystem::path& transcript_dir,
                                    const std::vector<VideoMeta>& metas, int jobs = 1);

} // namespace bugseg
