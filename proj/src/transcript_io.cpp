#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/transcript.hpp"

#include <future>
#include <set>
#include <sstream>

namespace bugseg {

std::vector<VideoMeta> read_video_meta(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "duration_seconds", "genre", "game_title"}, path.string());
    const auto c_id = table.column("video_id");
    const auto c_dur = table.column("duration_seconds");
    const auto c_genre = table.column("genre");
    const auto c_game = table.column("game_title");

    std::vector<VideoMeta> metas;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        VideoMeta meta;
        meta.video_id = row[c_id];
        if (meta.video_id.empty()) throw ParseError("empty video_id", line);
        if (!seen.insert(meta.video_id).second) throw IntegrityError("duplicate video_id " + meta.video_id);
        meta.duration = csv::parse_double(row[c_dur], line, "duration_seconds");
        if (!(meta.duration > 0.0)) throw ParseError("duration must be positive", line);
        try {
            meta.genre = parse_genre(row[c_genre]);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line);
        }
        meta.game_title = row[c_game];
        metas.push_back(std::move(meta));
    }
    return metas;
}

void write_video_meta(const std::filesystem::path& path, const std::vector<VideoMeta>& metas) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "duration_seconds", "genre", "game_title"});
    for (const auto& m : metas) {
        csv::write_row(out, {m.video_id, csv::format_double(m.duration), std::string(to_string(m.genre)), m.game_title});
    }
    csv::write_text_file(path, out.str());
}

LabelTable read_labels(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "segment_index", "label"}, path.string());
    const auto c_id = table.column("video_id");
    const auto c_idx = table.column("segment_index");
    const auto c_label = table.column("label");

    LabelTable labels;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        const auto index = csv::parse_int(row[c_idx], line, "segment_index");
        const auto value = csv::parse_int(row[c_label], line, "label");
        if (value != 0 && value != 1) throw ParseError("label must be 0 or 1", line);
        SegmentKey key{row[c_id], static_cast<int>(index)};
        if (!labels.emplace(key, value ? Label::Buggy : Label::Clean).second) {
            throw IntegrityError("duplicate label for " + to_string(key));
        }
    }
    return labels;
}

void write_labels(const std::filesystem::path& path, const LabelTable& labels) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "segment_index", "label"});
    for (const auto& [key, label] : labels) {
        csv::write_row(out, {key.first, std::to_string(key.second), label == Label::Buggy ? "1" : "0"});
    }
    csv::write_text_file(path, out.str());
}

std::vector<Segment> read_segments(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "segment_index", "start", "end", "short", "text"}, path.string());
    const auto c_id = table.column("video_id");
    const auto c_idx = table.column("segment_index");
    const auto c_start = table.column("start");
    const auto c_end = table.column("end");
    const auto c_short = table.column("short");
    const auto c_text = table.column("text");
    const bool has_label = table.has_column("label");
    const auto c_label = has_label ? table.column("label") : 0;

    std::vector<Segment> segments;
    std::set<SegmentKey> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        Segment s;
        s.video_id = row[c_id];
        s.index = static_cast<int>(csv::parse_int(row[c_idx], line, "segment_index"));
        s.start = csv::parse_double(row[c_start], line, "start");
        s.end = csv::parse_double(row[c_end], line, "end");
        s.short_video = csv::parse_int(row[c_short], line, "short") != 0;
        s.text = row[c_text];
        if (has_label && !row[c_label].empty()) {
            const auto v = csv::parse_int(row[c_label], line, "label");
            if (v != 0 && v != 1) throw ParseError("label must be 0 or 1", line);
            s.label = v ? Label::Buggy : Label::Clean;
        }
        if (!(s.start < s.end)) throw ParseError("segment end must exceed start", line);
        if (!seen.insert(key_of(s)).second) throw IntegrityError("duplicate segment " + to_string(key_of(s)));
        segments.push_back(std::move(s));
    }
    return segments;
}

void write_segments(const std::filesystem::path& path, const std::vector<Segment>& segments) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "segment_index", "start", "end", "short", "text", "label"});
    for (const auto& s : segments) {
        csv::write_row(out, {s.video_id, std::to_string(s.index), csv::format_double(s.start),
                             csv::format_double(s.end), s.short_video ? "1" : "0", s.text,
                             s.label ? (s.is_buggy() ? "1" : "0") : ""});
    }
    csv::write_text_file(path, out.str());
}

namespace {

std::vector<Segment> segment_one(const std::filesystem::path& dir, const VideoMeta& meta) {
    for (const char* ext : {".srt", ".vtt", ".tsv"}) {
        auto path = dir / (meta.video_id + ext);
        if (!std::filesystem::exists(path)) continue;
        auto format = *format_from_extension(path);
        try {
            auto cues = parse_transcript(csv::read_text_file(path), format, meta.duration);
            return segment_video(cues, meta);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what(), 0);
        }
    }
    throw DataError("no transcript for video " + meta.video_id + " in " + dir.string());
}

} // namespace

std::vector<Segment> segment_corpus(const std::filesystem::path& transcript_dir,
                                    const std::vector<VideoMeta>& metas, int jobs) {
    std::vector<std::vector<Segment>> per_video(metas.size());
    if (jobs <= 1 || metas.size() < 2) {
        for (std::size_t i = 0; i < metas.size(); ++i) per_video[i] = segment_one(transcript_dir, metas[i]);
    } else {
        const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), metas.size());
        std::vector<std::future<void>> tasks;
        for (std::size_t w = 0; w < workers; ++w) {
            tasks.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t i = w; i < metas.size(); i += workers) {
                    per_video[i] = segment_one(transcript_dir, metas[i]);
                }
            }));
        }
        for (auto& t : tasks) t.get();
    }
    std::vector<Segment> all;
    for (auto& v : per_video) all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    return all;
}

} // namespace bugseg
