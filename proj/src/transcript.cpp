#include "bugseg/transcript.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace bugseg {

std::string_view to_string(Genre genre) {
    switch (genre) {
    case Genre::Action: return "Action";
    case Genre::Sports: return "Sports";
    case Genre::Other: return "Other";
    }
    return "Other";
}

Genre parse_genre(std::string_view text) {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "action") return Genre::Action;
    if (lower == "sports" || lower == "sport") return Genre::Sports;
    if (lower == "other") return Genre::Other;
    throw ParseError("unknown genre '" + std::string(text) + "'", 0);
}

std::string to_string(const SegmentKey& key) {
    return "(" + key.first + "," + std::to_string(key.second) + ")";
}

std::optional<TranscriptFormat> format_from_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".srt") return TranscriptFormat::Srt;
    if (ext == ".vtt") return TranscriptFormat::WebVtt;
    if (ext == ".tsv") return TranscriptFormat::Tsv;
    return std::nullopt;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

void append_text(std::string& into, std::string_view text) {
    text = trim(text);
    if (text.empty()) return;
    if (!into.empty()) into.push_back(' ');
    into.append(text);
}

std::vector<std::string_view> split_lines(std::string_view raw) {
    std::vector<std::string_view> lines;
    if (raw.size() >= 3 && raw.substr(0, 3) == "\xEF\xBB\xBF") raw.remove_prefix(3);
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto eol = raw.find('\n', pos);
        auto line = raw.substr(pos, eol == std::string_view::npos ? raw.npos : eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Accepts [HH:]MM:SS with an optional ',' or '.' fractional part.
std::optional<double> parse_clock(std::string_view text) {
    text = trim(text);
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        auto colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon == std::string_view::npos ? text.npos : colon - pos));
        if (colon == std::string_view::npos) break;
        pos = colon + 1;
    }
    if (parts.size() < 2 || parts.size() > 3) return std::nullopt;

    std::string_view sec_part = parts.back();
    std::string_view frac;
    if (auto sep = sec_part.find_first_of(",."); sep != std::string_view::npos) {
        frac = sec_part.substr(sep + 1);
        sec_part = sec_part.substr(0, sep);
        if (!all_digits(frac)) return std::nullopt;
    }
    if (!all_digits(sec_part)) return std::nullopt;

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!all_digits(parts[i])) return std::nullopt;
        total = total * 60.0 + std::stod(std::string(parts[i]));
    }
    const double seconds = std::stod(std::string(sec_part));
    if (parts.size() >= 2 && seconds >= 60.0) return std::nullopt;
    if (parts.size() == 3 && std::stod(std::string(parts[1])) >= 60.0) return std::nullopt;
    total = total * 60.0 + seconds;
    if (!frac.empty()) total += std::stod("0." + std::string(frac));
    return total;
}

std::pair<double, double> parse_timing_line(std::string_view line, std::size_t line_no) {
    auto arrow = line.find("-->");
    if (arrow == std::string_view::npos) throw ParseError("expected a '-->' timing line", line_no);
    auto start_text = trim(line.substr(0, arrow));
    auto rest = trim(line.substr(arrow + 3));
    // WebVTT cue settings follow the end time after whitespace.
    auto end_text = rest.substr(0, rest.find_first_of(" \t"));
    auto start = parse_clock(start_text);
    auto end = parse_clock(end_text);
    if (!start) throw ParseError("malformed timestamp '" + std::string(start_text) + "'", line_no);
    if (!end) throw ParseError("malformed timestamp '" + std::string(end_text) + "'", line_no);
    if (!(*start < *end)) throw ParseError("cue ends before it starts", line_no);
    return {*start, *end};
}

std::string strip_markup(std::string_view text) {
    std::string out;
    bool in_tag = false;
    for (char c : text) {
        if (c == '<') in_tag = true;
        else if (c == '>' && in_tag) in_tag = false;
        else if (!in_tag) out.push_back(c);
    }
    static const std::pair<std::string_view, std::string_view> entities[] = {
        {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&nbsp;", " "}, {"&quot;", "\""}};
    for (auto [from, to] : entities) {
        for (auto pos = out.find(from); pos != std::string::npos; pos = out.find(from, pos + to.size())) {
            out.replace(pos, from.size(), to);
        }
    }
    return out;
}

// SRT and WebVTT share the block structure: optional identifier line, timing
// line, text lines, blank separator.
std::vector<TranscriptCue> parse_blocks(const std::vector<std::string_view>& lines, std::size_t first,
                                        bool vtt) {
    std::vector<TranscriptCue> cues;
    std::size_t i = first;
    while (i < lines.size()) {
        if (trim(lines[i]).empty()) {
            ++i;
            continue;
        }
        auto head = trim(lines[i]);
        if (vtt && (head.starts_with("NOTE") || head.starts_with("STYLE") || head.starts_with("REGION"))) {
            while (i < lines.size() && !trim(lines[i]).empty()) ++i;
            continue;
        }
        if (head.find("-->") == std::string_view::npos) {
            if (!vtt && !all_digits(head)) throw ParseError("expected a cue number", i + 1);
            ++i; // identifier
            if (i >= lines.size()) throw ParseError("cue identifier without timing line", i);
        }
        auto [start, end] = parse_timing_line(lines[i], i + 1);
        ++i;
        TranscriptCue cue{start, end, {}};
        while (i < lines.size() && !trim(lines[i]).empty()) {
            append_text(cue.text, vtt ? strip_markup(lines[i]) : std::string(lines[i]));
            ++i;
        }
        cues.push_back(std::move(cue));
    }
    return cues;
}

std::vector<TranscriptCue> parse_tsv(const std::vector<std::string_view>& lines, std::optional<double> duration) {
    struct Row {
        double start;
        std::string text;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        if (trim(line).empty()) continue;
        auto tab = line.find('\t');
        auto stamp = trim(line.substr(0, tab));
        auto text = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
        if (rows.empty() && i == 0 && stamp.starts_with("start")) continue; // header
        // plain seconds, or a clock time such as 0:06
        double start = 0.0;
        auto res = std::from_chars(stamp.data(), stamp.data() + stamp.size(), start);
        const bool plain = !stamp.empty() && res.ec == std::errc{} && res.ptr == stamp.data() + stamp.size();
        if (!plain) {
            auto clock = parse_clock(stamp);
            start = clock ? *clock : -1.0;
        }
        if (!(start >= 0.0)) throw ParseError("malformed timestamp '" + std::string(stamp) + "'", i + 1);
        rows.push_back({start, std::string(trim(text))});
    }
    if (rows.empty()) return {};
    if (!duration) throw ParameterError("TSV transcripts need the video duration to close the last cue");

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.start < b.start; });
    std::vector<TranscriptCue> cues;
    for (auto& row : rows) {
        if (!cues.empty() && cues.back().start == row.start) {
            append_text(cues.back().text, row.text);
            continue;
        }
        cues.push_back({row.start, 0.0, std::move(row.text)});
    }
    for (std::size_t i = 0; i + 1 < cues.size(); ++i) cues[i].end = cues[i + 1].start;
    if (!(*duration > cues.back().start)) {
        throw DataError("video duration " + csv::format_double(*duration) + " s does not exceed last cue start " +
                        csv::format_double(cues.back().start) + " s");
    }
    cues.back().end = *duration;
    return cues;
}

} // namespace

std::vector<TranscriptCue> normalize_cues(std::vector<TranscriptCue> cues) {
    std::stable_sort(cues.begin(), cues.end(),
                     [](const TranscriptCue& a, const TranscriptCue& b) { return a.start < b.start; });
    std::vector<TranscriptCue> out;
    out.reserve(cues.size());
    for (auto& cue : cues) {
        if (!out.empty() && cue.start < out.back().end) {
            cue.start = out.back().end;
            if (!(cue.start < cue.end)) {
                append_text(out.back().text, cue.text);
                continue;
            }
        }
        out.push_back(std::move(cue));
    }
    return out;
}

std::vector<TranscriptCue> parse_transcript(std::string_view raw, TranscriptFormat format,
                                            std::optional<double> duration) {
    auto lines = split_lines(raw);
    if (lines.empty()) return {};
    switch (format) {
    case TranscriptFormat::Srt:
        return normalize_cues(parse_blocks(lines, 0, false));
    case TranscriptFormat::WebVtt: {
        if (!trim(lines[0]).starts_with("WEBVTT")) throw ParseError("missing WEBVTT header", 1);
        // Header block runs to the first blank line.
        std::size_t i = 1;
        while (i < lines.size() && !trim(lines[i]).empty()) ++i;
        return normalize_cues(parse_blocks(lines, i, true));
    }
    case TranscriptFormat::Tsv:
        return normalize_cues(parse_tsv(lines, duration));
    }
    return {};
}

namespace {

Segment merge_pair(const Segment& left, const Segment& right) {
    Segment merged = left;
    merged.end = right.end;
    append_text(merged.text, right.text);
    if (left.label && right.label) {
        merged.label = (left.is_buggy() || right.is_buggy()) ? Label::Buggy : Label::Clean;
    } else {
        merged.label.reset();
    }
    merged.short_video = left.short_video || right.short_video;
    return merged;
}

} // namespace

std::vector<Segment> merge_short_segments(std::vector<Segment> segments) {
    while (segments.size() > 1) {
        std::optional<std::size_t> shortest;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const double len = segments[i].length();
            if (len < kMinSegmentSeconds && (!shortest || len < segments[*shortest].length())) shortest = i;
        }
        if (!shortest) break;

        const std::size_t i = *shortest;
        std::size_t left;
        if (i == 0) {
            left = 0;
        } else if (i + 1 == segments.size()) {
            left = i - 1;
        } else {
            left = segments[i - 1].length() <= segments[i + 1].length() ? i - 1 : i;
        }
        segments[left] = merge_pair(segments[left], segments[left + 1]);
        segments.erase(segments.begin() + static_cast<std::ptrdiff_t>(left) + 1);
    }
    for (std::size_t i = 0; i < segments.size(); ++i) segments[i].index = static_cast<int>(i);
    return segments;
}

std::vector<Segment> segment_video(const std::vector<TranscriptCue>& raw_cues, const VideoMeta& meta) {
    if (!(meta.duration > 0.0)) throw ParameterError("video " + meta.video_id + " has non-positive duration");
    auto cues = normalize_cues(raw_cues);
    if (!cues.empty() && cues.back().end > meta.duration) {
        throw DataError("video " + meta.video_id + ": last cue ends at " + csv::format_double(cues.back().end) +
                        " s, after the video duration " + csv::format_double(meta.duration) + " s");
    }

    if (meta.duration < kMinSegmentSeconds || cues.empty()) {
        Segment only{meta.video_id, 0, 0.0, meta.duration, {}, std::nullopt, meta.duration < kMinSegmentSeconds};
        for (const auto& cue : cues) append_text(only.text, cue.text);
        return {only};
    }

    std::vector<double> bounds{0.0};
    for (const auto& cue : cues) {
        if (cue.start > bounds.back() && cue.start < meta.duration) bounds.push_back(cue.start);
    }
    bounds.push_back(meta.duration);

    std::vector<Segment> segments;
    segments.reserve(bounds.size() - 1);
    std::size_t next_cue = 0;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        Segment seg{meta.video_id, static_cast<int>(i), bounds[i], bounds[i + 1], {}, std::nullopt, false};
        while (next_cue < cues.size() && cues[next_cue].start < bounds[i + 1]) {
            append_text(seg.text, cues[next_cue].text);
            ++next_cue;
        }
        segments.push_back(std::move(seg));
    }
    return merge_short_segments(std::move(segments));
}

std::vector<Segment> attach_labels(std::vector<Segment> segments, const LabelTable& labels) {
    std::map<SegmentKey, std::size_t> position;
    for (std::size_t i = 0; i < segments.size(); ++i) position.emplace(key_of(segments[i]), i);

    std::vector<std::string> dangling;
    for (const auto& [key, label] : labels) {
        auto it = position.find(key);
        if (it == position.end()) {
            dangling.push_back(to_string(key));
            continue;
        }
        segments[it->second].label = label;
    }
    if (!dangling.empty()) {
        std::string msg = "labels reference missing segments:";
        for (const auto& d : dangling) msg += " " + d;
        throw IntegrityError(msg);
    }
    return segments;
}

std::vector<std::string> check_segments(const std::vector<Segment>& segments, const std::vector<VideoMeta>& metas) {
    constexpr double eps = 1e-9;
    std::map<std::string, std::vector<const Segment*>> by_video;
    for (const auto& s : segments) by_video[s.video_id].push_back(&s);
    std::vector<std::string> problems;
    for (const auto& m : metas) {
        auto it = by_video.find(m.video_id);
        if (it == by_video.end()) continue;
        auto& segs = it->second;
        std::sort(segs.begin(), segs.end(), [](const Segment* a, const Segment* b) { return a->index < b->index; });
        double expected_start = 0.0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const auto& s = *segs[i];
            const auto name = to_string(key_of(s));
            if (s.index != static_cast<int>(i)) problems.push_back(name + ": expected index " + std::to_string(i));
            if (std::abs(s.start - expected_start) > eps) {
                problems.push_back(name + ": starts at " + csv::format_double(s.start) + ", expected " +
                                   csv::format_double(expected_start));
            }
            if (!(s.end > s.start)) problems.push_back(name + ": empty or reversed interval");
            if (m.duration >= kMinSegmentSeconds && s.length() < kMinSegmentSeconds - eps) {
                problems.push_back(name + ": shorter than " + csv::format_double(kMinSegmentSeconds) + " s");
            }
            expected_start = s.end;
        }
        if (std::abs(expected_start - m.duration) > eps) {
            problems.push_back("video " + m.video_id + ": segments end at " + csv::format_double(expected_start) +
                               ", duration is " + csv::format_double(m.duration));
        }
        by_video.erase(it);
    }
    for (const auto& [video, segs] : by_video) problems.push_back("video " + video + " has segments but no metadata");
    return problems;
}

} // namespace bugseg
