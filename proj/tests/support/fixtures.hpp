#pragma once

#include "bugseg/analytics.hpp"
#include "bugseg/codebook.hpp"
#include "bugseg/embedding.hpp"
#include "bugseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fixture {

// 3 videos x 4 segments x 4 frames. Frame (v, s, f) is a positive multiple of
// basis vector kMatches[v * 4 + s][f], so its nearest centroid is known.
inline const std::vector<std::vector<int>> kMatches = {
    {0, 0, 1, 2}, {1, 1, 1, 0}, {2, 2, 3, 0}, {0, 1, 2, 3}, // v0
    {0, 0, 0, 0}, {1, 2, 1, 2}, {3, 3, 0, 1}, {2, 0, 2, 0}, // v1
    {1, 0, 1, 0}, {2, 2, 2, 1}, {0, 3, 1, 2}, {1, 1, 0, 0}, // v2
};

inline bugseg::FrameVector basis(std::size_t i, double scale = 1.0) {
    bugseg::FrameVector v{};
    v[i] = scale;
    return v;
}

inline bugseg::Codebook tfidf_codebook() {
    return bugseg::Codebook(bugseg::CodebookMode::Automatic, {basis(0), basis(1), basis(2), basis(3)}, 0);
}

inline bugseg::EmbeddingDataset tfidf_dataset() {
    std::vector<bugseg::Segment> segments;
    std::vector<bugseg::FrameEmbedding> frames;
    std::vector<bugseg::TextEmbedding> texts;
    for (int v = 0; v < 3; ++v) {
        const std::string id = "v" + std::to_string(v);
        for (int s = 0; s < 4; ++s) {
            segments.push_back({id, s, 5.0 * s, 5.0 * (s + 1), "", bugseg::Label::Clean, false});
            texts.push_back({id, s, {}});
            for (int f = 0; f < 4; ++f) {
                const auto c = static_cast<std::size_t>(kMatches[static_cast<std::size_t>(v * 4 + s)][static_cast<std::size_t>(f)]);
                frames.push_back({id, s, f, basis(c, 1.0 + 0.25 * f)});
            }
        }
    }
    return bugseg::EmbeddingDataset(std::move(segments), std::move(frames), std::move(texts));
}

// Per-video participant and pipeline attribute values whose per-video means
// average to 0.60 / 0.21 for participants and 0.77 / 0.14 for the pipeline.
struct UserStudyInputs {
    std::map<std::string, std::map<std::string, bugseg::VideoAttributes>> participants;
    std::map<std::string, bugseg::VideoAttributes> pipeline;
    std::vector<std::string> videos;
};

inline UserStudyInputs user_study_inputs() {
    const double user_ratio[] = {0.50, 0.70, 0.55, 0.65, 0.60};
    const double user_start[] = {0.25, 0.15, 0.20, 0.30, 0.15};
    const double pipe_ratio[] = {0.70, 0.80, 0.75, 0.85, 0.75};
    const double pipe_start[] = {0.10, 0.20, 0.12, 0.18, 0.10};
    UserStudyInputs in;
    for (int v = 0; v < 5; ++v) {
        const std::string id = "uv" + std::to_string(v);
        in.videos.push_back(id);
        for (int p = 0; p < 17; ++p) {
            bugseg::VideoAttributes a;
            a.video_id = id;
            // Symmetric spread around the video mean.
            a.buggy_ratio = user_ratio[v] + (p - 8) * 0.005;
            a.start_time_ratio = user_start[v] + (p - 8) * 0.002;
            char pid[8];
            std::snprintf(pid, sizeof(pid), "p%02d", p);
            in.participants[id][pid] = a;
        }
        bugseg::VideoAttributes a;
        a.video_id = id;
        a.buggy_ratio = pipe_ratio[v];
        a.start_time_ratio = pipe_start[v];
        in.pipeline[id] = a;
    }
    return in;
}

// Random cue start times over a random duration, including clustered cues,
// duplicates and cues near the end.
struct RandomCues {
    std::vector<bugseg::TranscriptCue> cues;
    double duration;
};

inline RandomCues random_cues(bugseg::Rng& rng) {
    RandomCues out;
    const int n = bugseg::uniform_int(rng, 0, 30);
    out.duration = 1.0 + bugseg::uniform01(rng) * 120.0;
    std::vector<double> starts;
    for (int i = 0; i < n; ++i) {
        double s = bugseg::uniform01(rng) * out.duration;
        if (bugseg::uniform01(rng) < 0.3) s = std::floor(s); // exact ties and round numbers
        if (bugseg::uniform01(rng) < 0.1 && !starts.empty()) s = starts.back();
        starts.push_back(std::min(s, out.duration));
    }
    std::sort(starts.begin(), starts.end());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const double end = i + 1 < starts.size() ? std::max(starts[i + 1], starts[i]) : out.duration;
        out.cues.push_back({starts[i], end, "w" + std::to_string(i)});
    }
    return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("bugseg-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixture
