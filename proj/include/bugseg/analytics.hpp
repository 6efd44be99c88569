#pragma once

#include "bugseg/transcript.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bugseg {

// Bug-distribution attributes of one video.
struct VideoAttributes {
    std::string video_id;
    int total_segments = 0;
    int buggy_segments = 0;
    double buggy_ratio = 0.0;
    std::optional<double> start_time_ratio; // first buggy start / duration; absent for bug-free videos
    int gaps = 0;                            // clean runs strictly between two buggy segments

    bool operator==(const VideoAttributes&) const = default;
};

// Number of maximal clean runs bounded by buggy segments on both sides.
int count_gaps(std::span<const Label> labels);

// `segments` must all belong to meta's video and carry labels; they are
// ordered by index before counting.
VideoAttributes video_attributes(std::span<const Segment> segments, const VideoMeta& meta);

// Attributes for every video in `metas` that has at least one segment.
std::vector<VideoAttributes> corpus_attributes(std::span<const Segment> segments, std::span<const VideoMeta> metas);

void write_attributes_csv(const std::filesystem::path& path, std::span<const VideoAttributes> attributes);
std::vector<VideoAttributes> read_attributes_csv(const std::filesystem::path& path);

// --- statistics ------------------------------------------------------------

struct StatResult {
    std::string test;
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<double> effect_size; // Cohen's d with pooled SD
    std::optional<double> df;
    double corrected_alpha = 0.05;
};

// One-sample Kolmogorov-Smirnov test against the normal with the sample's
// mean and (n-1) standard deviation; asymptotic Kolmogorov p-value.
StatResult ks_normality(std::span<const double> sample);

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

enum class TTestVariant { Welch, Student };

// Two-sided two-sample t-test. Welch uses the Welch-Satterthwaite degrees of
// freedom; Student pools the variances. Cohen's d always uses the pooled SD.
StatResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant = TTestVariant::Welch);

// Reject test i iff p_i < alpha / m.
std::vector<bool> bonferroni(std::span<const double> p_values, double alpha);

struct AttributeComparison {
    std::string attribute;
    std::size_t n_action = 0;
    std::size_t n_sports = 0;
    double mean_action = 0.0;
    double mean_sports = 0.0;
    std::optional<StatResult> ks_action; // absent when the sample is too small or constant
    std::optional<StatResult> ks_sports;
    std::optional<StatResult> t;         // absent when both groups are constant and differ
    bool reject = false;                 // after Bonferroni over the tested attributes
};

struct GenreComparison {
    double alpha = 0.05;
    double corrected_alpha = 0.05;
    std::vector<AttributeComparison> attributes;
    std::vector<std::string> warnings; // e.g. a KS test that could not run
};

// Action vs Sports on all five attributes. Start-time ratio and gaps only use
// videos with at least one buggy segment. Videos of other genres are ignored.
GenreComparison genre_comparison(std::span<const VideoAttributes> attributes, std::span<const VideoMeta> metas,
                                 double alpha = 0.05, TTestVariant variant = TTestVariant::Welch);

void write_stats_csv(const std::filesystem::path& path, const GenreComparison& comparison);
nlohmann::json stats_to_json(const GenreComparison& comparison);

// --- user study ------------------------------------------------------------

// A reported bug window. A participant who watched a video and reported
// nothing is recorded with no interval.
struct UserWindow {
    std::string participant_id;
    std::string video_id;
    std::optional<double> start;
    std::optional<double> end;
};

// CSV `participant_id,video_id,start_seconds,end_seconds`; empty times mean
// "watched, no bug reported".
std::vector<UserWindow> read_user_windows(const std::filesystem::path& path);

// Per participant, labels for the video's segments (ordered by index). A
// segment is buggy for a participant iff it lies inside one of their windows
// or one of their windows lies inside it. Throws DataError for windows outside
// [0, duration] or with start >= end.
std::map<std::string, std::vector<Label>> map_user_windows(std::span<const UserWindow> windows,
                                                           std::span<const Segment> segments, double duration);

struct UserStudyRow {
    std::string video_id;
    std::size_t participants = 0;
    double participant_buggy_ratio = 0.0;
    std::optional<double> participant_start_time_ratio; // mean over participants who reported a bug
    double pipeline_buggy_ratio = 0.0;
    std::optional<double> pipeline_start_time_ratio;
};

struct UserStudySummary {
    std::vector<UserStudyRow> videos;
    UserStudyRow overall; // means of the per-video rows; video_id "overall"
};

// `per_participant` maps video -> participant -> attributes.
UserStudySummary user_study_summary(const std::map<std::string, std::map<std::string, VideoAttributes>>& per_participant,
                                    const std::map<std::string, VideoAttributes>& pipeline,
                                    std::span<const std::string> videos);

void write_user_study_csv(const std::filesystem::path& path, const UserStudySummary& summary);
std::string format_user_study_table(const UserStudySummary& summary);

} // namespace bugseg
