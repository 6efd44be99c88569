#include "bugseg/analytics.hpp"

#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace bugseg {

int count_gaps(std::span<const Label> labels) {
    int gaps = 0;
    bool seen_bug = false;
    bool in_clean_run = false;
    for (auto l : labels) {
        if (l == Label::Buggy) {
            if (seen_bug && in_clean_run) ++gaps;
            seen_bug = true;
            in_clean_run = false;
        } else if (seen_bug) {
            in_clean_run = true;
        }
    }
    return gaps;
}

VideoAttributes video_attributes(std::span<const Segment> segments, const VideoMeta& meta) {
    std::vector<const Segment*> ordered;
    for (const auto& s : segments) {
        if (s.video_id != meta.video_id) throw DataError("segment " + to_string(key_of(s)) + " is not from video " + meta.video_id);
        if (!s.label) throw DataError("segment " + to_string(key_of(s)) + " is unlabeled");
        ordered.push_back(&s);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Segment* a, const Segment* b) { return a->index < b->index; });

    VideoAttributes a;
    a.video_id = meta.video_id;
    a.total_segments = static_cast<int>(ordered.size());
    std::vector<Label> labels;
    for (const auto* s : ordered) {
        labels.push_back(*s->label);
        if (s->is_buggy()) {
            if (!a.start_time_ratio) a.start_time_ratio = s->start / meta.duration;
            ++a.buggy_segments;
        }
    }
    a.buggy_ratio = a.total_segments ? static_cast<double>(a.buggy_segments) / a.total_segments : 0.0;
    a.gaps = count_gaps(labels);
    return a;
}

std::vector<VideoAttributes> corpus_attributes(std::span<const Segment> segments, std::span<const VideoMeta> metas) {
    std::map<std::string, std::vector<Segment>> by_video;
    for (const auto& s : segments) by_video[s.video_id].push_back(s);
    std::vector<VideoAttributes> out;
    for (const auto& m : metas) {
        auto it = by_video.find(m.video_id);
        if (it == by_video.end()) continue;
        out.push_back(video_attributes(it->second, m));
    }
    return out;
}

void write_attributes_csv(const std::filesystem::path& path, std::span<const VideoAttributes> attributes) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "total_segments", "buggy_segments", "buggy_ratio", "start_time_ratio", "gaps"});
    for (const auto& a : attributes) {
        csv::write_row(out, {a.video_id, std::to_string(a.total_segments), std::to_string(a.buggy_segments),
                             csv::format_double(a.buggy_ratio),
                             a.start_time_ratio ? csv::format_double(*a.start_time_ratio) : "", std::to_string(a.gaps)});
    }
    csv::write_text_file(path, out.str());
}

std::vector<VideoAttributes> read_attributes_csv(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"video_id", "total_segments", "buggy_segments", "buggy_ratio", "start_time_ratio", "gaps"},
                         path.string());
    std::vector<VideoAttributes> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        VideoAttributes a;
        a.video_id = row[table.column("video_id")];
        a.total_segments = static_cast<int>(csv::parse_int(row[table.column("total_segments")], line, "total_segments"));
        a.buggy_segments = static_cast<int>(csv::parse_int(row[table.column("buggy_segments")], line, "buggy_segments"));
        a.buggy_ratio = csv::parse_double(row[table.column("buggy_ratio")], line, "buggy_ratio");
        const auto& str = row[table.column("start_time_ratio")];
        if (!str.empty()) a.start_time_ratio = csv::parse_double(str, line, "start_time_ratio");
        a.gaps = static_cast<int>(csv::parse_int(row[table.column("gaps")], line, "gaps"));
        out.push_back(std::move(a));
    }
    return out;
}

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0; // unbiased
    std::size_t n = 0;
};

Moments moments(std::span<const double> x) {
    Moments m;
    m.n = x.size();
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("sample contains a non-finite value");
        m.mean += v;
    }
    m.mean /= static_cast<double>(m.n);
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var = m.n > 1 ? m.var / static_cast<double>(m.n - 1) : 0.0;
    return m;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

} // namespace

double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    constexpr double pi = std::numbers::pi;
    if (lambda < 1.18) {
        // Theta-function form; converges fast for small lambda.
        double sum = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double j = 2.0 * k - 1.0;
            sum += std::exp(-j * j * pi * pi / (8.0 * lambda * lambda));
        }
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? term : -term);
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

StatResult ks_normality(std::span<const double> sample) {
    if (sample.size() < 3) throw ParameterError("KS normality test needs at least 3 values");
    const auto m = moments(sample);
    if (!(m.var > 0.0)) throw DataError("KS normality test on a zero-variance sample");
    const double sd = std::sqrt(m.var);
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normal_cdf((sorted[i] - m.mean) / sd);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    StatResult r;
    r.test = "ks-normality";
    r.statistic = d;
    r.p_value = kolmogorov_survival(std::sqrt(n) * d);
    return r;
}

StatResult t_test(std::span<const double> a, std::span<const double> b, TTestVariant variant) {
    if (a.size() < 2 || b.size() < 2) throw ParameterError("t-test needs at least 2 values per sample");
    const auto ma = moments(a);
    const auto mb = moments(b);
    const double na = static_cast<double>(ma.n), nb = static_cast<double>(mb.n);
    const double diff = ma.mean - mb.mean;
    const double pooled_var = ((na - 1.0) * ma.var + (nb - 1.0) * mb.var) / (na + nb - 2.0);

    StatResult r;
    r.test = variant == TTestVariant::Welch ? "welch-t" : "student-t";
    if (ma.var == 0.0 && mb.var == 0.0) {
        if (diff != 0.0) throw DataError("t-test: both samples are constant with different means");
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.effect_size = 0.0;
        return r;
    }

    double se = 0.0, df = 0.0;
    if (variant == TTestVariant::Welch) {
        const double va = ma.var / na, vb = mb.var / nb;
        se = std::sqrt(va + vb);
        df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    } else {
        se = std::sqrt(pooled_var * (1.0 / na + 1.0 / nb));
        df = na + nb - 2.0;
    }
    r.statistic = diff / se;
    r.df = df;
    boost::math::students_t dist(df);
    r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))), 0.0, 1.0);
    r.effect_size = diff / std::sqrt(pooled_var);
    return r;
}

std::vector<bool> bonferroni(std::span<const double> p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
    std::vector<bool> out;
    out.reserve(p_values.size());
    const double threshold = alpha / static_cast<double>(std::max<std::size_t>(p_values.size(), 1));
    for (double p : p_values) out.push_back(p < threshold);
    return out;
}

GenreComparison genre_comparison(std::span<const VideoAttributes> attributes, std::span<const VideoMeta> metas,
                                 double alpha, TTestVariant variant) {
    std::map<std::string, Genre> genre_of;
    for (const auto& m : metas) genre_of.emplace(m.video_id, m.genre);

    struct Field {
        const char* name;
        bool needs_bug;
        double (*get)(const VideoAttributes&);
    };
    static const Field fields[] = {
        {"total_segments", false, [](const VideoAttributes& a) { return static_cast<double>(a.total_segments); }},
        {"buggy_segments", false, [](const VideoAttributes& a) { return static_cast<double>(a.buggy_segments); }},
        {"buggy_ratio", false, [](const VideoAttributes& a) { return a.buggy_ratio; }},
        {"start_time_ratio", true, [](const VideoAttributes& a) { return *a.start_time_ratio; }},
        {"gaps", true, [](const VideoAttributes& a) { return static_cast<double>(a.gaps); }},
    };

    GenreComparison out;
    out.alpha = alpha;
    bool any_action = false, any_sports = false;
    for (const auto& a : attributes) {
        auto it = genre_of.find(a.video_id);
        if (it == genre_of.end()) throw IntegrityError("no metadata for video " + a.video_id);
        any_action |= it->second == Genre::Action;
        any_sports |= it->second == Genre::Sports;
    }
    if (!any_action || !any_sports) throw DataError("genre comparison needs both Action and Sports videos");

    for (const auto& field : fields) {
        AttributeComparison cmp;
        cmp.attribute = field.name;
        std::vector<double> action, sports;
        for (const auto& a : attributes) {
            if (field.needs_bug && a.buggy_segments == 0) continue;
            const auto g = genre_of.at(a.video_id);
            if (g == Genre::Action) action.push_back(field.get(a));
            else if (g == Genre::Sports) sports.push_back(field.get(a));
        }
        if (action.size() < 2 || sports.size() < 2) {
            throw DataError(std::string("genre comparison: too few videos for ") + field.name +
                            (field.needs_bug ? " after excluding bug-free videos" : "") + " (action " +
                            std::to_string(action.size()) + ", sports " + std::to_string(sports.size()) + ")");
        }
        cmp.n_action = action.size();
        cmp.n_sports = sports.size();
        cmp.mean_action = std::accumulate(action.begin(), action.end(), 0.0) / static_cast<double>(action.size());
        cmp.mean_sports = std::accumulate(sports.begin(), sports.end(), 0.0) / static_cast<double>(sports.size());
        auto ks = [&](const std::vector<double>& x, const char* genre) -> std::optional<StatResult> {
            try {
                return ks_normality(x);
            } catch (const Error& e) {
                out.warnings.push_back(std::string("KS skipped for ") + field.name + " (" + genre + "): " + e.what());
                return std::nullopt;
            }
        };
        cmp.ks_action = ks(action, "Action");
        cmp.ks_sports = ks(sports, "Sports");
        try {
            cmp.t = t_test(action, sports, variant);
        } catch (const DataError& e) {
            out.warnings.push_back(std::string("t-test skipped for ") + field.name + ": " + e.what());
        }
        out.attributes.push_back(std::move(cmp));
    }

    std::vector<double> p;
    for (const auto& c : out.attributes) {
        if (c.t) p.push_back(c.t->p_value);
    }
    const auto reject = bonferroni(p, alpha);
    out.corrected_alpha = alpha / static_cast<double>(std::max<std::size_t>(p.size(), 1));
    std::size_t next = 0;
    for (auto& c : out.attributes) {
        if (!c.t) continue;
        c.t->corrected_alpha = out.corrected_alpha;
        c.reject = reject[next++];
    }
    return out;
}

namespace {

std::string opt(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : "";
}

nlohmann::json stat_json(const std::optional<StatResult>& r) {
    if (!r) return nullptr;
    nlohmann::json j = {{"test", r->test}, {"statistic", r->statistic}, {"p_value", r->p_value},
                        {"corrected_alpha", r->corrected_alpha}};
    j["effect_size"] = r->effect_size ? nlohmann::json(*r->effect_size) : nlohmann::json(nullptr);
    j["df"] = r->df ? nlohmann::json(*r->df) : nlohmann::json(nullptr);
    return j;
}

} // namespace

void write_stats_csv(const std::filesystem::path& path, const GenreComparison& cmp) {
    std::ostringstream out;
    csv::write_row(out, {"attribute", "n_action", "n_sports", "mean_action", "mean_sports", "ks_action_d",
                         "ks_action_p", "ks_sports_d", "ks_sports_p", "test", "statistic", "df", "p_value",
                         "cohens_d", "corrected_alpha", "reject"});
    for (const auto& c : cmp.attributes) {
        csv::write_row(out, {c.attribute, std::to_string(c.n_action), std::to_string(c.n_sports),
                             csv::format_double(c.mean_action), csv::format_double(c.mean_sports),
                             c.ks_action ? csv::format_double(c.ks_action->statistic) : "",
                             c.ks_action ? csv::format_double(c.ks_action->p_value) : "",
                             c.ks_sports ? csv::format_double(c.ks_sports->statistic) : "",
                             c.ks_sports ? csv::format_double(c.ks_sports->p_value) : "",
                             c.t ? c.t->test : "", c.t ? csv::format_double(c.t->statistic) : "",
                             c.t ? opt(c.t->df) : "", c.t ? csv::format_double(c.t->p_value) : "",
                             c.t ? opt(c.t->effect_size) : "", csv::format_double(cmp.corrected_alpha),
                             c.reject ? "1" : "0"});
    }
    csv::write_text_file(path, out.str());
}

nlohmann::json stats_to_json(const GenreComparison& cmp) {
    nlohmann::json attrs = nlohmann::json::array();
    for (const auto& c : cmp.attributes) {
        attrs.push_back({{"attribute", c.attribute},
                         {"n_action", c.n_action},
                         {"n_sports", c.n_sports},
                         {"mean_action", c.mean_action},
                         {"mean_sports", c.mean_sports},
                         {"ks_action", stat_json(c.ks_action)},
                         {"ks_sports", stat_json(c.ks_sports)},
                         {"t_test", stat_json(c.t)},
                         {"reject", c.reject}});
    }
    return {{"alpha", cmp.alpha}, {"corrected_alpha", cmp.corrected_alpha}, {"attributes", attrs},
            {"warnings", cmp.warnings}};
}

std::vector<UserWindow> read_user_windows(const std::filesystem::path& path) {
    auto table = csv::read_file(path);
    csv::require_columns(table, {"participant_id", "video_id", "start_seconds", "end_seconds"}, path.string());
    std::vector<UserWindow> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto line = table.row_lines[r];
        UserWindow w;
        w.participant_id = row[table.column("participant_id")];
        w.video_id = row[table.column("video_id")];
        const auto& s = row[table.column("start_seconds")];
        const auto& e = row[table.column("end_seconds")];
        if (s.empty() != e.empty()) throw ParseError("window needs both start and end, or neither", line);
        if (!s.empty()) {
            w.start = csv::parse_double(s, line, "start_seconds");
            w.end = csv::parse_double(e, line, "end_seconds");
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::map<std::string, std::vector<Label>> map_user_windows(std::span<const UserWindow> windows,
                                                           std::span<const Segment> segments, double duration) {
    std::vector<const Segment*> ordered;
    for (const auto& s : segments) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const Segment* a, const Segment* b) { return a->index < b->index; });

    std::map<std::string, std::vector<Label>> out;
    for (const auto& w : windows) {
        auto& labels = out[w.participant_id];
        if (labels.empty()) labels.assign(ordered.size(), Label::Clean);
        if (!w.start) continue;
        const double ws = *w.start, we = *w.end;
        if (!(ws < we) || ws < 0.0 || we > duration) {
            throw DataError("window [" + csv::format_double(ws) + "," + csv::format_double(we) + "] of participant " +
                            w.participant_id + " lies outside video " + w.video_id + " [0," +
                            csv::format_double(duration) + "]");
        }
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            const auto& s = *ordered[i];
            const bool segment_inside = s.start >= ws && s.end <= we;
            const bool window_inside = ws >= s.start && we <= s.end;
            if (segment_inside || window_inside) labels[i] = Label::Buggy;
        }
    }
    return out;
}

UserStudySummary user_study_summary(const std::map<std::string, std::map<std::string, VideoAttributes>>& per_participant,
                                    const std::map<std::string, VideoAttributes>& pipeline,
                                    std::span<const std::string> videos) {
    UserStudySummary out;
    auto mean_opt = [](const std::vector<double>& v) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    std::vector<double> pr, pp, sr, sp;
    for (const auto& video : videos) {
        auto people = per_participant.find(video);
        if (people == per_participant.end() || people->second.empty()) {
            throw DataError("user study: no participant data for video " + video);
        }
        auto pipe = pipeline.find(video);
        if (pipe == pipeline.end()) throw DataError("user study: no pipeline attributes for video " + video);

        UserStudyRow row;
        row.video_id = video;
        row.participants = people->second.size();
        std::vector<double> ratios, starts;
        for (const auto& [pid, attrs] : people->second) {
            ratios.push_back(attrs.buggy_ratio);
            if (attrs.start_time_ratio) starts.push_back(*attrs.start_time_ratio);
        }
        row.participant_buggy_ratio = *mean_opt(ratios);
        row.participant_start_time_ratio = mean_opt(starts);
        row.pipeline_buggy_ratio = pipe->second.buggy_ratio;
        row.pipeline_start_time_ratio = pipe->second.start_time_ratio;

        pr.push_back(row.participant_buggy_ratio);
        pp.push_back(row.pipeline_buggy_ratio);
        if (row.participant_start_time_ratio) sr.push_back(*row.participant_start_time_ratio);
        if (row.pipeline_start_time_ratio) sp.push_back(*row.pipeline_start_time_ratio);
        out.videos.push_back(std::move(row));
    }
    out.overall.video_id = "overall";
    for (const auto& r : out.videos) out.overall.participants += r.participants;
    out.overall.participant_buggy_ratio = mean_opt(pr).value_or(0.0);
    out.overall.pipeline_buggy_ratio = mean_opt(pp).value_or(0.0);
    out.overall.participant_start_time_ratio = mean_opt(sr);
    out.overall.pipeline_start_time_ratio = mean_opt(sp);
    return out;
}

void write_user_study_csv(const std::filesystem::path& path, const UserStudySummary& summary) {
    std::ostringstream out;
    csv::write_row(out, {"video_id", "participants", "participant_buggy_ratio", "pipeline_buggy_ratio",
                         "participant_start_time_ratio", "pipeline_start_time_ratio"});
    auto emit = [&](const UserStudyRow& r) {
        csv::write_row(out, {r.video_id, std::to_string(r.participants), csv::format_double(r.participant_buggy_ratio),
                             csv::format_double(r.pipeline_buggy_ratio), opt(r.participant_start_time_ratio),
                             opt(r.pipeline_start_time_ratio)});
    };
    for (const auto& r : summary.videos) emit(r);
    emit(summary.overall);
    csv::write_text_file(path, out.str());
}

std::string format_user_study_table(const UserStudySummary& summary) {
    std::ostringstream out;
    auto two = [](std::optional<double> v) {
        if (!v) return std::string("  -  ");
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", *v);
        return std::string(buf);
    };
    out << "Video            Buggy ratio (users / pipeline)  Start time ratio (users / pipeline)\n";
    auto emit = [&](const UserStudyRow& r) {
        std::string id = r.video_id;
        id.resize(std::max<std::size_t>(16, id.size()), ' ');
        out << id << " " << two(r.participant_buggy_ratio) << " / " << two(r.pipeline_buggy_ratio)
            << "                     " << two(r.participant_start_time_ratio) << " / "
            << two(r.pipeline_start_time_ratio) << "\n";
    };
    for (const auto& r : summary.videos) emit(r);
    emit(summary.overall);
    return out.str();
}

} // namespace bugseg
