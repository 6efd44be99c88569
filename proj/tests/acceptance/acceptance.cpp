// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: bugseg_acceptance [path-to-bugseg-cli]

#include "bugseg/analytics.hpp"
#include "bugseg/codebook.hpp"
#include "bugseg/error.hpp"
#include "bugseg/learners.hpp"
#include "bugseg/model.hpp"
#include "bugseg/pipeline.hpp"
#include "bugseg/random.hpp"
#include "bugseg/transcript.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

using namespace bugseg;

namespace {

// Pinned tolerances and thresholds.
constexpr double kMinF1 = 0.90;
constexpr double kMaxSeconds = 120.0;
constexpr double kTfIdfTol = 1e-9;
constexpr double kGradRelTol = 1e-5;
constexpr double kGradStep = 1e-6;
constexpr double kInertiaSlack = 1e-12;
constexpr double kTTestTol = 1e-6;
constexpr double kReportedP = 0.0805;
constexpr double kReportedPTol = 5e-5;
constexpr double kKsAlpha = 0.05;
constexpr double kUserStudyTol = 0.005; // two-decimal rounding of reported values

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void check(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(name, ok, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<Label> as_labels(const std::vector<int>& v) {
    std::vector<Label> out;
    for (int x : v) out.push_back(x ? Label::Buggy : Label::Clean);
    return out;
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

void end_to_end(const std::string& cli) {
    const auto root = fixture::temp_dir("acceptance");
    const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
    const auto start = std::chrono::steady_clock::now();
    bool ran = shell(q(cli) + " -q synth --videos 50 --separation 4.0 --seed 42 -o " + q(root / "data")) == 0;
    ran = ran && shell(q(cli) + " -q run --config " + q(root / "data" / "demo.toml") + " --seed 42 --k 64 -o " +
                       q(root / "a")) == 0;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ran = ran && shell(q(cli) + " -q --jobs 2 run --config " + q(root / "data" / "demo.toml") +
                       " --seed 42 --k 64 -o " + q(root / "b")) == 0;

    check("synthetic_end_to_end_f1", [&] {
        if (!ran) return std::pair{false, std::string("cli invocation failed")};
        const auto reports = read_report_csv(root / "a" / "report.csv");
        std::size_t segments = 0;
        {
            std::ifstream in(root / "a" / "segments.csv");
            std::string line;
            while (std::getline(in, line)) ++segments;
            --segments; // header
        }
        double linear = -1, ensemble = -1;
        for (const auto& r : reports) {
            if (r.model == "LinearModel") linear = r.metrics.f1;
            if (r.model == "WeightedEnsemble") ensemble = r.metrics.f1;
        }
        return std::pair{linear >= kMinF1 && ensemble >= kMinF1,
                         fmt("linear F1 %.4f, ensemble F1 %.4f", linear, ensemble) + ", " +
                             std::to_string(segments) + " segments"};
    });
    check("synthetic_end_to_end_runtime", [&] {
        return std::pair{ran && seconds < kMaxSeconds, fmt("synth + run took %.1f s", seconds)};
    });
    check("deterministic_reports", [&] {
        if (!ran) return std::pair{false, std::string("cli invocation failed")};
        std::size_t compared = 0, differing = 0;
        for (const auto& e : std::filesystem::recursive_directory_iterator(root / "a")) {
            if (!e.is_regular_file()) continue;
            const auto rel = std::filesystem::relative(e.path(), root / "a");
            ++compared;
            if (slurp(e.path()) != slurp(root / "b" / rel)) ++differing;
        }
        return std::pair{compared > 0 && differing == 0,
                         std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
    });
}

} // namespace

int main(int argc, char** argv) {
#ifdef BUGSEG_CLI
    std::string cli = BUGSEG_CLI;
#else
    std::string cli = "bugseg";
#endif
    if (argc > 1) cli = argv[1];

    end_to_end(cli);

    check("gaps_fixture", [] {
        const int g = count_gaps(as_labels({0, 1, 1, 0, 0, 0, 1, 0, 0, 1}));
        return std::pair{g == 2, "gaps = " + std::to_string(g)};
    });
    check("gaps_run_length_oracle", [] {
        Rng rng(1);
        int bad = 0;
        for (int t = 0; t < 10000; ++t) {
            std::vector<int> v(static_cast<std::size_t>(uniform_int(rng, 0, 50)));
            const double p = uniform01(rng);
            for (auto& x : v) x = uniform01(rng) < p;
            bad += count_gaps(as_labels(v)) != oracle::gaps(v);
        }
        return std::pair{bad == 0, std::to_string(bad) + " of 10000 sequences disagree"};
    });

    check("tfidf_hand_oracle", [] {
        const auto d = fixture::tfidf_dataset();
        double worst = 0;
        for (bool smooth : {false, true}) {
            const auto vf = tfidf_features(d, fixture::tfidf_codebook(), smooth ? IdfForm::Smooth : IdfForm::Raw);
            const auto want = oracle::tfidf(fixture::kMatches, 4, smooth);
            if (vf.weights.size() != want.size()) return std::pair{false, std::string("row count differs")};
            for (std::size_t r = 0; r < want.size(); ++r) {
                for (std::size_t c = 0; c < 4; ++c) worst = std::max(worst, std::abs(vf.weights[r][c] - want[r][c]));
            }
        }
        return std::pair{worst <= kTfIdfTol, fmt("max abs error %.3g over raw and smooth IDF", worst)};
    });

    check("segmentation_properties", [] {
        Rng rng(2);
        int bad = 0;
        for (int t = 0; t < 1000; ++t) {
            const auto rc = fixture::random_cues(rng);
            const VideoMeta m{"v", rc.duration, Genre::Action, "G"};
            const auto segs = segment_video(rc.cues, m);
            bool ok = !segs.empty() && segs.front().start == 0.0 && segs.back().end == rc.duration;
            for (std::size_t i = 0; ok && i < segs.size(); ++i) {
                if (i + 1 < segs.size() && segs[i].end != segs[i + 1].start) ok = false;
                if (rc.duration >= kMinSegmentSeconds && segs[i].length() < kMinSegmentSeconds) ok = false;
            }
            ok = ok && segment_video(rc.cues, m) == segs && merge_short_segments(segs) == segs;
            bad += !ok;
        }
        return std::pair{bad == 0, std::to_string(bad) + " of 1000 cue lists violate tiling/length/determinism/fixed point"};
    });
    check("segmentation_example", [] {
        const auto cues = parse_transcript("0:00\ta\n0:06\tb\n0:13\tc\n", TranscriptFormat::Tsv, 40.0);
        const auto segs = segment_video(cues, {"v", 40, Genre::Action, "G"});
        const bool ok = segs.size() == 3 && segs[0].start == 0 && segs[0].end == 6 && segs[1].start == 6 &&
                        segs[1].end == 13 && segs[2].start == 13 && segs[2].end == 40;
        return std::pair{ok, std::string("cues 0:00/0:06/0:13 over 40 s -> ") + std::to_string(segs.size()) + " segments"};
    });

    check("logistic_gradient", [] {
        Rng rng(3);
        double worst = 0;
        for (int point = 0; point < 100; ++point) {
            const std::size_t dim = 4;
            Dataset d(dim);
            std::vector<double> row(dim);
            for (int i = 0; i < 30; ++i) {
                for (auto& x : row) x = standard_normal(rng);
                d.add(row, uniform_int(rng, 0, 1));
            }
            std::vector<double> w(dim);
            for (auto& x : w) x = standard_normal(rng);
            const double b = standard_normal(rng), l2 = 0.05;
            const auto obj = logistic_objective(w, b, d, l2);
            double diff = 0, scale = 0;
            for (std::size_t j = 0; j <= dim; ++j) {
                auto wp = w, wm = w;
                double bp = b, bm = b;
                if (j < dim) wp[j] += kGradStep, wm[j] -= kGradStep;
                else bp += kGradStep, bm -= kGradStep;
                const double num = (oracle::logistic_loss(wp, bp, d, l2) - oracle::logistic_loss(wm, bm, d, l2)) / (2 * kGradStep);
                const double ana = j < dim ? obj.grad_weights[j] : obj.grad_bias;
                diff += (num - ana) * (num - ana);
                scale = std::max({scale, std::abs(num), std::abs(ana)});
            }
            worst = std::max(worst, std::sqrt(diff) / std::max(scale, 1e-12));
        }
        return std::pair{worst < kGradRelTol, fmt("worst relative error %.3g at 100 points", worst)};
    });
    check("kmeans_inertia_monotone", [] {
        Rng rng(4);
        std::vector<FrameVector> pts(400);
        for (auto& p : pts) {
            for (auto& x : p) x = standard_normal(rng);
            if (uniform01(rng) < 0.5) p[0] += 6;
        }
        int increases = 0;
        std::size_t steps = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto r = kmeans(pts, 8, seed);
            steps += r.inertia.size();
            for (std::size_t i = 1; i < r.inertia.size(); ++i) {
                increases += r.inertia[i] > r.inertia[i - 1] * (1 + kInertiaSlack);
            }
        }
        return std::pair{increases == 0, std::to_string(increases) + " increases over " + std::to_string(steps) + " iterations"};
    });
    check("cosine_assignment_exhaustive", [] {
        Rng rng(5);
        int bad = 0;
        for (int t = 0; t < 10000; ++t) {
            const auto k = uniform_int<std::size_t>(rng, 1, 16);
            std::vector<FrameVector> cents(k);
            for (auto& c : cents) {
                for (auto& x : c) x = standard_normal(rng);
            }
            if (k > 2 && uniform01(rng) < 0.2) cents[2] = cents[0]; // exact tie
            const Codebook cb(CodebookMode::Automatic, cents, 0);
            FrameVector f{};
            for (auto& x : f) x = standard_normal(rng);
            bad += assign_frame(f, cb) != oracle::cosine_scan(f, cents);
        }
        return std::pair{bad == 0, std::to_string(bad) + " of 10000 assignments differ"};
    });

    check("t_test_textbook", [] {
        const std::vector<double> a{1, 2, 3, 4, 5}, b{3, 4, 5, 6, 7};
        const auto o = oracle::pooled_t(a, b);
        const auto r = t_test(a, b, TTestVariant::Student);
        const auto w = t_test(a, b, TTestVariant::Welch);
        const bool ok = std::abs(r.statistic - o.t) < kTTestTol && std::abs(*r.df - o.df) < kTTestTol &&
                        std::abs(r.p_value - o.p) < kTTestTol && std::abs(w.p_value - o.p) < kTTestTol &&
                        std::abs(o.t + 2.0) < kTTestTol && o.df == 8.0 && std::abs(o.p - kReportedP) < kReportedPTol;
        return std::pair{ok, fmt("t=%.6f df=%.1f p=%.6f", r.statistic, *r.df, r.p_value) +
                                 fmt(" (Simpson oracle p=%.6f)", o.p)};
    });
    check("t_test_identical_samples", [] {
        const std::vector<double> a{1, 2, 3, 4};
        const auto r = t_test(a, a);
        const bool ok = r.statistic == 0.0 && std::abs(r.p_value - 1.0) < 1e-12 && *r.effect_size == 0.0;
        return std::pair{ok, fmt("t=%g p=%g d=%g", r.statistic, r.p_value, *r.effect_size)};
    });
    check("bonferroni", [] {
        const auto r = bonferroni(std::vector<double>{0.01, 0.04}, 0.05);
        const bool ok = r == std::vector<bool>{true, false};
        return std::pair{ok, std::string("(0.01, 0.04) at 0.05 -> (") + (r[0] ? "reject" : "keep") + ", " +
                                 (r[1] ? "reject" : "keep") + ")"};
    });
    check("ks_rejects_bimodal", [] {
        Rng rng(6);
        std::vector<double> s;
        for (int i = 0; i < 200; ++i) s.push_back((i % 2 ? 5.0 : -5.0) + 0.5 * standard_normal(rng));
        const auto r = ks_normality(s);
        return std::pair{r.p_value < kKsAlpha, fmt("D=%.4f p=%.3g", r.statistic, r.p_value)};
    });

    const auto tiled = [](const std::vector<std::pair<double, double>>& b) {
        std::vector<Segment> out;
        for (std::size_t i = 0; i < b.size(); ++i) {
            out.push_back({"v", static_cast<int>(i), b[i].first, b[i].second, "", std::nullopt, false});
        }
        return out;
    };
    check("user_window_inside_segment", [&] {
        const auto m = map_user_windows(std::vector<UserWindow>{{"p", "v", 12.0, 14.0}}, tiled({{0, 10}, {10, 20}}), 20);
        return std::pair{m.at("p") == std::vector<Label>{Label::Clean, Label::Buggy},
                         std::string("window [12,14] over [10,20]")};
    });
    check("user_segment_inside_window", [&] {
        const auto m = map_user_windows(std::vector<UserWindow>{{"p", "v", 5.0, 30.0}},
                                        tiled({{0, 5}, {5, 10}, {10, 20}, {20, 40}}), 40);
        return std::pair{m.at("p")[2] == Label::Buggy, std::string("segment [10,20] in window [5,30]")};
    });
    check("user_window_straddling", [&] {
        const auto m = map_user_windows(std::vector<UserWindow>{{"p", "v", 8.0, 12.0}}, tiled({{5, 10}, {10, 20}}), 20);
        return std::pair{m.at("p") == std::vector<Label>(2, Label::Clean),
                         std::string("window [8,12] over [5,10],[10,20] marks nothing")};
    });
    check("user_study_summary", [] {
        const auto in = fixture::user_study_inputs();
        const auto s = user_study_summary(in.participants, in.pipeline, in.videos);
        const auto& o = s.overall;
        const auto table = format_user_study_table(s);
        bool ok = true;
        for (const char* v : {"0.60", "0.77", "0.21", "0.14"}) ok = ok && table.find(v) != std::string::npos;
        ok = ok && std::abs(o.participant_buggy_ratio - 0.60) < kUserStudyTol &&
                        std::abs(o.pipeline_buggy_ratio - 0.77) < kUserStudyTol &&
                        std::abs(*o.participant_start_time_ratio - 0.21) < kUserStudyTol &&
                        std::abs(*o.pipeline_start_time_ratio - 0.14) < kUserStudyTol;
        return std::pair{ok, fmt("buggy ratio %.2f vs %.2f", o.participant_buggy_ratio, o.pipeline_buggy_ratio) +
                                 fmt(", start time %.2f vs %.2f", *o.participant_start_time_ratio,
                                     *o.pipeline_start_time_ratio)};
    });

    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
