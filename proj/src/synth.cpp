#include "bugseg/csv.hpp"
#include "bugseg/error.hpp"
#include "bugseg/pipeline.hpp"
#include "bugseg/random.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace bugseg {

namespace {

const char* const kActionTitles[] = {"Skyfall Keep", "Iron Harbor", "Ashen Road"};
const char* const kSportsTitles[] = {"Pitch Masters", "Court Kings", "Gridiron Pro"};

const char* const kPlainWords[] = {"okay", "so", "we", "are", "going", "to", "head", "over", "there", "and",
                                   "look", "at", "this", "now", "let", "me", "just", "grab", "the", "ball",
                                   "run", "pass", "shoot", "quest", "map", "enemy", "score", "nice", "goal", "move"};
const char* const kBugWords[] = {"glitch", "clipping", "stuck", "floating", "broken", "weird", "bugged", "teleported"};

// Markov chain over segment labels; action games are a little buggier.
struct LabelChain {
    double start;
    double stay;
};

std::string cue_text(Rng& rng, bool buggy) {
    std::string text;
    const auto words = uniform_int(rng, 4, 8);
    for (int i = 0; i < words; ++i) {
        if (!text.empty()) text += ' ';
        text += kPlainWords[uniform_int<std::size_t>(rng, 0, std::size(kPlainWords) - 1)];
    }
    // Commentary is a weak cue: bug words show up in under half of the buggy
    // cues and occasionally in clean ones.
    if (uniform01(rng) < (buggy ? 0.45 : 0.05)) {
        text += ' ';
        text += kBugWords[uniform_int<std::size_t>(rng, 0, std::size(kBugWords) - 1)];
    }
    return text;
}

std::string video_name(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "vid%03d", v);
    return buf;
}

} // namespace

SynthSummary write_synthetic_corpus(const std::filesystem::path& dir, const SynthOptions& options) {
    if (options.videos < 4) throw ParameterError("synth needs at least 4 videos");
    if (options.segments_per_video < 1) throw ParameterError("synth needs at least one cue per video");
    if (!(options.separation >= 0.0)) throw ParameterError("separation must be non-negative");

    Rng rng(derive_seed(options.seed, "synthetic-corpus"));
    std::vector<VideoMeta> metas;
    std::vector<Segment> corpus;
    std::ostringstream windows;
    csv::write_row(windows, {"participant_id", "video_id", "start_seconds", "end_seconds"});

    for (int v = 0; v < options.videos; ++v) {
        VideoMeta meta;
        meta.video_id = video_name(v);
        meta.genre = v % 2 == 0 ? Genre::Action : Genre::Sports;
        meta.game_title = meta.genre == Genre::Action ? kActionTitles[uniform_int<std::size_t>(rng, 0, 2)]
                                                      : kSportsTitles[uniform_int<std::size_t>(rng, 0, 2)];
        const LabelChain chain = meta.genre == Genre::Action ? LabelChain{0.30, 0.55} : LabelChain{0.20, 0.50};

        std::vector<TranscriptCue> cues;
        double t = 0.0;
        for (int c = 0; c < options.segments_per_video; ++c) {
            const double gap = static_cast<double>(uniform_int(rng, 4, 16));
            cues.push_back({t, t + gap, ""});
            t += gap;
        }
        meta.duration = t;

        auto segments = segment_video(cues, meta);
        bool prev = false;
        for (auto& s : segments) {
            prev = uniform01(rng) < (prev ? chain.stay : chain.start);
            s.label = prev ? Label::Buggy : Label::Clean;
        }
        for (auto& cue : cues) {
            const auto* owner = &segments.front();
            for (const auto& s : segments) {
                if (cue.start >= s.start) owner = &s;
            }
            cue.text = cue_text(rng, owner->is_buggy());
        }
        auto texts = segment_video(cues, meta);
        for (std::size_t i = 0; i < segments.size(); ++i) segments[i].text = texts[i].text;

        std::ostringstream tsv;
        tsv << "start\ttext\n";
        for (const auto& cue : cues) tsv << csv::format_double(cue.start) << '\t' << cue.text << '\n';
        csv::write_text_file(dir / "transcripts" / (meta.video_id + ".tsv"), tsv.str());

        // Three simulated participants report each buggy run with some
        // slack, miss a few and report the odd false alarm.
        if (v < 6) {
            for (int p = 1; p <= 3; ++p) {
                const std::string pid = "p" + std::to_string(p);
                bool any = false;
                for (std::size_t i = 0; i < segments.size();) {
                    const bool buggy = segments[i].is_buggy();
                    std::size_t j = i;
                    while (j < segments.size() && segments[j].is_buggy() == buggy) ++j;
                    const double lo = segments[i].start, hi = segments[j - 1].end;
                    const double roll = uniform01(rng);
                    if (buggy && roll < 0.8) {
                        const double slack = std::min(1.0, (hi - lo) / 4.0);
                        const bool wide = uniform01(rng) < 0.5;
                        const double s = wide ? std::max(0.0, lo - slack) : lo + slack;
                        const double e = wide ? std::min(meta.duration, hi + slack) : hi - slack;
                        csv::write_row(windows, {pid, meta.video_id, csv::format_double(s), csv::format_double(e)});
                        any = true;
                    } else if (!buggy && roll < 0.1) {
                        csv::write_row(windows, {pid, meta.video_id, csv::format_double(lo + 1.0),
                                                 csv::format_double(lo + 2.0)});
                        any = true;
                    }
                    i = j;
                }
                if (!any) csv::write_row(windows, {pid, meta.video_id, "", ""});
            }
        }

        metas.push_back(meta);
        for (auto& s : segments) corpus.push_back(std::move(s));
    }

    write_video_meta(dir / "meta.csv", metas);
    LabelTable labels;
    BuggyCentroidDesignation designations;
    SynthSummary summary;
    summary.videos = metas.size();
    for (const auto& s : corpus) {
        labels[key_of(s)] = *s.label;
        ++summary.segments;
        if (s.is_buggy()) {
            ++summary.buggy;
            const int frames = static_cast<int>(std::floor(s.length()));
            designations[key_of(s)] = uniform_int(rng, 0, frames - 1);
        }
    }
    write_labels(dir / "labels.csv", labels);
    write_designations(dir / "designations.csv", designations);
    csv::write_text_file(dir / "windows.csv", windows.str());

    const auto dataset = synthetic_embed(corpus, options.seed, options.separation);
    write_embeddings(dataset, dir / "frames.jsonl", dir / "texts.jsonl");

    std::ostringstream toml;
    toml << "# Synthetic corpus: " << options.videos << " videos, separation " << csv::format_double(options.separation)
         << ", seed " << options.seed << "\n\n"
         << "[data]\n"
         << "transcripts = \"transcripts\"\n"
         << "meta = \"meta.csv\"\n"
         << "labels = \"labels.csv\"\n"
         << "frames = \"frames.jsonl\"\n"
         << "texts = \"texts.jsonl\"\n"
         << "designations = \"designations.csv\"\n\n"
         << "[codebook]\n"
         << "mode = \"automatic\"\n"
         << "k = 64\n"
         << "idf = \"smooth\"\n\n"
         << "[split]\n"
         << "train = 0.7\n"
         << "validation = 0.15\n"
         << "test = 0.15\n\n"
         << "[classifiers]\n"
         << "models = [\"LinearModel\", \"KNeighbors\", \"RandomForest\", \"ExtraTrees\", \"WeightedEnsemble\"]\n"
         << "standardize = false\n\n"
         << "[stats]\n"
         << "alpha = 0.05\n"
         << "t_test = \"welch\"\n\n"
         << "[run]\n"
         << "seed = " << options.seed << "\n"
         << "output = \"out\"\n";
    csv::write_text_file(dir / "demo.toml", toml.str());
    return summary;
}

} // namespace bugseg
