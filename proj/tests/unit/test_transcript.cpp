#include "bugseg/error.hpp"
#include "bugseg/transcript.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bugseg;

namespace {

VideoMeta meta(double duration, std::string id = "v") {
    return {std::move(id), duration, Genre::Action, "Game"};
}

} // namespace

TEST(ParseTranscript, TsvUsesNextStartAndDuration) {
    const auto cues = parse_transcript("0\tintro text\n6\tnext part", TranscriptFormat::Tsv, 13.0);
    ASSERT_EQ(cues.size(), 2u);
    EXPECT_EQ(cues[0], (TranscriptCue{0, 6, "intro text"}));
    EXPECT_EQ(cues[1], (TranscriptCue{6, 13, "next part"}));
}

TEST(ParseTranscript, TsvHeaderAndClockTimes) {
    const auto cues = parse_transcript("start\ttext\n0:00\ta\n0:06\tb\n1:02:03.5\tc\n", TranscriptFormat::Tsv, 4000.0);
    ASSERT_EQ(cues.size(), 3u);
    EXPECT_DOUBLE_EQ(cues[1].start, 6.0);
    EXPECT_DOUBLE_EQ(cues[2].start, 3723.5);
    EXPECT_DOUBLE_EQ(cues[2].end, 4000.0);
}

TEST(ParseTranscript, TsvNeedsDuration) {
    EXPECT_THROW(parse_transcript("0\ta\n", TranscriptFormat::Tsv), ParameterError);
    EXPECT_THROW(parse_transcript("0\ta\n9\tb\n", TranscriptFormat::Tsv, 8.0), DataError);
}

TEST(ParseTranscript, EmptyDocumentIsEmpty) {
    for (auto f : {TranscriptFormat::Srt, TranscriptFormat::WebVtt, TranscriptFormat::Tsv}) {
        EXPECT_TRUE(parse_transcript("", f).empty());
    }
}

TEST(ParseTranscript, SrtOverlapIsClamped) {
    const std::string srt = "1\n00:00:00,000 --> 00:00:04,000\nfirst\n\n"
                            "2\n00:00:03,000 --> 00:00:08,000\nsecond\nline two\n";
    const auto cues = parse_transcript(srt, TranscriptFormat::Srt);
    ASSERT_EQ(cues.size(), 2u);
    EXPECT_EQ(cues[0], (TranscriptCue{0, 4, "first"}));
    EXPECT_EQ(cues[1], (TranscriptCue{4, 8, "second line two"}));
}

TEST(ParseTranscript, MalformedTimestampNamesLine) {
    const std::string srt = "1\n00:00:00,000 --> 00:00:04,000\nok\n\n2\n00:00:0x,000 --> 00:00:08,000\nbad\n";
    try {
        parse_transcript(srt, TranscriptFormat::Srt);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 6u);
        EXPECT_NE(std::string(e.what()).find("line 6"), std::string::npos);
    }
}

TEST(ParseTranscript, WebVtt) {
    const std::string vtt = "WEBVTT\n\nNOTE a comment\nspanning lines\n\n"
                            "00:01.000 --> 00:05.000 align:start\n<v Bob>Hello &amp; welcome</v>\n\n"
                            "intro\n00:05.000 --> 00:09.500\nnext\n";
    const auto cues = parse_transcript(vtt, TranscriptFormat::WebVtt);
    ASSERT_EQ(cues.size(), 2u);
    EXPECT_EQ(cues[0], (TranscriptCue{1, 5, "Hello & welcome"}));
    EXPECT_EQ(cues[1], (TranscriptCue{5, 9.5, "next"}));
    EXPECT_THROW(parse_transcript("00:01.000 --> 00:05.000\nx\n", TranscriptFormat::WebVtt), ParseError);
}

TEST(NormalizeCues, SwallowedCueFoldsIntoPrevious) {
    const auto out = normalize_cues({{0, 10, "a"}, {2, 6, "b"}, {10, 12, "c"}});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].text, "a b");
    EXPECT_EQ(out[1], (TranscriptCue{10, 12, "c"}));
}

TEST(SegmentVideo, FigureTwoCues) {
    const auto cues = parse_transcript("0:00\tfirst\n0:06\tsecond\n0:13\tthird\n", TranscriptFormat::Tsv, 40.0);
    const auto segs = segment_video(cues, meta(40));
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_EQ(segs[0].start, 0);
    EXPECT_EQ(segs[0].end, 6);
    EXPECT_EQ(segs[1].start, 6);
    EXPECT_EQ(segs[1].end, 13);
    EXPECT_EQ(segs[2].start, 13);
    EXPECT_EQ(segs[2].end, 40);
    EXPECT_EQ(segs[2].text, "third");
}

TEST(SegmentVideo, ShortPiecesMergeIntoShorterNeighbour) {
    // Pieces 6, 2, 4, 10: the 2 s piece joins its 4 s right neighbour.
    const std::vector<TranscriptCue> cues{{0, 6, "a"}, {6, 8, "b"}, {8, 12, "c"}, {12, 22, "d"}};
    const auto segs = segment_video(cues, meta(22));
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_EQ(segs[1].start, 6);
    EXPECT_EQ(segs[1].end, 12);
    EXPECT_EQ(segs[1].text, "b c");
    EXPECT_EQ(segs[1].index, 1);
}

TEST(SegmentVideo, TieGoesLeft) {
    // Middle 1 s piece between two 7 s pieces joins the left one.
    const std::vector<TranscriptCue> cues{{0, 7, "a"}, {7, 8, "b"}, {8, 15, "c"}};
    const auto segs = segment_video(cues, meta(15));
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0].end, 8);
    EXPECT_EQ(segs[0].text, "a b");
}

TEST(SegmentVideo, ShortVideoAndNoCues) {
    auto segs = segment_video({{0, 1, "a"}, {1, 3, "b"}}, meta(3));
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_TRUE(segs[0].short_video);
    EXPECT_EQ(segs[0].text, "a b");
    segs = segment_video({}, meta(30));
    ASSERT_EQ(segs.size(), 1u);
    EXPECT_FALSE(segs[0].short_video);
    EXPECT_EQ(segs[0].end, 30);
}

TEST(SegmentVideo, CueBeyondDurationIsAnError) {
    EXPECT_THROW(segment_video({{0, 20, "a"}}, meta(10)), DataError);
}

TEST(SegmentVideo, RandomCueProperties) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto rc = fixture::random_cues(rng);
        const auto m = meta(rc.duration);
        const auto segs = segment_video(rc.cues, m);
        ASSERT_FALSE(segs.empty());
        EXPECT_EQ(segs.front().start, 0.0);
        EXPECT_EQ(segs.back().end, rc.duration);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            EXPECT_EQ(segs[i].index, static_cast<int>(i));
            if (i + 1 < segs.size()) EXPECT_EQ(segs[i].end, segs[i + 1].start);
            if (rc.duration >= kMinSegmentSeconds) EXPECT_GE(segs[i].length(), kMinSegmentSeconds);
        }
        EXPECT_EQ(segment_video(rc.cues, m), segs);
        EXPECT_EQ(merge_short_segments(segs), segs);

        std::vector<double> starts;
        for (const auto& c : rc.cues) starts.push_back(c.start);
        const auto expected = oracle::segments(starts, rc.duration);
        ASSERT_EQ(segs.size(), expected.size()) << "trial " << trial;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            EXPECT_EQ(segs[i].start, expected[i].first);
            EXPECT_EQ(segs[i].end, expected[i].second);
        }
    }
}

TEST(MergeShortSegments, LabelsCombine) {
    std::vector<Segment> segs{{"v", 0, 0, 6, "a", Label::Clean, false},
                              {"v", 1, 6, 8, "b", Label::Buggy, false},
                              {"v", 2, 8, 20, "c", Label::Clean, false}};
    const auto out = merge_short_segments(segs);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].label, Label::Buggy);
    EXPECT_EQ(out[1].label, Label::Clean);
    EXPECT_EQ(out[1].index, 1);
}

TEST(AttachLabels, ListsEveryDanglingKey) {
    std::vector<Segment> segs{{"v", 0, 0, 6, "", std::nullopt, false}};
    LabelTable labels{{{"v", 0}, Label::Buggy}, {{"v", 3}, Label::Clean}, {{"w", 0}, Label::Clean}};
    try {
        attach_labels(segs, labels);
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(v,3)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("(w,0)"), std::string::npos) << msg;
    }
    labels.erase({"v", 3});
    labels.erase({"w", 0});
    EXPECT_EQ(attach_labels(segs, labels)[0].label, Label::Buggy);
}

TEST(CheckSegments, ReportsGapsAndShortPieces) {
    const std::vector<VideoMeta> metas{meta(20)};
    std::vector<Segment> segs{{"v", 0, 0, 6, "", std::nullopt, false}, {"v", 1, 6, 20, "", std::nullopt, false}};
    EXPECT_TRUE(check_segments(segs, metas).empty());
    segs[1].start = 7;
    EXPECT_EQ(check_segments(segs, metas).size(), 1u);
    segs[1].start = 6;
    segs[0].end = 4;
    segs[1].start = 4;
    EXPECT_EQ(check_segments(segs, metas).size(), 1u);
    segs.push_back({"x", 0, 0, 5, "", std::nullopt, false});
    EXPECT_EQ(check_segments(segs, metas).size(), 2u);
}

TEST(TranscriptIo, SegmentsRoundTrip) {
    const auto dir = fixture::temp_dir("segments-io");
    std::vector<Segment> segs{{"v,1", 0, 0, 6.25, "said \"hi\", then left", Label::Buggy, false},
                              {"v,1", 1, 6.25, 20, "", std::nullopt, false}};
    write_segments(dir / "s.csv", segs);
    EXPECT_EQ(read_segments(dir / "s.csv"), segs);

    std::vector<VideoMeta> metas{{"a", 12.5, Genre::Sports, "Pitch, Masters"}};
    write_video_meta(dir / "m.csv", metas);
    const auto back = read_video_meta(dir / "m.csv");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].game_title, "Pitch, Masters");
    EXPECT_EQ(back[0].genre, Genre::Sports);
}

TEST(TranscriptIo, SegmentCorpusIsJobIndependent) {
    const auto dir = fixture::temp_dir("corpus");
    std::vector<VideoMeta> metas;
    for (int v = 0; v < 5; ++v) {
        metas.push_back(meta(60, "v" + std::to_string(v)));
        std::string tsv = "0\ta\n7\tb\n9\tc\n30\td\n";
        std::filesystem::create_directories(dir / "t");
        std::FILE* f = std::fopen((dir / "t" / ("v" + std::to_string(v) + ".tsv")).c_str(), "w");
        std::fputs(tsv.c_str(), f);
        std::fclose(f);
    }
    const auto one = segment_corpus(dir / "t", metas, 1);
    const auto many = segment_corpus(dir / "t", metas, 3);
    EXPECT_EQ(one, many);
    EXPECT_EQ(one.size(), 15u);
    metas.push_back(meta(60, "missing"));
    EXPECT_THROW(segment_corpus(dir / "t", metas, 1), DataError);
}
