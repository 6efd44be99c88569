#include "bugseg/csv.hpp"
#include "bugseg/embedding.hpp"
#include "bugseg/error.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bugseg;

namespace {

std::vector<Segment> two_segments() {
    return {{"v", 0, 0, 10, "a glitch", Label::Buggy, false}, {"v", 1, 10, 16, "b", Label::Clean, false}};
}

std::string frame_line(const std::string& id, int seg, int sec, std::size_t dim = kFrameDim, double fill = 0.5) {
    std::string s = "{\"video_id\":\"" + id + "\",\"segment_index\":" + std::to_string(seg) +
                    ",\"second_offset\":" + std::to_string(sec) + ",\"vector\":[";
    for (std::size_t i = 0; i < dim; ++i) s += (i ? "," : "") + csv::format_double(fill);
    return s + "]}\n";
}

std::string text_line(const std::string& id, int seg, std::size_t dim = kTextDim) {
    std::string s = "{\"video_id\":\"" + id + "\",\"segment_index\":" + std::to_string(seg) + ",\"vector\":[";
    for (std::size_t i = 0; i < dim; ++i) s += i ? ",0" : "1";
    return s + "]}\n";
}

} // namespace

TEST(EmbeddingDataset, SortsAndIndexes) {
    std::vector<FrameEmbedding> frames{{"v", 1, 2, {}}, {"v", 0, 1, {}}, {"v", 0, 0, {}}};
    std::vector<TextEmbedding> texts{{"v", 1, {}}, {"v", 0, {}}};
    const EmbeddingDataset d(two_segments(), frames, texts);
    EXPECT_EQ(d.frames()[0].second_offset, 0);
    EXPECT_EQ(d.frames_of({"v", 0}).size(), 2u);
    EXPECT_EQ(d.frames_of({"v", 1}).size(), 1u);
    EXPECT_TRUE(d.frames_of({"v", 9}).empty());
    ASSERT_NE(d.text_of({"v", 1}), nullptr);
    EXPECT_EQ(d.text_of({"x", 0}), nullptr);
    EXPECT_TRUE(d.warnings().empty());
}

TEST(EmbeddingDataset, HardErrors) {
    auto segs = two_segments();
    EXPECT_THROW(EmbeddingDataset(segs, {{"v", 0, 0, {}}, {"v", 0, 0, {}}}, {}), IntegrityError);
    EXPECT_THROW(EmbeddingDataset(segs, {{"v", 5, 0, {}}}, {}), IntegrityError);
    EXPECT_THROW(EmbeddingDataset(segs, {{"v", 0, -1, {}}}, {}), DataError);
    FrameVector bad{};
    bad[3] = std::nan("");
    EXPECT_THROW(EmbeddingDataset(segs, {{"v", 0, 0, bad}}, {}), DataError);
    EXPECT_THROW(EmbeddingDataset(segs, {}, {{"w", 0, {}}}), IntegrityError);
}

TEST(EmbeddingDataset, SoftWarnings) {
    auto segs = two_segments();
    std::vector<FrameEmbedding> frames;
    for (int s = 0; s < 7; ++s) frames.push_back({"v", 1, s, {}}); // 7 frames in a 6 s segment, one past the end
    const EmbeddingDataset d(segs, frames, {{"v", 1, {}}});
    // segment 0: no frames, no text; segment 1: too many frames, offset past end
    EXPECT_EQ(d.warnings().size(), 4u);
}

TEST(EmbeddingJsonl, RoundTrip) {
    const auto dir = fixture::temp_dir("jsonl");
    auto segs = two_segments();
    const auto d = synthetic_embed(segs, 3, 2.0);
    EXPECT_EQ(d.frames().size(), 16u);
    EXPECT_EQ(d.texts().size(), 2u);
    write_embeddings(d, dir / "f.jsonl", dir / "t.jsonl");
    const auto back = load_embeddings(dir / "f.jsonl", dir / "t.jsonl", segs);
    EXPECT_EQ(back, d);
}

TEST(EmbeddingJsonl, DimensionErrorNamesRecord) {
    const auto dir = fixture::temp_dir("jsonl-dim");
    csv::write_text_file(dir / "f.jsonl", frame_line("v", 0, 0) + frame_line("v", 0, 1, 63));
    try {
        read_frame_jsonl(dir / "f.jsonl");
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("f.jsonl"), std::string::npos) << msg;
        EXPECT_NE(msg.find("63"), std::string::npos) << msg;
    }
    csv::write_text_file(dir / "t.jsonl", text_line("v", 0) + "\n" + text_line("v", 1, 100));
    EXPECT_THROW(read_text_jsonl(dir / "t.jsonl"), DimensionError);
    csv::write_text_file(dir / "bad.jsonl", "{not json}\n");
    EXPECT_THROW(read_frame_jsonl(dir / "bad.jsonl"), ParseError);
}

TEST(SyntheticEmbed, BuggyFramesShiftAlongDirection) {
    std::vector<Segment> segs;
    for (int i = 0; i < 40; ++i) {
        segs.push_back({"v", i, 10.0 * i, 10.0 * i + 10, "", i % 2 ? Label::Buggy : Label::Clean, false});
    }
    const auto d = synthetic_embed(segs, 11, 4.0);
    const auto& dir = synthetic_bug_direction();
    double norm = 0;
    for (double x : dir) norm += x * x;
    EXPECT_NEAR(norm, 1.0, 1e-12);
    double proj[2] = {0, 0};
    int count[2] = {0, 0};
    for (const auto& f : d.frames()) {
        double p = 0;
        for (std::size_t i = 0; i < kFrameDim; ++i) p += f.vector[i] * dir[i];
        proj[f.segment_index % 2] += p;
        ++count[f.segment_index % 2];
    }
    EXPECT_NEAR(proj[1] / count[1] - proj[0] / count[0], 4.0, 0.4);
    EXPECT_EQ(synthetic_embed(segs, 11, 4.0), d);
    EXPECT_NE(synthetic_embed(segs, 12, 4.0), d);
    segs[0].label.reset();
    EXPECT_THROW(synthetic_embed(segs, 11, 4.0), ParameterError);
}
