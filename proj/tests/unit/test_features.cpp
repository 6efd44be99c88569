#include "bugseg/error.hpp"
#include "bugseg/features.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bugseg;

TEST(AssembleFeatures, JoinsBlocksAndSkipsIncompleteRows) {
    auto d = fixture::tfidf_dataset();
    const auto vf = tfidf_features(d, fixture::tfidf_codebook());
    std::vector<Segment> segs = d.segments();
    segs[0].label.reset(); // unlabeled: silently skipped
    std::vector<TextEmbedding> texts(d.texts().begin(), d.texts().end());
    texts.erase(texts.begin() + 1); // (v0,1) loses its text block
    const auto fs = assemble_features(vf, texts, segs);
    EXPECT_EQ(fs.k, 4u);
    EXPECT_EQ(fs.rows.size(), 10u);
    ASSERT_EQ(fs.warnings.size(), 1u);
    EXPECT_NE(fs.warnings[0].find("(v0,1)"), std::string::npos);
    EXPECT_EQ(fs.rows[0].size(), 4u + kTextDim);
    EXPECT_EQ(fs.rows[0].concatenated().size(), 4u + kTextDim);
}

TEST(FallbackTextEncode, NormalizedAndDeterministic) {
    const auto a = fallback_text_encode("The glitch made the car float", 1);
    double n = 0;
    for (double x : a) n += x * x;
    EXPECT_NEAR(n, 1.0, 1e-12);
    EXPECT_EQ(a, fallback_text_encode("the GLITCH made the car   float", 1));
    EXPECT_NE(a, fallback_text_encode("the glitch made the car float", 2));
    const auto z = fallback_text_encode("   ", 1);
    for (double x : z) EXPECT_EQ(x, 0.0);
}

TEST(Standardizer, TrainStatisticsOnly) {
    std::vector<SegmentFeatures> rows;
    for (int i = 0; i < 4; ++i) {
        SegmentFeatures r{"v", i, {static_cast<double>(i), 7.0}, std::vector<double>(kTextDim, 0.0), Label::Clean};
        rows.push_back(r);
    }
    const auto st = Standardizer::fit(rows);
    const auto out = st.apply(rows);
    double mean = 0, var = 0;
    for (const auto& r : out) mean += r.visual[0];
    mean /= 4;
    for (const auto& r : out) var += (r.visual[0] - mean) * (r.visual[0] - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 4, 1.0, 1e-12);
    EXPECT_EQ(out[0].visual[1], 0.0); // constant column: centered only
    const auto back = Standardizer::from_json(st.to_json());
    EXPECT_EQ(back.apply(rows), out);
}

TEST(FeaturesCsv, RoundTripExact) {
    const auto dir = fixture::temp_dir("features");
    const auto d = fixture::tfidf_dataset();
    auto fs = assemble_features(tfidf_features(d, fixture::tfidf_codebook()), d.texts(), d.segments());
    fs.rows[3].label = Label::Buggy;
    fs.rows[5].text[7] = -0.1234567890123456789;
    write_features_csv(dir / "f.csv", fs);
    const auto back = read_features_csv(dir / "f.csv");
    EXPECT_EQ(back.k, fs.k);
    EXPECT_EQ(back.rows, fs.rows);
}

TEST(FallbackTextEncode, RepeatedTokenIsParallel) {
    const auto once = fallback_text_encode("glitch", 5);
    const auto twice = fallback_text_encode("glitch glitch", 5);
    double dot = 0;
    for (std::size_t i = 0; i < kTextDim; ++i) dot += once[i] * twice[i];
    EXPECT_NEAR(dot, 1.0, 1e-12);
    std::size_t nonzero = 0;
    for (double x : once) nonzero += x != 0.0;
    EXPECT_EQ(nonzero, 2u);
}

TEST(AssembleFeatures, ConcatenationOrder) {
    VisualFeatures vf;
    vf.k = 4;
    vf.keys = {{"v", 0}};
    vf.weights = {{0.1, 0.2, 0.3, 0.4}};
    TextVector t{};
    t[0] = 7.0;
    t[511] = -1.0;
    const std::vector<Segment> segs{{"v", 0, 0, 6, "", Label::Buggy, false}};
    const auto fs = assemble_features(vf, std::vector<TextEmbedding>{{"v", 0, t}}, segs);
    ASSERT_EQ(fs.rows.size(), 1u);
    const auto x = fs.rows[0].concatenated();
    ASSERT_EQ(x.size(), 516u);
    EXPECT_EQ(x[0], 0.1);
    EXPECT_EQ(x[3], 0.4);
    EXPECT_EQ(x[4], 7.0);
    EXPECT_EQ(x[515], -1.0);
    EXPECT_EQ(fs.rows[0].label, Label::Buggy);
}
