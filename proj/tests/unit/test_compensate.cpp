// Copyright 2026 The MVR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "mvr/compensate.hpp"
#include "support/compensation_cases.hpp"

namespace mvr {
namespace {

CompensationConfig no_renorm(double alpha, double beta) {
    CompensationConfig c;
    c.alpha = alpha;
    c.beta = beta;
    c.renormalize_output = false;
    return c;
}

TEST(CompensateText, SingleViewAtDefaultAlpha) {
    const std::vector<EmbeddingVector> views{{0.0, 1.0}};
    const auto f = compensate_text({1.0, 0.0}, views, no_renorm(0.75, 0.3));
    EXPECT_EQ(testing::to_std(f.output), (std::vector<double>{1.0, 0.75}));
    EXPECT_EQ(f.views_used, 1u);
    EXPECT_EQ(f.side, FeatureSide::query_text);
}

TEST(CompensateImage, TwoViewsAtDefaultBeta) {
    const std::vector<EmbeddingVector> views{{1.0, 0.0}, {1.0, 0.0}};
    const auto f = compensate_image({0.0, 1.0}, views, no_renorm(0.75, 0.3));
    EXPECT_NEAR(f.output[0], 0.3, 1e-15);
    EXPECT_EQ(f.output[1], 1.0);
    EXPECT_EQ(f.side, FeatureSide::gallery_image);
}

TEST(Compensate, ZeroWeightRecoversNormalizedBase) {
    testing::Rng rng(51);
    const auto base = testing::random_vector(rng, 10);
    std::vector<EmbeddingVector> views;
    for (int i = 0; i < 5; ++i) {
        views.push_back(testing::random_vector(rng, 10));
    }
    CompensationConfig c;
    c.alpha = 0.0;
    c.beta = 0.0;
    EXPECT_EQ(compensate_text(base, views, c).output, l2_normalize(base));
    EXPECT_EQ(compensate_image(base, views, c).output, l2_normalize(base));
}

TEST(Compensate, EmptyViewsReturnBase) {
    const EmbeddingVector base{3.0, 4.0};
    const auto raw = compensate_text(base, {}, no_renorm(0.75, 0.3));
    EXPECT_EQ(raw.output, base);
    EXPECT_EQ(raw.views_used, 0u);
    const auto normed = compensate_text(base, {}, CompensationConfig{});
    EXPECT_EQ(normed.output, l2_normalize(base));
}

TEST(Compensate, SevenRandomViewsMatchSumLoop) {
    testing::Rng rng(52);
    const auto base = testing::random_vector(rng, 16);
    std::vector<EmbeddingVector> views;
    std::vector<std::vector<double>> raw;
    for (int i = 0; i < 7; ++i) {
        views.push_back(testing::random_vector(rng, 16));
        raw.push_back(testing::to_std(views.back()));
    }
    const auto f = compensate_text(base, views, no_renorm(0.75, 0.3));
    const auto expected = testing::oracle_compensate(testing::to_std(base), raw, 0.75, 100, false);
    for (std::size_t i = 0; i < 16; ++i) {
        EXPECT_NEAR(f.output[i], expected[i], 1e-9);
    }
}

TEST(Compensate, RandomInstancesMatchOracleIncludingEdgeCases) {
    const auto r = testing::check_compensation_oracle(53, 1000);
    EXPECT_EQ(r.cases, 1000u);
    EXPECT_GT(r.empty_view_cases, 0u);
    EXPECT_GT(r.truncated_cases, 0u);
    EXPECT_LE(r.max_error, 1e-9);
    EXPECT_EQ(r.views_used_failures, 0u);
}

TEST(Compensate, DimMismatch) {
    const std::vector<EmbeddingVector> views{{1.0, 0.0, 0.0}};
    try {
        compensate_text({1.0, 0.0}, views, CompensationConfig{});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimMismatch);
    }
}

TEST(Compensate, PropertyRenormalizedOutputIsUnit) {
    testing::Rng rng(54);
    for (int t = 0; t < 200; ++t) {
        std::vector<EmbeddingVector> views;
        for (std::size_t i = 0, n = rng.between(0, 10); i < n; ++i) {
            views.push_back(testing::random_vector(rng, 6));
        }
        const auto f = compensate_text(testing::random_vector(rng, 6), views, CompensationConfig{});
        EXPECT_NEAR(f.output.norm(), 1.0, 1e-5);
        EXPECT_LE(f.views_used, CompensationConfig{}.max_views);
    }
}

TEST(Compensate, PropertyFullPermutationInvariantPrefixOnlyWhenTruncating) {
    testing::Rng rng(55);
    for (int t = 0; t < 100; ++t) {
        const auto base = testing::random_vector(rng, 5);
        std::vector<EmbeddingVector> views;
        for (int i = 0; i < 8; ++i) {
            std::vector<double> v(5);
            for (double& x : v) {
                x = static_cast<double>(static_cast<int>(rng.between(0, 20)) - 10);
            }
            views.emplace_back(std::move(v));
        }
        auto shuffled = views;
        std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
        const auto cfg = no_renorm(0.75, 0.3);
        EXPECT_EQ(compensate_text(base, views, cfg).output, compensate_text(base, shuffled, cfg).output);

        auto capped = cfg;
        capped.max_views = 4;
        auto tail_shuffled = views;
        std::shuffle(tail_shuffled.begin() + 4, tail_shuffled.end(), rng.engine());
        EXPECT_EQ(compensate_text(base, views, capped).output, compensate_text(base, tail_shuffled, capped).output);
    }
}

TEST(Compensate, PropertyResidualBoundedByLargestView) {
    testing::Rng rng(56);
    for (int t = 0; t < 300; ++t) {
        const std::size_t dim = rng.between(1, 20);
        const auto base = testing::random_vector(rng, dim);
        std::vector<EmbeddingVector> views;
        double max_norm = 0.0;
        for (std::size_t i = 0, n = rng.between(1, 12); i < n; ++i) {
            views.push_back(testing::random_vector(rng, dim));
            max_norm = std::max(max_norm, views.back().norm());
        }
        const double alpha = rng.uniform(0.0, 2.0);
        const auto out = compensate_text(base, views, no_renorm(alpha, 0.0)).output;
        EXPECT_LE(l2_distance(out, base), alpha * max_norm + 1e-12);
    }
}

TEST(Compensate, SemanticEchoImprovesInMostTrials) {
    const double rate = testing::echo_improvement_rate(57, 1000, 64, 0.5, 30, 0.75);
    EXPECT_GE(rate, 0.95);
}

TEST(TruncateViews, PrefixSemantics) {
    ReformulationSet s;
    for (int i = 0; i < 30; ++i) {
        s.texts.push_back("t" + std::to_string(i));
    }
    EXPECT_TRUE(truncate_views(s, 0).texts.empty());
    EXPECT_EQ(truncate_views(s, 30).texts, s.texts);
    EXPECT_EQ(truncate_views(s, 5).texts, (std::vector<std::string>{"t0", "t1", "t2", "t3", "t4"}));
    try {
        truncate_views(s, 31);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Range);
    }
}

}  // namespace
}  // namespace mvr
