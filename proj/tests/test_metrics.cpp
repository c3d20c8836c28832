#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "docbin/metrics.hpp"
#include "support/oracles.hpp"
#include "support/printers.hpp"

using namespace docbin;
using namespace docbin::metrics;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows.front().size());
    std::vector<std::uint8_t> d;
    for (const auto& r : rows)
        for (char c : r) d.push_back(c == '#' ? 1 : 0);
    return {h, w, std::move(d)};
}

}  // namespace

TEST(Confusion, Definitions) {
    std::mt19937_64 rng(31);
    const auto m = oracle::random_mask(6, 5, 0.5, rng);
    const auto self = confusion(m, m);
    EXPECT_EQ(self.fp, 0u);
    EXPECT_EQ(self.fn, 0u);

    const auto c = confusion(BinaryMask(2, 2, true), BinaryMask(2, 2, false));
    EXPECT_EQ(c, (ConfusionCounts{0, 4, 0, 0}));
    EXPECT_THROW(confusion(BinaryMask(2, 2), BinaryMask(2, 3)), ArgumentError);
}

TEST(Confusion, MatchesPixelTally) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        const auto gt = oracle::random_mask(8, 8, 0.4, rng);
        const auto pred = oracle::flip_some(gt, 0.3, rng);
        const auto c = confusion(pred, gt);
        const auto t = oracle::tally(pred, gt);
        EXPECT_EQ(static_cast<double>(c.tp), t.tp);
        EXPECT_EQ(static_cast<double>(c.fp), t.fp);
        EXPECT_EQ(static_cast<double>(c.fn), t.fn);
        EXPECT_EQ(static_cast<double>(c.tn), t.tn);
        EXPECT_EQ(c.total(), 64u);
    }
}

TEST(FMeasure, ClosedForms) {
    EXPECT_DOUBLE_EQ(f_measure(ConfusionCounts{5, 0, 0, 3}), 1.0);
    EXPECT_DOUBLE_EQ(f_measure(ConfusionCounts{0, 2, 1, 3}), 0.0);
    EXPECT_NEAR(f_measure(ConfusionCounts{3, 1, 2, 0}), 6.0 / 9.0, 1e-15);
    EXPECT_DOUBLE_EQ(f_measure(ConfusionCounts{0, 0, 0, 9}), 1.0);
}

TEST(FMeasure, InvariantUnderPrecisionRecallSwap) {
    // Swapping fp and fn is exactly swapping the two ratio denominators.
    for (std::uint64_t tp : {1u, 4u, 9u})
        for (std::uint64_t fp : {0u, 2u, 7u})
            for (std::uint64_t fn : {0u, 3u, 5u}) {
                EXPECT_DOUBLE_EQ(f_measure(ConfusionCounts{tp, fp, fn, 0}), f_measure(ConfusionCounts{tp, fn, fp, 0}));
            }
}

TEST(Skeleton, TrivialCases) {
    EXPECT_EQ(skeletonize(BinaryMask(4, 4, false)).count(), 0u);
    const auto dot = from_rows({"...", ".#.", "..."});
    EXPECT_EQ(skeletonize(dot), dot);
}

TEST(Skeleton, SolidRectangleThinsToInteriorLine) {
    // 5 rows x 3 columns; expected value frozen from the set-based Zhang-Suen oracle.
    const auto rect = from_rows({"###", "###", "###", "###", "###"});
    const auto expected = from_rows({"...", ".#.", ".#.", "...", "..."});
    EXPECT_EQ(oracle::zhang_suen(rect), expected);
    EXPECT_EQ(skeletonize(rect), expected);
}

TEST(Skeleton, TwoByTwoBlockDoesNotVanish) {
    const auto block = from_rows({"....", ".##.", ".##.", "...."});
    const auto skel = skeletonize(block);
    EXPECT_EQ(skel.count(), 1u);
    EXPECT_TRUE(skel.at(1, 1));
}

TEST(Skeleton, MatchesOracleAndIsIdempotentSubset) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = oracle::random_mask(14, 17, 0.55, rng);
        const auto skel = skeletonize(m);
        EXPECT_EQ(skel, oracle::zhang_suen(m));
        EXPECT_EQ(skeletonize(skel), skel);
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (skel.pixels()[i]) EXPECT_TRUE(m.pixels()[i]);
        }
    }
}

TEST(PseudoFMeasure, Definitions) {
    std::mt19937_64 rng(34);
    const auto gt = oracle::random_mask(16, 16, 0.5, rng);
    EXPECT_DOUBLE_EQ(pseudo_f_measure(gt, gt), 1.0);

    // pred between skeleton and gt: pRecall = 1, pFM = 2P/(P+1).
    const auto thick = from_rows({"........", ".######.", ".######.", ".######.", "........"});
    const auto skel = skeletonize(thick);
    std::vector<std::uint8_t> d(skel.pixels().begin(), skel.pixels().end());
    d[1 * 8 + 1] = 1;
    d[0] = 1;  // one false positive outside gt
    const BinaryMask pred(5, 8, d);
    const auto c = confusion(pred, thick);
    const double p = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    EXPECT_NEAR(pseudo_f_measure(pred, thick), 2 * p / (p + 1), 1e-15);
}

TEST(PseudoFMeasure, EmptyGroundTruthFallsBackToFMeasure) {
    const BinaryMask empty(4, 4, false);
    EXPECT_DOUBLE_EQ(pseudo_f_measure(empty, empty), 1.0);
    EXPECT_DOUBLE_EQ(pseudo_f_measure(BinaryMask(4, 4, true), empty), 0.0);
}

TEST(PseudoFMeasure, MatchesPipelineOracle) {
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const auto gt = oracle::random_mask(16, 16, 0.45, rng);
        const auto pred = oracle::flip_some(gt, 0.2, rng);
        EXPECT_NEAR(pseudo_f_measure(pred, gt), oracle::pseudo_f_measure(pred, gt), 1e-12);
    }
}

TEST(Psnr, ClosedForms) {
    BinaryMask gt(10, 10, false);
    std::vector<std::uint8_t> d(100, 0);
    d[37] = 1;
    EXPECT_EQ(psnr(BinaryMask(10, 10, d), gt), 20.0);
    EXPECT_EQ(psnr(BinaryMask(10, 10, true), gt), 0.0);
    EXPECT_TRUE(std::isinf(psnr(gt, gt)));
}

TEST(Psnr, DecreasesWithMoreErrors) {
    const BinaryMask gt(6, 6, false);
    double last = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> d(36, 0);
    for (int k = 0; k < 36; ++k) {
        d[k] = 1;
        const double v = psnr(BinaryMask(6, 6, d), gt);
        EXPECT_LT(v, last);
        last = v;
    }
}

TEST(Nubn, Definitions) {
    EXPECT_EQ(nubn(BinaryMask(16, 16, true)), 0u);
    std::vector<std::uint8_t> d(64, 0);
    d[10] = 1;
    EXPECT_EQ(nubn(BinaryMask(8, 8, d)), 1u);
}

TEST(Nubn, MatchesBlockScan) {
    std::mt19937_64 rng(36);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = oracle::random_mask(32, 24, trial % 3 == 0 ? 0.01 : 0.3, rng);
        EXPECT_EQ(static_cast<int>(nubn(m)), oracle::nubn(m));
    }
    // partial edge blocks count
    const auto odd = oracle::random_mask(13, 11, 0.5, rng);
    EXPECT_EQ(static_cast<int>(nubn(odd)), oracle::nubn(odd));
}

TEST(Drd, WeightsAreNormalizedReciprocalDistances) {
    const auto w = drd_weights();
    double sum = 0;
    for (const auto& row : w)
        for (double v : row) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-15);
    EXPECT_EQ(w[2][2], 0.0);
    EXPECT_NEAR(w[2][3] / w[3][3], std::sqrt(2.0), 1e-12);
}

TEST(Drd, ClosedForms) {
    std::mt19937_64 rng(37);
    const auto gt = oracle::random_mask(16, 16, 0.4, rng);
    EXPECT_EQ(drd(gt, gt), 0.0);

    // Flip the centre of an all-background 5x5 neighbourhood: every neighbour disagrees.
    std::vector<std::uint8_t> g(24 * 24, 0);
    g[0] = 1;  // keeps one non-uniform block away from the flip
    const BinaryMask gt2(24, 24, g);
    std::vector<std::uint8_t> p = g;
    p[12 * 24 + 12] = 1;
    const double value = drd(BinaryMask(24, 24, p), gt2);
    EXPECT_EQ(nubn(gt2), 1u);
    EXPECT_NEAR(value, 1.0, 1e-12);
}

TEST(Drd, UndefinedWithoutNonUniformBlocks) {
    EXPECT_THROW(drd(BinaryMask(8, 8, true), BinaryMask(8, 8, false)), UndefinedMetric);
}

TEST(Drd, MatchesPerFlipOracle) {
    std::mt19937_64 rng(38);
    for (int trial = 0; trial < 20; ++trial) {
        const auto gt = oracle::random_mask(24, 24, 0.35, rng);
        const auto pred = oracle::flip_some(gt, 0.1, rng);
        EXPECT_NEAR(drd(pred, gt), oracle::drd(pred, gt), 1e-9);
    }
}

TEST(Drd, GrowsWithEachAdditionalFlip) {
    // A flip adds weight for every neighbour sharing the pixel's true class;
    // only a pixel isolated from its own class adds nothing.
    std::mt19937_64 rng(39);
    const auto gt = oracle::random_mask(16, 16, 0.4, rng);
    std::vector<std::uint8_t> p(gt.pixels().begin(), gt.pixels().end());
    double last = 0.0;
    for (int k = 0; k < 40; ++k) {
        const int y = (k * 6) / 16;
        const int x = (k * 6) % 16;
        bool has_own_class_neighbour = false;
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                const int yy = y + dy;
                const int xx = x + dx;
                if ((dy || dx) && yy >= 0 && yy < 16 && xx >= 0 && xx < 16 && gt.at(yy, xx) == gt.at(y, x)) {
                    has_own_class_neighbour = true;
                }
            }
        p[static_cast<std::size_t>(y) * 16 + x] ^= 1;
        const double v = drd(BinaryMask(16, 16, p), gt);
        if (has_own_class_neighbour) EXPECT_GT(v, last);
        else EXPECT_EQ(v, last);
        last = v;
    }
}

TEST(Score, CollectsAllMetrics) {
    std::mt19937_64 rng(40);
    const auto gt = oracle::random_mask(16, 16, 0.4, rng);
    const auto r = score(gt, gt, "patch-0");
    EXPECT_EQ(r.image_id, "patch-0");
    EXPECT_EQ(r.f_measure, 1.0);
    EXPECT_EQ(r.pseudo_f_measure, 1.0);
    EXPECT_TRUE(r.psnr_infinite());
    ASSERT_TRUE(r.drd.has_value());
    EXPECT_EQ(*r.drd, 0.0);
    EXPECT_FALSE(score(BinaryMask(8, 8, true), BinaryMask(8, 8, true), "u").drd.has_value());
}
