#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "wseg/metrics.hpp"
#include "wseg/rng.hpp"

using namespace wseg;

namespace {

BinaryMask random_mask(int w, int h, std::uint64_t seed, double density = 0.5) {
    Rng rng(seed);
    BinaryMask m(w, h);
    for (auto& p : m.pixels) p = rng.bernoulli(density) ? 1 : 0;
    return m;
}

BinaryMask block_mask(int w, int h, int fg_w, int fg_h) {
    BinaryMask m(w, h);
    for (int y = 0; y < fg_h; ++y) {
        for (int x = 0; x < fg_w; ++x) m.at(x, y) = 1;
    }
    return m;
}

}  // namespace

TEST_CASE("confusion counts on simple fixtures") {
    const BinaryMask gt = block_mask(10, 10, 5, 2);  // 10 foreground of 100
    const ConfusionCounts c = confusion_counts(gt, gt);
    CHECK(c.tp == 10);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tn == 90);
    CHECK(c.total() == 100);

    BinaryMask ones(2, 2);
    for (auto& p : ones.pixels) p = 1;
    const BinaryMask zeros(2, 2);
    const ConfusionCounts c2 = confusion_counts(ones, zeros);
    CHECK(c2.fp == 4);
    CHECK(c2.tp + c2.fn + c2.tn == 0);

    CHECK_THROWS_AS(confusion_counts(ones, BinaryMask(3, 3)), ArgumentError);
}

TEST_CASE("counts match the pixel-loop oracle on random pairs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const BinaryMask pred = random_mask(16, 16, seed * 2 + 1);
        const BinaryMask gt = random_mask(16, 16, seed * 2 + 2);
        const ConfusionCounts got = confusion_counts(pred, gt);
        const ConfusionCounts want = oracle::pixel_loop_counts(pred, gt);
        CHECK(got.tp == want.tp);
        CHECK(got.fp == want.fp);
        CHECK(got.fn == want.fn);
        CHECK(got.tn == want.tn);
    }
}

TEST_CASE("precision, recall and dice formulas") {
    CHECK(precision({2, 1, 0, 0}) == doctest::Approx(0.666667).epsilon(1e-5));
    CHECK(recall({2, 0, 1, 0}) == doctest::Approx(0.666667).epsilon(1e-5));
    CHECK(dice({2, 1, 1, 0}) == doctest::Approx(0.666667).epsilon(1e-5));

    const ConfusionCounts perfect{10, 0, 0, 90};
    CHECK(precision(perfect) == 1.0);
    CHECK(recall(perfect) == 1.0);
    CHECK(dice(perfect) == 1.0);

    const ConfusionCounts both_empty{0, 0, 0, 16};
    CHECK(precision(both_empty) == 1.0);
    CHECK(recall(both_empty) == 1.0);
    CHECK(dice(both_empty) == 1.0);

    const ConfusionCounts empty_pred_nonempty_gt{0, 0, 5, 11};
    CHECK(precision(empty_pred_nonempty_gt) == 0.0);
    CHECK(recall(empty_pred_nonempty_gt) == 0.0);

    const ConfusionCounts disjoint{0, 4, 4, 8};
    CHECK(dice(disjoint) == 0.0);
}

TEST_CASE("dice equals the harmonic mean of precision and recall") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const BinaryMask pred = random_mask(16, 16, seed * 7 + 3);
        const BinaryMask gt = random_mask(16, 16, seed * 7 + 4);
        const ConfusionCounts c = confusion_counts(pred, gt);
        const double p = precision(c), r = recall(c), d = dice(c);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        if (p > 0.0 && r > 0.0) {
            CHECK(d == doctest::Approx(2.0 * p * r / (p + r)).epsilon(1e-12));
        }
    }
}

TEST_CASE("symmetry and duality") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const BinaryMask a = random_mask(12, 12, seed * 11 + 5);
        const BinaryMask b = random_mask(12, 12, seed * 11 + 6);
        CHECK(dice(confusion_counts(a, b)) == dice(confusion_counts(b, a)));
        CHECK(precision(confusion_counts(a, b)) == recall(confusion_counts(b, a)));
    }
}

TEST_CASE("evaluate_dataset aggregations") {
    // two images with dice 1.0 and 0.5 -> mean 0.75
    const BinaryMask gt1 = block_mask(4, 4, 2, 2);
    // pred with tp=1, fp=1, fn=1 -> dice = 2/(2+2) = 0.5
    BinaryMask p2(4, 4);
    p2.at(0, 0) = 1;
    p2.at(3, 3) = 1;
    BinaryMask g2(4, 4);
    g2.at(0, 0) = 1;
    g2.at(3, 0) = 1;

    EvalReport r = evaluate_dataset({{"a", gt1, gt1}, {"b", p2, g2}});
    CHECK(r.per_image.size() == 2);
    CHECK(r.mean_dice == doctest::Approx(0.75));

    // single image: mean == per-image == pooled
    EvalReport single = evaluate_dataset({{"only", p2, g2}});
    CHECK(single.mean_dice == single.per_image[0].dice);
    CHECK(single.pooled_dice == single.per_image[0].dice);
    CHECK(single.mean_precision == single.pooled_precision);

    CHECK_THROWS_AS(evaluate_dataset({}), ArgumentError);
}

TEST_CASE("pooled and mean aggregations can differ, both hand-checked") {
    // large perfect image + small all-wrong image
    const BinaryMask big = block_mask(20, 20, 10, 10);     // 100 fg, perfect
    BinaryMask small_pred(4, 4);
    for (auto& p : small_pred.pixels) p = 1;
    const BinaryMask small_gt(4, 4);                        // pred 16 fp

    EvalReport r = evaluate_dataset({{"big", big, big}, {"small", small_pred, small_gt}});
    // per-image dice: 1.0 and 0.0 -> mean 0.5
    CHECK(r.mean_dice == doctest::Approx(0.5));
    // pooled: tp=100, fp=16, fn=0 -> 200/216
    CHECK(r.pooled_dice == doctest::Approx(200.0 / 216.0).epsilon(1e-12));
    CHECK(r.mean_dice != r.pooled_dice);

    const std::string csv = report_csv(r);
    CHECK(csv.find("id,tp,fp,fn,tn,precision,recall,dice") == 0);
    CHECK(csv.find("pooled,") != std::string::npos);
    const std::string table = report_table(r);
    CHECK(table.find("Dice") != std::string::npos);
}

TEST_CASE("per-image records are ordered by id") {
    const BinaryMask m = block_mask(4, 4, 2, 2);
    EvalReport r = evaluate_dataset({{"zz", m, m}, {"aa", m, m}, {"mm", m, m}});
    CHECK(r.per_image[0].id == "aa");
    CHECK(r.per_image[1].id == "mm");
    CHECK(r.per_image[2].id == "zz");
}
