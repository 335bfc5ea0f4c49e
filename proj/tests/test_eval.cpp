#include <gtest/gtest.h>

#include <cmath>

#include "afcn/eval.hpp"
#include "afcn/random.hpp"

using namespace afcn;

TEST(Confusion, CountsAndAccessors) {
    ConfusionMatrix cm(3);
    cm.add(0, 0);
    cm.add(0, 1);
    cm.add(1, 1);
    cm.add(2, 2);
    cm.add(2, 2);
    EXPECT_EQ(cm.total(), 5u);
    EXPECT_EQ(cm.count(0, 1), 1u);
    EXPECT_EQ(cm.support(0), 2u);
    EXPECT_EQ(cm.support(1), 1u);
    EXPECT_EQ(cm.correct(), 4u);
    EXPECT_THROW(cm.add(3, 0), ArgumentError);
    EXPECT_THROW(cm.add(0, 3), ArgumentError);
}

TEST(Confusion, FromPredictionVectors) {
    std::vector<std::size_t> preds = {0, 1, 1, 2};
    std::vector<std::size_t> labels = {0, 1, 2, 2};
    ConfusionMatrix cm = confusion(preds, labels, 3);
    EXPECT_EQ(cm.total(), 4u);
    EXPECT_EQ(cm.count(2, 1), 1u);
    EXPECT_THROW(confusion({0, 1}, {0}, 3), ArgumentError);
}

TEST(Metrics, HandComputedExample) {
    // class supports 4/2/2; correct 3/1/2
    ConfusionMatrix cm(3);
    for (int i = 0; i < 3; ++i) cm.add(0, 0);
    cm.add(0, 2);
    cm.add(1, 1);
    cm.add(1, 0);
    cm.add(2, 2);
    cm.add(2, 2);
    // WA = 6/8; UA = (3/4 + 1/2 + 1)/3 = 0.75
    EXPECT_DOUBLE_EQ(weighted_accuracy(cm), 0.75);
    EXPECT_DOUBLE_EQ(unweighted_accuracy(cm), (0.75 + 0.5 + 1.0) / 3.0);
    EXPECT_DOUBLE_EQ(*cm.recall(0), 0.75);
    EXPECT_DOUBLE_EQ(*cm.recall(1), 0.5);
    EXPECT_DOUBLE_EQ(*cm.recall(2), 1.0);
}

TEST(Metrics, WaDiffersFromUaUnderImbalance) {
    // 9 of class 0 all correct; 1 of class 1 wrong:
    // WA = 0.9, UA = (1.0 + 0.0)/2 = 0.5
    ConfusionMatrix cm(2);
    for (int i = 0; i < 9; ++i) cm.add(0, 0);
    cm.add(1, 0);
    EXPECT_DOUBLE_EQ(weighted_accuracy(cm), 0.9);
    EXPECT_DOUBLE_EQ(unweighted_accuracy(cm), 0.5);
}

TEST(Metrics, WaEqualsUaUnderEqualSupport) {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t k = 2 + rng.index(5);
        std::size_t n = 5 + rng.index(20); // same support for every class
        ConfusionMatrix cm(k);
        for (std::size_t cls = 0; cls < k; ++cls) {
            for (std::size_t i = 0; i < n; ++i) cm.add(cls, rng.index(k));
        }
        EXPECT_NEAR(weighted_accuracy(cm), unweighted_accuracy(cm), 1e-12);
    }
}

TEST(Metrics, ZeroSupportClassesAreExcludedFromUa) {
    ConfusionMatrix cm(3);
    cm.add(0, 0);
    cm.add(1, 0);
    // class 2 never appears: UA averages over classes 0 and 1 only
    EXPECT_FALSE(cm.recall(2).has_value());
    EXPECT_DOUBLE_EQ(unweighted_accuracy(cm), 0.5);
}

TEST(Metrics, EmptyMatrixThrows) {
    ConfusionMatrix cm(4);
    EXPECT_THROW(weighted_accuracy(cm), MetricError);
    EXPECT_THROW(unweighted_accuracy(cm), MetricError);
}

TEST(Metrics, MergeAccumulatesCounts) {
    ConfusionMatrix a(2), b(2);
    a.add(0, 0);
    b.add(0, 1);
    b.add(1, 1);
    a.merge(b);
    EXPECT_EQ(a.total(), 3u);
    EXPECT_EQ(a.count(0, 1), 1u);
    ConfusionMatrix c(3);
    EXPECT_THROW(a.merge(c), ArgumentError);
}

TEST(Metrics, FoldMetricsCollectsRecalls) {
    ConfusionMatrix cm(2);
    cm.add(0, 0);
    cm.add(1, 1);
    cm.add(1, 0);
    FoldMetrics fm = fold_metrics(3, cm);
    EXPECT_EQ(fm.fold, 3u);
    EXPECT_DOUBLE_EQ(fm.wa, 2.0 / 3.0);
    ASSERT_EQ(fm.per_class_recall.size(), 2u);
    EXPECT_DOUBLE_EQ(fm.per_class_recall[0].value(), 1.0);
    EXPECT_DOUBLE_EQ(fm.per_class_recall[1].value(), 0.5);
}
