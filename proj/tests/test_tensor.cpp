#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "afcn/random.hpp"
#include "afcn/tensor.hpp"

using namespace afcn;

TEST(Tensor, RowMajorLayout) {
    Tensor<double> t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    double v = 0.0;
    for (auto& x : t) x = v++;
    // at(i,j,k) must map to ((i*3)+j)*4+k
    EXPECT_EQ(t.at(0, 0, 0), 0.0);
    EXPECT_EQ(t.at(0, 0, 3), 3.0);
    EXPECT_EQ(t.at(0, 2, 0), 8.0);
    EXPECT_EQ(t.at(1, 0, 0), 12.0);
    EXPECT_EQ(t.at(1, 2, 3), 23.0);
}

TEST(Tensor, ConstructsZeroed) {
    Tensor<float> t({3, 5});
    for (float v : t) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, DataLengthMustMatchShape) {
    EXPECT_THROW(Tensor<double>({2, 3}, std::vector<double>(5)), ShapeError);
    EXPECT_NO_THROW(Tensor<double>({2, 3}, std::vector<double>(6)));
}

TEST(Tensor, ReshapePreservesData) {
    Tensor<int> t({2, 6});
    std::iota(t.begin(), t.end(), 0);
    Tensor<int> r = reshape(t, {3, 4});
    EXPECT_EQ(r.shape(), (Shape{3, 4}));
    EXPECT_EQ(r.at(2, 3), 11);
    EXPECT_THROW(reshape(t, {5, 2}), ShapeError);
}

TEST(Tensor, SumAllMatchesNaive) {
    Rng rng(3);
    Tensor<double> t({7, 13});
    double naive = 0.0;
    for (auto& v : t) {
        v = rng.uniform(-1.0, 1.0);
        naive += v;
    }
    EXPECT_NEAR(sum_all(t), naive, 1e-12);
}

TEST(Tensor, ReduceSumAxis) {
    Tensor<double> t({2, 3});
    // [[1,2,3],[4,5,6]]
    double v = 1.0;
    for (auto& x : t) x = v++;
    Tensor<double> rows = reduce_sum(t, 1);
    ASSERT_EQ(rows.shape(), (Shape{2}));
    EXPECT_EQ(rows[0], 6.0);
    EXPECT_EQ(rows[1], 15.0);
    Tensor<double> cols = reduce_sum(t, 0);
    ASSERT_EQ(cols.shape(), (Shape{3}));
    EXPECT_EQ(cols[0], 5.0);
    EXPECT_EQ(cols[2], 9.0);
    EXPECT_THROW(reduce_sum(t, 2), ShapeError);
}

TEST(Tensor, ReduceMaxAndArgmax) {
    Tensor<double> t({2, 4}, {3, 1, 3, 2, -5, -1, -1, -9});
    Tensor<double> m = reduce_max(t, 1);
    EXPECT_EQ(m[0], 3.0);
    EXPECT_EQ(m[1], -1.0);
    Tensor<std::size_t> a = reduce_argmax(t, 1);
    EXPECT_EQ(a[0], 0u); // tie at indices 0 and 2 -> lowest wins
    EXPECT_EQ(a[1], 1u);
}

TEST(Tensor, AllFinite) {
    Tensor<double> t({3});
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
    t[1] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, CastTensor) {
    Tensor<double> t({2}, {1.5, -2.25});
    Tensor<float> f = cast_tensor<float>(t);
    EXPECT_EQ(f[0], 1.5f);
    EXPECT_EQ(f[1], -2.25f);
}

TEST(Rng, DeterministicAndDecorrelated) {
    Rng a(42), b(42), c(43);
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(a.next_u64(), c.next_u64());
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
    EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(Rng, UniformBounds) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        double v = rng.uniform(-2.0, 3.0);
        EXPECT_GE(v, -2.0);
        EXPECT_LT(v, 3.0);
    }
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(9);
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    auto orig = v;
    rng.shuffle(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, orig);
}
