#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "alignteach/error.hpp"
#include "alignteach/stats.hpp"

using namespace alignteach;

TEST(Stats, MeanAndStandardError) {
    const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    EXPECT_DOUBLE_EQ(stats::mean(xs), 2.5);
    // sample sd = sqrt(5/3), se = sd / 2
    EXPECT_NEAR(stats::standard_error(xs), std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
    EXPECT_EQ(stats::standard_error(std::vector<double>{7.0}), 0.0);
}

TEST(Stats, PearsonKnownValues) {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {2, 4, 6, 8, 10};
    const std::vector<double> z = {5, 4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(stats::pearson(x, y), 1.0);
    EXPECT_DOUBLE_EQ(stats::pearson(x, z), -1.0);
    // x vs {1,3,2,5,4}: cov = 4, var = 10 each -> 0.8
    EXPECT_NEAR(stats::pearson(x, std::vector<double>{1, 3, 2, 5, 4}), 0.8, 1e-15);
}

TEST(Stats, PearsonRejectsConstantInput) {
    const std::vector<double> x = {1, 2, 3};
    const std::vector<double> c = {2, 2, 2};
    try {
        stats::pearson(x, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
    }
}

TEST(Stats, AverageRanksSplitTies) {
    const auto r = stats::average_ranks(std::vector<double>{10, 20, 20, 5});
    EXPECT_EQ(r, (std::vector<double>{2.0, 3.5, 3.5, 1.0}));
}

TEST(Stats, SpearmanMonotoneIsOne) {
    const std::vector<double> x = {1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{1, 10, 100, 1000}), 1.0);
    EXPECT_DOUBLE_EQ(stats::spearman(x, std::vector<double>{9, 3, 2, 1}), -1.0);
}
