#include <gtest/gtest.h>

#include "oracles/empirical_mode.hpp"

using namespace modekacz;

TEST(EmpiricalLaw, QueryPathMatchesExactModeLaw) {
    struct Case {
        int N, n;
        std::vector<int> counts;
    };
    for (const Case& c : {Case{5, 3, {3, 2}}, Case{10, 5, {4, 2, 2, 2}}, Case{12, 6, {5, 4, 3}}}) {
        const auto law = oracle::empirical_mode_law(c.N, c.n, c.counts, 20000, 7);
        EXPECT_LT(oracle::max_z_score(law, CategoryCounts::of(c.n, c.counts)), 4.5) << c.N << "/" << c.n;
    }
}
