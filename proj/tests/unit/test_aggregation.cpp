#include <gtest/gtest.h>

#include <algorithm>

#include "modekacz/aggregation.hpp"

using namespace modekacz;

namespace {

std::vector<ReturnedResidual> returns_of(const std::vector<double>& values) {
    std::vector<ReturnedResidual> out;
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back({static_cast<WorkerId>(i), 0, values[i], 0});
    return out;
}

std::vector<ResidualGroup> groups_of_sizes(const std::vector<std::size_t>& sizes) {
    std::vector<ResidualGroup> groups;
    WorkerId next = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        ResidualGroup g;
        g.representative = static_cast<double>(i);
        for (std::size_t j = 0; j < sizes[i]; ++j) {
            g.members.push_back(next++);
            g.values.push_back(g.representative);
        }
        groups.push_back(g);
    }
    return groups;
}

std::vector<std::size_t> sizes(const std::vector<ResidualGroup>& groups) {
    std::vector<std::size_t> s;
    for (const auto& g : groups) s.push_back(g.size());
    return s;
}

}  // namespace

TEST(GroupResiduals, IdenticalValues) {
    EXPECT_EQ(sizes(group_residuals(returns_of({1.0, 1.0, 1.0}))), (std::vector<std::size_t>{3}));
}

TEST(GroupResiduals, ToleranceMerge) {
    EXPECT_EQ(sizes(group_residuals(returns_of({1.0, 1.0 + 1e-12, 5.0}), 1e-9)), (std::vector<std::size_t>{2, 1}));
}

TEST(GroupResiduals, SeparatedCategories) {
    const double c = 0.37;
    const auto groups = group_residuals(returns_of({c, c + 1e-3, c, c - 2e-3, c + 1e-3, c + 3e-3, c}));
    EXPECT_EQ(groups.size(), 4u);
    std::size_t total = 0;
    for (const auto& g : groups) {
        total += g.size();
        for (double v : g.values) EXPECT_LE(std::abs(v - g.values.front()), 1e-9 * std::max(1.0, std::abs(v)));
    }
    EXPECT_EQ(total, 7u);
}

TEST(GroupResiduals, PermutationInvariant) {
    std::vector<double> v{3.0, -1.0, 3.0, 2.0, -1.0, 3.0};
    auto base = sizes(group_residuals(returns_of(v)));
    std::sort(base.begin(), base.end());
    std::reverse(v.begin(), v.end());
    auto other = sizes(group_residuals(returns_of(v)));
    std::sort(other.begin(), other.end());
    EXPECT_EQ(base, other);
}

TEST(SelectMode, ThresholdAndChoice) {
    Rng rng(1);
    const auto out = select_mode(groups_of_sizes({3, 1, 1}), 5, 2, 5, rng);  // p0 = 0.4
    EXPECT_EQ(out.threshold, 2u);
    EXPECT_EQ(out.chosen, std::optional<std::size_t>(0));
    EXPECT_EQ(out.mode_size, std::optional<std::size_t>(3));
}

TEST(SelectMode, NoQualifyingGroup) {
    Rng rng(1);
    const auto out = select_mode(groups_of_sizes({3, 2}), 5, 7, 10, rng);  // p0 = 0.7
    EXPECT_EQ(out.threshold, 4u);
    EXPECT_FALSE(out.has_mode());
}

TEST(SelectMode, FairTieBreak) {
    Rng rng(9);
    int first = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto out = select_mode(groups_of_sizes({2, 2}), 4, 1, 2, rng);
        EXPECT_TRUE(out.tied);
        if (*out.chosen == 0) ++first;
    }
    EXPECT_NEAR(first / 1e4, 0.5, 0.02);
}

TEST(SelectMode, RaisingReliableShareNeverWidensQualification) {
    for (std::size_t reliable = 1; reliable < 10; ++reliable)
        EXPECT_LE(mode_threshold(6, reliable, 10), mode_threshold(6, reliable + 1, 10));
}

TEST(SelectRow, Strategies) {
    Rng rng(1);
    std::map<std::size_t, ModeOutcome> outcomes;
    auto make = [&](double value, std::size_t size) {
        auto g = groups_of_sizes({size});
        g[0].representative = value;
        return select_mode(g, 1, rng);
    };
    outcomes.emplace(0, make(-0.5, 3));
    outcomes.emplace(1, make(0.2, 4));
    EXPECT_EQ(select_row(outcomes, RowStrategy::MaxResidual, rng)->row, 0u);
    EXPECT_EQ(select_row(outcomes, RowStrategy::MaxModeSize, rng)->row, 1u);

    std::map<std::size_t, ModeOutcome> scaled;
    scaled.emplace(0, make(-5.0, 3));
    scaled.emplace(1, make(2.0, 4));
    EXPECT_EQ(select_row(scaled, RowStrategy::MaxResidual, rng)->row, 0u);
    EXPECT_EQ(select_row(scaled, RowStrategy::MaxModeSize, rng)->row, 1u);
}

TEST(SelectRow, SingleAndEmpty) {
    Rng rng(1);
    std::map<std::size_t, ModeOutcome> outcomes;
    outcomes.emplace(4, select_mode(groups_of_sizes({1, 1}), 2, rng));
    EXPECT_FALSE(select_row(outcomes, RowStrategy::MaxResidual, rng));
    outcomes.emplace(7, select_mode(groups_of_sizes({2}), 2, rng));
    EXPECT_EQ(select_row(outcomes, RowStrategy::MaxResidual, rng)->row, 7u);
}
