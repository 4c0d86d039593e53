#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "modekacz/core_model.hpp"
#include "oracles/jacobi_svd.hpp"

using namespace modekacz;

TEST(Rng, DerivedStreamsAreDeterministicAndDistinct) {
    Rng a(7), b(7);
    EXPECT_EQ(a(), b());
    EXPECT_NE(Rng(7).split(1)(), Rng(7).split(2)());
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}

TEST(LinearProblem, RejectsBadInput) {
    Matrix a(2, 2);
    a << 1, 0, 0, 0;
    EXPECT_THROW(LinearProblem::create(a, Vector::Zero(2)), InvalidArgument);
    Matrix wide(1, 2);
    wide << 1, 1;
    EXPECT_THROW(LinearProblem::create(wide, Vector::Ones(1)), InvalidArgument);
    Matrix id = Matrix::Identity(2, 2);
    Vector x(2);
    x << 1, 2;
    Vector b(2);
    b << 1, 3;
    EXPECT_THROW(LinearProblem::create(id, b, x), InvalidArgument);
}

TEST(SyntheticProblem, RowNormalizedAndConsistent) {
    const auto p = make_synthetic_problem(2400, 100, 3);
    EXPECT_NEAR(p.frob_sq(), 2400.0, 1e-8);
    EXPECT_TRUE(p.row_normalized());
    EXPECT_LE((p.a() * *p.x_star() - p.b()).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, p.b().cwiseAbs().maxCoeff()));
    EXPECT_LE(p.sigma_min_tilde() * p.sigma_min_tilde(), 2400.0 / 100.0);
}

TEST(SyntheticProblem, ScalarSystem) {
    const auto p = make_synthetic_problem(1, 1, 9);
    EXPECT_NEAR((*p.x_star())[0], p.b()[0] / p.a()(0, 0), 1e-15);
}

TEST(SyntheticProblem, SigmaMinMatchesJacobiOracle) {
    const auto p = make_synthetic_problem(20, 5, 11);
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < 20; ++r)
        for (Eigen::Index c = 0; c < 5; ++c) flat.push_back(p.a()(r, c));
    EXPECT_NEAR(p.sigma_min_tilde(), oracle::jacobi_singular_values(flat, 20, 5).front(), 1e-8);
}

TEST(SyntheticProblem, SameSeedSameProblem) {
    const auto p1 = make_synthetic_problem(30, 4, 5), p2 = make_synthetic_problem(30, 4, 5);
    EXPECT_EQ(p1.a(), p2.a());
    EXPECT_EQ(p1.b(), p2.b());
}

TEST(Csv, HeaderDetectionAndErrors) {
    std::istringstream with_header("a,b\n1,2\n3,4\n");
    EXPECT_EQ(read_csv_matrix(with_header).rows(), 2);
    std::istringstream bad("1,2\n3,x\n");
    try {
        read_csv_matrix(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.row(), 2u);
        EXPECT_EQ(e.column(), 2u);
    }
    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(read_csv_matrix(ragged), ParseError);
}

TEST(Csv, LoadNormalizesAndBuildsConsistentRhs) {
    const std::string path = ::testing::TempDir() + "/five.csv";
    {
        std::ofstream out(path);
        out << "x,y\n1,0\n0,2\n3,4\n-1,1\n2,-5\n";
    }
    const auto raw = load_csv_problem(path, false, 4);
    ASSERT_EQ(raw.rows(), 5u);
    for (Eigen::Index r = 0; r < 5; ++r) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < 2; ++c) dot += raw.a()(r, c) * (*raw.x_star())[c];
        EXPECT_NEAR(raw.b()[r], dot, 1e-14);
    }
    const auto normalized = load_csv_problem(path, true, 4);
    EXPECT_TRUE(normalized.row_normalized());
}

TEST(Csv, SingleRowNormalized) {
    const std::string path = ::testing::TempDir() + "/one.csv";
    {
        std::ofstream out(path);
        out << "1,0\n";
    }
    // One row cannot determine two unknowns, so only the 1x1 slice is loadable.
    EXPECT_THROW(load_csv_problem(path, true, 1), InvalidArgument);
    {
        std::ofstream out(path);
        out << "3\n";
    }
    EXPECT_NEAR(load_csv_problem(path, true, 1).row_norms_sq()[0], 1.0, 1e-15);
}

TEST(Csv, BreastCancerDataset) {
    const auto p = load_csv_problem(std::string(MODEKACZ_SOURCE_DIR) + "/data/wbc.csv", true, 1);
    EXPECT_EQ(p.rows(), 569u);
    EXPECT_EQ(p.cols(), 10u);
}

TEST(SampleRows, ForcedFullSet) {
    Rng rng(1);
    auto s = sample_rows(5, 5, rng);
    std::sort(s.begin(), s.end());
    EXPECT_EQ(s, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(SampleRows, UniformSingleIndex) {
    Rng rng(2);
    std::vector<int> hits(10);
    for (int i = 0; i < 100000; ++i) ++hits[sample_rows(10, 1, rng)[0]];
    for (int h : hits) EXPECT_NEAR(h / 1e5, 0.1, 0.01);
}

TEST(SampleRows, DistinctInRange) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto s = sample_rows(2400, 6, rng);
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 6u);
        for (auto r : s) EXPECT_LT(r, 2400u);
    }
    EXPECT_THROW(sample_rows(3, 0, rng), InvalidArgument);
    EXPECT_THROW(sample_rows(3, 4, rng), InvalidArgument);
}

TEST(AdversaryConfig, Validation) {
    EXPECT_THROW(AdversaryConfig::homogeneous(2, 10, 4, {5, 5}, Matrix::Ones(2, 1)), InvalidArgument);
    EXPECT_THROW(AdversaryConfig::homogeneous(2, 10, 4, {6, 3}, Matrix::Ones(2, 1)), InvalidArgument);
    EXPECT_THROW(AdversaryConfig::homogeneous(2, 10, 11, {6, 4}, Matrix::Ones(2, 1)), InvalidArgument);
    EXPECT_THROW(AdversaryConfig::from_fractions(2, 10, 4, {0.25}, Matrix::Ones(2, 1)), InvalidArgument);
    const auto adv = AdversaryConfig::from_fractions(2, 20, 4, {0.1, 0.05, 0.05}, Matrix::Ones(2, 3));
    EXPECT_EQ(adv.row(0).counts, (std::vector<int>{16, 2, 1, 1}));
    EXPECT_EQ(adv.row(0).mode_threshold(), 4);
    EXPECT_DOUBLE_EQ(adv.error(1, 0), 0.0);
}

TEST(WorkerPopulation, CategoryBookkeeping) {
    const auto adv = AdversaryConfig::homogeneous(3, 20, 4, {8, 4, 4, 4}, Matrix::Ones(3, 3));
    WorkerPopulation pop(adv, PoolLayout::PerRow, 5);
    EXPECT_EQ(pop.pool_count(), 3u);
    for (std::size_t p = 0; p < 3; ++p) {
        std::map<int, int> seen;
        for (WorkerId w : pop.pool_workers(p)) ++seen[pop.category(w)];
        EXPECT_EQ(seen, (std::map<int, int>{{0, 8}, {1, 4}, {2, 4}, {3, 4}}));
    }
}

TEST(SampleWorkers, FullPoolAndExhaustion) {
    const auto adv = AdversaryConfig::homogeneous(1, 4, 4, {3, 1}, Matrix::Ones(1, 1));
    WorkerPopulation pop(adv, PoolLayout::PerRow, 1);
    Rng rng(1);
    auto s = sample_workers(pop, 0, 4, rng);
    std::sort(s.begin(), s.end());
    EXPECT_EQ(s, (std::vector<WorkerId>{0, 1, 2, 3}));
    pop.block(0);
    EXPECT_THROW(sample_workers(pop, 0, 4, rng), PoolExhausted);
}

TEST(SampleWorkers, BlockedNeverSampled) {
    const auto adv = AdversaryConfig::homogeneous(1, 20, 4, {16, 2, 1, 1}, Matrix::Ones(1, 3));
    WorkerPopulation pop(adv, PoolLayout::PerRow, 2);
    for (WorkerId w : {0u, 3u, 7u, 11u, 19u}) pop.block(w);
    Rng rng(3);
    for (int i = 0; i < 100000; ++i)
        for (WorkerId w : sample_workers(pop, 0, 4, rng)) ASSERT_FALSE(pop.is_blocked(w));
}

TEST(SampleWorkers, UniformOverSubsets) {
    const auto adv = AdversaryConfig::homogeneous(1, 6, 3, {4, 2}, Matrix::Ones(1, 1));
    WorkerPopulation pop(adv, PoolLayout::PerRow, 4);
    Rng rng(5);
    std::map<std::vector<WorkerId>, int> freq;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        auto s = sample_workers(pop, 0, 3, rng);
        std::sort(s.begin(), s.end());
        ++freq[s];
    }
    ASSERT_EQ(freq.size(), 20u);
    const double p = 1.0 / 20, sd = std::sqrt(draws * p * (1 - p));
    for (const auto& [subset, count] : freq) EXPECT_NEAR(count, draws * p, 3.5 * sd);
}

TEST(WorkerPopulation, BlockWorstRequiresPositiveCount) {
    const auto adv = AdversaryConfig::homogeneous(1, 5, 3, {3, 2}, Matrix::Ones(1, 1));
    WorkerPopulation pop(adv, PoolLayout::Shared, 1);
    Rng rng(1);
    EXPECT_FALSE(pop.block_worst(0, rng));
    pop.increment(2);
    pop.increment(2);
    pop.increment(4);
    EXPECT_EQ(pop.block_worst(0, rng), std::optional<WorkerId>(2));
    EXPECT_EQ(pop.block_worst(0, rng), std::optional<WorkerId>(4));
    EXPECT_FALSE(pop.block_worst(0, rng));
    EXPECT_EQ(pop.block_list(), (std::vector<WorkerId>{2, 4}));
}
