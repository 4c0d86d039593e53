#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "modekacz/harness.hpp"

using namespace modekacz;
using namespace modekacz::harness;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal() {
    return nlohmann::json::parse(R"({"problem": {"synthetic": {"rows": 40, "cols": 5, "seed": 2}}})");
}

std::string error_path(const nlohmann::json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& ex) {
        return ex.path();
    }
    return "<accepted>";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, DefaultsFromMinimalDocument) {
    const auto cfg = parse_config(minimal());
    EXPECT_EQ(cfg.trials, 1u);
    EXPECT_EQ(cfg.N_r, 20);
    EXPECT_EQ(cfg.error_rule, ErrorRule::FixedMagnitude);
    ASSERT_EQ(expand_sweeps(cfg).size(), 1u);
}

TEST(Config, ErrorsNameTheOffendingField) {
    auto doc = minimal();
    doc["solver"] = {{"d0", 0}};
    EXPECT_EQ(error_path(doc), "solver.d0[0]");
    doc = minimal();
    doc["adversary"] = {{"p", {0.2, 1.5}}};
    EXPECT_EQ(error_path(doc), "adversary.p[1]");
    doc = minimal();
    doc["solver"] = {{"bogus", 1}};
    EXPECT_EQ(error_path(doc).rfind("solver", 0), 0u);
    doc = minimal();
    doc["adversary"] = {{"error_rule", "gaussian"}};
    EXPECT_EQ(error_path(doc), "adversary.error_rule");
    doc = minimal();
    doc["solver"] = {{"layout", "ring"}};
    EXPECT_EQ(error_path(doc), "solver.layout");
    EXPECT_EQ(error_path(nlohmann::json::object()), "problem");
    doc = minimal();
    doc["problem"]["csv"] = {{"path", "x.csv"}};
    EXPECT_EQ(error_path(doc), "problem");
}

TEST(Config, MalformedFileIsAConfigError) {
    const auto path = fs::temp_directory_path() / "modekacz_bad.json";
    std::ofstream(path) << "{ \"problem\": ";
    EXPECT_THROW(load_config(path.string()), ConfigError);
}

TEST(Config, SweepsFormTheCartesianProduct) {
    auto doc = minimal();
    doc["adversary"] = {{"k", 3}, {"p", {0.2, 0.6}}};
    doc["solver"] = {{"d0", {2, 4, 6}}, {"blocklist", {false, true}}};
    const auto pts = expand_sweeps(parse_config(doc));
    ASSERT_EQ(pts.size(), 12u);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].index, i);
    EXPECT_EQ(pts.front().counts, (std::vector<int>{16, 2, 1, 1}));
    EXPECT_EQ(pts.back().counts, (std::vector<int>{8, 4, 4, 4}));
}

TEST(Config, FractionsGiveExplicitCounts) {
    auto doc = minimal();
    doc["adversary"] = {{"fractions", {0.1, 0.25}}};
    const auto pts = expand_sweeps(parse_config(doc));
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].counts, (std::vector<int>{13, 2, 5}));
    doc["adversary"] = {{"fractions", {0.12}}};
    EXPECT_THROW(expand_sweeps(parse_config(doc)), ConfigError);
}

TEST(Adversary, SplitRoundsAndSpreadsEvenly) {
    EXPECT_EQ(split_adversaries(20, 0.2, 3), (std::vector<int>{16, 2, 1, 1}));
    EXPECT_EQ(split_adversaries(20, 0.6, 3), (std::vector<int>{8, 4, 4, 4}));
    EXPECT_EQ(split_adversaries(10, 0.0, 0), (std::vector<int>{10}));
    EXPECT_THROW(split_adversaries(10, 0.3, 0), InvalidArgument);
    EXPECT_THROW(split_adversaries(10, 1.0, 2), InvalidArgument);
}

TEST(Adversary, FixedRuleAlternatesSignAndPeaksAtEInf) {
    const Matrix e = error_model(ErrorRule::FixedMagnitude, 500.0, 3, 4, 0);
    EXPECT_DOUBLE_EQ(e.cwiseAbs().maxCoeff(), 500.0);
    EXPECT_GT(e(0, 0), 0.0);
    EXPECT_LT(e(0, 1), 0.0);
    EXPECT_GT(e(3, 2), 0.0);
}

TEST(Adversary, ZeroErrorIsRejected) {
    EXPECT_THROW(error_model(ErrorRule::FixedMagnitude, 0.0, 3, 4, 0), InvalidArgument);
    EXPECT_THROW(error_model(ErrorRule::UniformScaled, -1.0, 3, 4, 0), InvalidArgument);
}

TEST(Adversary, UniformRuleKeepsCategoriesApart) {
    const double tol = 1e-9;
    const Matrix e = error_model(ErrorRule::UniformScaled, 1e-3, 4, 200, 5, tol);
    for (Eigen::Index r = 0; r < e.rows(); ++r) {
        std::vector<double> v{0.0};
        for (Eigen::Index l = 0; l < e.cols(); ++l) {
            EXPECT_LE(std::abs(e(r, l)), 1e-3);
            v.push_back(e(r, l));
        }
        std::sort(v.begin(), v.end());
        for (std::size_t i = 1; i < v.size(); ++i) EXPECT_GT(v[i] - v[i - 1], 10 * tol);
    }
    EXPECT_EQ(e, error_model(ErrorRule::UniformScaled, 1e-3, 4, 200, 5, tol));
}

TEST(Run, PercentileInterpolates) {
    EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(percentile({7}, 0.95), 7.0);
    EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.05), 0.5);
    EXPECT_THROW(percentile({}, 0.5), InvalidArgument);
}

TEST(Run, SingleTrialAggregateEqualsTheTrial) {
    auto doc = minimal();
    doc["adversary"] = {{"k", 2}, {"p", 0.2}};
    doc["solver"] = {{"d0", 2}, {"max_iter", 300}};
    const auto cfg = parse_config(doc);
    const auto pt = expand_sweeps(cfg).front();
    const auto problem = load_problem(cfg);
    const auto o = point_options(cfg, pt);
    const auto rec = run_trial(problem, build_adversary(cfg, pt, problem.rows()), o, 17);
    const auto grid = geometric_checkpoints(o.max_iter);
    const auto series = aggregate_series({rec}, grid);
    for (const auto& s : series) {
        EXPECT_EQ(s.mean, rec.sq_error_at(s.iteration));
        EXPECT_EQ(s.p05, s.median);
        EXPECT_EQ(s.p95, s.median);
    }
}

TEST(Run, OutputsAreByteIdenticalAcrossRuns) {
    auto doc = minimal();
    doc["adversary"] = {{"k", 3}, {"p", 0.2}};
    doc["solver"] = {{"d0", {1, 3}}, {"max_iter", 400}, {"blocklist", true}, {"update_cycle", 50}};
    doc["trials"] = 3;
    doc["seed"] = 99;
    const auto cfg = parse_config(doc);
    const auto base = fs::temp_directory_path() / "modekacz_run";
    fs::remove_all(base);
    auto one = cfg, two = cfg;
    one.threads = 1;
    two.threads = 2;
    run_experiment(one, {}, base / "a");
    run_experiment(two, {}, base / "b");
    for (const char* f : {"aggregate.csv", "trials.csv", "trial_summary.csv", "manifest.json"})
        EXPECT_EQ(slurp(base / "a" / f), slurp(base / "b" / f)) << f;
    EXPECT_NE(slurp(base / "a" / "aggregate.csv").find("median"), std::string::npos);
}

TEST(Reference, MissingCellsReportNoData) {
    const auto report = compare_to_reference({}, "table4");
    EXPECT_FALSE(report.pass());
    EXPECT_EQ(report.failures(), report.cells.size());
    for (const auto& c : report.cells) EXPECT_EQ(c.note, "no data");
    EXPECT_THROW(compare_to_reference({}, "table9"), InvalidArgument);
}

TEST(Reference, ExactModeRowWithinTolerance) {
    const auto measured = compute_table4();
    const auto report = compare_to_reference(measured, "table4");
    for (const auto& c : report.cells)
        if (c.key.rfind("p=0.8,k=10/", 0) == 0) EXPECT_TRUE(c.pass) << c.key << " delta " << c.delta;
}

TEST(Reference, SignificantFigureSlack) {
    EXPECT_NEAR(significant_figure_slack(4.25e-3, 3), 5e-6, 1e-12);
    EXPECT_NEAR(significant_figure_slack(0.199, 3), 5e-4, 1e-12);
}
