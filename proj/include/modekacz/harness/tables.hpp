#pragma once

#include <cstdio>
#include <map>
#include <string>

#include "modekacz/analysis.hpp"
#include "modekacz/blocklist_mc.hpp"
#include "modekacz/harness/adversary.hpp"
#include "modekacz/harness/reference.hpp"

namespace modekacz::harness {

/// Q and beta_t for the ten-worker, three-category configuration with d1 = 10.
inline std::map<std::string, double> compute_table1() {
    std::map<std::string, double> out;
    const auto counts = CategoryCounts::uniform_split(10, 5, Rational(3, 5), 3);
    for (std::size_t d0 : {2u, 3u, 5u}) {
        const auto k = theorem_constants(10, d0, counts, 1.0);
        out["d0=" + std::to_string(d0) + "/Q"] = to_double(*k.q_homogeneous);
        out["d0=" + std::to_string(d0) + "/beta"] = to_double(*k.beta_homogeneous);
    }
    return out;
}

inline void add_mode_row(std::map<std::string, double>& out, const std::string& row, const CategoryCounts& c) {
    const auto d = mode_distribution(c);
    out[row + "/q_hat_l"] = to_double(d.q_hat.at(1));
    out[row + "/q_hat_0"] = to_double(d.q_hat.at(0));
    out[row + "/q"] = to_double(d.q);
    out[row + "/q0"] = d.q0;
}

/// Single-row mode law for N = 100, n = 5 against k (equal shares p/k, possibly fractional).
inline std::map<std::string, double> compute_table4() {
    std::map<std::string, double> out;
    for (auto [p, k] : std::vector<std::pair<Rational, int>>{
             {Rational(4, 5), 5}, {Rational(4, 5), 10}, {Rational(4, 5), 15}, {Rational(1, 5), 3},
             {Rational(1, 5), 5}, {Rational(1, 5), 10}, {Rational(1, 5), 15}}) {
        char row[48];
        std::snprintf(row, sizeof row, "p=%.1f,k=%d", to_double(p), k);
        add_mode_row(out, row, CategoryCounts::uniform_split(100, 5, p, k));
    }
    return out;
}

/// Single-row mode law for N = 100, k = 5 against n.
inline std::map<std::string, double> compute_table5() {
    std::map<std::string, double> out;
    for (const Rational p : {Rational(4, 5), Rational(1, 5)})
        for (int n : {10, 15, 20}) {
            char row[48];
            std::snprintf(row, sizeof row, "p=%.1f,n=%d", to_double(p), n);
            add_mode_row(out, row, CategoryCounts::uniform_split(100, n, p, 5));
        }
    return out;
}

/// Block-list probabilities for the five-worker example over S in {5, 10, 50, 100}.
inline std::map<std::string, double> compute_table3(std::size_t trials, std::uint64_t seed, std::size_t threads = 0) {
    std::map<std::string, double> out;
    for (std::size_t S : {5u, 10u, 50u, 100u}) {
        const auto est = estimate_blocklist_probs({5, 3, {3, 2}, S, trials, seed, threads});
        out["S=" + std::to_string(S) + "/P_bl_1"] = est.per_category[1].value;
        out["S=" + std::to_string(S) + "/P_bl_0"] = est.per_category[0].value;
    }
    return out;
}

struct Table6Setup {
    std::size_t rows = 2400;
    std::size_t cols = 100;
    std::uint64_t problem_seed = 1;
    double e_inf = 1e-3;
    std::size_t max_iter = 30000;
    std::size_t trials = 20;
    std::uint64_t seed = 0;
    PoolLayout layout = PoolLayout::PerRow;
    std::size_t threads = 0;
};

/// Mean block-list accuracy for the two published configurations.
inline std::map<std::string, double> compute_table6(const Table6Setup& s,
                                                    std::map<std::string, AccuracyRow>* rows_out = nullptr) {
    std::map<std::string, double> out;
    const auto problem = make_synthetic_problem(s.rows, s.cols, s.problem_seed);
    for (auto [p, d0] : std::vector<std::pair<double, std::size_t>>{{0.6, 8}, {0.4, 6}}) {
        const auto counts = split_adversaries(20, p, 3);
        const auto adv = AdversaryConfig::homogeneous(s.rows, 20, 4, counts,
                                                      error_model(ErrorRule::FixedMagnitude, s.e_inf, 3, s.rows, 0));
        SolveOptions o;
        o.d0 = d0;
        o.max_iter = s.max_iter;
        o.layout = s.layout;
        for (const auto& row : blocklist_accuracy_vs_S(problem, adv, o, {200, 500, 1000, 2000}, s.trials, s.seed, s.threads)) {
            char key[64];
            std::snprintf(key, sizeof key, "p=%.1f,d0=%zu/S=%zu", p, d0, row.S);
            if (row.mean_accuracy) out[key] = *row.mean_accuracy;
            if (rows_out) (*rows_out)[key] = row;
        }
    }
    return out;
}

}  // namespace modekacz::harness
