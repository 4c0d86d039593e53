#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "modekacz/parallel.hpp"
#include "modekacz/solver.hpp"

namespace modekacz {

/// One shared pool of N workers, n queried per iteration for S iterations,
/// then a single block-list update.
struct BlocklistExperiment {
    int N = 0;
    int n = 0;
    std::vector<int> counts;  // reliable first
    std::size_t S = 0;
    std::size_t trials = 10000;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: hardware concurrency
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct BlocklistEstimates {
    std::size_t trials = 0;
    std::size_t S = 0;
    std::vector<Estimate> per_category;            // per worker of each category
    std::optional<Estimate> adversarial;           // any adversarial category, per worker; absent when k = 0
    std::vector<std::vector<Estimate>> per_slot;   // [category][i]: i-th worker of that category
    std::vector<double> conditional;               // P_l P_bl^l / sum_i P_i P_bl^i
    double no_block_fraction = 0.0;                // trials where every counter stayed at zero
    bool counters_conserved = true;                // sum of c+ and c0 equals n S in every trial
};

namespace detail {

struct BlocklistTrial {
    std::optional<int> category;
    std::size_t slot = 0;
    bool conserved = true;
};

inline BlocklistTrial blocklist_trial(const LinearProblem& unit, const AdversaryConfig& adv, std::size_t S,
                                      std::uint64_t seed) {
    WorkerPopulation pop(adv, PoolLayout::Shared, seed);
    const Rng root(seed);
    Rng worker_rng = root.split(stream::workers);
    Rng tie_rng = root.split(stream::ties);
    RowQueryScratch scratch;
    const Vector x = Vector::Zero(1);
    std::uint64_t in_mode_or_none = 0;
    for (std::size_t it = 0; it < S; ++it) {
        const auto outcome = query_row(unit, adv, pop, 0, x, default_group_tol, worker_rng, tie_rng, scratch);
        in_mode_or_none += outcome.has_mode() ? outcome.chosen_group().size() : scratch.returns.size();
    }
    std::uint64_t increments = 0;
    for (WorkerId w = 0; w < pop.worker_count(); ++w) increments += pop.counter(w);

    BlocklistTrial t;
    t.conserved = increments + in_mode_or_none == static_cast<std::uint64_t>(adv.row(0).n) * S;
    if (auto w = pop.block_worst(0, tie_rng)) {
        t.category = pop.category(*w);
        for (WorkerId v : pop.pool_workers(0))
            if (v < *w && pop.category(v) == *t.category) ++t.slot;
    }
    return t;
}

inline Estimate per_worker_estimate(std::size_t hits, std::size_t trials, int workers) {
    const double pi = static_cast<double>(hits) / static_cast<double>(trials);
    return {pi / workers, std::sqrt(pi * (1.0 - pi) / static_cast<double>(trials)) / workers};
}

}  // namespace detail

/// Frequency estimates of the probability that a given worker is the one
/// block-listed after S iterations of the counter process.
inline BlocklistEstimates estimate_blocklist_probs(const BlocklistExperiment& exp) {
    if (exp.trials < 1) throw InvalidArgument("blocklist experiment needs at least one trial");
    if (exp.S < 1) throw InvalidArgument("blocklist experiment needs S >= 1");
    const int k = static_cast<int>(exp.counts.size()) - 1;
    // Category l returns the residual offset by l, so categories never group together.
    Matrix e(1, std::max(k, 0));
    for (int l = 1; l <= k; ++l) e(0, l - 1) = static_cast<double>(l);
    const AdversaryConfig adv = AdversaryConfig::homogeneous(1, exp.N, exp.n, exp.counts, e);
    Matrix a(1, 1);
    a << 1.0;
    const LinearProblem unit = LinearProblem::create(a, Vector::Zero(1), Vector::Zero(1), {"unit", std::nullopt, true});

    std::vector<detail::BlocklistTrial> results(exp.trials);
    parallel_for(exp.trials, exp.threads ? exp.threads : default_threads(),
                 [&](std::size_t i) { results[i] = detail::blocklist_trial(unit, adv, exp.S, derive_seed(exp.seed, i)); });

    BlocklistEstimates out;
    out.trials = exp.trials;
    out.S = exp.S;
    std::vector<std::size_t> hits(k + 1, 0);
    std::vector<std::vector<std::size_t>> slot_hits(k + 1);
    for (int l = 0; l <= k; ++l) slot_hits[l].assign(exp.counts[l], 0);
    std::size_t none = 0;
    for (const auto& t : results) {
        out.counters_conserved = out.counters_conserved && t.conserved;
        if (!t.category) {
            ++none;
            continue;
        }
        ++hits[*t.category];
        ++slot_hits[*t.category][t.slot];
    }
    out.no_block_fraction = static_cast<double>(none) / static_cast<double>(exp.trials);
    for (int l = 0; l <= k; ++l) {
        out.per_category.push_back(exp.counts[l] ? detail::per_worker_estimate(hits[l], exp.trials, exp.counts[l])
                                                 : Estimate{});
        std::vector<Estimate> slots;
        for (std::size_t h : slot_hits[l]) slots.push_back(detail::per_worker_estimate(h, exp.trials, 1));
        out.per_slot.push_back(std::move(slots));
    }
    if (k >= 1) {
        std::size_t adv_hits = 0;
        int adv_workers = 0;
        for (int l = 1; l <= k; ++l) {
            adv_hits += hits[l];
            adv_workers += exp.counts[l];
        }
        out.adversarial = detail::per_worker_estimate(adv_hits, exp.trials, adv_workers);
    }
    double denom = 0.0;
    for (int l = 0; l <= k; ++l) denom += static_cast<double>(exp.counts[l]) / exp.N * out.per_category[l].value;
    for (int l = 0; l <= k; ++l)
        out.conditional.push_back(denom > 0.0 ? static_cast<double>(exp.counts[l]) / exp.N * out.per_category[l].value / denom
                                              : 0.0);
    return out;
}

struct AccuracyRow {
    std::size_t S = 0;
    std::optional<double> mean_accuracy;  // over trials that blocked anyone
    double std_error = 0.0;
    std::size_t trials = 0;
    std::size_t trials_with_blocks = 0;
    double mean_blocked = 0.0;
};

/// Runs the full multi-row solver with the block-list enabled for each update
/// cycle S and reports the fraction of block-listed workers that are adversarial.
inline std::vector<AccuracyRow> blocklist_accuracy_vs_S(const LinearProblem& problem, const AdversaryConfig& adversary,
                                                        SolveOptions opts, const std::vector<std::size_t>& cycles,
                                                        std::size_t trials, std::uint64_t seed, std::size_t threads = 0) {
    if (trials < 1) throw InvalidArgument("need at least one trial");
    opts.blocklist_enabled = true;
    opts.checkpoints = {opts.max_iter};
    std::vector<AccuracyRow> rows;
    for (std::size_t S : cycles) {
        opts.update_cycle = S;
        std::vector<TrialRecord> records(trials);
        parallel_for(trials, threads ? threads : default_threads(), [&](std::size_t i) {
            records[i] = solve_mode_kaczmarz(problem, adversary, opts, derive_seed(seed, i));
        });
        AccuracyRow row;
        row.S = S;
        row.trials = trials;
        double sum = 0.0, sum_sq = 0.0, blocked = 0.0;
        for (const auto& r : records) {
            blocked += static_cast<double>(r.block_list.size());
            if (!r.blocklist_accuracy) continue;
            ++row.trials_with_blocks;
            sum += *r.blocklist_accuracy;
            sum_sq += *r.blocklist_accuracy * *r.blocklist_accuracy;
        }
        row.mean_blocked = blocked / static_cast<double>(trials);
        if (row.trials_with_blocks) {
            const double m = static_cast<double>(row.trials_with_blocks);
            row.mean_accuracy = sum / m;
            const double var = m > 1 ? std::max(0.0, (sum_sq - m * *row.mean_accuracy * *row.mean_accuracy) / (m - 1)) : 0.0;
            row.std_error = std::sqrt(var / m);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace modekacz
