#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "modekacz/core_model.hpp"

namespace modekacz {

struct ReturnedResidual {
    WorkerId worker = 0;
    std::size_t row = 0;
    double value = 0.0;
    int true_category = 0;  // evaluation only; the aggregator never reads it
};

struct ResidualGroup {
    double representative = 0.0;
    std::vector<WorkerId> members;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
};

struct ModeOutcome {
    std::vector<ResidualGroup> groups;
    std::optional<std::size_t> chosen;
    std::optional<std::size_t> mode_size;
    std::size_t threshold = 0;
    bool tied = false;  // several qualifying groups shared the maximum size

    [[nodiscard]] bool has_mode() const noexcept { return chosen.has_value(); }
    [[nodiscard]] const ResidualGroup& chosen_group() const { return groups.at(*chosen); }
    [[nodiscard]] double value() const { return chosen_group().representative; }
};

inline constexpr double default_group_tol = 1e-9;

/// Sort-and-scan clustering. A new group opens when the gap to the previous
/// value exceeds group_tol * max(1, |value|). The representative is the
/// group's median member.
inline std::vector<ResidualGroup> group_residuals(std::span<const ReturnedResidual> returns,
                                                  double group_tol = default_group_tol) {
    if (returns.empty()) throw InvalidArgument("group_residuals: no returns");
    std::vector<ReturnedResidual> sorted(returns.begin(), returns.end());
    std::sort(sorted.begin(), sorted.end(), [](const ReturnedResidual& a, const ReturnedResidual& b) {
        return a.value != b.value ? a.value < b.value : a.worker < b.worker;
    });
    std::vector<ResidualGroup> groups;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double v = sorted[i].value;
        if (i == 0 || v - sorted[i - 1].value > group_tol * std::max(1.0, std::abs(v))) groups.emplace_back();
        groups.back().members.push_back(sorted[i].worker);
        groups.back().values.push_back(v);
    }
    for (auto& g : groups) g.representative = g.values[(g.values.size() - 1) / 2];
    return groups;
}

/// ceil(n * reliable / total), the smallest group size allowed to be a mode.
inline std::size_t mode_threshold(std::size_t n, std::size_t reliable, std::size_t total) {
    if (total == 0) throw InvalidArgument("mode_threshold: empty worker pool");
    return (n * reliable + total - 1) / total;
}

/// Picks the largest group among those reaching the threshold; ties are broken
/// uniformly at random. No qualifying group means no mode.
inline ModeOutcome select_mode(std::vector<ResidualGroup> groups, std::size_t threshold, Rng& rng) {
    ModeOutcome out;
    out.threshold = threshold;
    std::size_t best = 0;
    for (const auto& g : groups)
        if (g.size() >= threshold) best = std::max(best, g.size());
    if (best > 0) {
        std::vector<std::size_t> tied;
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (groups[i].size() == best) tied.push_back(i);
        out.tied = tied.size() > 1;
        out.chosen = out.tied ? tied[rng.uniform_index(0, tied.size() - 1)] : tied.front();
        out.mode_size = best;
    }
    out.groups = std::move(groups);
    return out;
}

/// Overload taking the reliable fraction p_r0 = reliable / total.
inline ModeOutcome select_mode(std::vector<ResidualGroup> groups, std::size_t n, std::size_t reliable,
                               std::size_t total, Rng& rng) {
    return select_mode(std::move(groups), mode_threshold(n, reliable, total), rng);
}

enum class RowStrategy {
    MaxResidual,  // largest |mode value| across the sampled rows
    MaxModeSize,  // largest mode number; ties by |value|, then at random
};

struct RowChoice {
    std::size_t row = 0;
    double value = 0.0;
    std::size_t mode_size = 0;
};

/// Rows without a mode are skipped. Returns nothing when no row has one.
inline std::optional<RowChoice> select_row(const std::map<std::size_t, ModeOutcome>& outcomes, RowStrategy strategy,
                                           Rng& rng) {
    std::vector<RowChoice> best;
    auto better = [&](const RowChoice& a, const RowChoice& b) -> int {
        // >0: a beats b, 0: tie, <0: b beats a
        if (strategy == RowStrategy::MaxModeSize && a.mode_size != b.mode_size) return a.mode_size > b.mode_size ? 1 : -1;
        const double va = std::abs(a.value), vb = std::abs(b.value);
        if (va != vb) return va > vb ? 1 : -1;
        return 0;
    };
    for (const auto& [row, outcome] : outcomes) {
        if (!outcome.has_mode()) continue;
        RowChoice c{row, outcome.value(), *outcome.mode_size};
        if (best.empty()) {
            best.push_back(c);
            continue;
        }
        const int cmp = better(c, best.front());
        if (cmp > 0) best.assign(1, c);
        else if (cmp == 0) best.push_back(c);
    }
    if (best.empty()) return std::nullopt;
    if (best.size() == 1) return best.front();
    return best[rng.uniform_index(0, best.size() - 1)];
}

}  // namespace modekacz
