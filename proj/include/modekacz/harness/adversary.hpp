#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "modekacz/core_model.hpp"

namespace modekacz::harness {

/// round(p N) adversarial workers spread over k categories as evenly as
/// possible, larger shares first: (N=20, p=0.2, k=3) gives 16,2,1,1.
inline std::vector<int> split_adversaries(int N, double p, int k) {
    if (N < 1) throw InvalidArgument("N_r must be positive");
    if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("adversarial rate p must lie in [0, 1)");
    if (k < 0) throw InvalidArgument("k must be non-negative");
    const int bad = static_cast<int>(std::lround(p * N));
    if (k == 0) {
        if (bad != 0) throw InvalidArgument("k = 0 requires p = 0");
        return {N};
    }
    std::vector<int> counts{N - bad};
    for (int l = 0; l < k; ++l) counts.push_back(bad / k + (l < bad % k ? 1 : 0));
    return counts;
}

enum class ErrorRule { FixedMagnitude, UniformScaled };

inline ErrorRule parse_error_rule(const std::string& s) {
    if (s == "fixed") return ErrorRule::FixedMagnitude;
    if (s == "uniform") return ErrorRule::UniformScaled;
    throw InvalidArgument("unknown error rule '" + s + "' (expected fixed or uniform)");
}

inline const char* to_string(ErrorRule r) { return r == ErrorRule::FixedMagnitude ? "fixed" : "uniform"; }

/// d1 x k table of category errors with largest magnitude e_inf.
/// fixed: e_{r,l} = (-1)^{l+1} e_inf l / k on every row.
/// uniform: i.i.d. U[-e_inf, e_inf] per entry, each row redrawn until all
/// categories (and the reliable zero) are more than 10 group_tol apart.
inline Matrix error_model(ErrorRule rule, double e_inf, int k, std::size_t d1, std::uint64_t seed,
                          double group_tol = 1e-9) {
    if (!(e_inf > 0.0) || !std::isfinite(e_inf))
        throw InvalidArgument("e_inf must be positive: a zero error makes every category identical to the reliable one");
    if (k < 1) throw InvalidArgument("error_model needs k >= 1");
    Matrix e(static_cast<Eigen::Index>(d1), k);
    if (rule == ErrorRule::FixedMagnitude) {
        for (int l = 1; l <= k; ++l) e.col(l - 1).setConstant((l % 2 ? 1.0 : -1.0) * e_inf * l / k);
        return e;
    }
    Rng rng = Rng(seed).split(stream::problem + 100);
    const double gap = 10.0 * group_tol * std::max(1.0, e_inf);
    std::vector<double> row(static_cast<std::size_t>(k) + 1);
    for (std::size_t r = 0; r < d1; ++r) {
        while (true) {
            row[0] = 0.0;
            for (int l = 1; l <= k; ++l) row[l] = rng.uniform(-e_inf, e_inf);
            std::vector<double> sorted = row;
            std::sort(sorted.begin(), sorted.end());
            bool separated = true;
            for (std::size_t i = 1; i < sorted.size(); ++i) separated = separated && sorted[i] - sorted[i - 1] > gap;
            if (separated) break;
        }
        for (int l = 1; l <= k; ++l) e(static_cast<Eigen::Index>(r), l - 1) = row[l];
    }
    return e;
}

}  // namespace modekacz::harness
