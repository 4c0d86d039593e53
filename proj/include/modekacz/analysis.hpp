#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modekacz/core_model.hpp"
#include "modekacz/exact.hpp"

namespace modekacz {

/// Sizes of the worker categories holding one row and the number queried.
/// sizes[0] is the reliable category. Sizes are normally whole worker counts;
/// non-integral sizes (N p / k not integral) are evaluated with generalized
/// binomials.
struct CategoryCounts {
    std::vector<Rational> sizes;
    int n = 0;

    static CategoryCounts of(int n, const std::vector<int>& counts) {
        CategoryCounts c;
        c.n = n;
        for (int m : counts) c.sizes.emplace_back(m);
        c.validate();
        return c;
    }
    static CategoryCounts of(const RowAdversary& row) { return of(row.n, row.counts); }

    /// N workers split into a reliable share 1 - p and k equal shares p / k.
    static CategoryCounts uniform_split(int N, int n, const Rational& p, int k) {
        CategoryCounts c;
        c.n = n;
        c.sizes.push_back(Rational(N) * (1 - p));
        for (int l = 0; l < k; ++l) c.sizes.push_back(Rational(N) * p / k);
        c.validate();
        return c;
    }

    [[nodiscard]] int k() const noexcept { return static_cast<int>(sizes.size()) - 1; }
    [[nodiscard]] Rational total() const {
        Rational t = 0;
        for (const auto& s : sizes) t += s;
        return t;
    }
    [[nodiscard]] Rational reliable_fraction() const { return sizes.front() / total(); }
    [[nodiscard]] bool integral() const {
        return std::all_of(sizes.begin(), sizes.end(), [](const Rational& s) { return is_integer(s); });
    }

    /// Smallest mode number counted as a mode: max(ceil(n/(k+1)), ceil(n p0)).
    [[nodiscard]] int g0() const {
        auto ceil_div = [](const Rational& q) {
            BigInt f = numerator(q) / denominator(q);
            if (Rational(f) < q) ++f;
            return static_cast<int>(f);
        };
        return std::max(ceil_div(Rational(n, k() + 1)), ceil_div(Rational(n) * reliable_fraction()));
    }

    void validate() const {
        if (sizes.empty()) throw InvalidArgument("category counts must include the reliable category");
        for (const auto& s : sizes)
            if (s < 0) throw InvalidArgument("category sizes must be non-negative");
        if (n < 1 || Rational(n) > total()) throw InvalidArgument("need 1 <= n <= N");
        for (std::size_t l = 1; l < sizes.size(); ++l)
            if (sizes[l] >= sizes[0]) throw InvalidArgument("adversarial categories must be smaller than the reliable one");
    }

    friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
    friend bool operator<(const CategoryCounts& a, const CategoryCounts& b) {
        if (a.n != b.n) return a.n < b.n;
        return a.sizes < b.sizes;
    }
};

/// C(N, n): number of equally likely worker selections.
inline Rational total_selections(const CategoryCounts& c) { return binomial(c.total(), c.n); }

namespace detail {

// prod over bins of sum_{j<g} C(m, j) x^j, truncated at `degree`; `skip` excludes one bin.
inline Rational capped_product_coeff(const CategoryCounts& c, int g, int skip, int degree) {
    if (degree < 0 || g < 1) return 0;
    Polynomial acc{Rational(1)};
    for (int l = 0; l <= c.k(); ++l) {
        if (l == skip) continue;
        Polynomial bin;
        for (int j = 0; j < g && j <= degree; ++j) bin.push_back(binomial(c.sizes[l], j));
        acc = multiply_truncated(acc, bin, static_cast<std::size_t>(degree));
    }
    return static_cast<std::size_t>(degree) < acc.size() ? acc[degree] : Rational(0);
}

}  // namespace detail

/// a_{g,l}: coefficient of x^{n-g} in prod_{l' != l} sum_{j<g} C(m_l', j) x^j,
/// i.e. the number of ways to fill the other n - g slots with every other
/// category appearing fewer than g times.
inline Rational gen_coeff_a(const CategoryCounts& c, int g, int excluded) {
    if (excluded < 0 || excluded > c.k()) throw InvalidArgument("gen_coeff_a: category out of range");
    if (g < 1 || g > c.n) return 0;
    return detail::capped_product_coeff(c, g, excluded, c.n - g);
}

/// b_g: coefficient of x^n in prod_l sum_{j<g} C(m_l, j) x^j, the number of
/// selections in which every category appears fewer than g times.
inline Rational gen_coeff_b(const CategoryCounts& c, int g) {
    if (g > c.n) return total_selections(c);
    return detail::capped_product_coeff(c, g, -1, c.n);
}

/// Probability that category l is the unique largest group with exactly g members.
inline Rational mode_prob(const CategoryCounts& c, int g, int category) {
    if (g < 1 || g > c.n) return 0;
    return binomial(c.sizes.at(category), g) * gen_coeff_a(c, g, category) / total_selections(c);
}

/// Single-row mode law.
struct ModeDistribution {
    int g0 = 0;
    std::vector<Rational> q_hat;      // per category: P(mode in l, mode number >= g0)
    std::map<int, Rational> q_g;      // per mode number g >= g0
    std::map<int, Rational> q_max_g;  // per g: max over l of P(mode, g, l)
    Rational q;                       // P(some mode)
    double q0 = 0.0;                  // q_hat[0] / q
    std::vector<double> q_ell;        // q_hat[l] / q
};

inline ModeDistribution mode_distribution(const CategoryCounts& c) {
    ModeDistribution d;
    d.g0 = c.g0();
    d.q_hat.assign(c.k() + 1, Rational(0));
    const Rational total = total_selections(c);
    for (int g = d.g0; g <= c.n; ++g) {
        Rational qg = 0, qmax = 0;
        for (int l = 0; l <= c.k(); ++l) {
            const Rational p = binomial(c.sizes[l], g) * gen_coeff_a(c, g, l) / total;
            d.q_hat[l] += p;
            qg += p;
            qmax = std::max(qmax, p);
        }
        d.q_g[g] = qg;
        d.q_max_g[g] = qmax;
        d.q += qg;
    }
    for (const auto& qh : d.q_hat) d.q_ell.push_back(d.q == 0 ? 0.0 : to_double(qh / d.q));
    d.q0 = d.q_ell.empty() ? 0.0 : d.q_ell.front();
    return d;
}

/// P(row t of tau wins with a mode in category l of size g): row t has a unique
/// largest group of size g in category l and every other row of tau has all
/// categories below g.
inline Rational joint_mode_prob(std::span<const CategoryCounts> tau, std::size_t t, int category, int g) {
    if (t >= tau.size()) throw InvalidArgument("joint_mode_prob: t not in tau");
    Rational p = mode_prob(tau[t], g, category);
    for (std::size_t s = 0; s < tau.size() && p != 0; ++s)
        if (s != t) p *= gen_coeff_b(tau[s], g) / total_selections(tau[s]);
    return p;
}

/// P(t, g): the sum of joint_mode_prob over categories.
inline Rational joint_row_prob(std::span<const CategoryCounts> tau, std::size_t t, int g) {
    Rational p = 0;
    for (int l = 0; l <= tau[t].k(); ++l) p += joint_mode_prob(tau, t, l, g);
    return p;
}

struct TheoremConstants {
    std::size_t d1 = 0;
    std::size_t d0 = 0;
    Rational q_min;
    std::vector<Rational> beta;  // per row
    double sigma_min_tilde = 0.0;
    double alpha = 1.0;
    // Closed forms for identical rows; absent otherwise.
    std::optional<Rational> q_homogeneous;
    std::optional<Rational> beta_homogeneous;
    std::map<int, Rational> q_max_by_g;  // identical rows: Q_max(t, g, tau) per g
    std::vector<std::string> warnings;
};

namespace detail {

struct CountClass {
    CategoryCounts counts;
    std::size_t rows = 0;
    int g0 = 0;
    std::map<int, Rational> q_g, q_max_g;
    std::vector<Rational> b_ratio;  // index g = 0..max_n+1

    Rational ratio(int g) const {
        if (g >= static_cast<int>(b_ratio.size())) return 1;
        return b_ratio[g];
    }
};

inline std::vector<CountClass> count_classes(std::span<const CategoryCounts> rows, std::vector<std::size_t>& class_of,
                                             int max_g) {
    std::map<CategoryCounts, std::size_t> index;
    std::vector<CountClass> classes;
    class_of.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto [it, inserted] = index.emplace(rows[r], classes.size());
        if (inserted) classes.push_back({rows[r]});
        class_of[r] = it->second;
        ++classes[it->second].rows;
    }
    for (auto& cls : classes) {
        const auto dist = mode_distribution(cls.counts);
        cls.g0 = dist.g0;
        cls.q_g = dist.q_g;
        cls.q_max_g = dist.q_max_g;
        const Rational total = total_selections(cls.counts);
        cls.b_ratio.resize(static_cast<std::size_t>(max_g) + 2);
        for (int g = 0; g <= max_g + 1; ++g) cls.b_ratio[g] = g == 0 ? Rational(0) : gen_coeff_b(cls.counts, g) / total;
    }
    return classes;
}

// Calls visit(multiplicities) for every multiset of d classes within availability.
inline void for_each_multiset(const std::vector<std::size_t>& available, std::size_t d,
                              const std::function<void(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> m(available.size(), 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
        if (i == available.size()) {
            if (left == 0) visit(m);
            return;
        }
        for (std::size_t take = 0; take <= std::min(left, available[i]); ++take) {
            m[i] = take;
            rec(i + 1, left - take);
        }
        m[i] = 0;
    };
    rec(0, d);
}

}  // namespace detail

/// Contraction factor and error weights of the multi-row convergence bound.
/// Q_min and beta_t depend on the other rows of tau only through how many of
/// them fall in each distinct count class, so both are computed exactly by
/// enumerating class multisets weighted by their subset counts.
inline TheoremConstants theorem_constants(std::size_t d0, std::span<const CategoryCounts> row_counts,
                                          double sigma_min_tilde) {
    const std::size_t d1 = row_counts.size();
    if (d1 == 0) throw InvalidArgument("theorem_constants: no rows");
    if (d0 < 1 || d0 > d1) throw InvalidArgument("theorem_constants: need 1 <= d0 <= d1");
    int max_n = 0;
    for (const auto& c : row_counts) max_n = std::max(max_n, c.n);

    TheoremConstants out;
    out.d1 = d1;
    out.d0 = d0;
    out.sigma_min_tilde = sigma_min_tilde;
    std::vector<std::size_t> class_of;
    const auto classes = detail::count_classes(row_counts, class_of, max_n);
    const BigInt subsets = binomial(static_cast<std::int64_t>(d1), static_cast<std::int64_t>(d0));

    std::optional<Rational> q_min;
    std::vector<Rational> class_beta(classes.size(), Rational(0));
    for (std::size_t t = 0; t < classes.size(); ++t) {
        const auto& ct = classes[t];
        std::vector<std::size_t> available;
        for (std::size_t c = 0; c < classes.size(); ++c) available.push_back(classes[c].rows - (c == t ? 1 : 0));
        detail::for_each_multiset(available, d0 - 1, [&](const std::vector<std::size_t>& m) {
            BigInt weight = 1;
            for (std::size_t c = 0; c < m.size(); ++c)
                weight *= binomial(static_cast<std::int64_t>(available[c]), static_cast<std::int64_t>(m[c]));
            Rational sum_q = 0, sum_qmax = 0;
            for (int g = ct.g0; g <= ct.counts.n; ++g) {
                Rational prod = 1;
                for (std::size_t c = 0; c < m.size() && prod != 0; ++c)
                    for (std::size_t i = 0; i < m[c]; ++i) prod *= classes[c].ratio(g);
                sum_q += ct.q_g.at(g) * prod;
                sum_qmax += ct.q_max_g.at(g) * prod;
            }
            if (!q_min || sum_q < *q_min) q_min = sum_q;
            class_beta[t] += Rational(weight) * sum_qmax;
        });
        class_beta[t] /= Rational(subsets);
    }
    out.q_min = *q_min;
    for (std::size_t r = 0; r < d1; ++r) out.beta.push_back(class_beta[class_of[r]]);
    out.alpha = 1.0 - to_double(out.q_min) * static_cast<double>(d0) / static_cast<double>(d1) * sigma_min_tilde *
                          sigma_min_tilde;
    if (!(out.alpha > 0.0 && out.alpha < 1.0))
        out.warnings.push_back("alpha = " + std::to_string(out.alpha) + " lies outside (0, 1)");

    if (classes.size() == 1) {
        const auto& c = classes.front();
        Rational q = 0, qmax = 0;
        for (int g = c.g0; g <= c.counts.n; ++g) {
            Rational power = 1;
            for (std::size_t i = 1; i < d0; ++i) power *= c.ratio(g);
            q += c.q_g.at(g) * power;
            out.q_max_by_g[g] = c.q_max_g.at(g) * power;
            qmax += out.q_max_by_g[g];
        }
        out.q_homogeneous = q;
        out.beta_homogeneous = Rational(static_cast<std::int64_t>(d0), static_cast<std::int64_t>(d1)) * qmax;
    }
    return out;
}

/// Homogeneous convenience overload.
inline TheoremConstants theorem_constants(std::size_t d1, std::size_t d0, const CategoryCounts& counts,
                                          double sigma_min_tilde) {
    if (d1 == 0) throw InvalidArgument("theorem_constants: no rows");
    // One row per distinct class is enough to describe d1 identical rows, but the
    // subset weights need the real row count.
    std::vector<CategoryCounts> rows(d1, counts);
    return theorem_constants(d0, rows, sigma_min_tilde);
}

/// |ẽ_t|^2 = sum_l e_{t,l}^2 / |A_t|^2 for every row.
inline std::vector<double> normalized_error_norms(const LinearProblem& p, const AdversaryConfig& adv) {
    std::vector<double> out(p.rows(), 0.0);
    for (std::size_t r = 0; r < p.rows(); ++r) {
        for (int l = 1; l <= adv.k(); ++l) out[r] += adv.error(r, l) * adv.error(r, l);
        out[r] /= p.row_norms_sq()[static_cast<Eigen::Index>(r)];
    }
    return out;
}

struct BoundCurve {
    std::vector<std::size_t> iterations;
    std::vector<double> values;
    double asymptote = 0.0;
};

/// E|x_i - x*|^2 <= alpha^i |x0 - x*|^2 + (1 - alpha^{i+1})/(1 - alpha) sum_t beta_t |ẽ_t|^2.
inline BoundCurve bound_curve(double alpha, std::span<const double> beta, std::span<const double> err_norms_sq,
                              double x0_err_sq, std::span<const std::size_t> iterations) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("bound_curve: alpha must lie in (0, 1)");
    if (beta.size() != err_norms_sq.size()) throw InvalidArgument("bound_curve: beta and error norms differ in length");
    double weighted = 0.0;
    for (std::size_t t = 0; t < beta.size(); ++t) weighted += beta[t] * err_norms_sq[t];
    BoundCurve out;
    out.asymptote = weighted / (1.0 - alpha);
    for (std::size_t i : iterations) {
        const double di = static_cast<double>(i);
        out.iterations.push_back(i);
        out.values.push_back(std::pow(alpha, di) * x0_err_sq + (1.0 - std::pow(alpha, di + 1.0)) / (1.0 - alpha) * weighted);
    }
    return out;
}

inline BoundCurve bound_curve(const TheoremConstants& k, std::span<const double> err_norms_sq, double x0_err_sq,
                              std::span<const std::size_t> iterations) {
    std::vector<double> beta;
    for (const auto& b : k.beta) beta.push_back(to_double(b));
    return bound_curve(k.alpha, beta, err_norms_sq, x0_err_sq, iterations);
}

/// Single-row norm-weighted variant:
/// alpha^{i+1}|x0 - x*|^2 + (1 - alpha^{i+1})/(1 - alpha) (1/|A|_F^2) sum_{l>=1} q_l |e_l|^2,
/// with alpha = 1 - sigma_min(A)^2 / |A|_F^2.
inline BoundCurve single_row_bound_curve(const LinearProblem& p, const AdversaryConfig& adv,
                                         const ModeDistribution& dist, double x0_err_sq,
                                         std::span<const std::size_t> iterations) {
    Eigen::BDCSVD<Matrix> svd(p.a());
    const double smin = svd.singularValues().minCoeff();
    const double alpha = 1.0 - smin * smin / p.frob_sq();
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("single_row_bound_curve: alpha must lie in (0, 1)");
    double weighted = 0.0;
    for (int l = 1; l <= adv.k(); ++l) {
        const double e_sq = adv.e_table().col(l - 1).squaredNorm();
        weighted += dist.q_ell.at(l) * e_sq;
    }
    weighted /= p.frob_sq();
    BoundCurve out;
    out.asymptote = weighted / (1.0 - alpha);
    for (std::size_t i : iterations) {
        const double next = std::pow(alpha, static_cast<double>(i) + 1.0);
        out.iterations.push_back(i);
        out.values.push_back(next * x0_err_sq + (1.0 - next) / (1.0 - alpha) * weighted);
    }
    return out;
}

struct D0ScanRow {
    std::size_t d0 = 0;
    Rational q;
    double alpha = 1.0;
    double derivative = 0.0;  // d alpha / d d0 treating d0 as continuous
};

struct D0Scan {
    std::vector<D0ScanRow> rows;
    std::size_t best_d0 = 0;
    std::optional<double> stationary_d0;  // closed form when g0 == n
    std::optional<double> derivative_at_stationary;
};

/// alpha(d0) = 1 - Q(d0) (d0/d1) sigma^2 with Q(d0) = sum_g q_g (b_g / C(N,n))^{d0-1}
/// for identical rows.
inline D0Scan scan_d0(const CategoryCounts& counts, std::size_t d1, double sigma_min_tilde, std::size_t d0_lo,
                      std::size_t d0_hi) {
    if (d0_lo < 1 || d0_hi < d0_lo || d0_hi > d1) throw InvalidArgument("scan_d0: need 1 <= d0_lo <= d0_hi <= d1");
    const auto dist = mode_distribution(counts);
    const Rational total = total_selections(counts);
    std::map<int, double> ratio;
    std::map<int, Rational> ratio_exact;
    for (int g = dist.g0; g <= counts.n; ++g) {
        ratio_exact[g] = gen_coeff_b(counts, g) / total;
        ratio[g] = to_double(ratio_exact[g]);
    }
    const double s2 = sigma_min_tilde * sigma_min_tilde;
    auto derivative = [&](double d0) {
        double sum = 0.0;
        for (const auto& [g, r] : ratio) {
            if (r <= 0.0) continue;  // term vanishes identically for d0 > 1
            sum += to_double(dist.q_g.at(g)) * (1.0 + d0 * std::log(r)) * std::pow(r, d0 - 1.0);
        }
        return -s2 / static_cast<double>(d1) * sum;
    };

    D0Scan out;
    double best_alpha = 2.0;
    for (std::size_t d0 = d0_lo; d0 <= d0_hi; ++d0) {
        D0ScanRow row;
        row.d0 = d0;
        for (const auto& [g, r] : ratio_exact) {
            Rational power = 1;
            for (std::size_t i = 1; i < d0; ++i) power *= r;
            row.q += dist.q_g.at(g) * power;
        }
        row.alpha = 1.0 - to_double(row.q) * static_cast<double>(d0) / static_cast<double>(d1) * s2;
        row.derivative = derivative(static_cast<double>(d0));
        if (row.alpha < best_alpha) {
            best_alpha = row.alpha;
            out.best_d0 = d0;
        }
        out.rows.push_back(row);
    }
    if (dist.g0 == counts.n) {
        const double r = ratio.at(counts.n);
        if (r > 0.0 && r < 1.0) {
            out.stationary_d0 = -1.0 / std::log(r);
            out.derivative_at_stationary = derivative(*out.stationary_d0);
        }
    }
    return out;
}

}  // namespace modekacz
