#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "modekacz/errors.hpp"
#include "modekacz/rng.hpp"

namespace modekacz {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using WorkerId = std::uint32_t;

struct ProblemProvenance {
    std::string source = "explicit";
    std::optional<std::uint64_t> seed;
    bool normalized = false;
};

/// Smallest singular value of the row-normalized copy of `a`.
inline double row_normalized_sigma_min(const Matrix& a) {
    Matrix normalized = a;
    for (Eigen::Index r = 0; r < normalized.rows(); ++r) normalized.row(r) /= normalized.row(r).norm();
    Eigen::BDCSVD<Matrix> svd(normalized);
    const auto& s = svd.singularValues();
    return s.size() == 0 ? 0.0 : s.minCoeff();
}

/// Over-determined system Ax = b with cached row norms and sigma_min(Ã).
/// Immutable once built.
class LinearProblem {
public:
    static LinearProblem create(Matrix a, Vector b, std::optional<Vector> x_star = std::nullopt,
                                ProblemProvenance provenance = {}) {
        if (a.rows() == 0 || a.cols() == 0) throw InvalidArgument("matrix must be non-empty");
        if (a.rows() < a.cols()) throw InvalidArgument("need d1 >= d2 (over-determined system)");
        if (b.size() != a.rows()) throw InvalidArgument("right-hand side length does not match row count");
        LinearProblem p;
        p.row_norms_sq_ = a.rowwise().squaredNorm();
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            if (!(p.row_norms_sq_[r] > 0.0)) throw InvalidArgument("row " + std::to_string(r) + " is zero");
        }
        if (x_star) {
            if (x_star->size() != a.cols()) throw InvalidArgument("x_star length does not match column count");
            const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
            const double misfit = (a * *x_star - b).cwiseAbs().maxCoeff();
            if (misfit > 1e-10 * scale) throw InvalidArgument("system is inconsistent with x_star");
        }
        p.frob_sq_ = p.row_norms_sq_.sum();
        p.sigma_min_tilde_ = row_normalized_sigma_min(a);
        p.a_ = std::move(a);
        p.b_ = std::move(b);
        p.x_star_ = std::move(x_star);
        p.provenance_ = std::move(provenance);
        return p;
    }

    [[nodiscard]] const Matrix& a() const noexcept { return a_; }
    [[nodiscard]] const Vector& b() const noexcept { return b_; }
    [[nodiscard]] const std::optional<Vector>& x_star() const noexcept { return x_star_; }
    [[nodiscard]] const Vector& row_norms_sq() const noexcept { return row_norms_sq_; }
    [[nodiscard]] double sigma_min_tilde() const noexcept { return sigma_min_tilde_; }
    [[nodiscard]] double frob_sq() const noexcept { return frob_sq_; }
    [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(a_.rows()); }
    [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(a_.cols()); }
    [[nodiscard]] const ProblemProvenance& provenance() const noexcept { return provenance_; }

    [[nodiscard]] bool row_normalized(double tol = 1e-12) const {
        return ((row_norms_sq_.array() - 1.0).abs() <= tol).all();
    }

private:
    LinearProblem() = default;

    Matrix a_;
    Vector b_;
    std::optional<Vector> x_star_;
    Vector row_norms_sq_;
    double sigma_min_tilde_ = 0.0;
    double frob_sq_ = 0.0;
    ProblemProvenance provenance_;
};

inline nlohmann::json to_json(const LinearProblem& p) {
    nlohmann::json j;
    j["d1"] = p.rows();
    j["d2"] = p.cols();
    j["source"] = p.provenance().source;
    j["seed"] = p.provenance().seed ? nlohmann::json(*p.provenance().seed) : nlohmann::json(nullptr);
    j["normalized"] = p.provenance().normalized;
    j["frob_sq"] = p.frob_sq();
    j["sigma_min_tilde"] = p.sigma_min_tilde();
    j["has_x_star"] = p.x_star().has_value();
    return j;
}

// Consistent system b = A x* from a row-normalized Gaussian matrix.
inline LinearProblem make_synthetic_problem(std::size_t d1, std::size_t d2, std::uint64_t seed) {
    if (d2 == 0 || d1 < d2) throw InvalidArgument("make_synthetic_problem: need d1 >= d2 >= 1");
    Rng rng = Rng(seed).split(stream::problem);
    Matrix a(d1, d2);
    for (std::size_t r = 0; r < d1; ++r) {
        double norm_sq = 0.0;
        do {
            for (std::size_t c = 0; c < d2; ++c) a(r, c) = rng.normal();
            norm_sq = a.row(r).squaredNorm();
        } while (norm_sq == 0.0);
        a.row(r) /= std::sqrt(norm_sq);
    }
    Vector x(d2);
    for (std::size_t c = 0; c < d2; ++c) x[c] = rng.normal();
    Vector b = a * x;
    return LinearProblem::create(std::move(a), std::move(b), std::move(x), {"synthetic", seed, true});
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

}  // namespace detail

/// Numeric matrix from a comma-separated stream. A first row containing any
/// non-numeric field is taken to be a header.
inline Matrix read_csv_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        std::vector<double> values;
        values.reserve(fields.size());
        std::optional<std::size_t> bad_column;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            auto v = detail::parse_double(fields[c]);
            if (!v) {
                bad_column = c + 1;
                break;
            }
            values.push_back(*v);
        }
        if (first_content) {
            first_content = false;
            if (bad_column) continue;  // header
        }
        if (bad_column) throw ParseError(line_no, *bad_column, "not a finite number");
        if (width == 0) width = values.size();
        if (values.size() != width) {
            throw ParseError(line_no, std::min(values.size(), width) + 1,
                             "expected " + std::to_string(width) + " columns, found " + std::to_string(values.size()));
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError(line_no, 1, "no numeric rows");
    Matrix a(rows.size(), width);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c) a(r, c) = rows[r][c];
    return a;
}

/// Data matrix from CSV with a synthetic consistent right-hand side:
/// x* ~ N(0, I) drawn from `seed`, b = A x*.
inline LinearProblem load_csv_problem(const std::string& path, bool normalize, std::uint64_t seed) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    Matrix a = read_csv_matrix(in);
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double norm = a.row(r).norm();
        if (!(norm > 0.0)) throw ParseError(static_cast<std::size_t>(r) + 1, 1, "zero row");
        if (normalize) a.row(r) /= norm;
    }
    Rng rng = Rng(seed).split(stream::problem);
    Vector x(a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) x[c] = rng.normal();
    Vector b = a * x;
    return LinearProblem::create(std::move(a), std::move(b), std::move(x), {"csv:" + path, seed, normalize});
}

/// Uniform random subset of {0..n-1} of size k (Floyd's algorithm).
inline std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k, Rng& rng) {
    if (k > n) throw InvalidArgument("cannot sample " + std::to_string(k) + " of " + std::to_string(n));
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
        const std::size_t t = rng.uniform_index(0, j);
        if (std::find(picked.begin(), picked.end(), t) == picked.end())
            picked.push_back(t);
        else
            picked.push_back(j);
    }
    return picked;
}

/// The row set tau of one iteration: d0 distinct indices, uniform over subsets.
inline std::vector<std::size_t> sample_rows(std::size_t d1, std::size_t d0, Rng& rng) {
    if (d0 == 0) throw InvalidArgument("sample_rows: d0 must be >= 1");
    if (d0 > d1) throw InvalidArgument("sample_rows: d0 > d1");
    return sample_subset(d1, d0, rng);
}

/// Worker counts of one row. counts[0] is the reliable category.
struct RowAdversary {
    int N = 0;
    int n = 0;
    std::vector<int> counts;

    [[nodiscard]] int k() const noexcept { return static_cast<int>(counts.size()) - 1; }
    [[nodiscard]] double fraction(int category) const { return static_cast<double>(counts.at(category)) / N; }
    // ceil(n * p0) in integer arithmetic
    [[nodiscard]] int mode_threshold() const { return (n * counts[0] + N - 1) / N; }

    friend bool operator==(const RowAdversary&, const RowAdversary&) = default;
};

inline void validate(const RowAdversary& row) {
    if (row.counts.empty()) throw InvalidArgument("category counts must include the reliable category");
    if (row.N <= 0) throw InvalidArgument("N_r must be positive");
    if (row.n <= 0 || row.n > row.N) throw InvalidArgument("need 1 <= n_r <= N_r");
    if (std::any_of(row.counts.begin(), row.counts.end(), [](int c) { return c < 0; }))
        throw InvalidArgument("category counts must be non-negative");
    if (std::accumulate(row.counts.begin(), row.counts.end(), 0) != row.N)
        throw InvalidArgument("category counts must sum to N_r");
    for (std::size_t l = 1; l < row.counts.size(); ++l) {
        if (row.counts[l] >= row.counts[0])
            throw InvalidArgument("adversarial category " + std::to_string(l) + " must be smaller than the reliable one");
    }
}

/// Error categories, worker counts per row and the per-row category errors.
class AdversaryConfig {
public:
    AdversaryConfig(std::vector<RowAdversary> rows, Matrix e_table) : rows_(std::move(rows)), e_(std::move(e_table)) {
        if (rows_.empty()) throw InvalidArgument("adversary config needs at least one row");
        const int k = rows_.front().k();
        for (const auto& row : rows_) {
            validate(row);
            if (row.k() != k) throw InvalidArgument("every row must have the same number of categories");
        }
        if (e_.rows() != static_cast<Eigen::Index>(rows_.size()) || e_.cols() != k)
            throw InvalidArgument("error table must be d1 x k");
        homogeneous_ = std::all_of(rows_.begin(), rows_.end(), [&](const RowAdversary& r) { return r == rows_.front(); });
    }

    static AdversaryConfig homogeneous(std::size_t d1, int N, int n, std::vector<int> counts, Matrix e_table) {
        return AdversaryConfig(std::vector<RowAdversary>(d1, RowAdversary{N, n, std::move(counts)}), std::move(e_table));
    }

    /// Per-category fractions p_1..p_k (reliable fraction implied). Rejects
    /// fractions that do not describe whole workers.
    static AdversaryConfig from_fractions(std::size_t d1, int N, int n, const std::vector<double>& fractions,
                                          Matrix e_table) {
        std::vector<int> counts{N};
        for (double p : fractions) {
            const double m = p * N;
            const double rounded = std::round(m);
            if (std::abs(m - rounded) > 1e-9) throw InvalidArgument("N_r * p is not an integer worker count");
            counts.push_back(static_cast<int>(rounded));
            counts[0] -= static_cast<int>(rounded);
        }
        return homogeneous(d1, N, n, std::move(counts), std::move(e_table));
    }

    static AdversaryConfig none(std::size_t d1, int N, int n) {
        return homogeneous(d1, N, n, {N}, Matrix(static_cast<Eigen::Index>(d1), 0));
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }
    [[nodiscard]] int k() const noexcept { return rows_.front().k(); }
    [[nodiscard]] const RowAdversary& row(std::size_t r) const { return rows_.at(r); }
    [[nodiscard]] const std::vector<RowAdversary>& all_rows() const noexcept { return rows_; }
    [[nodiscard]] bool is_homogeneous() const noexcept { return homogeneous_; }
    [[nodiscard]] const Matrix& e_table() const noexcept { return e_; }
    /// e_{r,l}; the reliable category has zero error.
    [[nodiscard]] double error(std::size_t r, int category) const {
        return category == 0 ? 0.0 : e_(static_cast<Eigen::Index>(r), category - 1);
    }

private:
    std::vector<RowAdversary> rows_;
    Matrix e_;
    bool homogeneous_ = true;
};

inline nlohmann::json to_json(const AdversaryConfig& adv) {
    nlohmann::json j;
    j["d1"] = adv.rows();
    j["k"] = adv.k();
    j["homogeneous"] = adv.is_homogeneous();
    const auto& r0 = adv.row(0);
    j["N_r"] = r0.N;
    j["n_r"] = r0.n;
    j["counts"] = r0.counts;
    j["e_inf"] = adv.e_table().size() ? adv.e_table().cwiseAbs().maxCoeff() : 0.0;
    return j;
}

enum class PoolLayout {
    PerRow,  // every row has its own N_r workers, one counter vector per row
    Shared,  // one pool of N workers holds every row, one global counter vector
};

/// Mutable per-trial worker state: category labels, non-mode counters and the
/// block-list. Never shared between concurrent trials.
class WorkerPopulation {
public:
    WorkerPopulation(const AdversaryConfig& adversary, PoolLayout layout, std::uint64_t seed) : layout_(layout) {
        Rng rng = Rng(seed).split(stream::population);
        const std::size_t pool_count = layout == PoolLayout::Shared ? 1 : adversary.rows();
        if (layout == PoolLayout::Shared && !adversary.is_homogeneous())
            throw InvalidArgument("shared worker pool requires identical worker counts on every row");
        pools_.resize(pool_count);
        for (std::size_t p = 0; p < pool_count; ++p) {
            const RowAdversary& row = adversary.row(p);
            std::vector<int> labels;
            labels.reserve(row.N);
            for (int c = 0; c <= row.k(); ++c) labels.insert(labels.end(), row.counts[c], c);
            std::shuffle(labels.begin(), labels.end(), rng);
            Pool& pool = pools_[p];
            pool.n = row.n;
            for (int label : labels) {
                const auto id = static_cast<WorkerId>(category_.size());
                category_.push_back(label);
                pool_of_worker_.push_back(p);
                counter_.push_back(0);
                blocked_.push_back(false);
                pool.active.push_back(id);
                pool.all.push_back(id);
            }
        }
    }

    [[nodiscard]] PoolLayout layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t worker_count() const noexcept { return category_.size(); }
    [[nodiscard]] std::size_t pool_count() const noexcept { return pools_.size(); }
    [[nodiscard]] std::size_t pool_of_row(std::size_t row) const noexcept {
        return layout_ == PoolLayout::Shared ? 0 : row;
    }
    [[nodiscard]] const std::vector<WorkerId>& active_workers(std::size_t pool) const { return pools_.at(pool).active; }
    [[nodiscard]] const std::vector<WorkerId>& pool_workers(std::size_t pool) const { return pools_.at(pool).all; }
    [[nodiscard]] int category(WorkerId w) const { return category_.at(w); }
    [[nodiscard]] std::uint64_t counter(WorkerId w) const { return counter_.at(w); }
    [[nodiscard]] bool is_blocked(WorkerId w) const { return blocked_.at(w); }
    [[nodiscard]] const std::vector<WorkerId>& block_list() const noexcept { return block_list_; }

    void increment(WorkerId w) { ++counter_.at(w); }

    void block(WorkerId w) {
        if (blocked_.at(w)) return;
        blocked_[w] = true;
        auto& active = pools_[pool_of_worker_[w]].active;
        active.erase(std::find(active.begin(), active.end(), w));
        block_list_.push_back(w);
    }

    /// Blocks the unblocked worker of `pool` with the largest counter, if that
    /// counter is positive. Ties are broken uniformly at random.
    std::optional<WorkerId> block_worst(std::size_t pool, Rng& rng) {
        const auto& active = pools_.at(pool).active;
        std::uint64_t best = 0;
        for (WorkerId w : active) best = std::max(best, counter_[w]);
        if (best == 0) return std::nullopt;
        std::vector<WorkerId> tied;
        for (WorkerId w : active)
            if (counter_[w] == best) tied.push_back(w);
        const WorkerId chosen = tied.size() == 1 ? tied.front() : tied[rng.uniform_index(0, tied.size() - 1)];
        block(chosen);
        return chosen;
    }

private:
    struct Pool {
        int n = 0;
        std::vector<WorkerId> active;
        std::vector<WorkerId> all;
    };

    PoolLayout layout_;
    std::vector<Pool> pools_;
    std::vector<int> category_;
    std::vector<std::size_t> pool_of_worker_;
    std::vector<std::uint64_t> counter_;
    std::vector<bool> blocked_;
    std::vector<WorkerId> block_list_;
};

/// n distinct unblocked workers holding `row`, uniform over n-subsets.
inline std::vector<WorkerId> sample_workers(const WorkerPopulation& pop, std::size_t row, std::size_t n, Rng& rng) {
    const auto& active = pop.active_workers(pop.pool_of_row(row));
    if (active.size() < n) throw PoolExhausted(row, active.size(), n);
    std::vector<WorkerId> out;
    out.reserve(n);
    for (std::size_t idx : sample_subset(active.size(), n, rng)) out.push_back(active[idx]);
    return out;
}

}  // namespace modekacz
