#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "modekacz/aggregation.hpp"
#include "modekacz/core_model.hpp"

namespace modekacz {

enum class SolverVariant {
    MultiRowUniform,        // d0 rows per iteration, uniform subsets
    SingleRowNormWeighted,  // one row per iteration, P(r) = |A_r|^2 / |A|_F^2
};

struct SolveOptions {
    std::size_t d0 = 1;
    std::size_t max_iter = 30000;
    double tol = 1e-12;  // stop once the applied step |c| drops to this
    bool blocklist_enabled = false;
    std::size_t update_cycle = 200;
    RowStrategy strategy = RowStrategy::MaxResidual;
    double group_tol = default_group_tol;
    SolverVariant variant = SolverVariant::MultiRowUniform;
    PoolLayout layout = PoolLayout::PerRow;
    std::optional<double> l1_gamma;
    double l1_step = 1.0;
    std::vector<std::size_t> checkpoints;  // empty: geometric_checkpoints(max_iter)
    std::optional<Vector> x0;
    std::optional<Vector> reference;  // solution that reference_distance is measured against
};

inline void validate(const SolveOptions& opts, std::size_t d1) {
    if (opts.d0 < 1 || opts.d0 > d1) throw InvalidArgument("need 1 <= d0 <= d1");
    if (opts.update_cycle < 1) throw InvalidArgument("update cycle must be >= 1");
    if (!(opts.tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (!(opts.group_tol >= 0.0)) throw InvalidArgument("group_tol must be non-negative");
    if (opts.l1_gamma && !(*opts.l1_gamma >= 0.0)) throw InvalidArgument("l1_gamma must be non-negative");
}

/// Every iteration up to 100, then geometric growth by 1.2; always ends at max_iter.
inline std::vector<std::size_t> geometric_checkpoints(std::size_t max_iter) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i <= std::min<std::size_t>(100, max_iter); ++i) out.push_back(i);
    double next = 100.0;
    while (true) {
        next *= 1.2;
        const auto it = static_cast<std::size_t>(std::ceil(next));
        if (it >= max_iter) break;
        if (it > out.back()) out.push_back(it);
    }
    if (out.back() != max_iter) out.push_back(max_iter);
    return out;
}

enum class TrialStatus { Converged, MaxIterations, Diverged, PoolExhausted };

inline const char* to_string(TrialStatus s) {
    switch (s) {
        case TrialStatus::Converged: return "converged";
        case TrialStatus::MaxIterations: return "max_iterations";
        case TrialStatus::Diverged: return "diverged";
        case TrialStatus::PoolExhausted: return "pool_exhausted";
    }
    return "unknown";
}

struct Checkpoint {
    std::size_t iteration = 0;
    double sq_error = 0.0;  // |x_i - x*|^2, NaN without x*
    double residual_norm = 0.0;
    std::size_t no_mode_count = 0;
    std::size_t blocked_count = 0;
    double wall_seconds = 0.0;
    std::optional<double> objective;
    std::optional<double> reference_distance;  // relative
};

struct BlockedWorker {
    WorkerId worker = 0;
    int category = 0;
    std::size_t iteration = 0;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    TrialStatus status = TrialStatus::MaxIterations;
    std::string failure;
    std::size_t iterations = 0;
    std::size_t no_mode_count = 0;
    std::vector<Checkpoint> checkpoints;
    std::vector<BlockedWorker> block_list;
    std::optional<double> blocklist_accuracy;  // blocked workers that are adversarial
    Vector x;

    [[nodiscard]] bool failed() const noexcept {
        return status == TrialStatus::Diverged || status == TrialStatus::PoolExhausted;
    }
    /// Squared error at `iteration`, carrying the last state forward after an early stop.
    [[nodiscard]] double sq_error_at(std::size_t iteration) const {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (const auto& c : checkpoints) {
            if (c.iteration > iteration) break;
            v = c.sq_error;
        }
        return v;
    }
    [[nodiscard]] double final_sq_error() const {
        return checkpoints.empty() ? std::numeric_limits<double>::quiet_NaN() : checkpoints.back().sq_error;
    }
};

/// One applied update; handed to an optional observer for instrumentation.
struct StepEvent {
    std::size_t iteration = 0;  // 1-based index of the update
    std::size_t row = 0;
    double value = 0.0;
    int category = 0;  // true category of the chosen group's representative
    const Vector* x_before = nullptr;
    const Vector* x_after = nullptr;
};

using StepObserver = std::function<void(const StepEvent&)>;

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

inline double l1_objective(const LinearProblem& p, const Vector& x, double gamma) {
    return 0.5 * (p.a() * x - p.b()).squaredNorm() + gamma * x.lpNorm<1>();
}

/// Cyclic coordinate descent for 0.5|Ax - b|^2 + gamma |x|_1.
inline Vector lasso_coordinate_descent(const Matrix& a, const Vector& b, double gamma, double tol = 1e-13,
                                       std::size_t max_sweeps = 100000) {
    Vector x = Vector::Zero(a.cols());
    Vector residual = b;
    const Vector col_sq = a.colwise().squaredNorm();
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (col_sq[j] == 0.0) continue;
            const double rho = a.col(j).dot(residual) + col_sq[j] * x[j];
            const double updated = soft_threshold(rho, gamma) / col_sq[j];
            const double delta = updated - x[j];
            if (delta != 0.0) {
                residual -= delta * a.col(j);
                x[j] = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta <= tol * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
    }
    return x;
}

namespace detail {

class RowPicker {
public:
    explicit RowPicker(const LinearProblem& p) : d1_(p.rows()), uniform_(p.row_normalized()) {
        if (!uniform_) {
            const auto& w = p.row_norms_sq();
            weighted_ = std::discrete_distribution<std::size_t>(w.data(), w.data() + w.size());
        }
    }
    // Equal-norm rows use the same draw as sample_rows(d1, 1, rng).
    std::size_t operator()(Rng& rng) { return uniform_ ? rng.uniform_index(0, d1_ - 1) : weighted_(rng); }

private:
    std::size_t d1_;
    bool uniform_;
    std::discrete_distribution<std::size_t> weighted_;
};

class Recorder {
public:
    Recorder(const LinearProblem& p, const SolveOptions& opts)
        : problem_(p), opts_(opts), start_(std::chrono::steady_clock::now()) {
        grid_ = opts.checkpoints.empty() ? geometric_checkpoints(opts.max_iter) : opts.checkpoints;
        std::sort(grid_.begin(), grid_.end());
        grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
    }

    void maybe_record(std::size_t iteration, const Vector& x, const WorkerPopulation& pop, std::size_t no_mode,
                      TrialRecord& rec, bool force = false) {
        while (next_ < grid_.size() && grid_[next_] < iteration) ++next_;
        const bool on_grid = next_ < grid_.size() && grid_[next_] == iteration;
        if (!on_grid && !force) return;
        if (!rec.checkpoints.empty() && rec.checkpoints.back().iteration == iteration) return;
        Checkpoint c;
        c.iteration = iteration;
        c.sq_error = problem_.x_star() ? (x - *problem_.x_star()).squaredNorm() : std::numeric_limits<double>::quiet_NaN();
        c.residual_norm = (problem_.a() * x - problem_.b()).norm();
        c.no_mode_count = no_mode;
        c.blocked_count = pop.block_list().size();
        c.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (opts_.l1_gamma) c.objective = l1_objective(problem_, x, *opts_.l1_gamma);
        if (opts_.reference) {
            const double ref_norm = opts_.reference->norm();
            c.reference_distance = (x - *opts_.reference).norm() / (ref_norm > 0.0 ? ref_norm : 1.0);
        }
        rec.checkpoints.push_back(c);
    }

private:
    const LinearProblem& problem_;
    const SolveOptions& opts_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::size_t> grid_;
    std::size_t next_ = 0;
};

struct RowQueryScratch {
    std::vector<ReturnedResidual> returns;
    std::vector<double> category_value;
};

}  // namespace detail

/// One row's round trip: n unblocked workers each return
/// (b_r + e_{r,l} - <A_r, x>) / |A_r|^2 for their category l, the returns are
/// grouped, a mode is selected, and every sampled worker outside the chosen
/// group has its counter incremented. Rows without a mode increment nothing.
inline ModeOutcome query_row(const LinearProblem& problem, const AdversaryConfig& adversary, WorkerPopulation& pop,
                             std::size_t r, const Vector& x, double group_tol, Rng& worker_rng, Rng& tie_rng,
                             detail::RowQueryScratch& scratch) {
    const RowAdversary& row = adversary.row(r);
    const auto sampled = sample_workers(pop, r, static_cast<std::size_t>(row.n), worker_rng);
    const auto ri = static_cast<Eigen::Index>(r);
    const double dot = problem.a().row(ri).dot(x);
    const double ns = problem.row_norms_sq()[ri];
    scratch.category_value.resize(static_cast<std::size_t>(adversary.k()) + 1);
    for (int c = 0; c <= adversary.k(); ++c)
        scratch.category_value[c] = (problem.b()[ri] + adversary.error(r, c) - dot) / ns;
    scratch.returns.clear();
    for (WorkerId w : sampled) {
        const int cat = pop.category(w);
        scratch.returns.push_back({w, r, scratch.category_value[cat], cat});
    }
    auto outcome =
        select_mode(group_residuals(scratch.returns, group_tol), static_cast<std::size_t>(row.mode_threshold()), tie_rng);
    if (outcome.has_mode()) {
        const auto& members = outcome.chosen_group().members;
        for (WorkerId w : sampled)
            if (std::find(members.begin(), members.end(), w) == members.end()) pop.increment(w);
    }
    return outcome;
}

namespace detail {

inline TrialRecord run_engine(const LinearProblem& problem, const AdversaryConfig& adversary, const SolveOptions& opts,
                              std::uint64_t seed, const StepObserver& observer) {
    validate(opts, problem.rows());
    if (adversary.rows() != problem.rows()) throw InvalidArgument("adversary config row count differs from problem");
    if (opts.x0 && static_cast<std::size_t>(opts.x0->size()) != problem.cols())
        throw InvalidArgument("x0 length does not match column count");

    const Rng root(seed);
    Rng row_rng = root.split(stream::rows);
    Rng worker_rng = root.split(stream::workers);
    Rng tie_rng = root.split(stream::ties);
    WorkerPopulation pop(adversary, opts.layout, seed);
    RowPicker weighted_rows(problem);
    Recorder recorder(problem, opts);

    const Matrix& a = problem.a();
    const double shrink = opts.l1_gamma ? opts.l1_step * *opts.l1_gamma / static_cast<double>(problem.rows()) : 0.0;

    TrialRecord rec;
    rec.seed = seed;
    Vector x = opts.x0 ? *opts.x0 : Vector::Zero(problem.cols());
    Vector x_before;
    std::size_t no_mode = 0;
    RowQueryScratch scratch;
    std::map<std::size_t, ModeOutcome> outcomes;

    recorder.maybe_record(0, x, pop, no_mode, rec, true);
    std::size_t j = 0;
    for (; j < opts.max_iter; ++j) {
        std::vector<std::size_t> tau;
        if (opts.variant == SolverVariant::SingleRowNormWeighted)
            tau.push_back(weighted_rows(row_rng));
        else
            tau = sample_rows(problem.rows(), opts.d0, row_rng);

        outcomes.clear();
        try {
            for (std::size_t r : tau)
                outcomes.emplace(r, query_row(problem, adversary, pop, r, x, opts.group_tol, worker_rng, tie_rng, scratch));
        } catch (const PoolExhausted& ex) {
            rec.status = TrialStatus::PoolExhausted;
            rec.failure = ex.what();
            break;
        }

        const auto choice = select_row(outcomes, opts.strategy, tie_rng);
        if (!choice) {
            ++no_mode;
        } else {
            if (observer) x_before = x;
            x += choice->value * a.row(static_cast<Eigen::Index>(choice->row)).transpose();
            if (shrink > 0.0)
                for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = soft_threshold(x[i], shrink);
            if (!x.allFinite()) {
                rec.status = TrialStatus::Diverged;
                rec.failure = "non-finite iterate at iteration " + std::to_string(j + 1);
                ++j;
                break;
            }
            if (observer) {
                const auto& group = outcomes.at(choice->row).chosen_group();
                const std::size_t median = (group.size() - 1) / 2;
                observer({j + 1, choice->row, choice->value, pop.category(group.members[median]), &x_before, &x});
            }
        }

        if (opts.blocklist_enabled && j % opts.update_cycle == 0) {
            std::set<std::size_t> pools;
            for (std::size_t r : tau) pools.insert(pop.pool_of_row(r));
            for (std::size_t p : pools)
                if (auto w = pop.block_worst(p, tie_rng)) rec.block_list.push_back({*w, pop.category(*w), j});
        }

        recorder.maybe_record(j + 1, x, pop, no_mode, rec);
        if (choice && std::abs(choice->value) <= opts.tol) {
            rec.status = TrialStatus::Converged;
            ++j;
            break;
        }
    }
    rec.iterations = j;
    rec.no_mode_count = no_mode;
    recorder.maybe_record(j, x, pop, no_mode, rec, true);

    std::size_t adversarial = 0;
    for (const auto& blocked : rec.block_list)
        if (blocked.category != 0) ++adversarial;
    if (!rec.block_list.empty())
        rec.blocklist_accuracy = static_cast<double>(adversarial) / static_cast<double>(rec.block_list.size());
    rec.x = std::move(x);
    return rec;
}

}  // namespace detail

/// Distributed randomized Kaczmarz with mode aggregation over redundant,
/// partially adversarial workers, optionally maintaining a block-list.
inline TrialRecord solve_mode_kaczmarz(const LinearProblem& problem, const AdversaryConfig& adversary,
                                       const SolveOptions& opts, std::uint64_t seed,
                                       const StepObserver& observer = {}) {
    return detail::run_engine(problem, adversary, opts, seed, observer);
}

/// One norm-weighted row per iteration against a single shared worker pool
/// with one global counter vector.
inline TrialRecord solve_single_row(const LinearProblem& problem, const AdversaryConfig& adversary,
                                    SolveOptions opts, std::uint64_t seed, const StepObserver& observer = {}) {
    opts.variant = SolverVariant::SingleRowNormWeighted;
    opts.layout = PoolLayout::Shared;
    opts.d0 = 1;
    return detail::run_engine(problem, adversary, opts, seed, observer);
}

/// Mode-aggregated Kaczmarz step followed by soft-thresholding of the iterate
/// at l1_step * gamma / d1, for 0.5|Ax - b|^2 + gamma |x|_1.
inline TrialRecord solve_l1(const LinearProblem& problem, const AdversaryConfig& adversary, const SolveOptions& opts,
                            std::uint64_t seed, const StepObserver& observer = {}) {
    if (!opts.l1_gamma) throw InvalidArgument("solve_l1 requires l1_gamma");
    return detail::run_engine(problem, adversary, opts, seed, observer);
}

/// Classical randomized Kaczmarz (rows drawn with probability |A_r|^2/|A|_F^2).
inline TrialRecord rk_baseline(const LinearProblem& problem, std::uint64_t seed, std::size_t max_iter,
                               const SolveOptions& base = {}, const StepObserver& observer = {}) {
    if (!problem.x_star()) throw InvalidArgument("rk_baseline requires x_star");
    SolveOptions opts = base;
    opts.max_iter = max_iter;
    validate(opts, problem.rows());
    Rng row_rng = Rng(seed).split(stream::rows);
    detail::RowPicker pick(problem);
    const AdversaryConfig none = AdversaryConfig::none(problem.rows(), 1, 1);
    WorkerPopulation pop(none, PoolLayout::Shared, seed);
    detail::Recorder recorder(problem, opts);

    TrialRecord rec;
    rec.seed = seed;
    Vector x = opts.x0 ? *opts.x0 : Vector::Zero(problem.cols());
    Vector x_before;
    recorder.maybe_record(0, x, pop, 0, rec, true);
    std::size_t j = 0;
    for (; j < max_iter; ++j) {
        const std::size_t r = pick(row_rng);
        const auto ri = static_cast<Eigen::Index>(r);
        const double c = (problem.b()[ri] - problem.a().row(ri).dot(x)) / problem.row_norms_sq()[ri];
        if (observer) x_before = x;
        x += c * problem.a().row(ri).transpose();
        if (observer) observer({j + 1, r, c, 0, &x_before, &x});
        recorder.maybe_record(j + 1, x, pop, 0, rec);
    }
    rec.iterations = j;
    recorder.maybe_record(j, x, pop, 0, rec, true);
    rec.x = std::move(x);
    return rec;
}

}  // namespace modekacz
