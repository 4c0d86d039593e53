#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "modekacz/analysis.hpp"
#include "modekacz/harness/config.hpp"
#include "modekacz/harness/reference.hpp"
#include "modekacz/parallel.hpp"

namespace modekacz::harness {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Percentile with linear interpolation between closest ranks (q in [0, 1]).
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidArgument("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
    return values[lo] + frac * (values[hi] - values[lo]);
}

struct SeriesPoint {
    std::size_t iteration = 0;
    double mean = 0.0;
    double p05 = 0.0;
    double median = 0.0;
    double p95 = 0.0;
    std::size_t trials = 0;
};

/// Mean and 5th/50th/95th percentiles of the squared error per checkpoint.
/// Trials that stopped early contribute their last recorded value; non-finite
/// values count as +inf.
inline std::vector<SeriesPoint> aggregate_series(const std::vector<TrialRecord>& trials,
                                                 const std::vector<std::size_t>& grid) {
    std::vector<SeriesPoint> out;
    for (std::size_t it : grid) {
        std::vector<double> v;
        for (const auto& t : trials) {
            double e = t.sq_error_at(it);
            if (!std::isfinite(e)) e = std::numeric_limits<double>::infinity();
            v.push_back(e);
        }
        SeriesPoint s;
        s.iteration = it;
        s.trials = v.size();
        double sum = 0.0;
        for (double e : v) sum += e;
        s.mean = sum / static_cast<double>(v.size());
        s.p05 = percentile(v, 0.05);
        s.median = percentile(v, 0.5);
        s.p95 = percentile(v, 0.95);
        out.push_back(s);
    }
    return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline LinearProblem load_problem(const ExperimentConfig& cfg, const std::filesystem::path& base_dir = {}) {
    if (const auto* s = std::get_if<SyntheticSource>(&cfg.problem)) return make_synthetic_problem(s->rows, s->cols, s->seed);
    const auto& c = std::get<CsvSource>(cfg.problem);
    std::filesystem::path path(c.path);
    if (path.is_relative() && !base_dir.empty() && !std::filesystem::exists(path)) path = base_dir / path;
    return load_csv_problem(path.string(), c.normalize, c.seed);
}

inline AdversaryConfig build_adversary(const ExperimentConfig& cfg, const SweepPoint& pt, std::size_t d1) {
    const int k = static_cast<int>(pt.counts.size()) - 1;
    Matrix e = k == 0 ? Matrix(static_cast<Eigen::Index>(d1), 0)
                      : error_model(cfg.error_rule, cfg.e_inf, k, d1, cfg.error_seed, cfg.base.group_tol);
    return AdversaryConfig::homogeneous(d1, cfg.N_r, pt.n_r, pt.counts, std::move(e));
}

inline SolveOptions point_options(const ExperimentConfig& cfg, const SweepPoint& pt) {
    SolveOptions o = cfg.base;
    o.d0 = pt.d0;
    o.blocklist_enabled = pt.blocklist;
    o.update_cycle = pt.update_cycle;
    if (o.variant == SolverVariant::SingleRowNormWeighted) {
        o.d0 = 1;
        o.layout = PoolLayout::Shared;
    }
    return o;
}

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t point, std::size_t trial) {
    return derive_seed(derive_seed(master, point), trial);
}

inline TrialRecord run_trial(const LinearProblem& problem, const AdversaryConfig& adv, const SolveOptions& o,
                             std::uint64_t seed) {
    if (o.l1_gamma) return solve_l1(problem, adv, o, seed);
    if (o.variant == SolverVariant::SingleRowNormWeighted) return solve_single_row(problem, adv, o, seed);
    return solve_mode_kaczmarz(problem, adv, o, seed);
}

struct PointResult {
    SweepPoint point;
    std::vector<TrialRecord> trials;
    std::vector<SeriesPoint> series;
    std::optional<double> mean_blocklist_accuracy;
    nlohmann::json theory;
};

struct RunSummary {
    std::filesystem::path output_dir;
    std::vector<PointResult> points;
    std::size_t failed_trials = 0;
    std::optional<ComparisonReport> comparison;
};

namespace detail {

inline nlohmann::json theory_for(const LinearProblem& problem, const SweepPoint& pt, const SolveOptions& o) {
    try {
        const auto counts = CategoryCounts::of(pt.n_r, pt.counts);
        const auto dist = mode_distribution(counts);
        nlohmann::json j;
        j["g0"] = dist.g0;
        j["q"] = to_decimal(dist.q, 10);
        j["q0"] = dist.q0;
        if (o.variant == SolverVariant::MultiRowUniform) {
            const auto k = theorem_constants(problem.rows(), o.d0, counts, problem.sigma_min_tilde());
            j["alpha"] = k.alpha;
            j["q_min"] = to_decimal(k.q_min, 10);
            j["beta_t"] = to_decimal(k.beta.front(), 10);
            j["warnings"] = k.warnings;
        }
        return j;
    } catch (const std::exception& ex) {
        return nlohmann::json{{"error", ex.what()}};
    }
}

inline void write_svg(const std::filesystem::path& path, const std::vector<PointResult>& points) {
    const double width = 720, height = 440, left = 70, right = 20, top = 20, bottom = 50;
    double max_it = 1, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : points)
        for (const auto& s : p.series) {
            max_it = std::max(max_it, static_cast<double>(s.iteration));
            for (double v : {s.p05, s.p95, s.mean})
                if (v > 0 && std::isfinite(v)) {
                    lo = std::min(lo, std::log10(v));
                    hi = std::max(hi, std::log10(v));
                }
        }
    if (!std::isfinite(lo)) lo = -1, hi = 0;
    lo = std::floor(lo), hi = std::ceil(hi);
    if (hi <= lo) hi = lo + 1;
    auto px = [&](double it) { return left + it / max_it * (width - left - right); };
    auto py = [&](double v) {
        const double l = std::clamp(std::log10(std::max(v, 1e-300)), lo, hi);
        return top + (hi - l) / (hi - lo) * (height - top - bottom);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    std::ofstream out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
        const double y = py(std::pow(10.0, e));
        out << "<line x1=\"" << left << "\" x2=\"" << width - right << "\" y1=\"" << y << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/><text x=\"4\" y=\"" << y + 4 << "\" font-size=\"11\">1e" << e << "</text>\n";
    }
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 10 << "\" font-size=\"12\">iteration (max "
        << static_cast<std::size_t>(max_it) << ")</text>\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const char* colour = palette[i % 8];
        std::ostringstream band, line;
        for (const auto& s : p.series) band << px(static_cast<double>(s.iteration)) << "," << py(s.p95) << " ";
        for (auto it = p.series.rbegin(); it != p.series.rend(); ++it)
            band << px(static_cast<double>(it->iteration)) << "," << py(it->p05) << " ";
        for (const auto& s : p.series) line << px(static_cast<double>(s.iteration)) << "," << py(s.mean) << " ";
        out << "<polygon points=\"" << band.str() << "\" fill=\"" << colour << "\" fill-opacity=\"0.15\"/>\n";
        out << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << colour << "\"/>\n";
        out << "<text x=\"" << width - 200 << "\" y=\"" << top + 14 * (i + 1) << "\" font-size=\"11\" fill=\"" << colour
            << "\">p=" << p.point.p << " k=" << p.point.k << " n=" << p.point.n_r << " d0=" << p.point.d0
            << (p.point.blocklist ? " bl S=" + std::to_string(p.point.update_cycle) : std::string(" no bl")) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace detail

/// Runs every sweep point for cfg.trials seeded trials and writes
/// trials.csv, trial_summary.csv, aggregate.csv, manifest.json and optionally
/// error.svg and comparison.csv into the output directory.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& base_dir = {},
                                 std::optional<std::filesystem::path> output_override = std::nullopt) {
    const LinearProblem problem = load_problem(cfg, base_dir);
    const auto points = expand_sweeps(cfg);
    RunSummary summary;
    summary.output_dir = output_override ? *output_override : std::filesystem::path(cfg.output_dir);
    std::filesystem::create_directories(summary.output_dir);
    const std::size_t threads = cfg.threads ? cfg.threads : default_threads();

    for (const auto& pt : points) {
        const SolveOptions o = point_options(cfg, pt);
        validate(o, problem.rows());
        const AdversaryConfig adv = build_adversary(cfg, pt, problem.rows());
        PointResult res;
        res.point = pt;
        res.trials.resize(cfg.trials);
        parallel_for(cfg.trials, threads, [&](std::size_t t) {
            res.trials[t] = run_trial(problem, adv, o, trial_seed(cfg.seed, pt.index, t));
        });
        const auto grid = o.checkpoints.empty() ? geometric_checkpoints(o.max_iter) : o.checkpoints;
        res.series = aggregate_series(res.trials, grid);
        double acc = 0.0;
        std::size_t with_blocks = 0;
        for (const auto& t : res.trials) {
            if (t.failed()) ++summary.failed_trials;
            if (t.blocklist_accuracy) {
                acc += *t.blocklist_accuracy;
                ++with_blocks;
            }
        }
        if (with_blocks) res.mean_blocklist_accuracy = acc / static_cast<double>(with_blocks);
        res.theory = detail::theory_for(problem, pt, o);
        summary.points.push_back(std::move(res));
    }

    const auto dir = summary.output_dir;
    auto params = [](const SweepPoint& p) {
        return std::to_string(p.index) + "," + std::to_string(p.k) + "," + format_double(p.p) + "," +
               std::to_string(p.n_r) + "," + std::to_string(p.d0) + "," + (p.blocklist ? "1" : "0") + "," +
               std::to_string(p.update_cycle);
    };
    const std::string param_header = "point,k,p,n_r,d0,blocklist,update_cycle";
    {
        std::ofstream out(dir / "trials.csv");
        out << param_header
            << ",trial,seed,iteration,sq_error,residual_norm,no_mode_count,blocked_count,objective,reference_distance\n";
        for (const auto& r : summary.points)
            for (std::size_t t = 0; t < r.trials.size(); ++t)
                for (const auto& c : r.trials[t].checkpoints)
                    out << params(r.point) << "," << t << "," << r.trials[t].seed << "," << c.iteration << ","
                        << format_double(c.sq_error) << "," << format_double(c.residual_norm) << "," << c.no_mode_count
                        << "," << c.blocked_count << "," << (c.objective ? format_double(*c.objective) : "") << ","
                        << (c.reference_distance ? format_double(*c.reference_distance) : "") << "\n";
    }
    {
        std::ofstream out(dir / "trial_summary.csv");
        out << param_header
            << ",trial,seed,status,iterations,final_sq_error,no_mode_count,blocked,blocklist_accuracy,failure\n";
        for (const auto& r : summary.points)
            for (std::size_t t = 0; t < r.trials.size(); ++t) {
                const auto& tr = r.trials[t];
                out << params(r.point) << "," << t << "," << tr.seed << "," << to_string(tr.status) << ","
                    << tr.iterations << "," << format_double(tr.final_sq_error()) << "," << tr.no_mode_count << ","
                    << tr.block_list.size() << ","
                    << (tr.blocklist_accuracy ? format_double(*tr.blocklist_accuracy) : "") << ",\"" << tr.failure
                    << "\"\n";
            }
    }
    {
        std::ofstream out(dir / "aggregate.csv");
        out << param_header << ",iteration,mean_sq_error,p05,median,p95,trials\n";
        for (const auto& r : summary.points)
            for (const auto& s : r.series)
                out << params(r.point) << "," << s.iteration << "," << format_double(s.mean) << ","
                    << format_double(s.p05) << "," << format_double(s.median) << "," << format_double(s.p95) << ","
                    << s.trials << "\n";
    }
    if (cfg.svg) detail::write_svg(dir / "error.svg", summary.points);

    if (cfg.reference_table) {
        std::map<std::string, double> measured;
        if (*cfg.reference_table != "table6")
            throw ConfigError("reference_table", "only table6 is produced by solver runs; use the compare command");
        for (const auto& r : summary.points) {
            if (!r.point.blocklist || !r.mean_blocklist_accuracy) continue;
            char key[64];
            std::snprintf(key, sizeof key, "p=%.1f,d0=%zu/S=%zu", r.point.p, r.point.d0, r.point.update_cycle);
            measured[key] = *r.mean_blocklist_accuracy;
        }
        summary.comparison = compare_to_reference(measured, *cfg.reference_table);
        std::ofstream out(dir / "comparison.csv");
        out << "table,cell,expected,actual,delta,allowed,pass,note\n";
        for (const auto& c : summary.comparison->cells)
            out << summary.comparison->table << "," << c.key << "," << format_double(c.expected) << ","
                << (c.actual ? format_double(*c.actual) : "") << "," << format_double(c.delta) << ","
                << format_double(c.allowed) << "," << (c.pass ? "1" : "0") << "," << c.note << "\n";
    }

    nlohmann::json manifest;
    manifest["name"] = cfg.name;
    manifest["config"] = cfg.source;
    manifest["config_hash"] = hex(fnv1a(cfg.source.dump()));
    manifest["seed"] = cfg.seed;
    manifest["trials"] = cfg.trials;
    manifest["problem"] = to_json(problem);
    manifest["error_rule"] = to_string(cfg.error_rule);
    manifest["e_inf"] = cfg.e_inf;
    manifest["error_seed"] = cfg.error_seed;
    manifest["seed_derivation"] = "trial seed = derive_seed(derive_seed(seed, point), trial)";
    manifest["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"boost", BOOST_LIB_VERSION},
                            {"compiler", __VERSION__},
                            {"cplusplus", __cplusplus}};
    for (const auto& r : summary.points) {
        nlohmann::json p;
        p["index"] = r.point.index;
        p["k"] = r.point.k;
        p["p"] = r.point.p;
        p["n_r"] = r.point.n_r;
        p["N_r"] = cfg.N_r;
        p["counts"] = r.point.counts;
        p["d0"] = r.point.d0;
        p["blocklist"] = r.point.blocklist;
        p["update_cycle"] = r.point.update_cycle;
        std::vector<std::uint64_t> seeds;
        for (const auto& t : r.trials) seeds.push_back(t.seed);
        p["seeds"] = seeds;
        p["theory"] = r.theory;
        if (r.mean_blocklist_accuracy) p["mean_blocklist_accuracy"] = *r.mean_blocklist_accuracy;
        manifest["points"].push_back(p);
    }
    manifest["failed_trials"] = summary.failed_trials;
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
    return summary;
}

}  // namespace modekacz::harness
