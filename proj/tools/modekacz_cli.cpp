#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "modekacz/modekacz.hpp"

namespace fs = std::filesystem;
using namespace modekacz;
using namespace modekacz::harness;

namespace {

struct CountsArgs {
    int N = 0;
    int n = 0;
    std::vector<int> counts;
    double p = -1.0;
    int k = -1;

    void add(CLI::App* app) {
        app->add_option("--N", N, "workers holding the row")->required();
        app->add_option("--n", n, "workers queried per row")->required();
        app->add_option("--counts", counts, "category sizes, reliable first")->delimiter(',');
        app->add_option("--p", p, "adversarial rate (with --k; sizes N p / k may be fractional)");
        app->add_option("--k", k, "number of error categories");
    }

    [[nodiscard]] CategoryCounts resolve() const {
        if (!counts.empty()) {
            if (p >= 0 || k >= 0) throw InvalidArgument("give --counts or --p/--k, not both");
            const CategoryCounts c = CategoryCounts::of(n, counts);
            if (c.total() != N) throw InvalidArgument("--counts must sum to --N");
            return c;
        }
        if (p < 0 || k < 0) throw InvalidArgument("need --counts or both --p and --k");
        // Decimal p read as an exact rational with up to six digits.
        const Rational rp(static_cast<long long>(std::llround(p * 1e6)), 1000000LL);
        if (k == 0) return CategoryCounts::of(n, {N});
        return CategoryCounts::uniform_split(N, n, rp, k);
    }
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << content;
}

int print_report(const ComparisonReport& report, const fs::path& out_dir) {
    std::ostringstream csv;
    csv << "table,cell,expected,actual,delta,allowed,pass,note\n";
    for (const auto& c : report.cells) {
        csv << report.table << "," << c.key << "," << format_double(c.expected) << ","
            << (c.actual ? format_double(*c.actual) : "") << "," << format_double(c.delta) << ","
            << format_double(c.allowed) << "," << (c.pass ? "1" : "0") << "," << c.note << "\n";
        std::printf("%-4s %-22s expected %-11.4g actual %-13s delta %+.3g%s%s\n", c.pass ? "ok" : "FAIL",
                    c.key.c_str(), c.expected, c.actual ? format_double(*c.actual).substr(0, 12).c_str() : "-",
                    c.delta, c.note.empty() ? "" : "  ", c.note.c_str());
    }
    write_file(out_dir / ("compare_" + report.table + ".csv"), csv.str());
    std::printf("%s: %zu of %zu cells failed\n", report.table.c_str(), report.failures(), report.cells.size());
    return report.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mode-aggregated distributed randomized Kaczmarz"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    std::size_t threads = 0;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "master seed");
    app.add_option("--trials", trials, "trial count (overrides config or default)");
    app.add_option("--threads", threads, "worker threads (0: hardware concurrency)");
    app.add_option("--out", out_dir, "output directory");

    auto* solve = app.add_subcommand("solve", "run an experiment config");
    std::string config_path;
    solve->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);

    auto* analyze = app.add_subcommand("analyze", "exact mode law and convergence constants");
    CountsArgs analyze_counts;
    analyze_counts.add(analyze);
    std::size_t d1 = 0, d0 = 1;
    double sigma = 0.0;
    int precision = 8;
    analyze->add_option("--d1", d1, "row count for the multi-row constants");
    analyze->add_option("--d0", d0, "rows used per iteration");
    analyze->add_option("--sigma", sigma, "smallest singular value of the row-normalized matrix");
    analyze->add_option("--precision", precision, "significant digits for exact values");

    auto* mc = app.add_subcommand("blocklist-mc", "Monte Carlo block-list probabilities");
    int mc_N = 5, mc_n = 3;
    std::vector<int> mc_counts{3, 2};
    std::vector<std::size_t> mc_S{5, 10, 50, 100};
    mc->add_option("--N", mc_N, "pool size");
    mc->add_option("--n", mc_n, "workers queried per iteration");
    mc->add_option("--counts", mc_counts, "category sizes, reliable first")->delimiter(',');
    mc->add_option("--S", mc_S, "iterations before the block-list update")->delimiter(',');

    auto* compare = app.add_subcommand("compare", "recompute a published table and compare cell by cell");
    std::string table_id;
    std::string layout = "per_row";
    std::size_t max_iter = 30000;
    compare->add_option("table", table_id, "table1, table3, table4, table5 or table6")->required();
    compare->add_option("--layout", layout, "table6 worker layout: per_row or shared");
    compare->add_option("--max-iter", max_iter, "table6 iteration budget");

    auto* scan = app.add_subcommand("scan-d0", "contraction factor against d0 for identical rows");
    CountsArgs scan_counts;
    scan_counts.add(scan);
    std::size_t scan_d1 = 0, from = 1, to = 10;
    double scan_sigma = 1.0;
    scan->add_option("--d1", scan_d1, "row count")->required();
    scan->add_option("--sigma", scan_sigma, "smallest singular value of the row-normalized matrix");
    scan->add_option("--from", from, "smallest d0");
    scan->add_option("--to", to, "largest d0");

    CLI11_PARSE(app, argc, argv);
    const fs::path out(out_dir);

    try {
        if (*solve) {
            ExperimentConfig cfg = load_config(config_path);
            if (app.count("--seed")) cfg.seed = seed;
            if (trials) cfg.trials = trials;
            if (threads) cfg.threads = threads;
            const auto summary = run_experiment(cfg, fs::path(config_path).parent_path(),
                                                app.count("--out") ? std::optional<fs::path>(out) : std::nullopt);
            for (const auto& p : summary.points) {
                const auto& last = p.series.back();
                std::printf("point %zu  k=%d p=%g n_r=%d d0=%zu blocklist=%d S=%zu  median sq error at %zu: %.3e\n",
                            p.point.index, p.point.k, p.point.p, p.point.n_r, p.point.d0, p.point.blocklist ? 1 : 0,
                            p.point.update_cycle, last.iteration, last.median);
            }
            std::printf("failed trials: %zu\nwrote %s\n", summary.failed_trials, summary.output_dir.c_str());
            if (summary.comparison) return print_report(*summary.comparison, summary.output_dir);
            return 0;
        }
        if (*analyze) {
            const auto c = analyze_counts.resolve();
            const auto d = mode_distribution(c);
            std::ostringstream law, sum;
            law << "g,category,probability\n";
            for (int g = 1; g <= c.n; ++g)
                for (int l = 0; l <= c.k(); ++l) law << g << "," << l << "," << to_decimal(mode_prob(c, g, l), precision) << "\n";
            sum << "quantity,value\n";
            sum << "g0," << d.g0 << "\n";
            for (int l = 0; l <= c.k(); ++l) sum << "q_hat_" << l << "," << to_decimal(d.q_hat[l], precision) << "\n";
            sum << "q," << to_decimal(d.q, precision) << "\n";
            sum << "q0," << format_double(d.q0) << "\n";
            if (d1) {
                const auto k = theorem_constants(d1, d0, c, sigma);
                sum << "Q_min," << to_decimal(k.q_min, precision) << "\n";
                sum << "beta_t," << to_decimal(k.beta.front(), precision) << "\n";
                sum << "alpha," << format_double(k.alpha) << "\n";
                for (const auto& w : k.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            }
            write_file(out / "mode_law.csv", law.str());
            write_file(out / "summary.csv", sum.str());
            std::cout << sum.str();
            return 0;
        }
        if (*mc) {
            std::ostringstream csv;
            csv << "S,category,estimate,std_error,conditional,trials\n";
            for (std::size_t S : mc_S) {
                const auto est = estimate_blocklist_probs({mc_N, mc_n, mc_counts, S, trials ? trials : 10000, seed, threads});
                for (std::size_t l = 0; l < est.per_category.size(); ++l)
                    csv << S << "," << l << "," << format_double(est.per_category[l].value) << ","
                        << format_double(est.per_category[l].std_error) << "," << format_double(est.conditional[l])
                        << "," << est.trials << "\n";
            }
            write_file(out / "blocklist_mc.csv", csv.str());
            std::cout << csv.str();
            return 0;
        }
        if (*compare) {
            std::map<std::string, double> measured;
            if (table_id == "table1") measured = compute_table1();
            else if (table_id == "table3") measured = compute_table3(trials ? trials : 10000, seed, threads);
            else if (table_id == "table4") measured = compute_table4();
            else if (table_id == "table5") measured = compute_table5();
            else if (table_id == "table6") {
                Table6Setup s;
                s.trials = trials ? trials : 20;
                s.seed = seed;
                s.threads = threads;
                s.max_iter = max_iter;
                if (layout == "shared") s.layout = PoolLayout::Shared;
                else if (layout != "per_row") throw InvalidArgument("--layout must be per_row or shared");
                measured = compute_table6(s);
            } else {
                reference_table(table_id);  // throws with the list of known ids
            }
            return print_report(compare_to_reference(measured, table_id), out);
        }
        if (*scan) {
            const auto c = scan_counts.resolve();
            const auto result = scan_d0(c, scan_d1, scan_sigma, from, std::min(to, scan_d1));
            std::ostringstream csv;
            csv << "d0,Q,alpha,dalpha_dd0\n";
            for (const auto& r : result.rows)
                csv << r.d0 << "," << to_decimal(r.q, 10) << "," << format_double(r.alpha) << ","
                    << format_double(r.derivative) << "\n";
            write_file(out / "scan_d0.csv", csv.str());
            std::cout << csv.str();
            std::printf("best integer d0: %zu\n", result.best_d0);
            if (result.stationary_d0)
                std::printf("stationary d0 (g0 = n): %.6f, derivative there %.3e\n", *result.stationary_d0,
                            *result.derivative_at_stationary);
            return 0;
        }
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return 0;
}
