#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modekacz/errors.hpp"

namespace modekacz::harness {

enum class Tolerance {
    SignificantFigures,  // |actual - expected| <= half a unit in the third significant figure of expected
    Absolute,            // |actual - expected| <= amount
    AtMost,              // actual <= amount
};

struct ReferenceCell {
    std::string key;  // "<row>/<column>", e.g. "p=0.8,k=5/q0"
    double expected = 0.0;
    Tolerance tolerance = Tolerance::Absolute;
    double amount = 0.0;
};

struct ReferenceTable {
    std::string id;
    std::string description;
    std::vector<ReferenceCell> cells;
};

namespace detail {

inline std::vector<ReferenceCell> mode_table_cells(const std::string& row, double q_hat_l, double q_hat_0, double q,
                                                   double q0) {
    return {{row + "/q_hat_l", q_hat_l, Tolerance::Absolute, 0.005},
            {row + "/q_hat_0", q_hat_0, Tolerance::Absolute, 0.005},
            {row + "/q", q, Tolerance::Absolute, 0.005},
            {row + "/q0", q0, Tolerance::Absolute, 0.005}};
}

inline void append(std::vector<ReferenceCell>& out, std::vector<ReferenceCell> more) {
    out.insert(out.end(), more.begin(), more.end());
}

}  // namespace detail

/// Published values, keyed by the quantities each cell depends on.
inline const std::map<std::string, ReferenceTable>& reference_tables() {
    static const std::map<std::string, ReferenceTable> tables = [] {
        std::map<std::string, ReferenceTable> t;
        constexpr auto sf = Tolerance::SignificantFigures;
        t["table1"] = {"table1",
                       "N=10, n=5, k=3, p=0.6, d1=10: Q and beta_t against d0",
                       {{"d0=2/Q", 4.25e-3, sf, 3},
                        {"d0=2/beta", 8.5e-4, sf, 3},
                        {"d0=3/Q", 3.3e-4, sf, 3},
                        {"d0=3/beta", 9.9e-5, sf, 3},
                        {"d0=5/Q", 3.63e-6, sf, 3},
                        {"d0=5/beta", 1.82e-6, sf, 3}}};

        std::vector<ReferenceCell> t3{{"S=5/P_bl_1", 0.403, Tolerance::Absolute, 0.08},
                                      {"S=5/P_bl_0", 0.065, Tolerance::Absolute, 0.05},
                                      {"S=10/P_bl_1", 0.452, Tolerance::Absolute, 0.08},
                                      {"S=10/P_bl_0", 0.032, Tolerance::Absolute, 0.05},
                                      {"S=50/P_bl_1", 0.5, Tolerance::Absolute, 0.05},
                                      {"S=50/P_bl_0", 0.02, Tolerance::AtMost, 0.02},
                                      {"S=100/P_bl_1", 0.5, Tolerance::Absolute, 0.05},
                                      {"S=100/P_bl_0", 0.02, Tolerance::AtMost, 0.02}};
        t["table3"] = {"table3", "N=5 (3 reliable, 2 adversarial), n=3: block-list probability per worker", t3};

        std::vector<ReferenceCell> t4;
        detail::append(t4, detail::mode_table_cells("p=0.8,k=5", 0.1, 0.16, 0.67, 0.15));
        detail::append(t4, detail::mode_table_cells("p=0.8,k=10", 0.04, 0.21, 0.57, 0.36));
        detail::append(t4, detail::mode_table_cells("p=0.8,k=15", 0.02, 0.23, 0.48, 0.46));
        detail::append(t4, detail::mode_table_cells("p=0.2,k=3", 0.002, 0.63, 0.64, 0.98));
        detail::append(t4, detail::mode_table_cells("p=0.2,k=5", 8e-4, 0.65, 0.65, 0.99));
        detail::append(t4, detail::mode_table_cells("p=0.2,k=10", 2e-4, 0.66, 0.67, 0.99));
        detail::append(t4, detail::mode_table_cells("p=0.2,k=15", 2e-4, 0.685, 0.689, 0.99));
        t["table4"] = {"table4", "N=100, n=5: single-row mode law against k", t4};

        std::vector<ReferenceCell> t5;
        detail::append(t5, detail::mode_table_cells("p=0.8,n=10", 0.099, 0.18, 0.67, 0.26));
        detail::append(t5, detail::mode_table_cells("p=0.8,n=15", 0.099, 0.2, 0.7, 0.29));
        detail::append(t5, detail::mode_table_cells("p=0.8,n=20", 0.097, 0.23, 0.71, 0.31));
        detail::append(t5, detail::mode_table_cells("p=0.2,n=10", 7e-6, 0.904, 0.90, 1 - 5e-6));
        detail::append(t5, detail::mode_table_cells("p=0.2,n=15", 5e-7, 0.97, 0.97, 1 - 3e-6));
        detail::append(t5, detail::mode_table_cells("p=0.2,n=20", 1e-7, 0.99, 0.99, 1 - 6e-7));
        t["table5"] = {"table5", "N=100, k=5: single-row mode law against n", t5};

        std::vector<ReferenceCell> t6;
        const std::vector<std::size_t> cycles{200, 500, 1000, 2000};
        const std::vector<double> high{0.75, 0.792, 0.875, 0.875}, mid{0.75, 0.9375, 1.0, 1.0};
        for (std::size_t i = 0; i < cycles.size(); ++i) {
            t6.push_back({"p=0.6,d0=8/S=" + std::to_string(cycles[i]), high[i], Tolerance::Absolute, 0.1});
            t6.push_back({"p=0.4,d0=6/S=" + std::to_string(cycles[i]), mid[i], Tolerance::Absolute, 0.1});
        }
        t["table6"] = {"table6", "k=3, N_r=20, n_r=4: block-list accuracy against update cycle S", t6};
        return t;
    }();
    return tables;
}

inline const ReferenceTable& reference_table(const std::string& id) {
    const auto& all = reference_tables();
    const auto it = all.find(id);
    if (it == all.end()) throw InvalidArgument("unknown reference table '" + id + "'");
    return it->second;
}

struct CellComparison {
    std::string key;
    double expected = 0.0;
    std::optional<double> actual;
    double delta = 0.0;  // actual - expected
    double allowed = 0.0;
    bool pass = false;
    std::string note;
};

struct ComparisonReport {
    std::string table;
    std::vector<CellComparison> cells;

    [[nodiscard]] bool pass() const {
        return !cells.empty() && std::all_of(cells.begin(), cells.end(), [](const CellComparison& c) { return c.pass; });
    }
    [[nodiscard]] std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const CellComparison& c) { return !c.pass; }));
    }
};

inline double significant_figure_slack(double expected, int figures) {
    if (expected == 0.0) return 0.0;
    const double unit = std::pow(10.0, std::floor(std::log10(std::abs(expected))) - (figures - 1));
    return 0.5 * unit * (1.0 + 1e-9);
}

/// Checks measured values against a stored table. Cells absent from `actual`
/// fail with "no data".
inline ComparisonReport compare_to_reference(const std::map<std::string, double>& actual, const std::string& table_id) {
    const auto& table = reference_table(table_id);
    ComparisonReport report{table_id, {}};
    for (const auto& cell : table.cells) {
        CellComparison c;
        c.key = cell.key;
        c.expected = cell.expected;
        const auto it = actual.find(cell.key);
        if (it == actual.end()) {
            c.note = "no data";
            report.cells.push_back(c);
            continue;
        }
        c.actual = it->second;
        c.delta = it->second - cell.expected;
        switch (cell.tolerance) {
            case Tolerance::SignificantFigures:
                c.allowed = significant_figure_slack(cell.expected, static_cast<int>(cell.amount));
                c.pass = std::abs(c.delta) <= c.allowed;
                break;
            case Tolerance::Absolute:
                c.allowed = cell.amount;
                c.pass = std::abs(c.delta) <= c.allowed;
                break;
            case Tolerance::AtMost:
                c.allowed = cell.amount;
                c.pass = it->second <= cell.amount;
                c.note = "upper bound";
                break;
        }
        if (!std::isfinite(it->second)) {
            c.pass = false;
            c.note = "non-finite";
        }
        report.cells.push_back(c);
    }
    return report;
}

}  // namespace modekacz::harness
