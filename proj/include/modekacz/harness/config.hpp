#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "modekacz/errors.hpp"
#include "modekacz/harness/adversary.hpp"
#include "modekacz/solver.hpp"

namespace modekacz::harness {

/// Schema violation; `path` locates the offending field, e.g. "solver.d0[2]".
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string path, const std::string& what)
        : InvalidArgument(path + ": " + what), path_(std::move(path)) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

struct SyntheticSource {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint64_t seed = 0;
};

struct CsvSource {
    std::string path;
    bool normalize = true;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::variant<SyntheticSource, CsvSource> problem;

    // Adversary block; list-valued fields are sweeps.
    std::vector<int> k{3};
    std::vector<double> p{0.0};
    std::optional<std::vector<double>> fractions;  // explicit p_1..p_k, overrides p and k
    int N_r = 20;
    std::vector<int> n_r{4};
    double e_inf = 1e-3;
    ErrorRule error_rule = ErrorRule::FixedMagnitude;
    std::uint64_t error_seed = 0;

    // Solver block.
    std::vector<std::size_t> d0{1};
    std::vector<bool> blocklist{false};
    std::vector<std::size_t> update_cycle{200};
    SolveOptions base;

    std::size_t trials = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::string output_dir = "out";
    bool svg = false;
    std::optional<std::string> reference_table;

    nlohmann::json source;  // the parsed document, for the manifest
};

/// One point of the sweep grid.
struct SweepPoint {
    std::size_t index = 0;
    int k = 0;
    double p = 0.0;
    int n_r = 0;
    std::size_t d0 = 1;
    bool blocklist = false;
    std::size_t update_cycle = 200;
    std::vector<int> counts;
};

namespace detail {

class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    [[nodiscard]] std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    [[nodiscard]] const nlohmann::json& at(const std::string& key) const { return j_.at(key); }

    void reject_unknown(std::initializer_list<const char*> known) const {
        for (const auto& [key, value] : j_.items()) {
            if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
                throw ConfigError(child(key), "unknown field");
        }
    }

    template <class T>
    T get(const std::string& key, std::optional<T> fallback = std::nullopt) const {
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(child(key), "required field missing");
        }
        return convert<T>(j_.at(key), child(key));
    }

    /// Scalar or non-empty list.
    template <class T>
    std::vector<T> list(const std::string& key, std::vector<T> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        std::vector<T> out;
        if (v.is_array()) {
            if (v.empty()) throw ConfigError(child(key), "sweep list must not be empty");
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<T>(v[i], child(key) + "[" + std::to_string(i) + "]"));
        } else {
            out.push_back(convert<T>(v, child(key)));
        }
        return out;
    }

    template <class T>
    static T convert(const nlohmann::json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned() || v.get<long long>() >= 0) return v.get<T>();
                throw ConfigError(path, "expected a non-negative integer");
            } else {
                return v.get<T>();
            }
        } else {
            if (!v.is_number()) throw ConfigError(path, "expected a number");
            return v.get<T>();
        }
    }

private:
    const nlohmann::json& j_;
    std::string path_;
};

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& doc) {
    using detail::Reader;
    Reader root(doc, "");
    root.reject_unknown({"name", "problem", "adversary", "solver", "trials", "seed", "threads", "checkpoints",
                         "output_dir", "svg", "reference_table"});
    ExperimentConfig cfg;
    cfg.source = doc;
    cfg.name = root.get<std::string>("name", std::string("experiment"));

    if (!root.has("problem")) throw ConfigError("problem", "required field missing");
    Reader problem(root.at("problem"), "problem");
    problem.reject_unknown({"synthetic", "csv"});
    if (problem.has("synthetic") == problem.has("csv"))
        throw ConfigError("problem", "exactly one of synthetic or csv is required");
    if (problem.has("synthetic")) {
        Reader s(problem.at("synthetic"), "problem.synthetic");
        s.reject_unknown({"rows", "cols", "seed"});
        cfg.problem = SyntheticSource{s.get<std::size_t>("rows"), s.get<std::size_t>("cols"),
                                      s.get<std::uint64_t>("seed", std::uint64_t{0})};
    } else {
        Reader c(problem.at("csv"), "problem.csv");
        c.reject_unknown({"path", "normalize", "seed"});
        cfg.problem = CsvSource{c.get<std::string>("path"), c.get<bool>("normalize", true),
                                c.get<std::uint64_t>("seed", std::uint64_t{0})};
    }

    if (root.has("adversary")) {
        Reader a(root.at("adversary"), "adversary");
        a.reject_unknown({"k", "p", "fractions", "N_r", "n_r", "e_inf", "error_rule", "error_seed"});
        cfg.k = a.list<int>("k", cfg.k);
        cfg.p = a.list<double>("p", cfg.p);
        if (a.has("fractions")) {
            if (!a.at("fractions").is_array()) throw ConfigError("adversary.fractions", "expected a list");
            cfg.fractions = a.list<double>("fractions", {});
            if (a.has("p") || a.has("k"))
                throw ConfigError("adversary.fractions", "give either fractions or p and k, not both");
        }
        cfg.N_r = a.get<int>("N_r", cfg.N_r);
        cfg.n_r = a.list<int>("n_r", cfg.n_r);
        cfg.e_inf = a.get<double>("e_inf", cfg.e_inf);
        try {
            cfg.error_rule = parse_error_rule(a.get<std::string>("error_rule", std::string("fixed")));
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidArgument& ex) {
            throw ConfigError("adversary.error_rule", ex.what());
        }
        cfg.error_seed = a.get<std::uint64_t>("error_seed", std::uint64_t{0});
        for (std::size_t i = 0; i < cfg.p.size(); ++i)
            if (!(cfg.p[i] >= 0.0 && cfg.p[i] < 1.0)) throw ConfigError("adversary.p[" + std::to_string(i) + "]", "must lie in [0, 1)");
        if (cfg.N_r < 1) throw ConfigError("adversary.N_r", "must be positive");
    }

    if (root.has("solver")) {
        Reader s(root.at("solver"), "solver");
        s.reject_unknown({"d0", "max_iter", "tol", "blocklist", "update_cycle", "strategy", "group_tol", "variant",
                          "layout", "l1_gamma", "l1_step"});
        cfg.d0 = s.list<std::size_t>("d0", cfg.d0);
        cfg.blocklist = s.list<bool>("blocklist", cfg.blocklist);
        cfg.update_cycle = s.list<std::size_t>("update_cycle", cfg.update_cycle);
        cfg.base.max_iter = s.get<std::size_t>("max_iter", cfg.base.max_iter);
        cfg.base.tol = s.get<double>("tol", cfg.base.tol);
        cfg.base.group_tol = s.get<double>("group_tol", cfg.base.group_tol);
        const auto strategy = s.get<std::string>("strategy", std::string("max_residual"));
        if (strategy == "max_residual") cfg.base.strategy = RowStrategy::MaxResidual;
        else if (strategy == "max_mode_size") cfg.base.strategy = RowStrategy::MaxModeSize;
        else throw ConfigError("solver.strategy", "expected max_residual or max_mode_size");
        const auto variant = s.get<std::string>("variant", std::string("multi_row"));
        if (variant == "multi_row") cfg.base.variant = SolverVariant::MultiRowUniform;
        else if (variant == "single_row") cfg.base.variant = SolverVariant::SingleRowNormWeighted;
        else throw ConfigError("solver.variant", "expected multi_row or single_row");
        const auto layout = s.get<std::string>("layout", std::string("per_row"));
        if (layout == "per_row") cfg.base.layout = PoolLayout::PerRow;
        else if (layout == "shared") cfg.base.layout = PoolLayout::Shared;
        else throw ConfigError("solver.layout", "expected per_row or shared");
        if (s.has("l1_gamma")) cfg.base.l1_gamma = s.get<double>("l1_gamma");
        cfg.base.l1_step = s.get<double>("l1_step", cfg.base.l1_step);
        if (!(cfg.base.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
        for (std::size_t i = 0; i < cfg.d0.size(); ++i)
            if (cfg.d0[i] < 1) throw ConfigError("solver.d0[" + std::to_string(i) + "]", "must be >= 1");
        for (std::size_t i = 0; i < cfg.update_cycle.size(); ++i)
            if (cfg.update_cycle[i] < 1) throw ConfigError("solver.update_cycle[" + std::to_string(i) + "]", "must be >= 1");
    }

    if (root.has("checkpoints")) {
        const auto& c = root.at("checkpoints");
        if (c.is_string()) {
            if (c.get<std::string>() != "geometric") throw ConfigError("checkpoints", "expected \"geometric\" or a list");
        } else {
            cfg.base.checkpoints = root.list<std::size_t>("checkpoints", {});
        }
    }
    cfg.trials = root.get<std::size_t>("trials", std::size_t{1});
    if (cfg.trials < 1) throw ConfigError("trials", "must be >= 1");
    cfg.seed = root.get<std::uint64_t>("seed", std::uint64_t{0});
    cfg.threads = root.get<std::size_t>("threads", std::size_t{0});
    cfg.output_dir = root.get<std::string>("output_dir", cfg.output_dir);
    cfg.svg = root.get<bool>("svg", false);
    if (root.has("reference_table")) cfg.reference_table = root.get<std::string>("reference_table");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("<root>", std::string("malformed JSON: ") + ex.what());
    }
    return parse_config(doc);
}

/// Cartesian product of the sweep lists, in k, p, n_r, d0, blocklist, S order.
inline std::vector<SweepPoint> expand_sweeps(const ExperimentConfig& cfg) {
    std::vector<SweepPoint> out;
    const std::vector<int> ks = cfg.fractions ? std::vector<int>{static_cast<int>(cfg.fractions->size())} : cfg.k;
    const std::vector<double> ps = cfg.fractions ? std::vector<double>{-1.0} : cfg.p;
    for (int k : ks)
        for (double p : ps)
            for (int n : cfg.n_r)
                for (std::size_t d0 : cfg.d0)
                    for (bool bl : cfg.blocklist)
                        for (std::size_t S : cfg.update_cycle) {
                            SweepPoint pt{out.size(), k, p, n, d0, bl, S, {}};
                            if (cfg.fractions) {
                                pt.counts = {cfg.N_r};
                                double total = 0.0;
                                for (std::size_t l = 0; l < cfg.fractions->size(); ++l) {
                                    const double m = (*cfg.fractions)[l] * cfg.N_r;
                                    if (std::abs(m - std::round(m)) > 1e-9)
                                        throw ConfigError("adversary.fractions[" + std::to_string(l) + "]",
                                                          "N_r times the fraction is not a whole worker count");
                                    pt.counts.push_back(static_cast<int>(std::lround(m)));
                                    pt.counts[0] -= pt.counts.back();
                                    total += (*cfg.fractions)[l];
                                }
                                pt.p = total;
                            } else {
                                try {
                                    pt.counts = split_adversaries(cfg.N_r, p, k);
                                } catch (const InvalidArgument& ex) {
                                    throw ConfigError("adversary", ex.what());
                                }
                            }
                            out.push_back(std::move(pt));
                        }
    return out;
}

}  // namespace modekacz::harness
