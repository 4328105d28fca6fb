// Command-line driver: single runs, sweeps, Monte Carlo, coverage, complexity
// and oracle comparisons. Tables go to CSV (stdout or --out) and optionally
// to JSON with the same rows.

#include "vwn/vwn.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

using json = nlohmann::json;
using namespace vwn;

namespace {

using Cell = std::variant<std::string, double, long long>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) os << ',';
                std::visit([&](const auto& v) { os << v; }, r[i]);
            }
            os << '\n';
        }
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& r : rows) {
            json o;
            for (std::size_t i = 0; i < r.size(); ++i) std::visit([&](const auto& v) { o[columns[i]] = v; }, r[i]);
            arr.push_back(std::move(o));
        }
        return arr;
    }
};

struct Output {
    std::string csv_path;
    std::string json_path;

    void emit(const Table& t) const {
        if (csv_path.empty()) {
            std::cout.precision(10);
            t.write_csv(std::cout);
        } else {
            std::ofstream os(csv_path);
            if (!os) throw std::runtime_error("cannot write " + csv_path);
            os.precision(10);
            t.write_csv(os);
        }
        if (!json_path.empty()) {
            std::ofstream js(json_path);
            if (!js) throw std::runtime_error("cannot write " + json_path);
            js << t.to_json().dump(2) << '\n';
        }
    }
};

/// Config file first, then --set pairs, then the per-key flags.
struct Settings {
    std::string config_path;
    std::vector<std::string> set_pairs;
    std::map<std::string, std::string> flags;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "key = value experiment file")->check(CLI::ExistingFile);
        app.add_option("--set", set_pairs, "override as key=value (repeatable)");
        for (const auto& key : config_keys()) {
            std::string flag = key;
            for (char& c : flag) c = c == '_' ? '-' : c;
            app.add_option("--" + flag, flags[key], "override " + key);
        }
    }

    ExperimentConfig resolve(ExperimentConfig cfg) const {
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (const auto& kv : set_pairs) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        for (const auto& [k, v] : flags) {
            if (!v.empty()) apply_setting(cfg, k, v);
        }
        cfg.scenario.validate();
        return cfg;
    }
};

json allocation_json(const NetworkInstance& inst, const AllocationResult& r) {
    json beta = json::array(), power = json::array();
    for (std::size_t m = 0; m < inst.num_bs; ++m) {
        for (std::size_t k = 0; k < inst.num_carriers; ++k) {
            for (std::size_t n = 0; n < inst.num_users(); ++n) {
                if (r.beta.beta(m, k, n) < 0.5) continue;
                beta.push_back({{"bs", m}, {"carrier", k}, {"user", n}});
                power.push_back({{"bs", m}, {"carrier", k}, {"user", n}, {"watts", r.power.p(m, k, n)},
                                 {"rate", r.rates.r(m, k, n)}});
            }
        }
    }
    return {{"status", to_string(r.status)},
            {"total_rate", r.total_rate},
            {"per_slice_rate", r.rates.per_slice_rate},
            {"assignments", beta},
            {"power", power},
            {"outer_iters", r.outer_iters},
            {"ua_inner_iters", r.ua_inner_iters},
            {"pa_inner_iters", r.pa_inner_iters},
            {"outer_trace", r.outer_trace},
            {"converged", r.converged},
            {"oscillated", r.oscillated},
            {"wall_time", r.wall_time},
            {"diagnostic", r.diagnostic}};
}

void add_summary_rows(Table& t, const Cell& param, const ExperimentResult& res) {
    for (Algo a : {Algo::joint, Algo::baseline}) {
        const AlgoSummary s = summarize(res, a);
        t.rows.push_back({param, std::string(to_string(a)), s.mean_total_rate, s.outage_prob, s.mean_outer_iters,
                          s.mean_inner_iters_ua, s.mean_inner_iters_pa});
    }
}

Table summary_table() {
    return {{"param_value", "algo", "mean_total_rate", "outage_prob", "mean_outer_iters", "mean_inner_iters_ua",
             "mean_inner_iters_pa"},
            {}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint BS assignment, sub-carrier and power allocation for multi-cell OFDMA networks"};
    app.require_subcommand(1);
    Output out;
    Settings settings;

    auto* run = app.add_subcommand("run", "solve one instance and print the allocation as JSON");
    std::uint64_t trial = 0;
    std::string algo = "both";
    run->add_option("--trial", trial, "trial index used to draw the instance");
    run->add_option("--algo", algo, "joint, baseline or both")->check(CLI::IsMember({"joint", "baseline", "both"}));

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo summary over one parameter");
    std::string param;
    std::vector<double> values;
    sweep->add_option("--param", param, "K, pmax or rrsv")->required()->check(CLI::IsMember({"K", "pmax", "rrsv"}));
    sweep->add_option("--values", values, "parameter values (space or comma separated)")->required()->delimiter(',');

    auto* mc = app.add_subcommand("montecarlo", "Monte Carlo summary at the configured point");
    std::string per_trial_csv;
    mc->add_option("--trials-csv", per_trial_csv, "also write one row per trial and algorithm here");

    auto* cov = app.add_subcommand("coverage", "CDF of per-trial edge (or center) aggregate rate");
    std::string group = "edge";
    double resolution = 0.05;
    cov->add_option("--group", group, "edge or center")->check(CLI::IsMember({"edge", "center"}));
    cov->add_option("--resolution", resolution, "bin width as a fraction of the largest sample");

    auto* cx = app.add_subcommand("complexity", "predicted GP sizes and operation counts");
    double t0 = 1.0, rho = 1e-3, xi = 10.0;
    cx->add_option("--t0", t0, "initial barrier accuracy");
    cx->add_option("--rho", rho, "interior-point stopping criterion");
    cx->add_option("--xi", xi, "barrier accuracy growth");

    auto* oc = app.add_subcommand("oracle-check", "joint solver against exhaustive search on tiny instances");
    std::size_t levels = 17;
    oc->add_option("--levels", levels, "power grid points per variable, 0 included");

    for (CLI::App* sub : {run, sweep, mc, cov, cx, oc}) {
        settings.attach(*sub);
        sub->add_option("--out", out.csv_path, "CSV output path (stdout when absent)");
        sub->add_option("--json", out.json_path, "JSON output path");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const ExperimentConfig cfg = settings.resolve({});
            const NetworkInstance inst = generate_scenario(cfg.scenario, trial);
            json doc{{"trial", trial}, {"seed", cfg.scenario.seed}};
            if (algo != "baseline") doc["joint"] = allocation_json(inst, solve_joint(inst, cfg.solver));
            if (algo != "joint") doc["baseline"] = allocation_json(inst, solve_baseline(inst, cfg.solver));
            const std::string text = doc.dump(2);
            if (out.json_path.empty() && out.csv_path.empty()) {
                std::cout << text << '\n';
            } else {
                std::ofstream os(out.json_path.empty() ? out.csv_path : out.json_path);
                os << text << '\n';
            }
        } else if (*sweep) {
            const ExperimentConfig base = settings.resolve({});
            Table t = summary_table();
            for (double v : values) {
                ExperimentConfig cfg = base;
                std::ostringstream vs;
                vs.precision(17);
                vs << v;
                if (param == "K") {
                    apply_setting(cfg, "num_carriers", vs.str());
                } else if (param == "pmax") {
                    apply_setting(cfg, "p_max_dbm", vs.str());
                } else {
                    apply_setting(cfg, "r_rsv", vs.str());
                }
                add_summary_rows(t, v, run_monte_carlo(cfg));
            }
            out.emit(t);
        } else if (*mc) {
            const ExperimentConfig cfg = settings.resolve({});
            const ExperimentResult res = run_monte_carlo(cfg);
            Table t{{"algo", "mean_total_rate", "outage_prob", "feasible_fraction", "mean_outer_iters", "mean_inner_iters_ua",
                     "mean_inner_iters_pa"},
                    {}};
            for (Algo a : {Algo::joint, Algo::baseline}) {
                const AlgoSummary s = summarize(res, a);
                t.rows.push_back({std::string(to_string(a)), s.mean_total_rate, s.outage_prob, s.feasible_fraction,
                                  s.mean_outer_iters, s.mean_inner_iters_ua, s.mean_inner_iters_pa});
            }
            out.emit(t);
            if (!per_trial_csv.empty()) {
                Table pt{{"trial", "algo", "total_rate", "feasible", "outage_slices", "outer_iters", "inner_iters_ua",
                          "inner_iters_pa", "wall_time"},
                         {}};
                for (const TrialRecord& tr : res.trials) {
                    for (Algo a : {Algo::joint, Algo::baseline}) {
                        const AlgoRecord& r = tr.get(a);
                        long long outages = 0;
                        for (bool o : r.slice_outage) outages += o ? 1 : 0;
                        pt.rows.push_back({static_cast<long long>(tr.trial), std::string(to_string(a)), r.total_rate,
                                           static_cast<long long>(r.feasible), outages, static_cast<long long>(r.outer_iters),
                                           static_cast<long long>(r.ua_inner_iters), static_cast<long long>(r.pa_inner_iters),
                                           r.wall_time});
                    }
                }
                std::ofstream os(per_trial_csv);
                if (!os) throw std::runtime_error("cannot write " + per_trial_csv);
                pt.write_csv(os);
            }
        } else if (*cov) {
            const ExperimentConfig cfg = settings.resolve({});
            const CoverageMetrics cm = coverage_metrics(run_monte_carlo(cfg), resolution);
            for (const auto& w : cm.warnings) std::cerr << "warning: " << w << '\n';
            const CdfTable& cdf = group == "edge" ? cm.edge : cm.center;
            Table t{{"rate_bin", "cdf_joint", "cdf_baseline"}, {}};
            for (std::size_t i = 0; i < cdf.rate_bin.size(); ++i) t.rows.push_back({cdf.rate_bin[i], cdf.cdf_joint[i], cdf.cdf_baseline[i]});
            out.emit(t);
            std::fprintf(stderr, "edge mean: joint %.4f baseline %.4f (%zu trials); center mean: joint %.4f baseline %.4f\n",
                         cm.edge_mean_joint, cm.edge_mean_baseline, cm.edge_trials, cm.center_mean_joint,
                         cm.center_mean_baseline);
        } else if (*cx) {
            const ExperimentConfig cfg = settings.resolve({});
            const auto& sc = cfg.scenario;
            std::size_t N = 0;
            for (std::size_t u : sc.users_per_slice) N += u;
            const ComplexityEstimate e = complexity_estimate(sc.num_bs, sc.num_carriers, N, sc.users_per_slice.size(), t0, rho, xi);
            Table t{{"algo", "constraints", "ops_per_iteration", "iterations", "total_ops"}, {}};
            t.rows.push_back({std::string("association"), e.c1, e.i1, e.iterations1, e.total1});
            t.rows.push_back({std::string("power"), e.c2, e.i2, e.iterations2, e.total2});
            out.emit(t);
        } else if (*oc) {
            ExperimentConfig base;
            base.scenario.num_bs = 2;
            base.scenario.num_carriers = 2;
            base.scenario.users_per_slice = {2};
            base.scenario.r_rsv = {1.0};
            base.scenario.trials = 50;
            const ExperimentConfig cfg = settings.resolve(base);
            OracleConfig ocfg;
            ocfg.power_levels = levels;
            Table t{{"trial", "oracle_feasible", "oracle_objective", "joint_status", "joint_rate", "ratio"}, {}};
            std::size_t feasible = 0, close = 0;
            for (std::size_t i = 0; i < cfg.scenario.trials; ++i) {
                const NetworkInstance inst = generate_scenario(cfg.scenario, i);
                const OracleResult o = brute_force(inst, ocfg);
                const AllocationResult j = solve_joint(inst, cfg.solver);
                const double ratio = o.objective > 0.0 ? j.total_rate / o.objective : 0.0;
                if (o.feasible) {
                    ++feasible;
                    close += ratio >= 0.9 ? 1 : 0;
                }
                t.rows.push_back({static_cast<long long>(i), static_cast<long long>(o.feasible), o.objective,
                                  std::string(to_string(j.status)), j.total_rate, ratio});
            }
            out.emit(t);
            std::fprintf(stderr, "joint within 90%% of the oracle on %zu of %zu feasible instances\n", close, feasible);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
