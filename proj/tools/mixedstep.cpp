// Command-line front end: single runs, campaigns, result analysis, figures.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "mixedstep/harness.hpp"
#include "mixedstep/metrics.hpp"
#include "mixedstep/precision.hpp"
#include "mixedstep/report.hpp"
#include "mixedstep/solver.hpp"
#include "mixedstep/systems.hpp"

namespace ms = mixedstep;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string default_output_dir(const std::string& cli_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("MIXEDSTEP_OUTPUT"); env && *env)
        return env;
    return "mixedstep-out";
}

struct RunArgs {
    std::string benchmark = "lco";
    int agents = 100;
    std::string variant = "double";
    double rel_tol = 1e-6;
    double abs_rel_ratio = 1e-2;
    std::int64_t seed = 1;
    double t_final = 0.0;  // 0: benchmark default
    double sigma = 0.5;
    double coupling = -1.0;  // <0: benchmark default
    double stimulus = 1.5;
    bool json_out = false;
    bool no_time_limits = false;
    bool snapshots = false;
};

int cmd_run(const RunArgs& a) {
    const auto bench = ms::benchmark_from_name(a.benchmark);
    const auto variant = ms::variant_from_name(a.variant);
    if (!bench || !variant || a.agents < 1 || !(a.rel_tol > 0 && a.rel_tol < 1)) {
        std::cerr << "run: invalid benchmark/variant/size/tolerance\n";
        return 1;
    }

    ms::TestCase tc;
    tc.test_id = a.seed;
    tc.benchmark = *bench;
    tc.agents = a.agents;
    tc.rel_tol = a.rel_tol;
    tc.abs_tol = a.abs_rel_ratio * a.rel_tol;
    tc.sigma = a.sigma;
    switch (*bench) {
        case ms::Benchmark::LCO:
            tc.t_final = a.t_final > 0 ? a.t_final : 10.0 * kPi;
            break;
        case ms::Benchmark::Kuramoto:
            tc.coupling_k = a.coupling >= 0 ? a.coupling : 1.5 * a.sigma;
            break;
        case ms::Benchmark::CC:
            tc.coupling_k = a.coupling >= 0 ? a.coupling : 1.0;
            tc.stimulus_i0 = a.stimulus;
            tc.t_final = a.t_final > 0 ? a.t_final : 60.0;
            break;
    }

    const auto sys = ms::build_system(tc);
    if (*bench == ms::Benchmark::Kuramoto) {
        if (a.t_final > 0) {
            tc.t_final = a.t_final;
        } else {
            std::vector<double> w;
            for (Eigen::Index i = 0; i < sys->params().omega.size(); ++i)
                w.push_back(std::abs(sys->params().omega[i]));
            const double med = ms::summarize(std::move(w)).median;
            tc.t_final = 4.0 * kPi / (med * tc.coupling_k + 0.001);
        }
    }
    const ms::Vector x0 = ms::initial_conditions(tc);

    ms::SolverConfig cfg;
    cfg.rel_tol = tc.rel_tol;
    cfg.abs_tol = tc.abs_tol;
    cfg.time_limits_enabled = !a.no_time_limits;
    cfg.record_snapshots =
        (a.snapshots || tc.benchmark == ms::Benchmark::LCO);

    const ms::SolveResult ref = ms::dp54_reference(*sys, x0, 0.0, tc.t_final, cfg);
    const ms::SolveResult res =
        ms::solve(*sys, x0, 0.0, tc.t_final, ms::policy_for(*variant), cfg);

    std::optional<double> final_error, mean_ebs, mean_eanalytic;
    if (res.status == ms::SolveStatus::Completed &&
        ref.status == ms::SolveStatus::Completed) {
        const ms::ErrorReport er = ms::error_report(
            res, ref.final_state, tc.agents, tc.abs_tol, tc.rel_tol);
        final_error = er.normalized_final_error;
        mean_ebs = er.mean_e_bs;
        mean_eanalytic = er.mean_e_analytic;
    } else {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const auto& rec : res.step_log)
            if (rec.accepted) { sum += rec.err; ++n; }
        if (n > 0) mean_ebs = sum / static_cast<double>(n);
    }

    if (a.json_out) {
        json j;
        j["benchmark"] = a.benchmark;
        j["n"] = a.agents;
        j["variant"] = ms::variant_name(*variant);
        j["rel_tol"] = tc.rel_tol;
        j["abs_tol"] = tc.abs_tol;
        j["seed"] = a.seed;
        j["t_final"] = tc.t_final;
        j["status"] = ms::status_name(res.status);
        j["reference_status"] = ms::status_name(ref.status);
        j["n_accepted"] = res.n_accepted;
        j["n_failed"] = res.n_failed;
        j["rho"] = res.flops.low_fraction();
        if (final_error) j["final_error"] = *final_error;
        if (mean_ebs) j["mean_ebs"] = *mean_ebs;
        if (mean_eanalytic) j["mean_eanalytic"] = *mean_eanalytic;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "benchmark      " << a.benchmark << " (N = " << a.agents
                  << ", t_final = " << ms::format_double(tc.t_final) << ")\n"
                  << "variant        " << ms::variant_name(*variant)
                  << "  rel_tol " << ms::format_double(tc.rel_tol)
                  << "  abs_tol " << ms::format_double(tc.abs_tol) << "\n"
                  << "status         " << ms::status_name(res.status) << "\n"
                  << "steps          " << res.n_accepted << " accepted, "
                  << res.n_failed << " failed\n"
                  << "low-prec flops " << ms::format_double(res.flops.low_fraction())
                  << "\n";
        if (final_error)
            std::cout << "final error    " << ms::format_double(*final_error)
                      << "  (vs. DP 5(4) reference at 1e-9)\n";
        else
            std::cout << "final error    n/a (reference status "
                      << ms::status_name(ref.status) << ")\n";
        if (mean_ebs)
            std::cout << "mean E_BS      " << ms::format_double(*mean_ebs) << "\n";
        if (mean_eanalytic)
            std::cout << "mean E_analytic " << ms::format_double(*mean_eanalytic)
                      << "\n";
    }
    return res.status == ms::SolveStatus::Completed ? 0 : 2;
}

std::optional<ms::CampaignSpec> load_campaign_spec(const std::string& path,
                                                   const std::vector<std::string>& sets,
                                                   std::string& output_dir,
                                                   int& jobs) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "sweep: cannot open config " << path << "\n";
        return std::nullopt;
    }
    json j;
    try {
        in >> j;
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("override must be key=value: " + kv);
            json v = json::parse(kv.substr(eq + 1), nullptr, false);
            j[kv.substr(0, eq)] = v.is_discarded() ? json(kv.substr(eq + 1))
                                                   : std::move(v);
        }

        ms::CampaignSpec spec;
        const auto bench = ms::benchmark_from_name(j.at("benchmark").get<std::string>());
        if (!bench) throw std::runtime_error("unknown benchmark");
        spec.benchmark = *bench;
        spec.n_tests = j.at("n_tests").get<int>();
        spec.sizes = j.at("sizes").get<std::vector<int>>();
        spec.tolerances = j.at("tolerances").get<std::vector<double>>();
        if (j.contains("abs_rel_ratio"))
            spec.abs_rel_ratio = j["abs_rel_ratio"].get<double>();
        if (j.contains("variants")) {
            spec.variants.clear();
            for (const auto& v : j["variants"]) {
                const auto pv = ms::variant_from_name(v.get<std::string>());
                if (!pv) throw std::runtime_error("unknown variant in config");
                spec.variants.push_back(*pv);
            }
            if (spec.variants.empty()) throw std::runtime_error("empty variant list");
        }
        if (j.contains("snapshots")) spec.snapshots = j["snapshots"].get<bool>();
        if (j.contains("speedup_r")) spec.speedup_r = j["speedup_r"].get<double>();
        if (j.contains("t_finals"))
            spec.lco_t_finals = j["t_finals"].get<std::vector<double>>();
        if (j.contains("couplings"))
            spec.cc_couplings = j["couplings"].get<std::vector<double>>();
        if (j.contains("stimuli"))
            spec.cc_stimuli = j["stimuli"].get<std::vector<double>>();
        if (j.contains("output") && output_dir.empty())
            output_dir = j["output"].get<std::string>();
        if (j.contains("jobs") && jobs == 0) jobs = j["jobs"].get<int>();
        return spec;
    } catch (const std::exception& e) {
        std::cerr << "sweep: bad config: " << e.what() << "\n";
        return std::nullopt;
    }
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              std::string output_dir, int jobs, bool no_time_limits,
              bool steps_csv) {
    auto spec = load_campaign_spec(config_path, sets, output_dir, jobs);
    if (!spec) return 1;

    ms::RunOptions opt;
    opt.jobs = jobs > 0 ? jobs
                        : static_cast<int>(std::thread::hardware_concurrency());
    if (opt.jobs < 1) opt.jobs = 1;
    opt.time_limits = !no_time_limits;
    opt.output_dir = default_output_dir(output_dir);
    opt.step_log_csv = steps_csv;

    std::vector<ms::TestCase> cases;
    try {
        cases = ms::generate_campaign(*spec);
    } catch (const std::exception& e) {
        std::cerr << "sweep: " << e.what() << "\n";
        return 1;
    }
    const ms::ResultSet rs = ms::run_campaign(cases, *spec, opt);
    std::cout << ms::success_rate_table(rs);
    std::cout << "results: " << opt.output_dir << "/results.csv\n";
    return 0;
}

int cmd_analyze(const std::string& results_path, bool json_out) {
    ms::ResultSet rs;
    try {
        rs = ms::read_results_csv(results_path);
    } catch (const std::exception& e) {
        std::cerr << "analyze: " << e.what() << "\n";
        return 1;
    }
    const auto complete = ms::select_complete(rs);

    std::map<std::string, std::vector<double>> betas;
    for (const auto& r : rs.rows)
        if (complete.count(r.test_id) && r.beta) betas[r.variant].push_back(*r.beta);

    if (json_out) {
        json j;
        j["complete_tests"] = complete.size();
        for (auto& [v, vals] : betas) {
            const auto s = ms::summarize(vals);
            j["beta"][v] = {s.min, s.q1, s.median, s.q3, s.max};
        }
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << ms::success_rate_table(rs);
    std::cout << "complete (all solvers): " << complete.size() << "\n";
    if (!betas.empty()) {
        std::cout << "beta (min, q1, median, q3, max):\n";
        for (auto& [v, vals] : betas) {
            const auto s = ms::summarize(vals);
            std::cout << "  " << v << " (" << ms::format_double(s.min) << ", "
                      << ms::format_double(s.q1) << ", "
                      << ms::format_double(s.median) << ", "
                      << ms::format_double(s.q3) << ", "
                      << ms::format_double(s.max) << ")\n";
        }
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& results_paths,
               const std::string& figure, std::string output_dir, int size) {
    ms::ResultSet rs;
    try {
        for (const auto& p : results_paths) {
            const ms::ResultSet part = ms::read_results_csv(p);
            rs.rows.insert(rs.rows.end(), part.rows.begin(), part.rows.end());
        }
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return 1;
    }
    try {
        const auto out = ms::emit_figure(
            rs, figure, default_output_dir(output_dir),
            size > 0 ? std::optional<int>(size) : std::nullopt);
        std::cout << out.svg_path << "\n" << out.csv_path << "\n";
    } catch (const std::exception& e) {
        std::cerr << "report: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed-precision adaptive Runge-Kutta benchmark driver"};
    app.require_subcommand(1);

    RunArgs ra;
    CLI::App* run = app.add_subcommand("run", "run one test case");
    run->add_option("--benchmark", ra.benchmark, "lco | kuramoto | cc");
    run->add_option("--n", ra.agents, "number of agents");
    run->add_option("--variant", ra.variant, "single | mixed1 | mixed2 | double");
    run->add_option("--rtol", ra.rel_tol, "relative tolerance");
    run->add_option("--atol-ratio", ra.abs_rel_ratio, "abs_tol / rel_tol");
    run->add_option("--seed", ra.seed, "test id / seed");
    run->add_option("--tf", ra.t_final, "final time (0: benchmark default)");
    run->add_option("--sigma", ra.sigma, "kuramoto frequency spread");
    run->add_option("--coupling", ra.coupling, "coupling constant K");
    run->add_option("--i0", ra.stimulus, "cc stimulus");
    run->add_flag("--json", ra.json_out, "machine-readable output");
    run->add_flag("--no-time-limits", ra.no_time_limits,
                  "disable wall-clock failure conditions");
    run->add_flag("--snapshots", ra.snapshots, "retain per-step states");

    std::string config_path, output_dir, results_path, figure = "tol-error";
    std::vector<std::string> sets, results_paths;
    int jobs = 0, size = 0;
    bool no_time_limits = false, json_out = false, steps_csv = false;

    CLI::App* sweep = app.add_subcommand("sweep", "run a campaign from a config");
    sweep->add_option("--config", config_path, "campaign config (json)")->required();
    sweep->add_option("--set", sets, "override config keys (key=value)");
    sweep->add_option("--output", output_dir, "output directory");
    sweep->add_option("--jobs", jobs, "worker threads (0: hardware)");
    sweep->add_flag("--no-time-limits", no_time_limits,
                    "disable wall-clock failure conditions");
    sweep->add_flag("--steps", steps_csv, "write the per-step csv log");

    CLI::App* analyze = app.add_subcommand("analyze", "summarize a result set");
    analyze->add_option("--results", results_path, "results.csv")->required();
    analyze->add_flag("--json", json_out, "machine-readable output");

    CLI::App* report = app.add_subcommand("report", "emit figures (svg + csv)");
    report->add_option("--results", results_paths, "results.csv file(s)")->required();
    report->add_option("--figure", figure,
                       "tol-error | size-error | local-error | beta-table");
    report->add_option("--size", size, "system size filter (tol-error)");
    report->add_option("--output", output_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (run->parsed()) return cmd_run(ra);
        if (sweep->parsed())
            return cmd_sweep(config_path, sets, output_dir, jobs, no_time_limits,
                             steps_csv);
        if (analyze->parsed()) return cmd_analyze(results_path, json_out);
        if (report->parsed())
            return cmd_report(results_paths, figure, output_dir, size);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
