#include "mixedstep/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mixedstep/rng.hpp"
#include "mixedstep/sobol.hpp"

namespace fs = std::filesystem;

namespace mixedstep {

namespace {

constexpr std::uint64_t kIcStream = 1;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double percentile(const std::vector<double>& sorted, double p) {
    const auto n = sorted.size();
    if (n == 1) return sorted[0];
    const double rank = p / 100.0 * static_cast<double>(n - 1);
    const auto lo = static_cast<size_t>(rank);
    const auto hi = std::min(lo + 1, n - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median_abs(const Vector& v) {
    std::vector<double> a(static_cast<size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a[static_cast<size_t>(i)] = std::abs(v[i]);
    std::sort(a.begin(), a.end());
    return percentile(a, 50.0);
}

SolveStatus status_from_name(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(SolveStatus::NonFinite); ++i) {
        const auto st = static_cast<SolveStatus>(i);
        if (s == status_name(st)) return st;
    }
    throw std::runtime_error("unknown solver status: " + s);
}

std::string csv_opt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct TestOutput {
    std::vector<ResultRow> rows;
    std::string step_csv;
};

void append_step_rows(std::string& out, std::int64_t test_id,
                      const std::string& variant,
                      const std::vector<StepRecord>& log) {
    for (const StepRecord& r : log) {
        out += std::to_string(test_id);
        out += ',';
        out += variant;
        out += ',';
        out += format_double(r.t);
        out += ',';
        out += format_double(r.h);
        out += ',';
        out += format_double(r.err);
        out += ',';
        out += r.accepted ? '1' : '0';
        out += '\n';
    }
}

TestOutput run_one(const TestCase& tc, const CampaignSpec& spec,
                   const RunOptions& opt) {
    TestOutput out;
    const auto sys = build_system(tc);
    const Vector x0 = initial_conditions(tc);

    SolverConfig base;
    base.rel_tol = tc.rel_tol;
    base.abs_tol = tc.abs_tol;
    base.time_limits_enabled = opt.time_limits;
    base.wall_clock_limit = opt.wall_clock_limit;
    base.slow_solver_elapsed = opt.slow_solver_elapsed;
    base.slow_solver_progress = opt.slow_solver_progress;

    const SolveResult ref = dp54_reference(*sys, x0, 0.0, tc.t_final, base);

    std::vector<SolveResult> runs(spec.variants.size());
    std::optional<std::int64_t> double_steps;
    for (size_t i = 0; i < spec.variants.size(); ++i) {
        SolverConfig cfg = base;
        cfg.record_snapshots = spec.snapshots && tc.benchmark == Benchmark::LCO;
        runs[i] = solve(*sys, x0, 0.0, tc.t_final, policy_for(spec.variants[i]), cfg);
        if (spec.variants[i] == PolicyVariant::Double && runs[i].total_steps() > 0)
            double_steps = runs[i].total_steps();
    }

    auto mean_ebs_of = [](const SolveResult& r) -> std::optional<double> {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const StepRecord& rec : r.step_log) {
            if (rec.accepted) {
                sum += rec.err;
                ++n;
            }
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };

    for (size_t i = 0; i < spec.variants.size(); ++i) {
        const SolveResult& r = runs[i];
        ResultRow row;
        row.test_id = tc.test_id;
        row.benchmark = tc.benchmark;
        row.agents = tc.agents;
        row.rel_tol = tc.rel_tol;
        row.abs_tol = tc.abs_tol;
        row.variant = variant_name(spec.variants[i]);
        row.status = r.status;
        row.n_accepted = r.n_accepted;
        row.n_failed = r.n_failed;
        row.t_final = tc.t_final;
        if (r.status == SolveStatus::Completed &&
            ref.status == SolveStatus::Completed) {
            const ErrorReport er = error_report(r, ref.final_state, tc.agents,
                                                tc.abs_tol, tc.rel_tol);
            row.final_error = er.normalized_final_error;
            row.mean_ebs = er.mean_e_bs;
            row.mean_eanalytic = er.mean_e_analytic;
        } else {
            // Failed runs still report what they measured.
            row.mean_ebs = mean_ebs_of(r);
            if (!r.snapshots.empty()) {
                double sum = 0.0;
                for (const StepSnapshot& s : r.snapshots)
                    sum += real_local_error(s.x_before, s.x_after, s.h,
                                            tc.abs_tol, tc.rel_tol);
                row.mean_eanalytic =
                    sum / static_cast<double>(r.snapshots.size());
            }
        }
        row.rho = r.flops.low_fraction();
        row.gamma = gamma_of(*row.rho, spec.speedup_r);
        if (double_steps && r.total_steps() > 0)
            row.beta = beta_of(*double_steps, r.total_steps());
        if (row.beta) row.capital_gamma = capital_gamma_of(*row.gamma, *row.beta);
        out.rows.push_back(std::move(row));
        if (opt.step_log_csv)
            append_step_rows(out.step_csv, tc.test_id,
                             variant_name(spec.variants[i]), r.step_log);
    }

    ResultRow rref;
    rref.test_id = tc.test_id;
    rref.benchmark = tc.benchmark;
    rref.agents = tc.agents;
    rref.rel_tol = tc.rel_tol;
    rref.abs_tol = tc.abs_tol;
    rref.variant = "Reference";
    rref.status = ref.status;
    rref.n_accepted = ref.n_accepted;
    rref.n_failed = ref.n_failed;
    rref.mean_ebs = mean_ebs_of(ref);
    rref.t_final = tc.t_final;
    out.rows.push_back(std::move(rref));
    if (opt.step_log_csv)
        append_step_rows(out.step_csv, tc.test_id, "Reference", ref.step_log);
    return out;
}

}  // namespace

const char* const kResultsCsvHeader =
    "test_id,benchmark,N,rel_tol,abs_tol,variant,status,n_accepted,n_failed,"
    "final_error,mean_ebs,mean_eanalytic,beta,rho,gamma,capital_gamma,t_final";

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<TestCase> generate_campaign(const CampaignSpec& spec) {
    if (spec.n_tests < 1)
        throw std::invalid_argument("generate_campaign: n_tests must be >= 1");
    if (spec.sizes.empty() || spec.tolerances.empty())
        throw std::invalid_argument("generate_campaign: empty size/tolerance list");
    for (int n : spec.sizes)
        if (n < 1) throw std::invalid_argument("generate_campaign: invalid size");
    for (double tol : spec.tolerances)
        if (!(tol > 0.0 && tol < 1.0))
            throw std::invalid_argument("generate_campaign: invalid tolerance");
    if (!(spec.abs_rel_ratio > 0.0 && spec.abs_rel_ratio <= 1.0))
        throw std::invalid_argument(
            "generate_campaign: abs_rel_ratio must lie in (0, 1]");

    // Cross the discrete grids; cycle tests over the cells.
    struct Cell {
        int n;
        double tol;
        double t_final;    // LCO
        double coupling;   // CC
        double stimulus;   // CC
    };
    std::vector<Cell> cells;
    for (int n : spec.sizes) {
        for (double tol : spec.tolerances) {
            switch (spec.benchmark) {
                case Benchmark::LCO:
                    for (double tf : spec.lco_t_finals)
                        cells.push_back({n, tol, tf, 0.0, 0.0});
                    break;
                case Benchmark::Kuramoto:
                    cells.push_back({n, tol, 0.0, 0.0, 0.0});
                    break;
                case Benchmark::CC:
                    for (double k : spec.cc_couplings)
                        for (double i0 : spec.cc_stimuli)
                            cells.push_back({n, tol, 0.0, k, i0});
                    break;
            }
        }
    }

    // Continuous parameters: Kuramoto (sigma, K fraction), CC (t_final).
    const int sobol_dim = spec.benchmark == Benchmark::Kuramoto ? 2
                          : spec.benchmark == Benchmark::CC     ? 1
                                                                : 0;
    Eigen::MatrixXd pts;
    if (sobol_dim > 0) pts = sobol_points(sobol_dim, spec.n_tests, 1);

    std::vector<TestCase> cases;
    cases.reserve(static_cast<size_t>(spec.n_tests));
    for (int i = 0; i < spec.n_tests; ++i) {
        const Cell& cell = cells[static_cast<size_t>(i) % cells.size()];
        TestCase tc;
        tc.test_id = i + 1;
        tc.benchmark = spec.benchmark;
        tc.agents = cell.n;
        tc.rel_tol = cell.tol;
        tc.abs_tol = spec.abs_rel_ratio * cell.tol;
        switch (spec.benchmark) {
            case Benchmark::LCO:
                tc.t_final = cell.t_final;
                break;
            case Benchmark::Kuramoto: {
                tc.sigma = pts(i, 0);
                tc.coupling_k = 3.0 * tc.sigma * pts(i, 1);
                const auto sys = make_kuramoto(
                    tc.agents, tc.sigma, tc.coupling_k,
                    static_cast<std::uint64_t>(tc.test_id));
                tc.t_final = 2.0 * kTwoPi /
                             (median_abs(sys->params().omega) * tc.coupling_k +
                              0.001);
                break;
            }
            case Benchmark::CC:
                tc.coupling_k = cell.coupling;
                tc.stimulus_i0 = cell.stimulus;
                tc.t_final = 48.0 + 24.0 * pts(i, 0);
                break;
        }
        cases.push_back(tc);
    }
    return cases;
}

std::vector<TestCase> generate_campaign(Benchmark benchmark, int n_tests,
                                        const std::vector<int>& sizes,
                                        const std::vector<double>& tolerances) {
    CampaignSpec spec;
    spec.benchmark = benchmark;
    spec.n_tests = n_tests;
    spec.sizes = sizes;
    spec.tolerances = tolerances;
    return generate_campaign(spec);
}

Vector initial_conditions(const TestCase& tc) {
    SplitMix64 rng(static_cast<std::uint64_t>(tc.test_id), kIcStream);
    switch (tc.benchmark) {
        case Benchmark::LCO: {
            Vector x(2 * tc.agents);
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = 2.0 * rng.uniform01();
            return x;
        }
        case Benchmark::Kuramoto: {
            Vector x(tc.agents);
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = kTwoPi * rng.uniform01();
            return x;
        }
        case Benchmark::CC: {
            Vector x(4 * tc.agents);
            constexpr double base[4] = {1.0, 1.0, -1.19, -0.62};
            for (int i = 0; i < tc.agents; ++i)
                for (int s = 0; s < 4; ++s)
                    x[4 * i + s] = base[s] + 0.2 * (rng.uniform01() - 0.5);
            return x;
        }
    }
    throw std::logic_error("initial_conditions: unknown benchmark");
}

std::unique_ptr<CoupledSystem> build_system(const TestCase& tc) {
    const auto seed = static_cast<std::uint64_t>(tc.test_id);
    switch (tc.benchmark) {
        case Benchmark::LCO:
            return make_lco(tc.agents, seed);
        case Benchmark::Kuramoto:
            return make_kuramoto(tc.agents, tc.sigma, tc.coupling_k, seed);
        case Benchmark::CC:
            return make_cc(tc.agents, tc.coupling_k, tc.stimulus_i0, seed);
    }
    throw std::logic_error("build_system: unknown benchmark");
}

ResultSet run_campaign(const std::vector<TestCase>& cases,
                       const CampaignSpec& spec, const RunOptions& opt) {
    if (cases.empty())
        throw std::invalid_argument("run_campaign: empty case list");
    if (spec.variants.empty())
        throw std::invalid_argument("run_campaign: empty variant list");
    if (!(spec.speedup_r > 0.0 && spec.speedup_r < 1.0))
        throw std::invalid_argument("run_campaign: speedup_r must lie in (0, 1)");

    const size_t expected_rows = spec.variants.size() + 1;
    const bool persist = !opt.output_dir.empty();
    std::map<std::int64_t, std::vector<ResultRow>> kept;
    std::map<std::int64_t, std::string> kept_steps;
    std::ofstream results_file;
    std::ofstream steps_file;

    if (persist) {
        fs::create_directories(opt.output_dir);
        const std::string results_path = opt.output_dir + "/results.csv";
        const std::string steps_path = opt.output_dir + "/steps.csv";
        write_manifest(opt.output_dir + "/manifest.json", spec, opt);

        if (fs::exists(results_path)) {
            const ResultSet prev = read_results_csv(results_path, true);
            std::map<std::int64_t, std::vector<ResultRow>> grouped;
            for (const ResultRow& r : prev.rows) grouped[r.test_id].push_back(r);
            for (auto& [id, rows] : grouped)
                if (rows.size() == expected_rows) kept.emplace(id, std::move(rows));
        }
        if (opt.step_log_csv && fs::exists(steps_path)) {
            std::ifstream in(steps_path);
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                const auto comma = line.find(',');
                if (comma == std::string::npos) continue;
                const std::int64_t id = std::stoll(line.substr(0, comma));
                if (kept.count(id)) kept_steps[id] += line + '\n';
            }
        }

        results_file.open(results_path, std::ios::trunc);
        if (!results_file)
            throw std::runtime_error("run_campaign: cannot write " + results_path);
        results_file << kResultsCsvHeader << '\n';
        if (opt.step_log_csv) {
            steps_file.open(steps_path, std::ios::trunc);
            if (!steps_file)
                throw std::runtime_error("run_campaign: cannot write " + steps_path);
            steps_file << "test_id,variant,t,h,e_bs,accepted\n";
        }
    }

    std::vector<std::optional<TestOutput>> done(cases.size());
    std::atomic<size_t> next{0};
    std::mutex flush_mutex;
    size_t flushed = 0;
    ResultSet rs;

    // A test becomes resumable only once its results rows are on disk, so
    // the step log flushes first.
    auto flush_ready = [&] {
        while (flushed < cases.size() && done[flushed].has_value()) {
            TestOutput& to = *done[flushed];
            if (persist && opt.step_log_csv) {
                steps_file << to.step_csv;
                steps_file.flush();
            }
            for (const ResultRow& r : to.rows) {
                if (persist) results_file << result_row_to_csv(r) << '\n';
                rs.rows.push_back(r);
            }
            if (persist) results_file.flush();
            to = TestOutput{};  // release memory
            ++flushed;
        }
    };

    std::exception_ptr worker_error;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= cases.size()) break;
            TestOutput to;
            try {
                const auto it = kept.find(cases[i].test_id);
                if (it != kept.end()) {
                    to.rows = it->second;
                    const auto st = kept_steps.find(cases[i].test_id);
                    if (st != kept_steps.end()) to.step_csv = st->second;
                } else {
                    to = run_one(cases[i], spec, opt);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(flush_mutex);
                if (!worker_error) worker_error = std::current_exception();
                return;
            }
            std::lock_guard<std::mutex> lock(flush_mutex);
            done[i] = std::move(to);
            flush_ready();
        }
    };

    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (worker_error) std::rethrow_exception(worker_error);
    return rs;
}

std::set<std::int64_t> select_complete(const ResultSet& rs) {
    std::map<std::int64_t, bool> all_ok;
    for (const ResultRow& r : rs.rows) {
        auto [it, inserted] = all_ok.try_emplace(r.test_id, true);
        it->second = it->second && r.status == SolveStatus::Completed;
    }
    std::set<std::int64_t> out;
    for (const auto& [id, ok] : all_ok)
        if (ok) out.insert(id);
    return out;
}

DistributionSummary summarize(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty input");
    std::sort(values.begin(), values.end());
    DistributionSummary s;
    s.min = values.front();
    s.p1 = percentile(values, 1.0);
    s.p5 = percentile(values, 5.0);
    s.q1 = percentile(values, 25.0);
    s.median = percentile(values, 50.0);
    s.q3 = percentile(values, 75.0);
    s.p95 = percentile(values, 95.0);
    s.p99 = percentile(values, 99.0);
    s.max = values.back();
    return s;
}

std::string success_rate_table(const ResultSet& rs) {
    std::set<std::int64_t> ids;
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> counts;
    std::string bench = "?";
    for (const ResultRow& r : rs.rows) {
        ids.insert(r.test_id);
        auto& c = counts[r.variant];
        ++c.first;
        if (r.status == SolveStatus::Completed) ++c.second;
        bench = benchmark_name(r.benchmark);
    }
    std::ostringstream os;
    os << "Solver | " << bench << "\n";
    os << "NoT    | " << ids.size() << "\n";
    const char* order[] = {"Single", "Mixed1", "Mixed2", "Double", "Reference"};
    for (const char* v : order) {
        const auto it = counts.find(v);
        if (it == counts.end()) continue;
        const double rate = it->second.first > 0
                                ? 100.0 * static_cast<double>(it->second.second) /
                                      static_cast<double>(it->second.first)
                                : 0.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f%%", rate);
        os << (std::string(v) == "Reference" ? "Ref" : v) << " | " << buf << "\n";
    }
    return os.str();
}

std::string result_row_to_csv(const ResultRow& r) {
    std::string out;
    out += std::to_string(r.test_id);
    out += ',';
    out += benchmark_name(r.benchmark);
    out += ',';
    out += std::to_string(r.agents);
    out += ',';
    out += format_double(r.rel_tol);
    out += ',';
    out += format_double(r.abs_tol);
    out += ',';
    out += r.variant;
    out += ',';
    out += status_name(r.status);
    out += ',';
    out += std::to_string(r.n_accepted);
    out += ',';
    out += std::to_string(r.n_failed);
    out += ',';
    out += csv_opt(r.final_error);
    out += ',';
    out += csv_opt(r.mean_ebs);
    out += ',';
    out += csv_opt(r.mean_eanalytic);
    out += ',';
    out += csv_opt(r.beta);
    out += ',';
    out += csv_opt(r.rho);
    out += ',';
    out += csv_opt(r.gamma);
    out += ',';
    out += csv_opt(r.capital_gamma);
    out += ',';
    out += format_double(r.t_final);
    return out;
}

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << kResultsCsvHeader << '\n';
    for (const ResultRow& r : rows) out << result_row_to_csv(r) << '\n';
}

ResultSet read_results_csv(const std::string& path, bool lenient) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != kResultsCsvHeader) {
        if (lenient) return {};
        throw std::runtime_error("results file schema mismatch: " + path);
    }
    ResultSet rs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto f = split_csv_line(line);
            if (f.size() != 17)
                throw std::runtime_error("results file schema mismatch: " + path);
            ResultRow r;
            r.test_id = std::stoll(f[0]);
            const auto b = benchmark_from_name(f[1]);
            if (!b) throw std::runtime_error("unknown benchmark in " + path);
            r.benchmark = *b;
            r.agents = std::stoi(f[2]);
            r.rel_tol = std::stod(f[3]);
            r.abs_tol = std::stod(f[4]);
            r.variant = f[5];
            r.status = status_from_name(f[6]);
            r.n_accepted = std::stoll(f[7]);
            r.n_failed = std::stoll(f[8]);
            r.final_error = parse_opt(f[9]);
            r.mean_ebs = parse_opt(f[10]);
            r.mean_eanalytic = parse_opt(f[11]);
            r.beta = parse_opt(f[12]);
            r.rho = parse_opt(f[13]);
            r.gamma = parse_opt(f[14]);
            r.capital_gamma = parse_opt(f[15]);
            r.t_final = std::stod(f[16]);
            rs.rows.push_back(std::move(r));
        } catch (const std::exception&) {
            if (!lenient) throw;  // torn line from an interrupted run
        }
    }
    return rs;
}

void write_manifest(const std::string& path, const CampaignSpec& spec,
                    const RunOptions& opt) {
    nlohmann::json j;
    j["code_version"] = "mixedstep 0.1.0";
    j["campaign"]["benchmark"] = benchmark_name(spec.benchmark);
    j["campaign"]["n_tests"] = spec.n_tests;
    j["campaign"]["sizes"] = spec.sizes;
    j["campaign"]["tolerances"] = spec.tolerances;
    j["campaign"]["abs_rel_ratio"] = spec.abs_rel_ratio;
    std::vector<std::string> vnames;
    for (PolicyVariant v : spec.variants) vnames.emplace_back(variant_name(v));
    j["campaign"]["variants"] = vnames;
    j["campaign"]["snapshots"] = spec.snapshots;
    j["campaign"]["speedup_r"] = spec.speedup_r;
    switch (spec.benchmark) {
        case Benchmark::LCO:
            j["campaign"]["t_finals"] = spec.lco_t_finals;
            break;
        case Benchmark::CC:
            j["campaign"]["couplings"] = spec.cc_couplings;
            j["campaign"]["stimuli"] = spec.cc_stimuli;
            break;
        case Benchmark::Kuramoto:
            break;
    }
    j["generator"]["prng"] = "splitmix64";
    j["generator"]["streams"] = "0: benchmark parameters, 1: initial conditions";
    j["generator"]["uniforms"] = "top 53 bits";
    j["generator"]["normals"] = "box-muller";
    j["generator"]["sobol"] = "gray-code, joe-kuo directions, skip 1";
    switch (spec.benchmark) {
        case Benchmark::LCO:
            j["generator"]["sobol_dims"] = nlohmann::json::array();
            break;
        case Benchmark::Kuramoto:
            j["generator"]["sobol_dims"] = {"sigma in [0,1]", "K fraction of [0,3*sigma]"};
            break;
        case Benchmark::CC:
            j["generator"]["sobol_dims"] = {"t_final in [48,72]"};
            break;
    }
    j["solver"]["scheme"] = "bogacki-shampine 3(2), FSAL";
    j["solver"]["reference"] = "dormand-prince 5(4), rel = abs = 1e-9";
    j["run"]["jobs"] = opt.jobs;
    j["run"]["time_limits"] = opt.time_limits;
    j["run"]["wall_clock_limit"] = opt.wall_clock_limit;
    j["run"]["slow_solver_elapsed"] = opt.slow_solver_elapsed;
    j["run"]["slow_solver_progress"] = opt.slow_solver_progress;
    j["run"]["step_log_csv"] = opt.step_log_csv;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace mixedstep
