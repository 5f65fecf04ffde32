#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixedstep/metrics.hpp"
#include "mixedstep/precision.hpp"
#include "mixedstep/solver.hpp"
#include "mixedstep/systems.hpp"

namespace mixedstep {

/// One sampled benchmark configuration. The test id doubles as the seed for
/// every random draw belonging to the test.
struct TestCase {
    std::int64_t test_id = 0;
    Benchmark benchmark = Benchmark::LCO;
    int agents = 0;
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    double t_final = 0.0;
    double sigma = 0.0;        // Kuramoto
    double coupling_k = 0.0;   // Kuramoto, CC
    double stimulus_i0 = 0.0;  // CC
};

struct CampaignSpec {
    Benchmark benchmark = Benchmark::LCO;
    int n_tests = 0;
    std::vector<int> sizes;
    std::vector<double> tolerances;
    double abs_rel_ratio = 1e-2;  // abs_tol = ratio * rel_tol
    std::vector<PolicyVariant> variants = {
        PolicyVariant::Single, PolicyVariant::Mixed1, PolicyVariant::Mixed2,
        PolicyVariant::Double};
    bool snapshots = false;  // retain per-step states for local-error analysis
    double speedup_r = 0.5;

    // Discrete grids crossed with sizes and tolerances.
    std::vector<double> lco_t_finals = {10.0 * 3.14159265358979323846,
                                        20.0 * 3.14159265358979323846,
                                        50.0 * 3.14159265358979323846};
    std::vector<double> cc_couplings = {0.001, 0.1, 1.0, 10.0};
    std::vector<double> cc_stimuli = {0.228249, 1.5, 10.0};
};

struct RunOptions {
    int jobs = 1;
    bool time_limits = true;
    double wall_clock_limit = 5400.0;
    double slow_solver_elapsed = 2700.0;
    double slow_solver_progress = 0.10;
    std::string output_dir;   // empty: in-memory only
    bool step_log_csv = false;
};

/// Variant column of a result row; Reference marks the DP 5(4) run.
struct ResultRow {
    std::int64_t test_id = 0;
    Benchmark benchmark = Benchmark::LCO;
    int agents = 0;
    double rel_tol = 0.0;
    double abs_tol = 0.0;
    std::string variant;  // Single/Mixed1/Mixed2/Double/Reference
    SolveStatus status = SolveStatus::Completed;
    std::int64_t n_accepted = 0;
    std::int64_t n_failed = 0;
    std::optional<double> final_error;
    std::optional<double> mean_ebs;
    std::optional<double> mean_eanalytic;
    std::optional<double> beta;
    std::optional<double> rho;
    std::optional<double> gamma;
    std::optional<double> capital_gamma;
    double t_final = 0.0;
};

struct ResultSet {
    std::vector<ResultRow> rows;
};

/// Nine-point distribution summary with linear-interpolation percentiles.
struct DistributionSummary {
    double min, p1, p5, q1, median, q3, p95, p99, max;
};

/// Deterministic campaign: discrete grids (sizes, tolerance decades, and the
/// benchmark's tabulated choices) are crossed and cycled over test ids;
/// continuous parameters map affinely from Sobol coordinates.
std::vector<TestCase> generate_campaign(const CampaignSpec& spec);
std::vector<TestCase> generate_campaign(Benchmark benchmark, int n_tests,
                                        const std::vector<int>& sizes,
                                        const std::vector<double>& tolerances);

/// Seeded initial conditions: LCO uniform [0,2] per slot, Kuramoto uniform
/// [0,2pi], CC (1,1,-1.19,-0.62) + 0.2 * uniform[-0.5,0.5]^4 per agent.
Vector initial_conditions(const TestCase& tc);

std::unique_ptr<CoupledSystem> build_system(const TestCase& tc);

/// Runs the reference plus every requested variant on each case, persisting
/// incrementally when an output directory is set; an interrupted campaign
/// resumes from the persisted rows. Per-test failures are recorded in the
/// status column and never abort the campaign.
ResultSet run_campaign(const std::vector<TestCase>& cases,
                       const CampaignSpec& spec, const RunOptions& opt);

/// Test ids whose every row (all variants and the reference) completed.
std::set<std::int64_t> select_complete(const ResultSet& rs);

DistributionSummary summarize(std::vector<double> values);

/// Success-rate table in the benchmark-appendix format.
std::string success_rate_table(const ResultSet& rs);

// --- persistence ---------------------------------------------------------

extern const char* const kResultsCsvHeader;

void write_results_csv(const std::string& path,
                       const std::vector<ResultRow>& rows);
/// Strict mode throws on any malformed row; lenient mode (used when resuming
/// a crashed campaign) skips torn lines.
ResultSet read_results_csv(const std::string& path, bool lenient = false);
std::string result_row_to_csv(const ResultRow& row);

void write_manifest(const std::string& path, const CampaignSpec& spec,
                    const RunOptions& opt);

/// Shortest round-trip decimal formatting used in every CSV/JSON artifact.
std::string format_double(double v);

}  // namespace mixedstep
