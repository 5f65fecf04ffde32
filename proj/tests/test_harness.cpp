#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mixedstep/harness.hpp"

using namespace mixedstep;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CampaignSpec tiny_lco_spec() {
    CampaignSpec spec;
    spec.benchmark = Benchmark::LCO;
    spec.n_tests = 4;
    spec.sizes = {6};
    spec.tolerances = {1e-4};
    spec.lco_t_finals = {2.0};
    return spec;
}

}  // namespace

TEST_CASE("campaign generation: kuramoto") {
    CampaignSpec spec;
    spec.benchmark = Benchmark::Kuramoto;
    spec.n_tests = 24;
    spec.sizes = {8, 16};
    spec.tolerances = {1e-3, 1e-5};
    const auto cases = generate_campaign(spec);
    REQUIRE(cases.size() == 24);
    for (size_t i = 0; i < cases.size(); ++i) {
        const TestCase& tc = cases[i];
        CHECK(tc.test_id == static_cast<std::int64_t>(i) + 1);
        CHECK(tc.sigma >= 0.0);
        CHECK(tc.sigma < 1.0);
        CHECK(tc.coupling_k >= 0.0);
        CHECK(tc.coupling_k <= 3.0 * tc.sigma);
        CHECK(tc.t_final > 0.0);
        CHECK(tc.abs_tol == doctest::Approx(1e-2 * tc.rel_tol).epsilon(1e-12));
    }
    // Grid cells cycle: sizes alternate within the (size, tol) cross.
    CHECK(cases[0].agents == 8);
    CHECK(cases[2].agents == 16);

    const auto again = generate_campaign(spec);
    for (size_t i = 0; i < cases.size(); ++i) {
        CHECK(cases[i].sigma == again[i].sigma);
        CHECK(cases[i].coupling_k == again[i].coupling_k);
        CHECK(cases[i].t_final == again[i].t_final);
    }
}

TEST_CASE("campaign generation: lco and cc grids") {
    CampaignSpec lco;
    lco.benchmark = Benchmark::LCO;
    lco.n_tests = 9;
    lco.sizes = {4};
    lco.tolerances = {1e-3};
    const auto lco_cases = generate_campaign(lco);
    CHECK(lco_cases[0].t_final == 10.0 * kPi);
    CHECK(lco_cases[1].t_final == 20.0 * kPi);
    CHECK(lco_cases[2].t_final == 50.0 * kPi);
    CHECK(lco_cases[3].t_final == 10.0 * kPi);  // cells cycle

    CampaignSpec cc;
    cc.benchmark = Benchmark::CC;
    cc.n_tests = 30;
    cc.sizes = {4};
    cc.tolerances = {1e-3};
    const auto cc_cases = generate_campaign(cc);
    for (const TestCase& tc : cc_cases) {
        CHECK(tc.t_final >= 48.0);
        CHECK(tc.t_final <= 72.0);
        CHECK((tc.coupling_k == 0.001 || tc.coupling_k == 0.1 ||
               tc.coupling_k == 1.0 || tc.coupling_k == 10.0));
        CHECK((tc.stimulus_i0 == 0.228249 || tc.stimulus_i0 == 1.5 ||
               tc.stimulus_i0 == 10.0));
    }

    CampaignSpec bad = lco;
    bad.sizes.clear();
    CHECK_THROWS(generate_campaign(bad));
    bad = lco;
    bad.tolerances = {2.0};
    CHECK_THROWS(generate_campaign(bad));
    bad = lco;
    bad.n_tests = 0;
    CHECK_THROWS(generate_campaign(bad));
}

TEST_CASE("initial conditions") {
    TestCase tc;
    tc.test_id = 12;
    tc.benchmark = Benchmark::LCO;
    tc.agents = 50;
    const Vector a = initial_conditions(tc);
    const Vector b = initial_conditions(tc);
    CHECK(a == b);
    CHECK(a.size() == 100);
    CHECK(a.minCoeff() >= 0.0);
    CHECK(a.maxCoeff() <= 2.0);

    tc.benchmark = Benchmark::Kuramoto;
    const Vector k = initial_conditions(tc);
    CHECK(k.size() == 50);
    CHECK(k.minCoeff() >= 0.0);
    CHECK(k.maxCoeff() < 2.0 * kPi);

    tc.benchmark = Benchmark::CC;
    const Vector c = initial_conditions(tc);
    CHECK(c.size() == 200);
    for (int i = 0; i < tc.agents; ++i) {
        CHECK(c[4 * i] >= 0.9);
        CHECK(c[4 * i] <= 1.1);
        CHECK(c[4 * i + 2] >= -1.29);
        CHECK(c[4 * i + 2] <= -1.09);
        CHECK(c[4 * i + 3] >= -0.72);
        CHECK(c[4 * i + 3] <= -0.52);
    }

    TestCase other = tc;
    other.test_id = 13;
    CHECK(initial_conditions(other) != c);
}

TEST_CASE("summarize") {
    CHECK_THROWS(summarize({}));

    const DistributionSummary ones = summarize(std::vector<double>(9, 1.0));
    CHECK(ones.min == 1.0);
    CHECK(ones.p5 == 1.0);
    CHECK(ones.median == 1.0);
    CHECK(ones.p99 == 1.0);
    CHECK(ones.max == 1.0);

    std::vector<double> v;
    for (int i = 100; i >= 1; --i) v.push_back(i);
    const DistributionSummary s = summarize(v);
    CHECK(s.min == 1.0);
    CHECK(s.median == doctest::Approx(50.5).epsilon(1e-15));
    CHECK(s.p5 == doctest::Approx(5.95).epsilon(1e-12));
    CHECK(s.q1 == doctest::Approx(25.75).epsilon(1e-12));
    CHECK(s.q3 == doctest::Approx(75.25).epsilon(1e-12));
    CHECK(s.max == 100.0);
}

TEST_CASE("select_complete") {
    ResultSet rs;
    CHECK(select_complete(rs).empty());

    auto add = [&](std::int64_t id, const char* variant, SolveStatus st) {
        ResultRow r;
        r.test_id = id;
        r.variant = variant;
        r.status = st;
        rs.rows.push_back(r);
    };
    for (std::int64_t id : {1, 7}) {
        add(id, "Single", SolveStatus::Completed);
        add(id, "Double", SolveStatus::Completed);
        add(id, "Reference", SolveStatus::Completed);
    }
    auto got = select_complete(rs);
    CHECK(got == std::set<std::int64_t>{1, 7});

    // Degrading any row drops the test and never grows the set.
    rs.rows[4].status = SolveStatus::StepTooSmall;  // test 7, Double
    got = select_complete(rs);
    CHECK(got == std::set<std::int64_t>{1});
}

TEST_CASE("run_campaign rows and artifacts") {
    const CampaignSpec spec = tiny_lco_spec();
    const auto cases = generate_campaign(spec);
    RunOptions opt;
    opt.jobs = 2;
    const ResultSet rs = run_campaign(cases, spec, opt);
    REQUIRE(rs.rows.size() == cases.size() * 5);

    for (size_t i = 0; i < cases.size(); ++i) {
        CHECK(rs.rows[5 * i].variant == "Single");
        CHECK(rs.rows[5 * i + 3].variant == "Double");
        CHECK(rs.rows[5 * i + 4].variant == "Reference");
        for (size_t k = 0; k < 5; ++k) {
            const ResultRow& r = rs.rows[5 * i + k];
            CHECK(r.test_id == cases[i].test_id);
            CHECK(r.status == SolveStatus::Completed);
            if (r.variant != "Reference") {
                REQUIRE(r.final_error.has_value());
                CHECK(*r.final_error < 1e-3);
                REQUIRE(r.beta.has_value());
            }
        }
        // Double row: no low-precision flops, beta = 1 against itself.
        const ResultRow& dbl = rs.rows[5 * i + 3];
        CHECK(*dbl.rho == 0.0);
        CHECK(*dbl.gamma == 1.0);
        CHECK(*dbl.beta == 1.0);
        CHECK(*dbl.capital_gamma == 1.0);
    }
}

TEST_CASE("campaign rows are independent of the worker count") {
    const CampaignSpec spec = tiny_lco_spec();
    const auto cases = generate_campaign(spec);
    RunOptions serial;
    serial.jobs = 1;
    RunOptions parallel;
    parallel.jobs = 4;
    const ResultSet a = run_campaign(cases, spec, serial);
    const ResultSet b = run_campaign(cases, spec, parallel);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i)
        CHECK(result_row_to_csv(a.rows[i]) == result_row_to_csv(b.rows[i]));
}

TEST_CASE("run_campaign variant subsets") {
    CampaignSpec spec = tiny_lco_spec();
    spec.n_tests = 2;
    spec.variants = {PolicyVariant::Double};
    const auto cases = generate_campaign(spec);
    RunOptions opt;
    const ResultSet rs = run_campaign(cases, spec, opt);
    CHECK(rs.rows.size() == cases.size() * 2);  // Double + Reference
}

TEST_CASE("results csv round trip and campaign persistence") {
    const std::string dir = (fs::temp_directory_path() / "mixedstep_harness_test").string();
    fs::remove_all(dir);

    CampaignSpec spec = tiny_lco_spec();
    spec.snapshots = true;
    const auto cases = generate_campaign(spec);
    RunOptions opt;
    opt.jobs = 2;
    opt.output_dir = dir;
    opt.step_log_csv = true;
    const ResultSet rs = run_campaign(cases, spec, opt);

    const std::string results_path = dir + "/results.csv";
    REQUIRE(fs::exists(results_path));
    REQUIRE(fs::exists(dir + "/manifest.json"));
    REQUIRE(fs::exists(dir + "/steps.csv"));

    const ResultSet back = read_results_csv(results_path);
    REQUIRE(back.rows.size() == rs.rows.size());
    for (size_t i = 0; i < rs.rows.size(); ++i) {
        CHECK(back.rows[i].test_id == rs.rows[i].test_id);
        CHECK(back.rows[i].variant == rs.rows[i].variant);
        CHECK(back.rows[i].status == rs.rows[i].status);
        CHECK(back.rows[i].final_error == rs.rows[i].final_error);
        CHECK(back.rows[i].mean_ebs == rs.rows[i].mean_ebs);
        CHECK(back.rows[i].mean_eanalytic == rs.rows[i].mean_eanalytic);
        CHECK(back.rows[i].beta == rs.rows[i].beta);
    }
    // LCO with snapshots: analytic local means present.
    bool saw_analytic = false;
    for (const auto& r : back.rows)
        if (r.mean_eanalytic) saw_analytic = true;
    CHECK(saw_analytic);

    // Resume over a completed campaign is a byte-level no-op.
    const std::string before = slurp(results_path);
    const std::string steps_before = slurp(dir + "/steps.csv");
    run_campaign(cases, spec, opt);
    CHECK(slurp(results_path) == before);
    CHECK(slurp(dir + "/steps.csv") == steps_before);

    // Resume after losing the last test recomputes exactly the missing rows.
    {
        const ResultSet full = read_results_csv(results_path);
        std::vector<ResultRow> truncated;
        for (const auto& r : full.rows)
            if (r.test_id != cases.back().test_id) truncated.push_back(r);
        write_results_csv(results_path, truncated);
    }
    run_campaign(cases, spec, opt);
    CHECK(slurp(results_path) == before);

    // Schema mismatch is rejected.
    {
        std::ofstream bad(results_path, std::ios::trunc);
        bad << "nope\n1,2,3\n";
    }
    CHECK_THROWS(read_results_csv(results_path));

    fs::remove_all(dir);
}

TEST_CASE("success rate table shape") {
    ResultSet rs;
    auto add = [&](std::int64_t id, const char* variant, SolveStatus st) {
        ResultRow r;
        r.test_id = id;
        r.benchmark = Benchmark::Kuramoto;
        r.variant = variant;
        r.status = st;
        rs.rows.push_back(r);
    };
    add(1, "Single", SolveStatus::Completed);
    add(1, "Reference", SolveStatus::Completed);
    add(2, "Single", SolveStatus::StepTooSmall);
    add(2, "Reference", SolveStatus::Completed);
    const std::string table = success_rate_table(rs);
    CHECK(table.find("NoT    | 2") != std::string::npos);
    CHECK(table.find("Single | 50.0%") != std::string::npos);
    CHECK(table.find("Ref | 100.0%") != std::string::npos);
    CHECK(table.find("kuramoto") != std::string::npos);
}
