#include <doctest.h>

#include <cmath>

#include "mixedstep/harness.hpp"
#include "mixedstep/rng.hpp"
#include "mixedstep/solver.hpp"
#include "mixedstep/systems.hpp"
#include "test_support.hpp"

using namespace mixedstep;
using mstest::ScalarExp;
using mstest::ScalarNan;
using mstest::ScalarZero;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector identical_lco_state(int n, double x, double v) {
    Vector s(2 * n);
    for (int i = 0; i < n; ++i) {
        s[2 * i] = x;
        s[2 * i + 1] = v;
    }
    return s;
}

}  // namespace

TEST_CASE("butcher tableaus are consistent") {
    for (const ButcherTableau* tab :
         {&ButcherTableau::bs32(), &ButcherTableau::dp54()}) {
        CHECK(tab->b.sum() == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(tab->b_tilde.sum() == doctest::Approx(1.0).epsilon(1e-15));
        for (int l = 0; l < tab->stages(); ++l)
            CHECK(tab->a.row(l).sum() == doctest::Approx(tab->c[l]).epsilon(1e-14));
        // FSAL: last a-row equals b, so b's last entry is 0.
        CHECK(tab->fsal);
        CHECK(tab->b[tab->stages() - 1] == 0.0);
        for (int m = 0; m < tab->stages(); ++m)
            CHECK(tab->a(tab->stages() - 1, m) == tab->b[m]);
    }
    const auto& bs = ButcherTableau::bs32();
    CHECK(bs.c[1] == 0.5);
    CHECK(bs.c[2] == 0.75);
    CHECK(bs.a(2, 0) == 0.0);
    CHECK(bs.b_tilde[0] == 7.0 / 24.0);
    CHECK(bs.b_tilde[3] == 0.125);
    CHECK(bs.order_high == 3);
    CHECK(bs.order_low == 2);
    CHECK(scheme_flops_per_component(bs) == kSchemeFlopsBs32);
}

TEST_CASE("estimate_error") {
    Vector a(1), b(1), c(1);
    a << 0.0;
    b << 0.0;
    c << 1e-6;
    CHECK(estimate_error(a, b, b, 1e-2, 1.0) == 0.0);
    CHECK(estimate_error(a, b, c, 1e-2, 1.0) == doctest::Approx(1e-4).epsilon(1e-12));

    // Relative-error homogeneity away from the floor.
    Vector xn(2), xnext(2), xtilde(2);
    xn << 2.0, -3.0;
    xnext << 2.1, -3.1;
    xtilde << 2.1000004, -3.0999996;
    const double e1 = estimate_error(xn, xnext, xtilde, 1e-8, 1e-2);
    const double e2 =
        estimate_error(10 * xn, 10 * xnext, 10 * xtilde, 1e-8, 1e-2);
    CHECK(e1 == doctest::Approx(e2).epsilon(1e-9));

    Vector bad(3);
    CHECK_THROWS(estimate_error(a, b, bad, 1e-2, 1.0));
}

TEST_CASE("adjust_step controller") {
    SolverConfig cfg;
    CHECK(adjust_step(1.0, cfg.rel_tol, cfg.rel_tol, cfg) ==
          doctest::Approx(0.9).epsilon(1e-15));
    CHECK(adjust_step(2.0, 8.0 * cfg.rel_tol, cfg.rel_tol, cfg) ==
          doctest::Approx(0.9).epsilon(1e-14));
    CHECK(adjust_step(1.0, 0.0, cfg.rel_tol, cfg) == 5.0);
    // Shrink saturates at fac_min, growth at fac_max.
    CHECK(adjust_step(1.0, 1e9 * cfg.rel_tol, cfg.rel_tol, cfg) == 0.2);
    CHECK(adjust_step(1.0, 1e-12 * cfg.rel_tol, cfg.rel_tol, cfg) == 5.0);
}

TEST_CASE("initial_step heuristic") {
    SolverConfig cfg;
    cfg.rel_tol = 1e-6;
    cfg.abs_tol = 1e-8;

    const ScalarZero zero;
    Vector x0(1);
    x0 << 1.0;
    CHECK(initial_step(zero, 0.0, 5.0, x0, cfg) == 0.5);  // cap active

    const ScalarExp exp_sys;
    const double h0 = initial_step(exp_sys, 0.0, 1.0, x0, cfg);
    CHECK(h0 > 0.0);
    CHECK(h0 <= 0.1);
    const double h0_long = initial_step(exp_sys, 0.0, 50.0, x0, cfg);
    CHECK(h0_long > 0.0);
    CHECK(h0_long <= 0.1);

    const ScalarNan nan_sys;
    CHECK(std::isnan(initial_step(nan_sys, 0.0, 1.0, x0, cfg)));
}

TEST_CASE("bs32 single step on dx/dt = x") {
    const ScalarExp sys;
    Vector x0(1), k1(1);
    x0 << 1.0;
    k1 << 1.0;
    SolverConfig cfg;
    cfg.rel_tol = 1e-2;
    cfg.abs_tol = 1e-2;  // weight floor ab/rel = 1

    const auto policy = policy_for(PolicyVariant::Double);
    StepOutcome o = bs32_step(sys, 0.0, x0, 0.1, k1, policy, cfg);
    CHECK(o.x_next[0] == doctest::Approx(1.1051666666666666).epsilon(1e-15));
    CHECK(o.x_tilde[0] == doctest::Approx(1.1051895833333334).epsilon(1e-15));
    CHECK(o.err == doctest::Approx(2.073593726436435e-05).epsilon(1e-12));
    CHECK(o.k4[0] == o.x_next[0]);  // dx/dt = x evaluated at x_next
    CHECK(o.accepted);

    // Raising the floor to ab/rel = 10 rescales the estimate.
    cfg.abs_tol = 1e-1;
    cfg.rel_tol = 1e-2;
    o = bs32_step(sys, 0.0, x0, 0.1, k1, policy, cfg);
    CHECK(o.err == doctest::Approx(2.2916666666666666e-06).epsilon(1e-12));
}

TEST_CASE("bs32 single step on dx/dt = 0") {
    const ScalarZero sys;
    Vector x0(1), k1(1);
    x0 << 1.0;
    k1 << 0.0;
    SolverConfig cfg;
    const StepOutcome o =
        bs32_step(sys, 0.0, x0, 1.0, k1, policy_for(PolicyVariant::Single), cfg);
    CHECK(o.x_next[0] == 1.0);
    CHECK(o.x_tilde[0] == 1.0);
    CHECK(o.err == 0.0);
    CHECK(o.accepted);
    CHECK(o.h_next == 5.0);
}

TEST_CASE("solve dx/dt = x reaches e") {
    const ScalarExp sys;
    Vector x0(1);
    x0 << 1.0;
    SolverConfig cfg;
    cfg.rel_tol = 1e-8;
    cfg.abs_tol = 1e-10;
    const SolveResult r =
        solve(sys, x0, 0.0, 1.0, policy_for(PolicyVariant::Double), cfg);
    CHECK(r.status == SolveStatus::Completed);
    CHECK(r.t_reached == 1.0);
    CHECK(std::abs(r.final_state[0] - std::exp(1.0)) / std::exp(1.0) <= 1e-6);

    // Acceptance rule holds on every record.
    for (const auto& rec : r.step_log) {
        if (rec.accepted) CHECK(rec.err <= cfg.rel_tol);
        else CHECK((rec.err > cfg.rel_tol || !std::isfinite(rec.err)));
    }
}

TEST_CASE("solve lco periodic return") {
    const auto sys = make_lco(4, 1);
    const Vector x0 = identical_lco_state(4, 1.0, 0.0);
    SolverConfig cfg;
    cfg.rel_tol = 1e-6;
    cfg.abs_tol = 1e-8;
    const SolveResult r =
        solve(*sys, x0, 0.0, 2.0 * kPi, policy_for(PolicyVariant::Double), cfg);
    CHECK(r.status == SolveStatus::Completed);
    for (Eigen::Index i = 0; i < x0.size(); ++i)
        CHECK(std::abs(r.final_state[i] - x0[i]) <= 1e-4);
}

TEST_CASE("solve hits StepTooSmall under single precision at extreme tolerance") {
    const auto sys = make_lco(8, 3);
    Vector x0(16);
    SplitMix64 rng(5);
    for (Eigen::Index i = 0; i < 16; ++i) x0[i] = rng.uniform(0.0, 2.0);
    SolverConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;
    const SolveResult r =
        solve(*sys, x0, 0.0, 10.0, policy_for(PolicyVariant::Single), cfg);
    CHECK(r.status == SolveStatus::StepTooSmall);
    CHECK(r.t_reached < 10.0);
}

TEST_CASE("dp54 reference quality") {
    const ScalarExp sys;
    Vector x0(1);
    x0 << 1.0;
    const SolveResult r = dp54_reference(sys, x0, 0.0, 1.0);
    CHECK(r.status == SolveStatus::Completed);
    CHECK(std::abs(r.final_state[0] - std::exp(1.0)) / std::exp(1.0) <= 1e-8);

    const auto lco = make_lco(4, 1);
    const Vector y0 = identical_lco_state(4, 1.0, 0.0);
    const SolveResult p = dp54_reference(*lco, y0, 0.0, 2.0 * kPi);
    CHECK(p.status == SolveStatus::Completed);
    for (Eigen::Index i = 0; i < y0.size(); ++i)
        CHECK(std::abs(p.final_state[i] - y0[i]) <= 1e-7);
}

TEST_CASE("fsal reuses the last stage") {
    // Evaluation budget: 2 startup evals + 1 cold k1 + 3 per accepted step
    // when nothing is rejected.
    const ScalarExp sys;
    Vector x0(1);
    x0 << 1.0;
    SolverConfig cfg;
    cfg.rel_tol = 1e-5;
    cfg.abs_tol = 1e-7;
    const SolveResult r =
        solve(sys, x0, 0.0, 1.0, policy_for(PolicyVariant::Double), cfg);
    CHECK(r.status == SolveStatus::Completed);
    REQUIRE(r.n_failed == 0);
    CHECK(r.flops.rhs_evals == 3 + 3 * r.n_accepted);

    // Bitwise: stored k4 equals a fresh evaluation at the accepted point.
    const auto lco = make_lco(3, 1);
    Vector y(6);
    y << 0.3, 1.1, -0.4, 0.2, 1.7, 0.9;
    const auto policy = policy_for(PolicyVariant::Mixed1);
    const Vector k1 = lco->eval_rhs(0.0, y, policy.first_step_k1);
    const StepOutcome o = bs32_step(*lco, 0.0, y, 0.005, k1, policy, cfg);
    REQUIRE(o.accepted);
    CHECK(o.k4 == lco->eval_rhs(0.005, o.x_next, policy.stage(4)));
}

TEST_CASE("all-binary64 mixed policy is bitwise identical to Double") {
    const auto sys = make_kuramoto(12, 0.6, 0.9, 8);
    Vector x0(12);
    SplitMix64 rng(9);
    for (Eigen::Index i = 0; i < 12; ++i) x0[i] = rng.uniform(0.0, 2 * kPi);

    SolverConfig cfg;
    cfg.rel_tol = 1e-6;
    cfg.abs_tol = 1e-8;

    PrecisionPolicy all_d = policy_for(PolicyVariant::Mixed1);
    all_d.per_stage = {kAllBinary64, kAllBinary64, kAllBinary64};
    all_d.first_step_k1 = kAllBinary64;

    const SolveResult a =
        solve(*sys, x0, 0.0, 20.0, policy_for(PolicyVariant::Double), cfg);
    const SolveResult b = solve(*sys, x0, 0.0, 20.0, all_d, cfg);
    CHECK(a.status == b.status);
    CHECK(a.final_state == b.final_state);
    REQUIRE(a.step_log.size() == b.step_log.size());
    for (size_t i = 0; i < a.step_log.size(); ++i) {
        CHECK(a.step_log[i].t == b.step_log[i].t);
        CHECK(a.step_log[i].h == b.step_log[i].h);
        CHECK(a.step_log[i].err == b.step_log[i].err);
        CHECK(a.step_log[i].accepted == b.step_log[i].accepted);
    }
}

TEST_CASE("solve is deterministic") {
    const auto sys = make_cc(5, 1.0, 1.5, 4);
    Vector x0(20);
    SplitMix64 rng(14);
    for (int i = 0; i < 5; ++i) {
        x0[4 * i] = 1.0 + 0.1 * rng.uniform01();
        x0[4 * i + 1] = 1.0;
        x0[4 * i + 2] = -1.19;
        x0[4 * i + 3] = -0.62;
    }
    SolverConfig cfg;
    cfg.rel_tol = 1e-5;
    cfg.abs_tol = 1e-7;
    cfg.time_limits_enabled = false;
    const auto policy = policy_for(PolicyVariant::Mixed2);
    const SolveResult a = solve(*sys, x0, 0.0, 30.0, policy, cfg);
    const SolveResult b = solve(*sys, x0, 0.0, 30.0, policy, cfg);
    CHECK(a.status == b.status);
    CHECK(a.n_accepted == b.n_accepted);
    CHECK(a.n_failed == b.n_failed);
    CHECK(a.final_state == b.final_state);
    REQUIRE(a.step_log.size() == b.step_log.size());
    for (size_t i = 0; i < a.step_log.size(); ++i)
        CHECK(a.step_log[i].err == b.step_log[i].err);
}

TEST_CASE("one-step order of convergence is four") {
    const auto sys = make_lco(4, 1);
    Vector x0(8);
    SplitMix64 rng(3);
    for (Eigen::Index i = 0; i < 8; ++i) x0[i] = rng.uniform(0.0, 2.0);
    SolverConfig cfg;
    cfg.rel_tol = 0.5;  // accept anything; fixed-h probe
    cfg.abs_tol = 0.5;
    const auto policy = policy_for(PolicyVariant::Double);
    const Vector k1 = sys->eval_rhs(0.0, x0, kAllBinary64);

    double prev_err = 0.0;
    double h = 0.1;
    for (int level = 0; level < 4; ++level) {
        const StepOutcome o = bs32_step(*sys, 0.0, x0, h, k1, policy, cfg);
        const Vector exact = lco_analytic(x0, h);
        const double err = (o.x_next - exact).cwiseAbs().maxCoeff();
        if (level > 0) {
            const double ratio = prev_err / err;
            CHECK(ratio >= 12.0);
            CHECK(ratio <= 20.0);
        }
        prev_err = err;
        h *= 0.5;
    }
}

TEST_CASE("failure statuses") {
    const auto sys = make_lco(4, 2);
    Vector x0(8);
    SplitMix64 rng(6);
    for (Eigen::Index i = 0; i < 8; ++i) x0[i] = rng.uniform(0.0, 2.0);

    SolverConfig cfg;
    cfg.rel_tol = 1e-8;
    cfg.abs_tol = 1e-10;

    SUBCASE("max iterations") {
        cfg.max_iterations = 5;
        const auto r = solve(*sys, x0, 0.0, 1e4, policy_for(PolicyVariant::Double), cfg);
        CHECK(r.status == SolveStatus::MaxIterations);
        CHECK(r.total_steps() <= 5);
    }
    SUBCASE("wall clock") {
        cfg.wall_clock_limit = 0.0;
        const auto r = solve(*sys, x0, 0.0, 1e4, policy_for(PolicyVariant::Double), cfg);
        CHECK(r.status == SolveStatus::WallClock);
    }
    SUBCASE("slow solver") {
        cfg.slow_solver_elapsed = 0.0;
        const auto r = solve(*sys, x0, 0.0, 1e4, policy_for(PolicyVariant::Double), cfg);
        CHECK(r.status == SolveStatus::SlowSolver);
    }
    SUBCASE("non-finite field") {
        const ScalarNan nan_sys;
        Vector one(1);
        one << 1.0;
        const auto r = solve(nan_sys, one, 0.0, 1.0, policy_for(PolicyVariant::Double), cfg);
        CHECK(r.status == SolveStatus::NonFinite);
    }
    SUBCASE("invalid config throws") {
        cfg.abs_tol = 1.0;  // violates abs <= rel
        CHECK_THROWS(solve(*sys, x0, 0.0, 1.0, policy_for(PolicyVariant::Double), cfg));
        SolverConfig c2;
        CHECK_THROWS(solve(*sys, x0, 1.0, 1.0, policy_for(PolicyVariant::Double), c2));
    }
}

TEST_CASE("single policy stores state and clock in binary32") {
    const auto sys = make_lco(6, 2);
    Vector x0(12);
    SplitMix64 rng(20);
    for (Eigen::Index i = 0; i < 12; ++i) x0[i] = rng.uniform(0.0, 2.0);
    SolverConfig cfg;
    cfg.rel_tol = 1e-6;
    cfg.abs_tol = 1e-8;
    cfg.record_snapshots = true;

    const auto r = solve(*sys, x0, 0.0, 5.0, policy_for(PolicyVariant::Single), cfg);
    REQUIRE(r.status == SolveStatus::Completed);
    for (const auto& s : r.snapshots)
        for (Eigen::Index i = 0; i < s.x_after.size(); ++i)
            CHECK(round_to(s.x_after[i], FloatFormat::Binary32) == s.x_after[i]);
    for (Eigen::Index i = 0; i < r.final_state.size(); ++i)
        CHECK(round_to(r.final_state[i], FloatFormat::Binary32) == r.final_state[i]);

    // FSAL still holds bitwise against the stored state, which is a
    // binary32-valued vector one or two ulps off the Binary64 combination.
    const auto policy = policy_for(PolicyVariant::Single);
    Vector xf = x0;
    for (Eigen::Index i = 0; i < xf.size(); ++i)
        xf[i] = round_to(xf[i], FloatFormat::Binary32);
    const Vector k1 = sys->eval_rhs(0.0, xf, policy.first_step_k1);
    const StepOutcome o = bs32_step(*sys, 0.0, xf, 0.002, k1, policy, cfg);
    REQUIRE(o.accepted);
    for (Eigen::Index i = 0; i < o.x_store.size(); ++i) {
        CHECK(round_to(o.x_store[i], FloatFormat::Binary32) == o.x_store[i]);
        CHECK(std::abs(o.x_store[i] - o.x_next[i]) <=
              4.0 * machine_epsilon(FloatFormat::Binary32) *
                  (std::abs(o.x_next[i]) + 1.0));
    }
    CHECK(o.k4 == sys->eval_rhs(0.002, o.x_store, policy.stage(4)));

    // Double keeps full-width storage: some slot must be non-representable.
    SolverConfig dcfg = cfg;
    const auto rd = solve(*sys, x0, 0.0, 5.0, policy_for(PolicyVariant::Double), dcfg);
    REQUIRE(rd.status == SolveStatus::Completed);
    bool any_wide = false;
    for (Eigen::Index i = 0; i < rd.final_state.size(); ++i)
        any_wide = any_wide ||
                   round_to(rd.final_state[i], FloatFormat::Binary32) !=
                       rd.final_state[i];
    CHECK(any_wide);
}

TEST_CASE("snapshots capture accepted steps") {
    const auto sys = make_lco(3, 1);
    Vector x0 = identical_lco_state(3, 1.0, 0.5);
    SolverConfig cfg;
    cfg.rel_tol = 1e-4;
    cfg.abs_tol = 1e-6;
    cfg.record_snapshots = true;
    const auto r = solve(*sys, x0, 0.0, 3.0, policy_for(PolicyVariant::Double), cfg);
    CHECK(r.status == SolveStatus::Completed);
    CHECK(static_cast<std::int64_t>(r.snapshots.size()) == r.n_accepted);
    CHECK(r.snapshots.front().x_before == x0);
    CHECK(r.snapshots.back().x_after == r.final_state);
    double tsum = 0.0;
    for (const auto& s : r.snapshots) tsum += s.h;
    CHECK(tsum == doctest::Approx(3.0).epsilon(1e-12));
}
