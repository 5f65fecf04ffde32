#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mixedstep/precision.hpp"
#include "mixedstep/systems.hpp"

namespace mixedstep {

/// Embedded Runge-Kutta pair coefficients. Row sums of `a` equal `c`;
/// both weight rows sum to 1. For FSAL pairs the last row of `a` equals `b`,
/// so the last stage of an accepted step is the next step's first stage.
struct ButcherTableau {
    Eigen::VectorXd c;
    Eigen::MatrixXd a;        // strictly lower triangular
    Eigen::VectorXd b;        // high-order weights
    Eigen::VectorXd b_tilde;  // low-order weights
    int order_high;
    int order_low;
    bool fsal;

    int stages() const { return static_cast<int>(c.size()); }

    /// Bogacki-Shampine 3(2): 4 stages, FSAL.
    static const ButcherTableau& bs32();
    /// Dormand-Prince 5(4): 7 stages, FSAL (the ode45 pair).
    static const ButcherTableau& dp54();
};

/// Static per-component flop count of the tableau combinations plus the
/// error estimate, as implemented by the stepper (theta_sch of the
/// performance model). 30 for the BS 3(2) pair.
int scheme_flops_per_component(const ButcherTableau& tab);

inline constexpr int kSchemeFlopsBs32 = 30;

struct SolverConfig {
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;  // must satisfy 0 < abs_tol <= rel_tol < 1

    double h_min_factor = 100.0;  // h_min = factor * eps of the lowest format
    std::int64_t max_iterations = 100000;
    std::int64_t max_failed_steps = 85000;  // 0.85 * max_iterations

    bool time_limits_enabled = true;
    double wall_clock_limit = 5400.0;    // seconds (1.5 h)
    double slow_solver_elapsed = 2700.0; // seconds (45 min)
    double slow_solver_progress = 0.10;

    // Elementary step-size controller h' = h min(fac_max, max(fac_min,
    // safety (tol/err)^exponent)); exponent 1/(order_low + 1).
    double safety = 0.9;
    double fac_min = 0.2;
    double fac_max = 5.0;
    double controller_exponent = 1.0 / 3.0;

    bool record_step_log = true;
    bool record_snapshots = false;  // (x_n, x_next, h) per accepted step
};

enum class SolveStatus : std::uint8_t {
    Completed,
    MaxIterations,
    MaxFailedSteps,
    WallClock,
    SlowSolver,
    StepTooSmall,
    NonFinite,
};

const char* status_name(SolveStatus s) noexcept;

struct StepOutcome {
    Vector x_next;   // 3rd-order solution (Binary64 combination)
    Vector x_tilde;  // 2nd-order solution
    double err;      // E_BS (non-finite if the step blew up)
    bool accepted;   // err <= rel_tol
    Vector k4;       // FSAL: next step's k1, evaluated at the stored state
    Vector x_store;  // state the solver propagates; equals x_next except
                     // under binary32 storage, where the combination chain
                     // runs in binary32 arithmetic
    double h_used;
    double h_next;
};

struct StepRecord {
    double t;
    double h;
    double err;
    bool accepted;
};

/// State pair retained per accepted step for local-error analysis.
struct StepSnapshot {
    Vector x_before;
    Vector x_after;
    double h;
};

/// Flop tally split by format, using the system's flop profile per
/// evaluation plus the scheme combination count per attempted step.
struct FlopTally {
    std::int64_t low = 0;
    std::int64_t high = 0;
    std::int64_t rhs_evals = 0;

    double low_fraction() const {
        const double tot = static_cast<double>(low) + static_cast<double>(high);
        return tot > 0.0 ? static_cast<double>(low) / tot : 0.0;
    }
};

struct SolveResult {
    SolveStatus status = SolveStatus::Completed;
    Vector final_state;
    double t_reached = 0.0;
    std::int64_t n_accepted = 0;
    std::int64_t n_failed = 0;
    std::vector<StepRecord> step_log;
    std::vector<StepSnapshot> snapshots;
    FlopTally flops;

    std::int64_t total_steps() const { return n_accepted + n_failed; }
};

/// Local relative error of Eq.-style weighting: W_k = max(|x_n,k|,
/// |x_next,k|, ab/rel), E = max_k |x_next,k - x_tilde,k| / W_k. Binary64.
double estimate_error(const Vector& x_n, const Vector& x_next,
                      const Vector& x_tilde, double ab, double rel);

/// h' = h min(fac_max, max(fac_min, safety (rel_tol/err)^exponent));
/// err = 0 grows by fac_max.
double adjust_step(double h, double err, double rel_tol, const SolverConfig& cfg);

/// Two-evaluation startup heuristic (both evaluations in Binary64, so h0 is
/// policy-independent), capped by (t_final - t0)/10. Returns NaN when the
/// field is non-finite at x0. `order` is the propagating method's order.
double initial_step(const CoupledSystem& sys, double t0, double t_final,
                    const Vector& x0, const SolverConfig& cfg, int order = 3,
                    FlopTally* tally = nullptr);

/// One Bogacki-Shampine 3(2) attempt from (t, x_n) with supplied k1 (FSAL).
/// Stages k2..k4 evaluate under the policy rows; all tableau combinations
/// and the error estimate are Binary64.
StepOutcome bs32_step(const CoupledSystem& sys, double t, const Vector& x_n,
                      double h, const Vector& k1, const PrecisionPolicy& policy,
                      const SolverConfig& cfg, FlopTally* tally = nullptr);

/// Adaptive BS 3(2) loop with FSAL, the failure conditions, and the
/// elementary controller. Numerical failures are reported in the status,
/// never thrown.
SolveResult solve(const CoupledSystem& sys, const Vector& x0, double t0,
                  double t_final, const PrecisionPolicy& policy,
                  const SolverConfig& cfg);

/// Dormand-Prince 5(4) all-Binary64 reference run at rel = abs = 1e-9
/// (controller exponent 1/5). Time limits and logging flags are taken from
/// `cfg`; tolerances are forced.
SolveResult dp54_reference(const CoupledSystem& sys, const Vector& x0,
                           double t0, double t_final,
                           const SolverConfig& cfg = SolverConfig{});

}  // namespace mixedstep
