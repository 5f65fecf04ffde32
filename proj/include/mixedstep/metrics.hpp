#pragma once

#include <cstdint>
#include <optional>

#include "mixedstep/precision.hpp"
#include "mixedstep/systems.hpp"

namespace mixedstep {

/// Performance-proxy quantities: r the low/high per-flop time ratio, rho the
/// fraction of flops in low precision, gamma = rho r + (1 - rho) the per-step
/// time ratio, beta the high/mixed step-count ratio, and Gamma = gamma/beta
/// the total time ratio.
struct PerfProxy {
    double r = 0.5;
    double rho = 0.0;
    double beta = 1.0;
    double gamma = 1.0;
    double capital_gamma = 1.0;
    std::int64_t theta_ev = 0;
    std::int64_t theta_sch = 0;
    std::int64_t theta_total = 0;
    int s = 3;
    std::optional<double> t_l;
    std::optional<double> t_h;
};

struct ErrorReport {
    double normalized_final_error = 0.0;
    double mean_e_bs = 0.0;
    std::optional<double> mean_e_analytic;  // linear-oscillator runs only
};

struct SolveResult;  // solver.hpp

struct ThetaCounts {
    std::int64_t theta_ev;
    std::int64_t theta_sch;
    std::int64_t theta_total;
};

/// ||x_ref - x||_2 / sqrt(N).
double normalized_final_error(const Vector& x_ref, const Vector& x,
                              std::int64_t n_agents);

/// Gathers the error metrics of one completed run against a reference final
/// state: normalized final error, the mean estimated local error over
/// accepted steps, and (when snapshots were recorded) the mean analytic
/// local error.
ErrorReport error_report(const SolveResult& run, const Vector& x_ref_final,
                         std::int64_t n_agents, double ab, double rel);

/// One-step error against the analytic linear-oscillator propagator,
/// re-anchored at x_n: max_k |x_next,k - x_ex,k| / max(|x_ex,k|, ab/rel).
double real_local_error(const Vector& x_n, const Vector& x_next, double h_n,
                        double ab, double rel);

/// Theta_ev = theta_F N + (theta_G + theta_w) N^2, Theta_sch =
/// theta_sch(s) d N, Theta = s Theta_ev + Theta_sch. `s` must be 3 (the
/// BS 3(2) effective stage count) unless theta_sch_scalar is given.
ThetaCounts theta_counts(const FlopProfile& fp, std::int64_t n_agents, int d,
                         int s, std::optional<int> theta_sch_scalar = {});

/// Fraction of flops in low precision for each named policy (symbolic form;
/// campaign accounting uses the solver's actual tallies).
double rho_fraction(PolicyVariant variant, const FlopProfile& fp,
                    std::int64_t n_agents, int s);

double gamma_of(double rho, double r);
double beta_of(std::int64_t n_steps_high, std::int64_t n_steps_mixed);
double capital_gamma_of(double gamma, double beta);

/// Assembles the symbolic performance proxy for one solver run: rho from the
/// policy's flop split, beta from the step-count ratio, gamma and Gamma from
/// the r model. Step counts include failed steps.
PerfProxy make_perf_proxy(PolicyVariant variant, const FlopProfile& fp,
                          std::int64_t n_agents, int s,
                          std::int64_t n_steps_high, std::int64_t n_steps_mixed,
                          double r);

}  // namespace mixedstep
