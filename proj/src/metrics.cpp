#include "mixedstep/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "mixedstep/solver.hpp"

namespace mixedstep {

double normalized_final_error(const Vector& x_ref, const Vector& x,
                              std::int64_t n_agents) {
    if (x_ref.size() != x.size())
        throw std::invalid_argument("normalized_final_error: length mismatch");
    if (n_agents < 1)
        throw std::invalid_argument("normalized_final_error: N must be >= 1");
    return (x_ref - x).norm() / std::sqrt(static_cast<double>(n_agents));
}

ErrorReport error_report(const SolveResult& run, const Vector& x_ref_final,
                         std::int64_t n_agents, double ab, double rel) {
    ErrorReport er;
    er.normalized_final_error =
        normalized_final_error(x_ref_final, run.final_state, n_agents);
    double sum = 0.0;
    std::int64_t n = 0;
    for (const StepRecord& rec : run.step_log) {
        if (rec.accepted) {
            sum += rec.err;
            ++n;
        }
    }
    er.mean_e_bs = n > 0 ? sum / static_cast<double>(n) : 0.0;
    if (!run.snapshots.empty()) {
        double asum = 0.0;
        for (const StepSnapshot& s : run.snapshots)
            asum += real_local_error(s.x_before, s.x_after, s.h, ab, rel);
        er.mean_e_analytic = asum / static_cast<double>(run.snapshots.size());
    }
    return er;
}

double real_local_error(const Vector& x_n, const Vector& x_next, double h_n,
                        double ab, double rel) {
    const Vector x_ex = lco_analytic(x_n, h_n);
    const double delta = ab / rel;
    double err = 0.0;
    for (Eigen::Index k = 0; k < x_next.size(); ++k) {
        const double w = std::max(std::abs(x_ex[k]), delta);
        err = std::max(err, std::abs(x_next[k] - x_ex[k]) / w);
    }
    return err;
}

ThetaCounts theta_counts(const FlopProfile& fp, std::int64_t n_agents, int d,
                         int s, std::optional<int> theta_sch_scalar) {
    int per_component;
    if (theta_sch_scalar) {
        per_component = *theta_sch_scalar;
    } else if (s == 3) {
        per_component = kSchemeFlopsBs32;
    } else {
        throw std::invalid_argument(
            "theta_counts: theta_sch scalar required for s != 3");
    }
    ThetaCounts out;
    const std::int64_t n = n_agents;
    out.theta_ev = fp.theta_f * n + (fp.theta_g + fp.theta_w) * n * n;
    out.theta_sch = static_cast<std::int64_t>(per_component) * d * n;
    out.theta_total = s * out.theta_ev + out.theta_sch;
    return out;
}

double rho_fraction(PolicyVariant variant, const FlopProfile& fp,
                    std::int64_t n_agents, int s) {
    const ThetaCounts tc = theta_counts(fp, n_agents, fp.d, s);
    const double theta = static_cast<double>(tc.theta_total);
    const double n2 = static_cast<double>(n_agents) * static_cast<double>(n_agents);
    switch (variant) {
        case PolicyVariant::Single:
            return 1.0;
        case PolicyVariant::Double:
            return 0.0;
        case PolicyVariant::Mixed1:
            // Stages k2, k3 fully low; k4 evaluates only G low.
            return (2.0 * static_cast<double>(tc.theta_ev) +
                    n2 * static_cast<double>(fp.theta_g)) /
                   theta;
        case PolicyVariant::Mixed2:
            // All three stages evaluate only G low.
            return 3.0 * n2 * static_cast<double>(fp.theta_g) / theta;
    }
    return 0.0;
}

double gamma_of(double rho, double r) {
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("gamma_of: rho must lie in [0, 1]");
    if (!(r > 0.0 && r < 1.0))
        throw std::invalid_argument("gamma_of: r must lie in (0, 1)");
    return rho * r + (1.0 - rho);
}

double beta_of(std::int64_t n_steps_high, std::int64_t n_steps_mixed) {
    if (n_steps_high < 1 || n_steps_mixed < 1)
        throw std::invalid_argument("beta_of: step counts must be >= 1");
    return static_cast<double>(n_steps_high) / static_cast<double>(n_steps_mixed);
}

double capital_gamma_of(double gamma, double beta) {
    if (beta <= 0.0)
        throw std::invalid_argument("capital_gamma_of: beta must be positive");
    return gamma / beta;
}

PerfProxy make_perf_proxy(PolicyVariant variant, const FlopProfile& fp,
                          std::int64_t n_agents, int s,
                          std::int64_t n_steps_high, std::int64_t n_steps_mixed,
                          double r) {
    PerfProxy p;
    p.r = r;
    p.s = s;
    const ThetaCounts tc = theta_counts(fp, n_agents, fp.d, s);
    p.theta_ev = tc.theta_ev;
    p.theta_sch = tc.theta_sch;
    p.theta_total = tc.theta_total;
    p.rho = rho_fraction(variant, fp, n_agents, s);
    p.beta = beta_of(n_steps_high, n_steps_mixed);
    p.gamma = gamma_of(p.rho, r);
    p.capital_gamma = capital_gamma_of(p.gamma, p.beta);
    return p;
}

}  // namespace mixedstep
