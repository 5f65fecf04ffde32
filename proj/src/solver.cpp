#include "mixedstep/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mixedstep {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ButcherTableau make_bs32() {
    ButcherTableau t;
    t.c.resize(4);
    t.c << 0.0, 0.5, 0.75, 1.0;
    t.a = Eigen::MatrixXd::Zero(4, 4);
    t.a(1, 0) = 0.5;
    t.a(2, 1) = 0.75;
    t.a(3, 0) = 2.0 / 9.0;
    t.a(3, 1) = 1.0 / 3.0;
    t.a(3, 2) = 4.0 / 9.0;
    t.b.resize(4);
    t.b << 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0;
    t.b_tilde.resize(4);
    t.b_tilde << 7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125;
    t.order_high = 3;
    t.order_low = 2;
    t.fsal = true;
    return t;
}

ButcherTableau make_dp54() {
    ButcherTableau t;
    t.c.resize(7);
    t.c << 0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0;
    t.a = Eigen::MatrixXd::Zero(7, 7);
    t.a(1, 0) = 0.2;
    t.a(2, 0) = 3.0 / 40.0;
    t.a(2, 1) = 9.0 / 40.0;
    t.a(3, 0) = 44.0 / 45.0;
    t.a(3, 1) = -56.0 / 15.0;
    t.a(3, 2) = 32.0 / 9.0;
    t.a(4, 0) = 19372.0 / 6561.0;
    t.a(4, 1) = -25360.0 / 2187.0;
    t.a(4, 2) = 64448.0 / 6561.0;
    t.a(4, 3) = -212.0 / 729.0;
    t.a(5, 0) = 9017.0 / 3168.0;
    t.a(5, 1) = -355.0 / 33.0;
    t.a(5, 2) = 46732.0 / 5247.0;
    t.a(5, 3) = 49.0 / 176.0;
    t.a(5, 4) = -5103.0 / 18656.0;
    t.a(6, 0) = 35.0 / 384.0;
    t.a(6, 2) = 500.0 / 1113.0;
    t.a(6, 3) = 125.0 / 192.0;
    t.a(6, 4) = -2187.0 / 6784.0;
    t.a(6, 5) = 11.0 / 84.0;
    t.b = t.a.row(6).transpose();
    t.b_tilde.resize(7);
    t.b_tilde << 5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
        -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0;
    t.order_high = 5;
    t.order_low = 4;
    t.fsal = true;
    return t;
}

void tally_eval(FlopTally* tally, const CoupledSystem& sys,
                const StagePrecision& sp) {
    if (!tally) return;
    const FlopProfile& fp = sys.flop_profile();
    const auto n = static_cast<std::int64_t>(sys.agents());
    auto& f_bucket = sp.f_prec == FloatFormat::Binary32 ? tally->low : tally->high;
    auto& g_bucket = sp.g_prec == FloatFormat::Binary32 ? tally->low : tally->high;
    auto& w_bucket = sp.sum_prec == FloatFormat::Binary32 ? tally->low : tally->high;
    f_bucket += fp.theta_f * n;
    g_bucket += fp.theta_g * n * n;
    w_bucket += fp.theta_w * n * n;
    ++tally->rhs_evals;
}

// Binary32 combination for the mono-precision stored state, accumulated
// stage by stage (x += h b_l k_l) with every operation rounded to binary32.
Vector combine_binary32(const ButcherTableau& tab, int row, const Vector& x_n,
                        double h, const std::vector<Vector>& k) {
    const auto hf = static_cast<float>(h);
    const int s = tab.stages();
    Vector out(x_n.size());
    std::vector<float> coef(static_cast<size_t>(s), 0.0f);
    for (int m = 0; m < s; ++m)
        coef[static_cast<size_t>(m)] = hf * static_cast<float>(tab.a(row, m));
    for (Eigen::Index i = 0; i < x_n.size(); ++i) {
        auto acc = static_cast<float>(x_n[i]);
        for (int m = 0; m < row; ++m) {
            if (tab.a(row, m) == 0.0) continue;
            acc += coef[static_cast<size_t>(m)] *
                   static_cast<float>(k[static_cast<size_t>(m)][i]);
        }
        out[i] = static_cast<double>(acc);
    }
    return out;
}

// One embedded-pair attempt with per-stage precision rows (rows[l-2] for
// stage l). Stage arguments, both solutions and the estimate are Binary64;
// binary32 storage additionally forms the propagated state in binary32 and
// feeds it to the FSAL stage.
StepOutcome rk_step(const CoupledSystem& sys, const ButcherTableau& tab,
                    const std::vector<StagePrecision>& rows, double t,
                    const Vector& x_n, double h, const Vector& k1,
                    FloatFormat storage, const SolverConfig& cfg,
                    FlopTally* tally) {
    const int s = tab.stages();
    const Eigen::Index nv = x_n.size();
    const bool store32 = storage == FloatFormat::Binary32;

    StepOutcome out;
    out.h_used = h;
    out.err = kNaN;
    out.accepted = false;

    std::vector<Vector> k(static_cast<size_t>(s));
    k[0] = k1;

    Vector combo(nv);
    Vector arg(nv);
    bool finite = true;
    for (int l = 1; l < s && finite; ++l) {
        bool first = true;
        for (int m = 0; m < l; ++m) {
            const double alm = tab.a(l, m);
            if (alm == 0.0) continue;
            if (first) {
                combo = alm * k[static_cast<size_t>(m)];
                first = false;
            } else {
                combo += alm * k[static_cast<size_t>(m)];
            }
        }
        arg = x_n + h * combo;
        if (tab.fsal && l == s - 1) {
            out.x_next = arg;  // a's last row equals b
            if (store32) {
                out.x_store = combine_binary32(tab, l, x_n, h, k);
                arg = out.x_store;  // FSAL evaluates at the stored state
            }
        }
        sys.eval_rhs(t + tab.c[l] * h, arg, rows[static_cast<size_t>(l - 1)],
                     k[static_cast<size_t>(l)]);
        tally_eval(tally, sys, rows[static_cast<size_t>(l - 1)]);
        finite = k[static_cast<size_t>(l)].allFinite();
    }
    if (tally) tally->high += static_cast<std::int64_t>(
        scheme_flops_per_component(tab)) * nv;

    if (!finite) {
        // Failed stage: shrink hard (controller floor plus one extra halving).
        out.h_next = h * cfg.fac_min * 0.5;
        return out;
    }

    out.k4 = k[static_cast<size_t>(s - 1)];

    if (!tab.fsal) {
        bool bfirst = true;
        for (int l = 0; l < s; ++l) {
            const double bl = tab.b[l];
            if (bl == 0.0) continue;
            if (bfirst) {
                combo = bl * k[static_cast<size_t>(l)];
                bfirst = false;
            } else {
                combo += bl * k[static_cast<size_t>(l)];
            }
        }
        out.x_next = x_n + h * combo;
    }
    if (!store32) {
        out.x_store = out.x_next;
    } else if (out.x_store.size() == 0) {
        out.x_store = out.x_next;
        for (Eigen::Index i = 0; i < nv; ++i)
            out.x_store[i] = round_to(out.x_store[i], FloatFormat::Binary32);
    }

    bool first = true;
    for (int l = 0; l < s; ++l) {
        const double bt = tab.b_tilde[l];
        if (bt == 0.0) continue;
        if (first) {
            combo = bt * k[static_cast<size_t>(l)];
            first = false;
        } else {
            combo += bt * k[static_cast<size_t>(l)];
        }
    }
    out.x_tilde = x_n + h * combo;

    if (!out.x_next.allFinite() || !out.x_tilde.allFinite() ||
        !out.x_store.allFinite()) {
        out.h_next = h * cfg.fac_min * 0.5;
        return out;
    }

    out.err = estimate_error(x_n, out.x_next, out.x_tilde, cfg.abs_tol, cfg.rel_tol);
    if (!std::isfinite(out.err)) {
        out.h_next = h * cfg.fac_min * 0.5;
        return out;
    }
    out.accepted = out.err <= cfg.rel_tol;
    out.h_next = adjust_step(h, out.err, cfg.rel_tol, cfg);
    return out;
}

void validate(const SolverConfig& cfg, double t0, double t_final) {
    if (!(cfg.abs_tol > 0.0 && cfg.abs_tol <= cfg.rel_tol && cfg.rel_tol < 1.0))
        throw std::invalid_argument("solver: need 0 < abs_tol <= rel_tol < 1");
    if (!(cfg.fac_min < 1.0 && cfg.fac_max > 1.0))
        throw std::invalid_argument("solver: need fac_min < 1 < fac_max");
    if (!(t_final > t0))
        throw std::invalid_argument("solver: need t_final > t0");
}

SolveResult solve_core(const CoupledSystem& sys, const ButcherTableau& tab,
                       const std::vector<StagePrecision>& rows,
                       const StagePrecision& k1_row, FloatFormat lowest,
                       FloatFormat storage, const Vector& x0, double t0,
                       double t_final, const SolverConfig& cfg) {
    validate(cfg, t0, t_final);

    // Binary32 storage: the initial state is rounded here; accepted steps
    // already carry their binary32-combined state, and the clock rounds as
    // it advances.
    const bool round_state = storage == FloatFormat::Binary32;
    auto store = [&](Vector& v) {
        if (!round_state) return;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = round_to(v[i], FloatFormat::Binary32);
    };

    SolveResult res;
    res.final_state = x0;
    res.t_reached = t0;

    const double h_min = cfg.h_min_factor * machine_epsilon(lowest);
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t_start)
            .count();
    };

    double h = initial_step(sys, t0, t_final, x0, cfg, tab.order_high, &res.flops);
    if (!std::isfinite(h)) {
        res.status = SolveStatus::NonFinite;
        return res;
    }

    double t = t0;
    Vector x = x0;
    store(x);
    Vector k1 = sys.eval_rhs(t0, x, k1_row);
    tally_eval(&res.flops, sys, k1_row);
    if (!k1.allFinite()) {
        res.status = SolveStatus::NonFinite;
        return res;
    }

    bool need_k1 = false;  // set after a rejection: k1 is recomputed
    for (;;) {
        if (res.total_steps() >= cfg.max_iterations) {
            res.status = SolveStatus::MaxIterations;
            break;
        }
        if (res.n_failed >= cfg.max_failed_steps) {
            res.status = SolveStatus::MaxFailedSteps;
            break;
        }
        if (cfg.time_limits_enabled) {
            const double el = elapsed();
            if (el > cfg.wall_clock_limit) {
                res.status = SolveStatus::WallClock;
                break;
            }
            if (el > cfg.slow_solver_elapsed &&
                (t - t0) < cfg.slow_solver_progress * (t_final - t0)) {
                res.status = SolveStatus::SlowSolver;
                break;
            }
        }
        if (h <= h_min) {
            res.status = SolveStatus::StepTooSmall;
            break;
        }

        if (need_k1) {
            k1 = sys.eval_rhs(t, x, k1_row);
            tally_eval(&res.flops, sys, k1_row);
            need_k1 = false;
            if (!k1.allFinite()) {
                res.status = SolveStatus::NonFinite;
                break;
            }
        }

        // Clip so the final step lands exactly on t_final.
        bool last = false;
        double h_att = h;
        if (t + 1.01 * h >= t_final) {
            h_att = t_final - t;
            last = true;
        }

        StepOutcome o =
            rk_step(sys, tab, rows, t, x, h_att, k1, storage, cfg, &res.flops);
        if (cfg.record_step_log)
            res.step_log.push_back({t, h_att, o.err, o.accepted});

        if (o.accepted) {
            ++res.n_accepted;
            Vector x_prev;
            if (cfg.record_snapshots) x_prev = x;
            x = std::move(o.x_store);
            if (cfg.record_snapshots)
                res.snapshots.push_back({std::move(x_prev), x, h_att});
            t = last ? t_final
                     : (round_state ? round_to(t + h_att, FloatFormat::Binary32)
                                    : t + h_att);
            k1 = std::move(o.k4);  // FSAL
            h = o.h_next;
            if (t >= t_final) {
                res.status = SolveStatus::Completed;
                break;
            }
        } else {
            ++res.n_failed;
            h = o.h_next;
            need_k1 = true;
        }
    }

    res.final_state = std::move(x);
    res.t_reached = t;
    return res;
}

}  // namespace

const ButcherTableau& ButcherTableau::bs32() {
    static const ButcherTableau t = make_bs32();
    return t;
}

const ButcherTableau& ButcherTableau::dp54() {
    static const ButcherTableau t = make_dp54();
    return t;
}

int scheme_flops_per_component(const ButcherTableau& tab) {
    // Mirrors rk_step: each combination over nz nonzero coefficients costs
    // nz + 1 multiplies and nz adds per component; the estimate costs 8.
    int flops = 0;
    const int s = tab.stages();
    for (int l = 1; l < s; ++l) {
        int nz = 0;
        for (int m = 0; m < l; ++m)
            if (tab.a(l, m) != 0.0) ++nz;
        flops += 2 * nz + 1;
    }
    if (!tab.fsal) {
        int nz = 0;
        for (int l = 0; l < s; ++l)
            if (tab.b[l] != 0.0) ++nz;
        flops += 2 * nz + 1;
    }
    int nz = 0;
    for (int l = 0; l < s; ++l)
        if (tab.b_tilde[l] != 0.0) ++nz;
    flops += 2 * nz + 1;
    flops += 8;  // estimate: 2 abs, 2 max, sub, abs, div, running max
    return flops;
}

const char* status_name(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::Completed: return "Completed";
        case SolveStatus::MaxIterations: return "MaxIterations";
        case SolveStatus::MaxFailedSteps: return "MaxFailedSteps";
        case SolveStatus::WallClock: return "WallClock";
        case SolveStatus::SlowSolver: return "SlowSolver";
        case SolveStatus::StepTooSmall: return "StepTooSmall";
        case SolveStatus::NonFinite: return "NonFinite";
    }
    return "?";
}

double estimate_error(const Vector& x_n, const Vector& x_next,
                      const Vector& x_tilde, double ab, double rel) {
    if (x_n.size() != x_next.size() || x_n.size() != x_tilde.size())
        throw std::invalid_argument("estimate_error: length mismatch");
    const double floor_w = ab / rel;
    double err = 0.0;
    for (Eigen::Index i = 0; i < x_n.size(); ++i) {
        const double w =
            std::max(std::max(std::abs(x_n[i]), std::abs(x_next[i])), floor_w);
        err = std::max(err, std::abs(x_next[i] - x_tilde[i]) / w);
    }
    return err;
}

double adjust_step(double h, double err, double rel_tol,
                   const SolverConfig& cfg) {
    if (err <= 0.0) return h * cfg.fac_max;
    const double fac = cfg.safety * std::pow(rel_tol / err, cfg.controller_exponent);
    return h * std::clamp(fac, cfg.fac_min, cfg.fac_max);
}

double initial_step(const CoupledSystem& sys, double t0, double t_final,
                    const Vector& x0, const SolverConfig& cfg, int order,
                    FlopTally* tally) {
    const double cap = (t_final - t0) / 10.0;
    const Vector f0 = sys.eval_rhs(t0, x0, kAllBinary64);
    if (tally) tally_eval(tally, sys, kAllBinary64);
    if (!f0.allFinite()) return kNaN;

    const Vector sk = (cfg.abs_tol + cfg.rel_tol * x0.array().abs()).matrix();
    const double inv_n = 1.0 / static_cast<double>(x0.size());
    const double d0 = std::sqrt((x0.array() / sk.array()).square().sum() * inv_n);
    const double d1 = std::sqrt((f0.array() / sk.array()).square().sum() * inv_n);
    if (d1 < 1e-12) return cap;  // flat field: nothing to resolve

    const double h1 = (d0 >= 1e-8) ? 0.01 * d0 / d1 : 1e-6;
    const Vector x1 = x0 + h1 * f0;
    const Vector f1 = sys.eval_rhs(t0 + h1, x1, kAllBinary64);
    if (tally) tally_eval(tally, sys, kAllBinary64);

    double h2;
    if (!f1.allFinite()) {
        h2 = h1 * 1e-3;
    } else {
        const double d2 =
            std::sqrt(((f1 - f0).array() / sk.array()).square().sum() * inv_n) / h1;
        const double der = std::max(d1, d2);
        h2 = der < 1e-12
                 ? cap
                 : std::pow(0.01 / der, 1.0 / static_cast<double>(order + 1));
    }
    return std::min({100.0 * h1, h2, cap});
}

StepOutcome bs32_step(const CoupledSystem& sys, double t, const Vector& x_n,
                      double h, const Vector& k1, const PrecisionPolicy& policy,
                      const SolverConfig& cfg, FlopTally* tally) {
    const std::vector<StagePrecision> rows = {policy.stage(2), policy.stage(3),
                                              policy.stage(4)};
    return rk_step(sys, ButcherTableau::bs32(), rows, t, x_n, h, k1,
                   policy.storage, cfg, tally);
}

SolveResult solve(const CoupledSystem& sys, const Vector& x0, double t0,
                  double t_final, const PrecisionPolicy& policy,
                  const SolverConfig& cfg) {
    const std::vector<StagePrecision> rows = {policy.stage(2), policy.stage(3),
                                              policy.stage(4)};
    return solve_core(sys, ButcherTableau::bs32(), rows, policy.first_step_k1,
                      policy.lowest_format(), policy.storage, x0, t0, t_final,
                      cfg);
}

SolveResult dp54_reference(const CoupledSystem& sys, const Vector& x0,
                           double t0, double t_final, const SolverConfig& cfg) {
    SolverConfig ref_cfg = cfg;
    ref_cfg.rel_tol = 1e-9;
    ref_cfg.abs_tol = 1e-9;
    ref_cfg.controller_exponent = 1.0 / 5.0;
    ref_cfg.record_snapshots = false;
    const std::vector<StagePrecision> rows(6, kAllBinary64);
    return solve_core(sys, ButcherTableau::dp54(), rows, kAllBinary64,
                      FloatFormat::Binary64, FloatFormat::Binary64, x0, t0,
                      t_final, ref_cfg);
}

}  // namespace mixedstep
