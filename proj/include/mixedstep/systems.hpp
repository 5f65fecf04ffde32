#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "mixedstep/precision.hpp"

namespace mixedstep {

using Vector = Eigen::VectorXd;

enum class Benchmark : std::uint8_t { LCO, Kuramoto, CC };

const char* benchmark_name(Benchmark b) noexcept;
std::optional<Benchmark> benchmark_from_name(std::string_view name) noexcept;

/// Flop counts per elementary evaluation, under the convention: each floating
/// add/sub/mul/div counts 1, each elementary-function call (sin, arctan)
/// counts 1, integer powers count their multiplies, and weighting plus
/// accumulation per interaction costs 2d (one multiply, one add per slot).
struct FlopProfile {
    std::int64_t theta_f;  // per F_i evaluation
    std::int64_t theta_g;  // per G_ij evaluation
    std::int64_t theta_w;  // per interaction weighting + accumulation (2d)
    int d;
};

/// Fixed constants of the circadian clock / cell cycle benchmark.
struct CcConstants {
    static constexpr double k0 = 2.0;
    static constexpr double k2 = 0.144832;
    static constexpr double k3 = 2.0;
    static constexpr double a = 2.0;
    static constexpr double b = 0.7;
    static constexpr double c = 0.8;
    static constexpr int hill_h = 4;
    static constexpr double eps = 0.228249;
    static constexpr double k1_mean = 0.339278;
    static constexpr double k1_sdev = 0.090909;
};

struct BenchmarkParams {
    Benchmark benchmark = Benchmark::LCO;
    Vector omega;         // Kuramoto natural frequencies
    double sigma = 0.0;   // std. dev. of omega
    double coupling_k = 0.0;
    Vector k1_vec;        // CC per-agent k1
    Vector theta_h_vec;   // CC per-agent k1/(k0-k1)
    double stimulus_i0 = 0.0;
    double t_final = 0.0;
};

/// A population of N agents of dimension d with full pairwise coupling:
///   dX_i/dt = F_i(t, X_i) + sum_j M_ij . G_ij(t, X_i, X_j)
/// State vectors have length d*N; agent i occupies slots [i*d, (i+1)*d).
/// Systems are immutable after construction and eval_rhs is pure.
class CoupledSystem {
  public:
    virtual ~CoupledSystem() = default;

    int dim() const noexcept { return d_; }
    int agents() const noexcept { return n_agents_; }
    Eigen::Index size() const noexcept {
        return static_cast<Eigen::Index>(d_) * n_agents_;
    }
    const BenchmarkParams& params() const noexcept { return params_; }
    const FlopProfile& flop_profile() const noexcept { return flops_; }
    const Vector& weights() const noexcept { return m_; }

    /// Mixed-precision right-hand side. F_i is evaluated with inputs rounded
    /// to sp.f_prec and arithmetic in sp.f_prec; each G_ij likewise in
    /// sp.g_prec; G results are cast to sp.sum_prec, weighted by M and
    /// accumulated in sp.sum_prec in ascending j (j = 0..N-1 including j = i);
    /// the final F + coupling sum is formed in the wider of (f_prec, sum_prec)
    /// and returned as Binary64. Non-finite values propagate to the output.
    virtual void eval_rhs(double t, const Vector& x, const StagePrecision& sp,
                          Vector& out) const = 0;

    Vector eval_rhs(double t, const Vector& x, const StagePrecision& sp) const {
        Vector out(x.size());
        eval_rhs(t, x, sp, out);
        return out;
    }

  protected:
    CoupledSystem(int d, int n_agents, BenchmarkParams params, FlopProfile flops,
                  Vector m)
        : d_(d),
          n_agents_(n_agents),
          params_(std::move(params)),
          flops_(flops),
          m_(std::move(m)) {}

  private:
    int d_;
    int n_agents_;
    BenchmarkParams params_;
    FlopProfile flops_;
    Vector m_;
};

/// Harmonic oscillators with linear coupling through the position slot,
/// M_ij = (1/N, 0).
std::unique_ptr<CoupledSystem> make_lco(int n_agents, std::uint64_t seed);

/// Kuramoto phase oscillators, omega_i ~ Normal(0, sigma^2) from the seeded
/// generator, G_ij = K sin(x_j - x_i), M_ij = 1/N.
std::unique_ptr<CoupledSystem> make_kuramoto(int n_agents, double sigma,
                                             double coupling_k,
                                             std::uint64_t seed);

/// Goodwin-type clock coupled to a FitzHugh-Nagumo-type cycle; per-agent
/// k1 ~ Normal(0.339278, 0.090909^2) redrawn into (0.05, 1.95) so that
/// theta_h = k1/(k0 - k1) stays positive and bounded. M_ij = (1/N, 0, 0, 0).
std::unique_ptr<CoupledSystem> make_cc(int n_agents, double coupling_k,
                                       double stimulus_i0, std::uint64_t seed);

/// Exact solution of the linear-oscillator benchmark at time t >= 0, by
/// mean/deviation decomposition: the mean pair rotates, each deviation pair
/// follows exp(tA) with A = [[-1, 1], [-1, 0]], i.e. a damped oscillation
/// exp(-t/2) [cos(wt) I + sin(wt)/w (A + I/2)] with w = sqrt(3)/2.
Vector lco_analytic(const Vector& x0, double t);

}  // namespace mixedstep
