#include "mixedstep/systems.hpp"

#include <cmath>
#include <stdexcept>

#include "mixedstep/rng.hpp"

namespace mixedstep {

namespace {

// Seed streams: parameters and initial conditions draw from independent
// streams of the same test seed (see harness::initial_conditions).
constexpr std::uint64_t kParamStream = 0;

template <class A, class B>
struct wider {
    using type = double;
};
template <>
struct wider<float, float> {
    using type = float;
};
template <class A, class B>
using wider_t = typename wider<A, B>::type;

// Precision-faithful evaluation core. FS/SS/GS are the native scalar types of
// the F, sum and G columns; every elementary operation below happens in the
// corresponding type, matching native binary32/binary64 arithmetic.
template <int D, class FS, class SS, class GS, class Kernel>
void eval_core(const Kernel& kern, int n_agents, double t, const Vector& x,
               const Vector& m, Vector& out) {
    using FVec = Eigen::Matrix<FS, Eigen::Dynamic, 1>;
    using GVec = Eigen::Matrix<GS, Eigen::Dynamic, 1>;
    const FVec xf = x.template cast<FS>();
    const GVec xg = x.template cast<GS>();

    SS mw[D];
    for (int s = 0; s < D; ++s) mw[s] = static_cast<SS>(m[s]);

    for (int i = 0; i < n_agents; ++i) {
        const FS* xi_f = xf.data() + static_cast<std::ptrdiff_t>(i) * D;
        const GS* xi_g = xg.data() + static_cast<std::ptrdiff_t>(i) * D;

        FS fval[D];
        kern.template f<FS>(i, t, xi_f, fval);

        SS acc[D];
        for (int s = 0; s < D; ++s) acc[s] = SS(0);
        for (int j = 0; j < n_agents; ++j) {
            GS gval[D];
            kern.template g<GS>(i, t, xi_g,
                                xg.data() + static_cast<std::ptrdiff_t>(j) * D,
                                gval);
            for (int s = 0; s < D; ++s)
                acc[s] = acc[s] + mw[s] * static_cast<SS>(gval[s]);
        }

        using WS = wider_t<FS, SS>;
        for (int s = 0; s < D; ++s)
            out[static_cast<Eigen::Index>(i) * D + s] = static_cast<double>(
                static_cast<WS>(fval[s]) + static_cast<WS>(acc[s]));
    }
}

template <int D, class Kernel>
void eval_dispatch(const Kernel& kern, int n_agents, double t, const Vector& x,
                   const Vector& m, const StagePrecision& sp, Vector& out) {
    const bool f32 = sp.f_prec == FloatFormat::Binary32;
    const bool s32 = sp.sum_prec == FloatFormat::Binary32;
    const bool g32 = sp.g_prec == FloatFormat::Binary32;
    if (f32) {
        if (s32) {
            if (g32) eval_core<D, float, float, float>(kern, n_agents, t, x, m, out);
            else     eval_core<D, float, float, double>(kern, n_agents, t, x, m, out);
        } else {
            if (g32) eval_core<D, float, double, float>(kern, n_agents, t, x, m, out);
            else     eval_core<D, float, double, double>(kern, n_agents, t, x, m, out);
        }
    } else {
        if (s32) {
            if (g32) eval_core<D, double, float, float>(kern, n_agents, t, x, m, out);
            else     eval_core<D, double, float, double>(kern, n_agents, t, x, m, out);
        } else {
            if (g32) eval_core<D, double, double, float>(kern, n_agents, t, x, m, out);
            else     eval_core<D, double, double, double>(kern, n_agents, t, x, m, out);
        }
    }
}

template <class Kernel>
class PairwiseSystem final : public CoupledSystem {
  public:
    PairwiseSystem(Kernel kern, int n_agents, BenchmarkParams params,
                   FlopProfile flops, Vector m)
        : CoupledSystem(Kernel::kDim, n_agents, std::move(params), flops,
                        std::move(m)),
          kern_(std::move(kern)) {
        kern_.bind(this->params());
    }

    void eval_rhs(double t, const Vector& x, const StagePrecision& sp,
                  Vector& out) const override {
        out.resize(x.size());
        eval_dispatch<Kernel::kDim>(kern_, agents(), t, x, weights(), sp, out);
    }

  private:
    Kernel kern_;
};

struct LcoKernel {
    static constexpr int kDim = 2;

    void bind(const BenchmarkParams&) {}

    template <class S>
    void f(int, double, const S* xi, S* out) const {
        out[0] = xi[1];
        out[1] = -xi[0];
    }
    template <class S>
    void g(int, double, const S* xi, const S* xj, S* out) const {
        out[0] = xj[0] - xi[0];
        out[1] = S(0);
    }
};

struct KuramotoKernel {
    static constexpr int kDim = 1;
    const double* omega = nullptr;
    double coupling_k = 0.0;

    void bind(const BenchmarkParams& p) { omega = p.omega.data(); }

    template <class S>
    void f(int i, double, const S*, S* out) const {
        out[0] = static_cast<S>(omega[i]);
    }
    template <class S>
    void g(int, double, const S* xi, const S* xj, S* out) const {
        out[0] = static_cast<S>(coupling_k) * std::sin(xj[0] - xi[0]);
    }
};

struct CcKernel {
    static constexpr int kDim = 4;
    const double* k1 = nullptr;
    const double* theta_h = nullptr;
    double coupling_k = 0.0;
    double stimulus_i0 = 0.0;

    void bind(const BenchmarkParams& p) {
        k1 = p.k1_vec.data();
        theta_h = p.theta_h_vec.data();
    }

    template <class S>
    void f(int i, double, const S* xi, S* out) const {
        using C = CcConstants;
        const S x1 = xi[0], x2 = xi[1], x3 = xi[2], x4 = xi[3];
        const S th = static_cast<S>(theta_h[i]);
        const S x2sq = x2 * x2;
        const S x2h = x2sq * x2sq;  // hill exponent 4
        out[0] = static_cast<S>(C::k0) * th / (th + x2h) *
                     (static_cast<S>(C::a) * x1 * x1 + S(1)) -
                 static_cast<S>(k1[i]) * x1;
        out[1] = static_cast<S>(C::k2) * (x1 - x2);
        const S x1sq = x1 * x1;
        // k3^2 = 4 is a fixed constant.
        out[2] = x3 * (S(1) - x3 * x3 / S(3)) - x4 +
                 static_cast<S>(stimulus_i0) * (S(1) - S(4) / (S(4) + x1sq));
        out[3] = static_cast<S>(C::eps) *
                 (x3 + static_cast<S>(C::b) - static_cast<S>(C::c) * x4);
    }
    template <class S>
    void g(int i, double, const S* xi, const S* xj, S* out) const {
        using C = CcConstants;
        const S x2 = xi[1];
        const S x2sq = x2 * x2;
        const S th = static_cast<S>(theta_h[i]);
        const S pref =
            static_cast<S>(C::k0) * th * static_cast<S>(C::a) / (th + x2sq * x2sq);
        out[0] = pref * (static_cast<S>(coupling_k) * std::atan(xj[0] - xi[0]));
        out[1] = S(0);
        out[2] = S(0);
        out[3] = S(0);
    }
};

}  // namespace

const char* benchmark_name(Benchmark b) noexcept {
    switch (b) {
        case Benchmark::LCO: return "lco";
        case Benchmark::Kuramoto: return "kuramoto";
        case Benchmark::CC: return "cc";
    }
    return "?";
}

std::optional<Benchmark> benchmark_from_name(std::string_view name) noexcept {
    if (name == "lco") return Benchmark::LCO;
    if (name == "kuramoto") return Benchmark::Kuramoto;
    if (name == "cc") return Benchmark::CC;
    return std::nullopt;
}

std::unique_ptr<CoupledSystem> make_lco(int n_agents, std::uint64_t) {
    if (n_agents < 1) throw std::invalid_argument("make_lco: N must be >= 1");
    BenchmarkParams p;
    p.benchmark = Benchmark::LCO;
    Vector m(2);
    m << 1.0 / n_agents, 0.0;
    // theta_f: one negation; theta_g: one subtraction; theta_w = 2d.
    return std::make_unique<PairwiseSystem<LcoKernel>>(
        LcoKernel{}, n_agents, std::move(p), FlopProfile{1, 1, 4, 2}, std::move(m));
}

std::unique_ptr<CoupledSystem> make_kuramoto(int n_agents, double sigma,
                                             double coupling_k,
                                             std::uint64_t seed) {
    if (n_agents < 1) throw std::invalid_argument("make_kuramoto: N must be >= 1");
    if (sigma < 0.0) throw std::invalid_argument("make_kuramoto: sigma must be >= 0");
    BenchmarkParams p;
    p.benchmark = Benchmark::Kuramoto;
    p.sigma = sigma;
    p.coupling_k = coupling_k;
    p.omega.resize(n_agents);
    SplitMix64 rng(seed, kParamStream);
    for (int i = 0; i < n_agents; ++i) p.omega[i] = sigma * rng.normal();
    Vector m(1);
    m << 1.0 / n_agents;
    KuramotoKernel kern;
    kern.coupling_k = coupling_k;
    // theta_f clamped to 1: F_i is a parameter fetch with no arithmetic.
    return std::make_unique<PairwiseSystem<KuramotoKernel>>(
        std::move(kern), n_agents, std::move(p), FlopProfile{1, 3, 2, 1},
        std::move(m));
}

std::unique_ptr<CoupledSystem> make_cc(int n_agents, double coupling_k,
                                       double stimulus_i0, std::uint64_t seed) {
    if (n_agents < 1) throw std::invalid_argument("make_cc: N must be >= 1");
    BenchmarkParams p;
    p.benchmark = Benchmark::CC;
    p.coupling_k = coupling_k;
    p.stimulus_i0 = stimulus_i0;
    p.k1_vec.resize(n_agents);
    p.theta_h_vec.resize(n_agents);
    SplitMix64 rng(seed, kParamStream);
    for (int i = 0; i < n_agents; ++i) {
        double k1;
        do {
            k1 = CcConstants::k1_mean + CcConstants::k1_sdev * rng.normal();
        } while (!(k1 > 0.05 && k1 < 1.95));
        p.k1_vec[i] = k1;
        p.theta_h_vec[i] = k1 / (CcConstants::k0 - k1);
    }
    Vector m(4);
    m << 1.0 / n_agents, 0.0, 0.0, 0.0;
    CcKernel kern;
    kern.coupling_k = coupling_k;
    kern.stimulus_i0 = stimulus_i0;
    return std::make_unique<PairwiseSystem<CcKernel>>(
        std::move(kern), n_agents, std::move(p), FlopProfile{28, 10, 8, 4},
        std::move(m));
}

Vector lco_analytic(const Vector& x0, double t) {
    if (x0.size() % 2 != 0)
        throw std::invalid_argument("lco_analytic: state length must be 2N");
    const Eigen::Index n = x0.size() / 2;

    double xm0 = 0.0, vm0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        xm0 += x0[2 * i];
        vm0 += x0[2 * i + 1];
    }
    xm0 /= static_cast<double>(n);
    vm0 /= static_cast<double>(n);

    // Mean pair: pure rotation.
    const double ct = std::cos(t), st = std::sin(t);
    const double xm = xm0 * ct + vm0 * st;
    const double vm = -xm0 * st + vm0 * ct;

    // Deviation propagator exp(tA), A = [[-1, 1], [-1, 0]].
    const double w = std::sqrt(3.0) / 2.0;
    const double decay = std::exp(-0.5 * t);
    const double cw = std::cos(w * t);
    const double sw = std::sin(w * t) / w;
    const double p00 = decay * (cw - 0.5 * sw);
    const double p01 = decay * sw;
    const double p10 = decay * -sw;
    const double p11 = decay * (cw + 0.5 * sw);

    Vector out(x0.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double du = x0[2 * i] - xm0;
        const double dv = x0[2 * i + 1] - vm0;
        out[2 * i] = xm + p00 * du + p01 * dv;
        out[2 * i + 1] = vm + p10 * du + p11 * dv;
    }
    return out;
}

}  // namespace mixedstep
