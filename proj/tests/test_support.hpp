#pragma once

// Shared test fixtures: tiny analytic systems and an operation-counting
// scalar used as the independent flop oracle.

#include <cmath>
#include <limits>

#include "mixedstep/precision.hpp"
#include "mixedstep/systems.hpp"

namespace mstest {

using mixedstep::BenchmarkParams;
using mixedstep::CoupledSystem;
using mixedstep::FlopProfile;
using mixedstep::StagePrecision;
using mixedstep::Vector;

/// dx/dt = x for a single scalar agent (exact solution e^t).
struct ScalarExp final : CoupledSystem {
    ScalarExp()
        : CoupledSystem(1, 1, BenchmarkParams{}, FlopProfile{1, 1, 2, 1},
                        Vector::Zero(1)) {}
    void eval_rhs(double, const Vector& x, const StagePrecision& sp,
                  Vector& out) const override {
        out.resize(1);
        out[0] = mixedstep::round_to(x[0], sp.f_prec);
    }
};

/// dx/dt = 0.
struct ScalarZero final : CoupledSystem {
    ScalarZero()
        : CoupledSystem(1, 1, BenchmarkParams{}, FlopProfile{1, 1, 2, 1},
                        Vector::Zero(1)) {}
    void eval_rhs(double, const Vector& x, const StagePrecision&,
                  Vector& out) const override {
        out = Vector::Zero(x.size());
    }
};

/// Field that is NaN everywhere.
struct ScalarNan final : CoupledSystem {
    ScalarNan()
        : CoupledSystem(1, 1, BenchmarkParams{}, FlopProfile{1, 1, 2, 1},
                        Vector::Zero(1)) {}
    void eval_rhs(double, const Vector& x, const StagePrecision&,
                  Vector& out) const override {
        out = Vector::Constant(x.size(),
                               std::numeric_limits<double>::quiet_NaN());
    }
};

// --- flop-counting scalar ---------------------------------------------------

struct Count {
    static inline long long ops = 0;
    static void reset() { ops = 0; }
};

struct CScalar {
    double v = 0.0;
    CScalar() = default;
    CScalar(double x) : v(x) {}  // NOLINT: implicit by design
};

inline CScalar operator+(CScalar a, CScalar b) { ++Count::ops; return {a.v + b.v}; }
inline CScalar operator-(CScalar a, CScalar b) { ++Count::ops; return {a.v - b.v}; }
inline CScalar operator*(CScalar a, CScalar b) { ++Count::ops; return {a.v * b.v}; }
inline CScalar operator/(CScalar a, CScalar b) { ++Count::ops; return {a.v / b.v}; }
inline CScalar operator-(CScalar a) { ++Count::ops; return {-a.v}; }
inline CScalar sin(CScalar a) { ++Count::ops; return {std::sin(a.v)}; }
inline CScalar atan(CScalar a) { ++Count::ops; return {std::atan(a.v)}; }

}  // namespace mstest
