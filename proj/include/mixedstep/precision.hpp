#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace mixedstep {

/// IEEE 754 binary floating-point formats available to the solver pipeline.
enum class FloatFormat : std::uint8_t { Binary32, Binary64 };

/// Machine epsilon: the smallest positive value summable to 1 in format `p`.
constexpr double machine_epsilon(FloatFormat p) noexcept {
    return p == FloatFormat::Binary32 ? 0x1p-23 : 0x1p-52;
}

/// Rounds `x` to the nearest representable value in `p` (round-to-nearest-even).
/// Binary64 input to Binary64 output is the identity; overflow yields +-inf,
/// NaN propagates.
inline double round_to(double x, FloatFormat p) noexcept {
    if (p == FloatFormat::Binary64) return x;
    return static_cast<double>(static_cast<float>(x));
}

constexpr FloatFormat wider_of(FloatFormat a, FloatFormat b) noexcept {
    return (a == FloatFormat::Binary64 || b == FloatFormat::Binary64)
               ? FloatFormat::Binary64
               : FloatFormat::Binary32;
}

const char* format_name(FloatFormat p) noexcept;

/// Precision triple for one scheme stage: F evaluation, interaction
/// weighting/accumulation (the sum column), and G evaluation.
struct StagePrecision {
    FloatFormat f_prec;
    FloatFormat sum_prec;
    FloatFormat g_prec;

    friend bool operator==(const StagePrecision&, const StagePrecision&) = default;
};

inline constexpr StagePrecision kAllBinary64{FloatFormat::Binary64,
                                             FloatFormat::Binary64,
                                             FloatFormat::Binary64};
inline constexpr StagePrecision kAllBinary32{FloatFormat::Binary32,
                                             FloatFormat::Binary32,
                                             FloatFormat::Binary32};

enum class PolicyVariant : std::uint8_t { Single, Mixed1, Mixed2, Double };

/// Per-stage precision assignment for the Bogacki-Shampine 3(2) pair.
/// Stages k2..k4 carry explicit rows; k1 is normally the previous step's k4
/// (FSAL), so `first_step_k1` applies only on the first step and when a
/// rejected step forces k1 to be recomputed. Tableau combinations and the
/// error estimate are always Binary64. `storage` is the format holding the
/// propagated solution and integration clock between steps: Binary64 for the
/// mixed policies and Double, Binary32 for the mono-precision Single solver
/// (whose per-step state rounding is what caps its attainable accuracy).
struct PrecisionPolicy {
    PolicyVariant variant;
    std::array<StagePrecision, 3> per_stage;  // rows for stages k2, k3, k4
    StagePrecision first_step_k1;
    FloatFormat storage = FloatFormat::Binary64;

    const StagePrecision& stage(int ell) const { return per_stage[ell - 2]; }

    /// Lowest format appearing anywhere in the pipeline (drives the h_min
    /// failure threshold).
    FloatFormat lowest_format() const noexcept;

    friend bool operator==(const PrecisionPolicy&, const PrecisionPolicy&) = default;
};

/// The four named solver precision distributions.
PrecisionPolicy policy_for(PolicyVariant v);

const char* variant_name(PolicyVariant v) noexcept;
std::optional<PolicyVariant> variant_from_name(std::string_view name) noexcept;

}  // namespace mixedstep
