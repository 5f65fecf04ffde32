#include "mixedstep/precision.hpp"

namespace mixedstep {

const char* format_name(FloatFormat p) noexcept {
    return p == FloatFormat::Binary32 ? "binary32" : "binary64";
}

FloatFormat PrecisionPolicy::lowest_format() const noexcept {
    if (storage == FloatFormat::Binary32) return FloatFormat::Binary32;
    for (const StagePrecision& sp :
         {per_stage[0], per_stage[1], per_stage[2], first_step_k1}) {
        if (sp.f_prec == FloatFormat::Binary32 ||
            sp.sum_prec == FloatFormat::Binary32 ||
            sp.g_prec == FloatFormat::Binary32) {
            return FloatFormat::Binary32;
        }
    }
    return FloatFormat::Binary64;
}

PrecisionPolicy policy_for(PolicyVariant v) {
    constexpr StagePrecision sss = kAllBinary32;
    constexpr StagePrecision dds{FloatFormat::Binary64, FloatFormat::Binary64,
                                 FloatFormat::Binary32};
    constexpr StagePrecision ddd = kAllBinary64;

    PrecisionPolicy p;
    p.variant = v;
    switch (v) {
        case PolicyVariant::Single: p.per_stage = {sss, sss, sss}; break;
        case PolicyVariant::Mixed1: p.per_stage = {sss, sss, dds}; break;
        case PolicyVariant::Mixed2: p.per_stage = {dds, dds, dds}; break;
        case PolicyVariant::Double: p.per_stage = {ddd, ddd, ddd}; break;
    }
    // k1 of step n is k4 of step n-1, so the cold-start row mirrors k4.
    p.first_step_k1 = p.per_stage[2];
    // Single is the mono-precision solver: its solution lives in binary32.
    p.storage = v == PolicyVariant::Single ? FloatFormat::Binary32
                                           : FloatFormat::Binary64;
    return p;
}

const char* variant_name(PolicyVariant v) noexcept {
    switch (v) {
        case PolicyVariant::Single: return "Single";
        case PolicyVariant::Mixed1: return "Mixed1";
        case PolicyVariant::Mixed2: return "Mixed2";
        case PolicyVariant::Double: return "Double";
    }
    return "?";
}

std::optional<PolicyVariant> variant_from_name(std::string_view name) noexcept {
    if (name == "single" || name == "Single") return PolicyVariant::Single;
    if (name == "mixed1" || name == "Mixed1") return PolicyVariant::Mixed1;
    if (name == "mixed2" || name == "Mixed2") return PolicyVariant::Mixed2;
    if (name == "double" || name == "Double") return PolicyVariant::Double;
    return std::nullopt;
}

}  // namespace mixedstep
