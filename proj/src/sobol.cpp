#include "mixedstep/sobol.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mixedstep {

namespace {

constexpr int kBits = 32;

// Primitive polynomial degree, encoded inner coefficients, and initial
// m-values per dimension (new-joe-kuo-6 table; dimension 1 is the van der
// Corput sequence in base 2).
struct DimInit {
    int s;
    std::uint32_t a;
    std::array<std::uint32_t, 5> m;
};

constexpr DimInit kDims[kSobolMaxDim - 1] = {
    {1, 0, {1, 0, 0, 0, 0}},  {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},  {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},  {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
};

std::array<std::uint32_t, kBits> directions(int dim_index) {
    std::array<std::uint32_t, kBits> m{};
    if (dim_index == 0) {
        m.fill(1);
    } else {
        const DimInit& di = kDims[dim_index - 1];
        for (int j = 0; j < di.s; ++j) m[static_cast<size_t>(j)] = di.m[static_cast<size_t>(j)];
        for (int k = di.s; k < kBits; ++k) {
            std::uint32_t v = m[static_cast<size_t>(k - di.s)] ^
                              (m[static_cast<size_t>(k - di.s)] << di.s);
            for (int i = 1; i < di.s; ++i) {
                if ((di.a >> (di.s - 1 - i)) & 1u)
                    v ^= m[static_cast<size_t>(k - i)] << i;
            }
            m[static_cast<size_t>(k)] = v;
        }
    }
    std::array<std::uint32_t, kBits> v{};
    for (int j = 0; j < kBits; ++j)
        v[static_cast<size_t>(j)] = m[static_cast<size_t>(j)] << (kBits - 1 - j);
    return v;
}

}  // namespace

Eigen::MatrixXd sobol_points(int dim, int n, int skip) {
    if (dim < 1 || dim > kSobolMaxDim)
        throw std::invalid_argument("sobol_points: unsupported dimension");
    if (n < 1 || skip < 0)
        throw std::invalid_argument("sobol_points: need n >= 1 and skip >= 0");

    std::vector<std::array<std::uint32_t, kBits>> v;
    v.reserve(static_cast<size_t>(dim));
    for (int d = 0; d < dim; ++d) v.push_back(directions(d));

    Eigen::MatrixXd out(n, dim);
    std::vector<std::uint32_t> x(static_cast<size_t>(dim), 0);
    constexpr double scale = 1.0 / 4294967296.0;  // 2^-32

    long long row = -skip;
    if (row >= 0) {
        for (int d = 0; d < dim; ++d)
            out(row, d) = 0.0;  // the sequence starts at 0
    }
    for (std::uint64_t i = 0; row + 1 < n; ++i) {
        // Gray-code step: flip the direction of the lowest zero bit of i.
        int c = 0;
        for (std::uint64_t k = i; k & 1u; k >>= 1) ++c;
        for (int d = 0; d < dim; ++d)
            x[static_cast<size_t>(d)] ^= v[static_cast<size_t>(d)][static_cast<size_t>(c)];
        ++row;
        if (row >= 0) {
            for (int d = 0; d < dim; ++d)
                out(row, d) = static_cast<double>(x[static_cast<size_t>(d)]) * scale;
        }
    }
    return out;
}

}  // namespace mixedstep
