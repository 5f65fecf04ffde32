#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixedstep/rng.hpp"
#include "mixedstep/sobol.hpp"

using namespace mixedstep;

namespace {

// Crude star-discrepancy estimate: anchored boxes with corners at the
// sample coordinates (plus 1), exact counting.
double star_discrepancy_2d(const Eigen::MatrixXd& pts) {
    const auto n = pts.rows();
    std::vector<double> xs, ys;
    for (Eigen::Index i = 0; i < n; ++i) {
        xs.push_back(pts(i, 0));
        ys.push_back(pts(i, 1));
    }
    xs.push_back(1.0);
    ys.push_back(1.0);
    double worst = 0.0;
    for (double cx : xs) {
        for (double cy : ys) {
            Eigen::Index inside = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (pts(i, 0) < cx && pts(i, 1) < cy) ++inside;
            const double frac = static_cast<double>(inside) / static_cast<double>(n);
            worst = std::max(worst, std::abs(frac - cx * cy));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("one-dimensional sequence after the zero point") {
    const Eigen::MatrixXd p = sobol_points(1, 4, 1);
    CHECK(p(0, 0) == 0.5);
    CHECK(p(1, 0) == 0.75);
    CHECK(p(2, 0) == 0.25);
    CHECK(p(3, 0) == 0.375);
}

TEST_CASE("first points match the published joe-kuo sequence") {
    // Rows 1..8 of the standard unscrambled sequence, dimensions 1..4.
    const double expected[8][4] = {
        {0.5, 0.5, 0.5, 0.5},       {0.75, 0.25, 0.25, 0.25},
        {0.25, 0.75, 0.75, 0.75},   {0.375, 0.375, 0.625, 0.875},
        {0.875, 0.875, 0.125, 0.375}, {0.625, 0.125, 0.875, 0.625},
        {0.125, 0.625, 0.375, 0.125}, {0.1875, 0.3125, 0.9375, 0.4375},
    };
    const Eigen::MatrixXd p = sobol_points(4, 8, 1);
    for (int i = 0; i < 8; ++i)
        for (int d = 0; d < 4; ++d)
            CHECK(p(i, d) == expected[i][d]);
}

TEST_CASE("skip semantics and range") {
    const Eigen::MatrixXd z = sobol_points(3, 2, 0);
    CHECK(z.row(0).cwiseAbs().maxCoeff() == 0.0);  // the sequence starts at 0

    // skip behaves like dropping a prefix.
    const Eigen::MatrixXd all = sobol_points(5, 40, 0);
    const Eigen::MatrixXd tail = sobol_points(5, 30, 10);
    for (int i = 0; i < 30; ++i)
        for (int d = 0; d < 5; ++d)
            CHECK(tail(i, d) == all(i + 10, d));

    const Eigen::MatrixXd big = sobol_points(kSobolMaxDim, 1000, 1);
    CHECK(big.minCoeff() >= 0.0);
    CHECK(big.maxCoeff() < 1.0);

    CHECK_THROWS(sobol_points(0, 4));
    CHECK_THROWS(sobol_points(kSobolMaxDim + 1, 4));
    CHECK_THROWS(sobol_points(2, 0));
}

TEST_CASE("lower discrepancy than pseudo-random points") {
    const Eigen::MatrixXd sob = sobol_points(2, 256, 1);
    const double d_sobol = star_discrepancy_2d(sob);

    std::vector<double> d_rand;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SplitMix64 rng(seed);
        Eigen::MatrixXd r(256, 2);
        for (int i = 0; i < 256; ++i) {
            r(i, 0) = rng.uniform01();
            r(i, 1) = rng.uniform01();
        }
        d_rand.push_back(star_discrepancy_2d(r));
    }
    std::sort(d_rand.begin(), d_rand.end());
    const double median_rand = 0.5 * (d_rand[4] + d_rand[5]);
    CHECK(d_sobol < median_rand);
}
