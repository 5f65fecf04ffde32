#pragma once

#include <Eigen/Core>

namespace mixedstep {

inline constexpr int kSobolMaxDim = 8;

/// First `n` points of the standard Sobol sequence (Gray-code construction,
/// Joe-Kuo direction numbers, dimensions up to kSobolMaxDim) after skipping
/// `skip` points. The sequence starts at the all-zero point. Returns an
/// n x dim matrix with coordinates in [0, 1).
Eigen::MatrixXd sobol_points(int dim, int n, int skip = 0);

}  // namespace mixedstep
