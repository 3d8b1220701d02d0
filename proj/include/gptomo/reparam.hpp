#pragma once

// Affine frame that maps a consistent state space close to the unit sphere.

#include "gptomo/error.hpp"
#include "gptomo/gptmodel.hpp"
#include "gptomo/linalg.hpp"

#include <cstdint>

namespace gptomo::rp {

struct Centered {
    Matrix points;  ///< rows with zero column mean
    Vector mean;
};

/// Subtract the columnwise mean.
Centered center(const Matrix& points);

/// Z-X-Z Euler rotation V(alpha, beta, gamma).
Mat3 euler_rotation(double alpha, double beta, double gamma);

struct SphereFit {
    Vec3 sigma = Vec3::Ones();
    Vec3 angles = Vec3::Zero();  ///< alpha, beta, gamma
    Vec3 mean = Vec3::Zero();
    double objective = 0.0;
    double initial_objective = 0.0;  ///< objective at the winning start
    int start = 0;

    /// L = Sigma V^T.
    Mat3 linear() const;
};

struct SphereFitOptions {
    int starts = 10;
    std::uint64_t seed = 0;
    int max_evaluations = 4000;
};

/// sum_i (1 - |L (p_i - mu)|^2)^2 over the rows p_i.
double sphere_objective(const SphereFit& fit, const Matrix& points);

/// Minimizes sphere_objective over (log sigma, angles) by Levenberg-Marquardt from several starts.
/// The points are centered first and `mean` records the shift. Needs >= 6 points spanning R^3.
SphereFit fit_sphere_transform(const Matrix& points, const SphereFitOptions& options = {});

/// Rows L (p - mu).
Matrix apply_transform(const SphereFit& fit, const Matrix& points);

/// k x k map M (k = 4) with (1, x) M = (1, L (x - mu)); apply to states as S M, to effects as M^-1 E.
gpt::Reparametrization induced_map(const SphereFit& fit, Eigen::Index k = 4);

}  // namespace gptomo::rp
