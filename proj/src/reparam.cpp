#include "gptomo/reparam.hpp"

#include "gptomo/polytope.hpp"
#include "gptomo/rng.hpp"

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>
#include <numbers>

namespace gptomo::rp {

namespace {

// Parameters (log sigma_1..3, alpha, beta, gamma).
using Params = Eigen::Matrix<double, 6, 1>;

SphereFit from_params(const Params& x, const Vec3& mean) {
    SphereFit f;
    f.sigma = x.head<3>().array().exp();
    f.angles = x.tail<3>();
    f.mean = mean;
    return f;
}

struct Residuals {
    using Scalar = double;
    using InputType = Vector;
    using ValueType = Vector;
    using JacobianType = Matrix;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const Matrix* pts = nullptr;  // centered

    int inputs() const { return 6; }
    int values() const { return static_cast<int>(pts->rows()); }

    int operator()(const Vector& x, Vector& out) const {
        const Params p = x;
        const Mat3 l = from_params(p, Vec3::Zero()).linear();
        out = Vector::Ones(pts->rows()) - ((*pts) * l.transpose()).rowwise().squaredNorm();
        return 0;
    }
};

}  // namespace

Centered center(const Matrix& points) {
    if (points.rows() == 0) throw InvalidArgument("center needs at least one point");
    Centered c;
    c.mean = points.colwise().mean().transpose();
    c.points = points.rowwise() - c.mean.transpose();
    return c;
}

Mat3 euler_rotation(double alpha, double beta, double gamma) {
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    Mat3 v;
    v << ca * cg - sa * cb * sg, -ca * sg - sa * cb * cg, sa * sb,
         sa * cg + ca * cb * sg, -sa * sg + ca * cb * cg, -ca * sb,
         sb * sg, sb * cg, cb;
    return v;
}

Mat3 SphereFit::linear() const {
    return sigma.asDiagonal() * euler_rotation(angles(0), angles(1), angles(2)).transpose();
}

double sphere_objective(const SphereFit& fit, const Matrix& points) {
    const Matrix mapped = apply_transform(fit, points);
    return (Vector::Ones(points.rows()) - mapped.rowwise().squaredNorm()).squaredNorm();
}

SphereFit fit_sphere_transform(const Matrix& points, const SphereFitOptions& options) {
    if (points.cols() != 3) throw InvalidArgument("sphere fitting is only supported in three dimensions");
    if (points.rows() < 6 || poly::affine_dimension(points) < 3)
        throw DegenerateGeometry("sphere fit needs at least 6 points spanning R^3");
    if (options.starts < 1) throw InvalidArgument("need at least one start");
    const Centered c = center(points);
    const Vec3 mean = c.mean;

    Residuals functor;
    functor.pts = &c.points;
    Eigen::NumericalDiff<Residuals, Eigen::Central> diff(functor);

    const Vec3 extent = c.points.cwiseAbs().colwise().maxCoeff().transpose();
    Rng rng(derive_key(options.seed, {0x5f17}));
    SphereFit best;
    bool have = false;
    for (int s = 0; s < options.starts; ++s) {
        Params x0;
        x0.head<3>() = (1.0 / extent.array()).log();
        if (s > 0)
            for (int a = 0; a < 3; ++a) x0(3 + a) = rng.uniform(0.0, 2.0 * std::numbers::pi);
        else
            x0.tail<3>().setZero();
        const double initial = sphere_objective(from_params(x0, mean), points);

        Eigen::LevenbergMarquardt<decltype(diff)> lm(diff);
        lm.parameters.maxfev = options.max_evaluations;
        lm.parameters.xtol = 1e-14;
        lm.parameters.ftol = 1e-14;
        Vector x = x0;
        lm.minimize(x);

        SphereFit f = from_params(x, mean);
        f.objective = sphere_objective(f, points);
        f.initial_objective = initial;
        f.start = s;
        // A start the optimizer made worse keeps its initial point.
        if (f.objective > initial) {
            f = from_params(x0, mean);
            f.objective = f.initial_objective = initial;
            f.start = s;
        }
        if (!have || f.objective < best.objective) {
            best = f;
            have = true;
        }
    }
    return best;
}

Matrix apply_transform(const SphereFit& fit, const Matrix& points) {
    if (points.cols() != 3) throw InvalidArgument("apply_transform expects 3-D points");
    return (points.rowwise() - fit.mean.transpose()) * fit.linear().transpose();
}

gpt::Reparametrization induced_map(const SphereFit& fit, Eigen::Index k) {
    if (k != 4) throw InvalidArgument("the sphere frame is only defined for rank 4");
    const Mat3 l = fit.linear();
    Matrix m = Matrix::Zero(4, 4);
    m(0, 0) = 1.0;
    m.block(0, 1, 1, 3) = -(l * fit.mean).transpose();
    m.block(1, 1, 3, 3) = l.transpose();
    return gpt::Reparametrization{m};
}

}  // namespace gptomo::rp
