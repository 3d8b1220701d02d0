#include <doctest.h>

#include "gptomo/gptmodel.hpp"
#include "gptomo/polytope.hpp"
#include "gptomo/reparam.hpp"
#include "gptomo/rng.hpp"
#include "gptomo/synthdata.hpp"
#include "gptomo/tomofit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace gptomo;
using namespace gptomo::rp;

namespace {

// Fibonacci directions with their antipodes, so the column mean is exactly zero.
Matrix sphere_points(int half) {
    const auto dirs = synth::fibonacci_directions(half);
    Matrix p(2 * half, 3);
    for (int i = 0; i < half; ++i) {
        p.row(i) = dirs[static_cast<std::size_t>(i)].vec().transpose();
        p.row(half + i) = -p.row(i);
    }
    return p;
}

Vec3 sorted_desc(Vec3 v) {
    std::sort(v.data(), v.data() + 3, std::greater<>());
    return v;
}

// Central differences of the objective in (log sigma, angles).
Eigen::Matrix<double, 6, 1> fd_gradient(const SphereFit& fit, const Matrix& pts, double h) {
    Eigen::Matrix<double, 6, 1> g;
    for (int i = 0; i < 6; ++i) {
        SphereFit up = fit, down = fit;
        if (i < 3) {
            up.sigma(i) *= std::exp(h);
            down.sigma(i) *= std::exp(-h);
        } else {
            up.angles(i - 3) += h;
            down.angles(i - 3) -= h;
        }
        g(i) = (sphere_objective(up, pts) - sphere_objective(down, pts)) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("center") {
    Matrix sym(4, 3);
    sym << 1, 0, 0, -1, 0, 0, 0, 2, 1, 0, -2, -1;
    CHECK(center(sym).mean.norm() == 0.0);

    Matrix one(1, 3);
    one << 0.3, -1.2, 4.0;
    const Centered c1 = center(one);
    CHECK(c1.points.norm() == 0.0);
    CHECK(c1.mean == one.row(0).transpose());

    Rng rng(3);
    const Matrix r = Matrix::NullaryExpr(40, 3, [&] { return rng.uniform(-5.0, 7.0); });
    CHECK(center(r).points.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(center(Matrix(0, 3)), InvalidArgument);
}

TEST_CASE("euler_rotation") {
    CHECK((euler_rotation(0, 0, 0) - Mat3::Identity()).norm() == 0.0);

    Mat3 quarter;
    quarter << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((euler_rotation(std::numbers::pi / 2, 0, 0) - quarter).cwiseAbs().maxCoeff() < 1e-15);

    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        const double a = rng.uniform(-7.0, 7.0), b = rng.uniform(-7.0, 7.0), g = rng.uniform(-7.0, 7.0);
        const Mat3 v = euler_rotation(a, b, g);
        CHECK((v * v.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(v.determinant() - 1.0) < 1e-12);
        const Mat3 zxz = (Eigen::AngleAxisd(a, Vec3::UnitZ()) * Eigen::AngleAxisd(b, Vec3::UnitX()) *
                          Eigen::AngleAxisd(g, Vec3::UnitZ()))
                             .toRotationMatrix();
        CHECK((v - zxz).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("fit_sphere_transform: unit sphere is a zero-residual optimum") {
    const Matrix pts = sphere_points(30);
    const SphereFit fit = fit_sphere_transform(pts);
    CHECK(fit.objective < 1e-12);
    const Mat3 l = fit.linear();
    CHECK((l.transpose() * l - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(fit.objective <= fit.initial_objective);
}

TEST_CASE("fit_sphere_transform: planted axis-aligned ellipsoid") {
    const Vec3 axes(2.0, 1.0, 0.5);
    const Matrix pts = sphere_points(40) * axes.asDiagonal();
    const SphereFit fit = fit_sphere_transform(pts);
    CHECK(fit.objective < 1e-8);
    const Vec3 got = sorted_desc(fit.sigma);
    CHECK((got - Vec3(2.0, 1.0, 0.5)).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(fit.mean.norm() < 1e-12);
}

TEST_CASE("fit_sphere_transform: planted rotated and shifted ellipsoid") {
    const Mat3 v0 = euler_rotation(0.4, 1.1, -0.7);
    const Vec3 shift(0.3, -0.2, 0.1);
    Matrix pts = sphere_points(40) * Vec3(1.5, 0.8, 0.6).asDiagonal() * v0.transpose();
    pts.rowwise() += shift.transpose();
    const SphereFit fit = fit_sphere_transform(pts);
    CHECK((fit.mean - shift).norm() < 1e-12);
    const Vector norms = apply_transform(fit, pts).rowwise().norm();
    CHECK((norms.array() - 1.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("fit_sphere_transform: stationarity, determinism and objective bookkeeping") {
    Rng rng(5);
    Matrix pts = sphere_points(25) * Vec3(1.3, 0.9, 0.4).asDiagonal();
    pts += Matrix::NullaryExpr(50, 3, [&] { return rng.uniform(-0.05, 0.05); });
    const SphereFit fit = fit_sphere_transform(pts);
    CHECK(fit.objective > 1e-6);
    CHECK(fit.objective <= fit.initial_objective);
    CHECK(fd_gradient(fit, pts, 1e-6).norm() < 1e-5);
    CHECK(std::abs(sphere_objective(fit, pts) - fit.objective) < 1e-15);

    const SphereFit again = fit_sphere_transform(pts);
    CHECK(again.sigma == fit.sigma);
    CHECK(again.angles == fit.angles);
    CHECK((fit.sigma.array() > 0.0).all());
}

TEST_CASE("fit_sphere_transform: degenerate input") {
    Matrix flat = sphere_points(10);
    flat.col(2).setZero();
    CHECK_THROWS_AS(fit_sphere_transform(flat), DegenerateGeometry);
    CHECK_THROWS_AS(fit_sphere_transform(sphere_points(5).topRows(5)), DegenerateGeometry);
    CHECK_THROWS_AS(fit_sphere_transform(Matrix::Ones(10, 2)), InvalidArgument);
}

TEST_CASE("apply_transform") {
    const Matrix pts = sphere_points(5) * 0.7;
    SphereFit id;
    CHECK(apply_transform(id, pts) == pts);

    SphereFit shift;
    shift.mean = Vec3(1, 2, 3);
    const Matrix moved = apply_transform(shift, pts);
    for (int i = 1; i < 10; ++i)
        CHECK(std::abs((moved.row(i) - moved.row(0)).norm() - (pts.row(i) - pts.row(0)).norm()) < 1e-14);
}

TEST_CASE("induced_map preserves every probability of a fitted model") {
    const auto dirs = synth::fibonacci_directions(40);
    const auto table = synth::sample_frequency_table(dirs, dirs, 0.0, 2000, synth::ChannelParams{}, 9);
    fit::FitOptions opt;
    opt.restarts = 1;
    const gpt::GptModel model = gpt::factorize(fit::fit_rank_k(table, 4, opt).d_matrix, 4);
    const poly::VPolytope cons = poly::consistent_dual(model.effects.transpose(), model.unit());
    const SphereFit fit = fit_sphere_transform(cons.vertices.rightCols(3));

    const gpt::GptModel moved = gpt::apply_reparametrization(model, induced_map(fit));
    CHECK((moved.probabilities() - model.probabilities()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((moved.states.col(0).array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((moved.states.rightCols(3) - apply_transform(fit, model.states.rightCols(3))).cwiseAbs().maxCoeff() <
          1e-10);
    CHECK_THROWS_AS(induced_map(fit, 5), InvalidArgument);
}
