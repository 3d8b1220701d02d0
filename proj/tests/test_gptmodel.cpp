#include <doctest.h>

#include "oracles.hpp"

#include "gptomo/gptmodel.hpp"
#include "gptomo/rng.hpp"
#include "gptomo/synthdata.hpp"

#include <cmath>

using namespace gptomo;
using namespace gptomo::gpt;

namespace {

Matrix planted(int m, int n, int k, Rng& rng) { return oracle::planted_table(m, n, k, rng); }
using oracle::random_invertible;

double max_abs(const Matrix& m) { return m.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("factorize: reproduces [1 | D] and the structural invariants") {
    Rng rng(5);
    for (int k = 2; k <= 5; ++k) {
        const Matrix d = planted(9, 7, k, rng);
        for (auto method : {FactorMethod::qr, FactorMethod::svd}) {
            const GptModel model = factorize(d, k, method);
            const Matrix se = model.states * model.effects.middleCols(2, d.cols());
            CHECK(max_abs(se - d) < 1e-9);
            CHECK(max_abs(model.states * model.unit() - Vector::Ones(9)) < 1e-12);
            CHECK(model.effects.cols() == 2 * d.cols() + 2);
            CHECK_NOTHROW(model.validate());
            const Matrix p = model.probabilities();
            for (Eigen::Index j = 0; j < d.cols(); ++j)
                CHECK(max_abs(p.col(2 + j) + p.col(2 + d.cols() + j) - Vector::Ones(9)) < 1e-12);
        }
    }
}

TEST_CASE("factorize: rank-1 constant table") {
    const Matrix d = Matrix::Constant(4, 3, 0.5);
    const GptModel model = factorize(d, 1);
    CHECK(model.states == Matrix::Ones(4, 1));
    CHECK(model.effects(0, 0) == 1.0);
    CHECK(model.effects(0, 1) == 0.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(model.effects(0, 2 + j) == doctest::Approx(0.5));
        CHECK(model.effects(0, 5 + j) == doctest::Approx(0.5));
    }
}

TEST_CASE("factorize: random rank-3 6x6 product") {
    Rng rng(6);
    const Matrix d = planted(6, 6, 3, rng);
    const GptModel model = factorize(d, 3);
    CHECK(max_abs(model.states * model.effects.leftCols(1) - Vector::Ones(6)) < 1e-9);
    CHECK(max_abs(model.states * model.effects.middleCols(2, 6) - d) < 1e-9);
}

TEST_CASE("factorize: noiseless qubit table is a linear image of the Bloch parametrization") {
    const auto dirs = synth::fibonacci_directions(30);
    Matrix d(30, 30), bloch(30, 4);
    for (int i = 0; i < 30; ++i) {
        bloch(i, 0) = 1.0;
        bloch.row(i).tail(3) = dirs[static_cast<std::size_t>(i)].vec().transpose();
        for (int j = 0; j < 30; ++j)
            d(i, j) = synth::ideal_probability(dirs[static_cast<std::size_t>(i)], dirs[static_cast<std::size_t>(j)]);
    }
    const GptModel model = factorize(d, 4);
    // Solve S = Bloch * L for L and verify the residual.
    const Matrix l = bloch.colPivHouseholderQr().solve(model.states);
    CHECK(max_abs(bloch * l - model.states) < 1e-9);
    CHECK(std::abs(l.determinant()) > 1e-6);
}

TEST_CASE("factorize: rank mismatch") {
    Rng rng(7);
    const Matrix d = planted(8, 8, 3, rng);
    CHECK_THROWS_AS(factorize(d, 4), RankMismatch);
    CHECK_THROWS_AS(factorize(d, 2), RankMismatch);
    CHECK_THROWS_AS(factorize(d, 0), InvalidArgument);
}

TEST_CASE("relate_factorizations: planted and independent transformations") {
    Rng rng(8);
    const Matrix d = planted(10, 8, 4, rng);
    const GptModel a = factorize(d, 4);

    const Reparametrization same = relate_factorizations(a, a);
    CHECK(max_abs(same.linear_map - Matrix::Identity(4, 4)) < 1e-10);

    const Matrix l0 = random_invertible(4, rng, 20.0);
    const GptModel b = apply_reparametrization(a, Reparametrization{l0});
    const Reparametrization rec = relate_factorizations(a, b);
    CHECK(max_abs(rec.linear_map - l0) < 1e-8);

    for (int k = 2; k <= 5; ++k) {
        const Matrix dk = planted(12, 9, k, rng);
        const GptModel qa = factorize(dk, k, FactorMethod::qr);
        const GptModel qb = factorize(dk, k, FactorMethod::svd);
        const Matrix l = relate_factorizations(qa, qb).linear_map;
        CHECK(max_abs(qa.states * l - qb.states) < 1e-8);
        CHECK(max_abs(l.inverse() * qa.effects - qb.effects) < 1e-8);
    }
}

TEST_CASE("relate_factorizations: incompatible models") {
    Rng rng(9);
    const GptModel a = factorize(planted(8, 6, 3, rng), 3);
    const GptModel b = factorize(planted(8, 6, 3, rng), 3);
    CHECK_THROWS_AS(relate_factorizations(a, b), IncompatibleModels);
    const GptModel c = factorize(planted(8, 6, 2, rng), 2);
    CHECK_THROWS_AS(relate_factorizations(a, c), IncompatibleModels);
}

TEST_CASE("apply_reparametrization: pairings are invariant") {
    Rng rng(10);
    const Matrix d = planted(15, 10, 4, rng);
    const GptModel model = factorize(d, 4);
    const Matrix p = model.probabilities();

    const GptModel id = apply_reparametrization(model, Reparametrization{Matrix::Identity(4, 4)});
    CHECK(id.states == model.states);
    CHECK(max_abs(id.effects - model.effects) == 0.0);

    Matrix diag = Matrix::Identity(4, 4);
    diag(1, 1) = diag(2, 2) = diag(3, 3) = 2.0;
    CHECK(max_abs(apply_reparametrization(model, Reparametrization{diag}).probabilities() - p) < 1e-10);

    for (int t = 0; t < 50; ++t) {
        const Matrix l = random_invertible(4, rng, 100.0);
        CHECK(max_abs(apply_reparametrization(model, Reparametrization{l}).probabilities() - p) < 1e-9);
    }
    Matrix singular = Matrix::Identity(4, 4);
    singular(3, 3) = 0.0;
    CHECK_THROWS_AS(apply_reparametrization(model, Reparametrization{singular}), InvalidArgument);
}

TEST_CASE("distinguishability") {
    Vector s(4), sp(4);
    s << 1, 0.3, 0.1, -0.2;
    Matrix effects(4, 3);
    effects << 1, 0.5, 0.5,
               0, 0.5, 0,
               0, 0, 0.5,
               0, 0, 0;
    CHECK(distinguishability(s, s, effects) == 0.0);

    // Antipodal pure states with the projectors along their axis.
    Vector up(4), down(4);
    up << 1, 0, 0, 1;
    down << 1, 0, 0, -1;
    Matrix proj(4, 2);
    proj << 0.5, 0.5,
            0, 0,
            0, 0,
            0.5, -0.5;
    CHECK(distinguishability(up, down, proj) == doctest::Approx(1.0));
    CHECK_THROWS_AS(distinguishability(up, down, Matrix(4, 0)), InvalidArgument);
}

TEST_CASE("per_state_f and max_pairwise_distinguishability against brute force") {
    Rng rng(12);
    const Matrix d = planted(12, 9, 4, rng);
    const GptModel model = factorize(d, 4);
    const auto f = per_state_f(model);
    double best = 0.0;
    for (Eigen::Index i = 0; i < model.num_states(); ++i) {
        double fi = 0.0;
        for (Eigen::Index j = 0; j < model.num_states(); ++j) {
            if (i == j) continue;
            for (Eigen::Index e = 0; e < model.num_effects(); ++e) {
                const double diff = model.states.row(i).dot(model.effects.col(e)) - model.states.row(j).dot(model.effects.col(e));
                fi = std::max(fi, std::abs(diff));
            }
        }
        CHECK(f[static_cast<std::size_t>(i)] == doctest::Approx(fi).epsilon(1e-12));
        best = std::max(best, fi);
    }
    CHECK(max_pairwise_distinguishability(model) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("per_state_f: classical bit vertices are perfectly distinguishable") {
    // Two vertices (1, +-1) with sharp effects (1 +- x)/2 in the normalization frame.
    const Matrix d = (Matrix(2, 2) << 1, 0, 0, 1).finished();
    const GptModel model = factorize(d, 2);
    const auto f = per_state_f(model);
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(1.0));
}

TEST_CASE("purity_lower_bound") {
    CHECK(purity_lower_bound(0.691) == doctest::Approx(0.8455).epsilon(1e-12));
    CHECK(std::abs(purity_lower_bound(0.691) - 0.846) <= 5e-4 + 1e-12);
    CHECK(purity_lower_bound(1.0) == 1.0);
    CHECK(purity_lower_bound(0.0) == 0.5);
    CHECK_THROWS_AS(purity_lower_bound(1.5), InvalidArgument);
}

TEST_CASE("tau labels select state blocks") {
    Rng rng(13);
    const Matrix d = planted(6, 5, 3, rng);
    const GptModel model = factorize(d, 3, FactorMethod::qr, {0, 0, 0, 5, 5, 5});
    CHECK(model.taus() == std::vector<double>{0, 5});
    CHECK(model.states_at(5).rows() == 3);
    CHECK(restrict_states(model, 0).states == model.states.topRows(3));
    CHECK_THROWS_AS(model.states_at(7), InvalidArgument);
}
