#include <doctest.h>

#include "gptomo/fragments.hpp"
#include "gptomo/gptmodel.hpp"
#include "gptomo/nonclassicality.hpp"
#include "gptomo/polytope.hpp"
#include "gptomo/rng.hpp"
#include "gptomo/synthdata.hpp"
#include "gptomo/tomofit.hpp"

#include <algorithm>
#include <cmath>

using namespace gptomo;
using namespace gptomo::ctx;

namespace {

EmbeddingProblem problem_of(const Fragment& f) { return make_problem(f.states, f.effects, f.unit); }

// Largest entry of H_E^T sigma H_Omega - ((1 - r) I + r m u^T).
double certificate_residual(const EmbeddingProblem& p, const RobustnessResult& res) {
    const Eigen::Index k = p.states.cols();
    const Matrix lhs = res.effect_facets.transpose() * res.witness * res.state_facets;
    const Matrix rhs = (1.0 - res.r) * Matrix::Identity(k, k) + res.r * p.mixed * p.unit.transpose();
    return (lhs - rhs).cwiseAbs().maxCoeff();
}

double depolarized_residual(const EmbeddingProblem& p, const RobustnessResult& res) {
    const DepolarizationMap dm{res.r, p.mixed, p.unit};
    const Matrix expected = dm.apply_rows(p.states) * p.effects;
    return (res.model->predict() - expected).cwiseAbs().maxCoeff();
}

gpt::GptModel fitted_model(double tau, std::uint64_t seed) {
    const auto dirs = synth::fibonacci_directions(100);
    const auto table = synth::sample_frequency_table(dirs, dirs, tau, 2000, synth::ChannelParams{}, seed);
    fit::FitOptions opt;
    opt.restarts = 1;
    return gpt::factorize(fit::fit_rank_k(table, 4, opt).d_matrix, 4);
}

// Antipodally closed subset of the icosphere: the state average stays at the center.
Matrix antipodal_subset(const Matrix& dirs, Rng& rng, double keep) {
    std::vector<Vector> rows;
    std::vector<bool> used(static_cast<std::size_t>(dirs.rows()), false);
    for (Eigen::Index i = 0; i < dirs.rows(); ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        Eigen::Index j = 0;
        (dirs.rowwise() + dirs.row(i)).rowwise().norm().minCoeff(&j);
        used[static_cast<std::size_t>(i)] = used[static_cast<std::size_t>(j)] = true;
        if (rng.uniform() < keep) {
            rows.emplace_back(dirs.row(i).transpose());
            rows.emplace_back(dirs.row(j).transpose());
        }
    }
    return rows_to_matrix(rows, 3);
}

Matrix bloch_states(const Matrix& dirs) {
    Matrix s(dirs.rows(), 4);
    s.col(0).setOnes();
    s.rightCols(3) = dirs;
    return s;
}

Matrix bloch_effects(const Matrix& dirs) {
    Matrix e(4, dirs.rows() + 2);
    e.col(0) << 1, 0, 0, 0;
    e.col(1).setZero();
    for (Eigen::Index j = 0; j < dirs.rows(); ++j) e.col(2 + j) << 0.5, 0.5 * dirs.row(j).transpose();
    return e;
}

}  // namespace

TEST_CASE("DepolarizationMap preserves normalization and fixes the mixed state") {
    Vector m(4), u(4), s(4);
    m << 1, 0.1, 0, -0.2;
    u << 1, 0, 0, 0;
    s << 1, 0.5, 0.3, 0.1;
    const DepolarizationMap dm{0.3, m, u};
    CHECK(u.dot(dm.apply(s)) == doctest::Approx(1.0));
    CHECK((dm.apply(m) - m).norm() < 1e-15);
    CHECK((dm.matrix() * s - dm.apply(s)).norm() < 1e-15);
    CHECK((dm.apply_rows(s.transpose()).transpose() - dm.apply(s)).norm() < 1e-15);
    CHECK((DepolarizationMap{0.0, m, u}.apply(s) - s).norm() == 0.0);
    CHECK((DepolarizationMap{1.0, m, u}.apply(s) - m).norm() < 1e-15);
}

TEST_CASE("build_problem: unit effect, mixed state and interior removal") {
    const Fragment bit = classical_fragment(2);
    const EmbeddingProblem p = problem_of(bit);
    CHECK(p.states.rows() == 2);
    CHECK((p.mixed - Vector::Constant(2, 0.5)).norm() < 1e-15);

    const gpt::GptModel model = fitted_model(0.0, 31);
    const EmbeddingProblem fp = build_problem(model);
    Vector unit(4);
    unit << 1, 0, 0, 0;
    CHECK(fp.unit == unit);
    CHECK(fp.states.rows() <= 100);
    CHECK(std::abs(fp.unit.dot(fp.mixed) - 1.0) < 1e-12);
    const poly::VPolytope hull{fp.states.rightCols(3)};
    const auto kept = poly::extreme_point_indices(model.states);
    for (Eigen::Index i = 0; i < model.states.rows(); ++i)
        if (std::find(kept.begin(), kept.end(), i) == kept.end())
            CHECK(poly::contains(hull, model.states.row(i).tail(3).transpose(), 1e-8));
    CHECK(poly::contains(hull, fp.mixed.tail(3), 1e-9));
    CHECK_THROWS_AS(build_problem(model, 5.0), InvalidArgument);
}

TEST_CASE("robustness: classical simplices are exactly embeddable") {
    for (int d = 2; d <= 4; ++d) {
        const EmbeddingProblem p = problem_of(classical_fragment(d));
        const RobustnessResult res = robustness(p);
        CHECK(res.r == 0.0);
        CHECK(certificate_residual(p, res) < 1e-8);
        CHECK(res.witness.minCoeff() >= -1e-10);
        CHECK(depolarized_residual(p, res) < 1e-8);
    }
}

TEST_CASE("robustness: stabilizer qubit is noncontextual and the embedding reproduces its table") {
    const EmbeddingProblem p = problem_of(stabilizer_fragment());
    const RobustnessResult res = robustness(p);
    CHECK(res.r == 0.0);
    REQUIRE(res.model);
    CHECK((res.model->predict() - p.states * p.effects).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(certificate_residual(p, res) < 1e-8);
}

TEST_CASE("robustness: octahedron states with every cube effect") {
    const EmbeddingProblem p = problem_of(octahedron_cube_fragment());
    const RobustnessResult res = robustness(p);
    CHECK(res.r == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
    CHECK(depolarized_residual(p, res) < 1e-8);
}

TEST_CASE("robustness: icosphere refinements of the Bloch ball") {
    const double golden[] = {0.472135955, 0.61803398875, 0.654508497187};
    double previous = 0.0;
    for (int level = 0; level <= 2; ++level) {
        const EmbeddingProblem p = problem_of(icosphere_fragment(level));
        const RobustnessResult res = robustness(p);
        CHECK(res.r > 0.0);
        CHECK(std::abs(res.r - golden[level]) < 1e-6);
        CHECK(res.r >= previous);
        previous = res.r;
        CHECK(certificate_residual(p, res) < 1e-8);
        CHECK(res.witness.minCoeff() >= -1e-10);
        CHECK(depolarized_residual(p, res) < 1e-8);
    }
}

TEST_CASE("reconstruct_model: classical bit has indicator response functions") {
    const EmbeddingProblem p = problem_of(classical_fragment(2));
    const RobustnessResult res = robustness(p);
    REQUIRE(res.model);
    const OntologicalModel& m = *res.model;
    CHECK(m.epistemic.cols() == 2);
    // Each state sits on one ontic state, and every effect responds with 0 or 1.
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(m.epistemic.row(i).sum() == doctest::Approx(1.0));
        CHECK(m.epistemic.row(i).maxCoeff() == doctest::Approx(1.0));
    }
    for (Eigen::Index j = 0; j < m.response.rows(); ++j)
        for (Eigen::Index l = 0; l < 2; ++l) {
            const double v = m.response(j, l);
            CHECK(std::min(std::abs(v), std::abs(v - 1.0)) < 1e-12);
        }
    CHECK((m.response.row(0).array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("robustness: depolarizing by r0 lowers r to (r - r0)/(1 - r0)") {
    const EmbeddingProblem base = problem_of(icosphere_fragment(1));
    const double r = robustness(base).r;
    for (double r0 : {0.1, 0.3, 0.5, 0.7}) {
        EmbeddingProblem p = base;
        p.states = DepolarizationMap{r0, base.mixed, base.unit}.apply_rows(base.states);
        const double got = robustness(p).r;
        CHECK(got <= r + 1e-9);
        CHECK(std::abs(got - std::max(0.0, (r - r0) / (1.0 - r0))) < 1e-6);
    }
}

TEST_CASE("robustness: fragment monotonicity over antipodal subsets") {
    Rng rng(44);
    const Matrix dirs = icosphere(1);
    Vector unit(4);
    unit << 1, 0, 0, 0;
    const double full = robustness(make_problem(bloch_states(dirs), bloch_effects(dirs), unit)).r;
    for (int t = 0; t < 6; ++t) {
        const Matrix sub_s = antipodal_subset(dirs, rng, 0.6);
        const Matrix sub_e = antipodal_subset(dirs, rng, 0.6);
        if (poly::affine_dimension(sub_s) < 3 || poly::affine_dimension(sub_e) < 3) continue;
        const double part_s = robustness(make_problem(bloch_states(sub_s), bloch_effects(dirs), unit)).r;
        const double part_e = robustness(make_problem(bloch_states(dirs), bloch_effects(sub_e), unit)).r;
        const double both = robustness(make_problem(bloch_states(sub_s), bloch_effects(sub_e), unit)).r;
        CHECK(part_s <= full + 1e-7);
        CHECK(part_e <= full + 1e-7);
        CHECK(both <= std::min(part_s, part_e) + 1e-7);
    }
}

TEST_CASE("robustness: complements already in the effect set leave r unchanged") {
    const Fragment f = icosphere_fragment(1);
    const Eigen::Index n = icosphere(1).rows();
    const double with = robustness(problem_of(f)).r;
    const double without = robustness(make_problem(f.states, f.effects.leftCols(2 + n), f.unit)).r;
    CHECK(std::abs(with - without) < 1e-9);
}

TEST_CASE("robustness: complements on a fitted fragment can only raise r") {
    const gpt::GptModel model = fitted_model(0.0, 32);
    const EmbeddingProblem p = build_problem(model);
    EmbeddingProblem plain = p;
    plain.effects = model.effects.leftCols(2 + model.num_measured());
    const RobustnessResult with = robustness(p);
    const RobustnessResult without = robustness(plain);
    CHECK(without.r <= with.r + 1e-9);
    CHECK(with.r > 0.3);
    CHECK(depolarized_residual(p, with) < 1e-8);
    CHECK(depolarized_residual(plain, without) < 1e-8);
}

TEST_CASE("robustness: input validation") {
    EmbeddingProblem p = problem_of(classical_fragment(2));
    p.mixed = Vector::Zero(3);
    CHECK_THROWS_AS(robustness(p), InvalidArgument);
    CHECK_THROWS_AS(make_problem(Matrix(0, 2), Matrix::Identity(2, 2), Vector::Ones(2)), InvalidArgument);
}

TEST_CASE("robustness_vs_tau: noncontextual repetitions give a zero series") {
    const Fragment stab = stabilizer_fragment();
    gpt::GptModel model;
    model.rank = 4;
    model.states.resize(12, 4);
    model.states.topRows(6) = stab.states;
    model.states.bottomRows(6) = stab.states;
    model.states.bottomRows(6).rightCols(3) *= 0.5;
    model.effects = stab.effects;
    model.tau_labels = {0, 0, 0, 0, 0, 0, 5, 5, 5, 5, 5, 5};

    const RobustnessSeries many = robustness_vs_tau({model, model, model});
    REQUIRE(many.taus == std::vector<double>{0, 5});
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(many.mean[t] == 0.0);
        REQUIRE(many.stddev[t]);
        CHECK(*many.stddev[t] == 0.0);
    }
    const RobustnessSeries one = robustness_vs_tau({model});
    CHECK_FALSE(one.stddev[0].has_value());
    CHECK(one.mean[1] == 0.0);

    CHECK_THROWS_AS(robustness_vs_tau({}), InvalidArgument);
}

TEST_CASE("summarize: sample standard deviation") {
    const RobustnessSeries s = summarize({0.0}, {{1.0, 2.0, 3.0}});
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(*s.stddev[0] == doctest::Approx(1.0));
    CHECK_THROWS_AS(summarize({0.0, 1.0}, {{1.0}}), InvalidArgument);
}
