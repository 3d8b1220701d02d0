#include "gptomo/nonclassicality.hpp"

#include "gptomo/lp.hpp"
#include "gptomo/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gptomo::ctx {

namespace {

Matrix row_span(const Matrix& rows) {
    Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-9 * sv(0)) ++r;
    return svd.matrixV().leftCols(r);
}

struct Projected {
    Matrix states;
    Matrix effects;
    Vector unit;
    Vector mixed;
    std::optional<Matrix> basis;
};

// Restrict to the span where both states and effects live; pairings are unchanged.
Projected project(const EmbeddingProblem& p) {
    const Eigen::Index k = p.states.cols();
    Projected out{p.states, p.effects, p.unit, p.mixed, std::nullopt};
    const Matrix b = row_span(p.states);
    Matrix eff_u(k, p.effects.cols() + 1);
    eff_u << p.effects, p.unit;
    const Matrix be = b.transpose() * eff_u;
    const Matrix c = row_span(be.transpose());
    if (b.cols() == k && c.cols() == k) return out;
    const Matrix basis = b * c;
    out.states = p.states * basis;
    out.effects = basis.transpose() * p.effects;
    out.unit = basis.transpose() * p.unit;
    out.mixed = basis.transpose() * p.mixed;
    out.basis = basis;
    return out;
}

Matrix nonzero_columns_as_rows(const Matrix& effects) {
    std::vector<Vector> rows;
    const double top = effects.cols() > 0 ? effects.colwise().norm().maxCoeff() : 0.0;
    for (Eigen::Index j = 0; j < effects.cols(); ++j)
        if (effects.col(j).norm() > 1e-12 * top) rows.emplace_back(effects.col(j));
    if (rows.empty()) throw InvalidArgument("effect set has no nonzero effect");
    return rows_to_matrix(rows, effects.rows());
}

lp::Problem embedding_lp(const Matrix& he, const Matrix& hs, const Vector& u, const Vector& m, bool with_r) {
    const Eigen::Index k = he.cols();
    const Eigen::Index ne = he.rows();
    const Eigen::Index ns = hs.rows();
    const Eigen::Index nsig = ne * ns;
    lp::Problem prob;
    prob.a.resize(k * k, nsig + (with_r ? 1 : 0));
    for (Eigen::Index p = 0; p < ne; ++p)
        for (Eigen::Index q = 0; q < ns; ++q) {
            const Eigen::Index col = p * ns + q;
            for (Eigen::Index a = 0; a < k; ++a)
                for (Eigen::Index b = 0; b < k; ++b) prob.a(a * k + b, col) = he(p, a) * hs(q, b);
        }
    prob.b = Vector::Zero(k * k);
    for (Eigen::Index a = 0; a < k; ++a) prob.b(a * k + a) = 1.0;
    prob.c = Vector::Zero(prob.a.cols());
    if (with_r) {
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b) prob.a(a * k + b, nsig) = (a == b ? 1.0 : 0.0) - m(a) * u(b);
        prob.c(nsig) = 1.0;
    }
    return prob;
}

Matrix unflatten(const Vector& x, Eigen::Index ne, Eigen::Index ns) {
    Matrix sigma(ne, ns);
    for (Eigen::Index p = 0; p < ne; ++p)
        for (Eigen::Index q = 0; q < ns; ++q) sigma(p, q) = std::max(0.0, x(p * ns + q));
    return sigma;
}

}  // namespace

Vector DepolarizationMap::apply(const Vector& s) const { return (1.0 - r) * s + r * unit.dot(s) * mixed; }

Matrix DepolarizationMap::apply_rows(const Matrix& states) const {
    return (1.0 - r) * states + r * (states * unit) * mixed.transpose();
}

Matrix DepolarizationMap::matrix() const {
    const Eigen::Index k = mixed.size();
    return (1.0 - r) * Matrix::Identity(k, k) + r * mixed * unit.transpose();
}

EmbeddingProblem make_problem(const Matrix& states, const Matrix& effects, const Vector& unit) {
    if (states.rows() == 0) throw InvalidArgument("embedding problem needs at least one state");
    if (effects.rows() != states.cols() || unit.size() != states.cols())
        throw InvalidArgument("states, effects and unit must share the dimension");
    EmbeddingProblem p;
    p.states = poly::remove_interior(states).vertices;
    p.effects = effects;
    p.unit = unit;
    p.mixed = p.states.colwise().mean().transpose();
    return p;
}

EmbeddingProblem build_problem(const gpt::GptModel& model, std::optional<double> tau) {
    const Matrix states = tau ? model.states_at(*tau) : model.states;
    return make_problem(states, model.effects, model.unit());
}

Matrix effect_cone_facets(const Matrix& effects) {
    return poly::cone_facets(nonzero_columns_as_rows(effects)).facets;
}

RobustnessResult robustness(const EmbeddingProblem& problem, const RobustnessOptions& options) {
    const Eigen::Index k = problem.states.cols();
    if (problem.states.rows() == 0) throw InvalidArgument("embedding problem has no states");
    if (problem.effects.rows() != k || problem.unit.size() != k || problem.mixed.size() != k)
        throw InvalidArgument("embedding problem dimensions disagree");

    const Projected pr = project(problem);
    RobustnessResult res;
    res.projection = pr.basis;
    res.state_facets = poly::cone_facets(pr.states).facets;
    if (options.effect_facets && !pr.basis) {
        res.effect_facets = *options.effect_facets;
    } else {
        res.effect_facets = effect_cone_facets(pr.effects);
    }
    const Eigen::Index ne = res.effect_facets.rows();
    const Eigen::Index ns = res.state_facets.rows();

    const lp::Result full = lp::solve(embedding_lp(res.effect_facets, res.state_facets, pr.unit, pr.mixed, true));
    res.lp_iterations = full.iterations;
    if (full.status != lp::Status::optimal) {
        std::ostringstream msg;
        msg << "embedding LP ended " << lp::to_string(full.status) << " (facets " << ne << " x " << ns
            << ", phase-one residual " << full.infeasibility << "); r = 1 should always be feasible";
        throw InternalError(msg.str());
    }
    res.r = std::clamp(full.x(ne * ns), 0.0, 1.0);
    res.witness = unflatten(full.x, ne, ns);

    if (res.r <= 1e-9) {
        // Confirm exact embeddability without noise.
        const lp::Result zero = lp::solve(embedding_lp(res.effect_facets, res.state_facets, pr.unit, pr.mixed, false));
        res.lp_iterations += zero.iterations;
        if (zero.status == lp::Status::optimal) {
            res.r = 0.0;
            res.witness = unflatten(zero.x, ne, ns);
        }
    }
    if (options.reconstruct) res.model = reconstruct_model(problem, res);
    return res;
}

OntologicalModel reconstruct_model(const EmbeddingProblem& problem, const RobustnessResult& result) {
    return reconstruct_model(problem, result, problem.states, problem.effects);
}

OntologicalModel reconstruct_model(const EmbeddingProblem& problem, const RobustnessResult& result,
                                   const Matrix& states, const Matrix& effects) {
    const Matrix& sigma = result.witness;
    if (sigma.rows() != result.effect_facets.rows() || sigma.cols() != result.state_facets.rows())
        throw InvalidArgument("witness does not match the facet matrices");
    Matrix s = states;
    Matrix e = effects;
    Vector u = problem.unit;
    if (result.projection) {
        s = states * *result.projection;
        e = result.projection->transpose() * effects;
        u = result.projection->transpose() * problem.unit;
    }
    // Facet coordinates of states, and the pulled-back responses of effects and of the unit.
    const Matrix state_coords = s * result.state_facets.transpose();   // states x facets
    const Matrix resp = (sigma.transpose() * (result.effect_facets * e)).transpose();  // effects x facets
    const Vector unit_resp = sigma.transpose() * (result.effect_facets * u);

    const double top = unit_resp.size() > 0 ? unit_resp.cwiseAbs().maxCoeff() : 0.0;
    if (!(top > 0.0)) throw DegenerateWitness("unit effect has zero response on every ontic state");
    OntologicalModel model;
    for (Eigen::Index l = 0; l < unit_resp.size(); ++l) {
        if (unit_resp(l) > 1e-12 * top) {
            model.ontic_facets.push_back(l);
            continue;
        }
        // A dropped ontic state must not carry probability.
        const double leak = (state_coords.col(l).cwiseAbs() * resp.col(l).cwiseAbs().maxCoeff()).maxCoeff();
        if (leak > 1e-9) {
            std::ostringstream msg;
            msg << "ontic state " << l << " has zero unit response but contributes " << leak;
            throw DegenerateWitness(msg.str());
        }
    }
    const auto nl = static_cast<Eigen::Index>(model.ontic_facets.size());
    model.epistemic.resize(s.rows(), nl);
    model.response.resize(e.cols(), nl);
    for (Eigen::Index c = 0; c < nl; ++c) {
        const Eigen::Index l = model.ontic_facets[static_cast<std::size_t>(c)];
        model.epistemic.col(c) = state_coords.col(l) * unit_resp(l);
        model.response.col(c) = resp.col(l) / unit_resp(l);
    }
    return model;
}

RobustnessSeries summarize(const std::vector<double>& taus, const std::vector<std::vector<double>>& values) {
    if (taus.size() != values.size()) throw InvalidArgument("one value list per waiting time is required");
    RobustnessSeries out;
    out.taus = taus;
    out.values = values;
    for (const auto& v : values) {
        if (v.empty()) throw InvalidArgument("every waiting time needs at least one repetition");
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        out.mean.push_back(mean);
        if (v.size() < 2) {
            out.stddev.emplace_back(std::nullopt);
            continue;
        }
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out.stddev.emplace_back(std::sqrt(ss / static_cast<double>(v.size() - 1)));
    }
    return out;
}

RobustnessSeries robustness_vs_tau(const std::vector<gpt::GptModel>& repetitions) {
    if (repetitions.empty()) throw InvalidArgument("need at least one repetition");
    const std::vector<double> taus = repetitions.front().taus();
    if (taus.empty()) throw InvalidArgument("models carry no waiting-time labels");
    std::vector<std::vector<double>> values(taus.size());
    for (const auto& model : repetitions) {
        if (model.taus() != taus) throw InvalidArgument("repetitions disagree on the waiting-time grid");
        RobustnessOptions opt;
        opt.effect_facets = effect_cone_facets(model.effects);
        opt.reconstruct = false;
        for (std::size_t t = 0; t < taus.size(); ++t)
            values[t].push_back(robustness(build_problem(model, taus[t]), opt).r);
    }
    return summarize(taus, values);
}

}  // namespace gptomo::ctx
