#include "gptomo/gptmodel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gptomo::gpt {

std::vector<double> GptModel::taus() const {
    std::vector<double> out;
    for (double t : tau_labels)
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
}

Matrix GptModel::states_at(double tau_us) const {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < tau_labels.size(); ++i)
        if (tau_labels[i] == tau_us) idx.push_back(static_cast<Eigen::Index>(i));
    if (idx.empty()) {
        std::ostringstream msg;
        msg << "no states labelled tau = " << tau_us;
        throw InvalidArgument(msg.str());
    }
    Matrix out(static_cast<Eigen::Index>(idx.size()), states.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = states.row(idx[r]);
    return out;
}

void GptModel::validate(double prob_slack) const {
    const Eigen::Index k = rank;
    if (states.cols() != k || effects.rows() != k)
        throw InvalidArgument("state/effect dimensions do not match the rank");
    if (effects.cols() < 2 || effects.cols() % 2 != 0)
        throw InvalidArgument("effect matrix must hold unit, zero, n effects and n complements");
    if (!tau_labels.empty() && static_cast<Eigen::Index>(tau_labels.size()) != states.rows())
        throw InvalidArgument("tau label count differs from the number of states");
    if ((states.col(0).array() != 1.0).any()) throw InvalidArgument("first state coordinate must be 1");
    Vector u = Vector::Zero(k);
    u(0) = 1.0;
    if (effects.col(0) != u) throw InvalidArgument("first effect column must be the unit effect");
    if (!effects.col(1).isZero(0.0)) throw InvalidArgument("second effect column must be the zero effect");
    const Eigen::Index n = num_measured();
    for (Eigen::Index j = 0; j < n; ++j) {
        if ((u - effects.col(2 + j) - effects.col(2 + n + j)).lpNorm<Eigen::Infinity>() > 1e-12)
            throw InvalidArgument("complement column missing for effect " + std::to_string(j));
    }
    const Matrix p = probabilities();
    if (p.minCoeff() < -prob_slack || p.maxCoeff() > 1.0 + prob_slack)
        throw InvalidArgument("pairings leave [0, 1]");
}

GptModel factorize(const Matrix& d, int k, FactorMethod method, std::vector<double> tau_labels) {
    const Eigen::Index m = d.rows();
    const Eigen::Index n = d.cols();
    if (k < 1 || m < k || n + 1 < k) throw InvalidArgument("rank out of range for the table shape");
    if (!tau_labels.empty() && static_cast<Eigen::Index>(tau_labels.size()) != m)
        throw InvalidArgument("tau label count differs from the number of rows");

    Matrix aug(m, n + 1);
    aug.col(0).setOnes();
    aug.rightCols(n) = d;
    const int found = numerical_rank(aug);
    if (found != k) {
        std::ostringstream msg;
        msg << "[1 | D] has numerical rank " << found << ", expected " << k;
        throw RankMismatch(msg.str());
    }

    // Remove the ones direction, then take an orthonormal basis of what is left.
    const double root_m = std::sqrt(static_cast<double>(m));
    const Vector q1 = Vector::Constant(m, 1.0 / root_m);
    const Matrix resid = d - q1 * (q1.transpose() * d);
    Matrix basis(m, k - 1);
    if (k > 1) {
        if (method == FactorMethod::qr) {
            Eigen::ColPivHouseholderQR<Matrix> qr(resid);
            const Matrix q = qr.householderQ() * Matrix::Identity(m, k - 1);
            basis = q;
        } else {
            Eigen::BDCSVD<Matrix> svd(resid, Eigen::ComputeThinU);
            basis = svd.matrixU().leftCols(k - 1);
        }
    }

    GptModel model;
    model.rank = k;
    model.tau_labels = std::move(tau_labels);
    model.states.resize(m, k);
    model.states.col(0).setOnes();
    model.states.rightCols(k - 1) = root_m * basis;

    const Matrix e = model.states.colPivHouseholderQr().solve(aug);
    model.effects.resize(k, 2 * n + 2);
    Vector u = Vector::Zero(k);
    u(0) = 1.0;
    model.effects.col(0) = u;
    model.effects.col(1).setZero();
    model.effects.middleCols(2, n) = e.rightCols(n);
    model.effects.rightCols(n) = u.replicate(1, n) - e.rightCols(n);
    return model;
}

Reparametrization relate_factorizations(const GptModel& a, const GptModel& b) {
    if (a.rank != b.rank || a.states.rows() != b.states.rows() || a.effects.cols() != b.effects.cols())
        throw IncompatibleModels("models differ in rank or shape");
    const Matrix pa = a.probabilities();
    const Matrix pb = b.probabilities();
    const double scale = std::max(1.0, pa.lpNorm<Eigen::Infinity>());
    if ((pa - pb).lpNorm<Eigen::Infinity>() > 1e-8 * scale)
        throw IncompatibleModels("models do not reproduce the same probability table");
    return Reparametrization{pseudo_inverse(a.states) * b.states};
}

GptModel apply_reparametrization(const GptModel& model, const Reparametrization& l) {
    const Matrix& map = l.linear_map;
    if (map.rows() != model.rank || map.cols() != model.rank)
        throw InvalidArgument("reparametrization has the wrong size");
    Eigen::JacobiSVD<Matrix> svd(map);
    const Vector& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-12 * sv(0)) throw InvalidArgument("reparametrization is singular");
    GptModel out = model;
    out.states = model.states * map;
    out.effects = map.partialPivLu().solve(model.effects);
    return out;
}

double distinguishability(const Vector& s, const Vector& s_prime, const Matrix& effects) {
    if (effects.cols() == 0) throw InvalidArgument("empty effect set");
    return (effects.transpose() * (s - s_prime)).cwiseAbs().maxCoeff();
}

std::vector<double> per_state_f(const GptModel& model) {
    const Eigen::Index m = model.states.rows();
    if (m < 2) throw InvalidArgument("need at least two states");
    const Matrix p = model.probabilities();
    std::vector<double> f(static_cast<std::size_t>(m), 0.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double dist = (p.row(i) - p.row(j)).cwiseAbs().maxCoeff();
            f[static_cast<std::size_t>(i)] = std::max(f[static_cast<std::size_t>(i)], dist);
            f[static_cast<std::size_t>(j)] = std::max(f[static_cast<std::size_t>(j)], dist);
        }
    }
    return f;
}

double max_pairwise_distinguishability(const GptModel& model) {
    const auto f = per_state_f(model);
    return *std::max_element(f.begin(), f.end());
}

double purity_lower_bound(double max_dist) {
    if (!(max_dist >= 0.0 && max_dist <= 1.0)) throw InvalidArgument("distinguishability must lie in [0, 1]");
    return 0.5 * (1.0 + max_dist);
}

GptModel restrict_states(const GptModel& model, double tau_us) {
    GptModel out = model;
    out.states = model.states_at(tau_us);
    out.tau_labels.assign(static_cast<std::size_t>(out.states.rows()), tau_us);
    return out;
}

}  // namespace gptomo::gpt
