#include "gptomo/tomofit.hpp"

#include "gptomo/qp.hpp"
#include "gptomo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gptomo::fit {

Matrix variance_table(const FrequencyTable& table) { return synth::variance_table(table.entries, table.shots); }

double chi_squared(const Matrix& f, const Matrix& d, const Matrix& variance) {
    if (f.rows() != d.rows() || f.cols() != d.cols() || f.rows() != variance.rows() || f.cols() != variance.cols())
        throw InvalidArgument("chi_squared: shape mismatch");
    return ((f - d).array().square() / variance.array()).sum();
}

namespace {

// min sum_l w_l (t_l - c_l - g_l'x)^2  s.t.  0 <= c_l + g_l'x <= 1, with g_l the columns of `basis`.
Vector solve_box_least_squares(const Matrix& basis, const Vector& offsets, const Vector& target, const Vector& weights) {
    const Eigen::Index p = basis.rows();
    const Eigen::Index l = basis.cols();
    if (p == 0) return Vector(0);
    const Matrix weighted = basis * weights.asDiagonal();
    qp::Problem prob;
    prob.hessian = weighted * basis.transpose();
    prob.linear = -(weighted * (target - offsets));
    prob.constraints.resize(p, 2 * l);
    prob.constraints.leftCols(l) = basis;
    prob.constraints.rightCols(l) = -basis;
    prob.offsets.resize(2 * l);
    prob.offsets.head(l) = offsets;
    prob.offsets.tail(l) = Vector::Ones(l) - offsets;

    Eigen::LLT<Matrix> llt(prob.hessian);
    if (llt.info() != Eigen::Success) {
        const double ridge = 1e-12 * std::max(prob.hessian.trace() / static_cast<double>(p), 1e-300);
        prob.hessian.diagonal().array() += ridge;
    }
    const qp::Result res = qp::solve(prob, 1e-12);
    if (!res.feasible) {
        std::ostringstream msg;
        msg << "see-saw subproblem infeasible: " << p << " variables, " << 2 * l
            << " constraints, max violation " << res.max_violation;
        throw InternalError(msg.str());
    }
    return res.x;
}

struct Factors {
    Matrix s;
    Matrix e;
};

Matrix truncated_svd(const Matrix& f, int k) {
    Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() *
           svd.matrixV().leftCols(k).transpose();
}

Matrix initial_states(const Matrix& d0, int k, bool normalized) {
    const Eigen::Index m = d0.rows();
    if (normalized) {
        Matrix s(m, k);
        s.col(0).setOnes();
        if (k > 1) {
            const RowVector mean = d0.colwise().mean();
            const Matrix centered = d0.rowwise() - mean;
            Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
            s.rightCols(k - 1) = svd.matrixU().leftCols(k - 1);
        }
        return s;
    }
    Eigen::BDCSVD<Matrix> svd(d0, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
}

void effect_step(const Matrix& f, const Matrix& w, Factors& x) {
    const Matrix basis = x.s.transpose();
    const Vector zero = Vector::Zero(f.rows());
    for (Eigen::Index j = 0; j < f.cols(); ++j)
        x.e.col(j) = solve_box_least_squares(basis, zero, f.col(j), w.col(j));
}

void state_step(const Matrix& f, const Matrix& w, bool normalized, Factors& x) {
    const Eigen::Index k = x.s.cols();
    if (normalized) {
        const Matrix basis = x.e.bottomRows(k - 1);
        const Vector offsets = x.e.row(0).transpose();
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            x.s(i, 0) = 1.0;
            if (k > 1)
                x.s.row(i).tail(k - 1) =
                    solve_box_least_squares(basis, offsets, f.row(i).transpose(), w.row(i).transpose()).transpose();
        }
        return;
    }
    const Vector zero = Vector::Zero(f.cols());
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        x.s.row(i) = solve_box_least_squares(x.e, zero, f.row(i).transpose(), w.row(i).transpose()).transpose();
}

FitResult run_restart(const Matrix& f, const Matrix& variance, const Matrix& w, int k, const FitOptions& opt,
                      const Matrix& d_svd, int restart) {
    Matrix d0 = d_svd;
    if (restart > 0) {
        Rng rng(derive_key(opt.seed, {0xF17ULL, static_cast<std::uint64_t>(restart)}));
        for (Eigen::Index j = 0; j < d0.cols(); ++j)
            for (Eigen::Index i = 0; i < d0.rows(); ++i) d0(i, j) += rng.uniform(-opt.init_noise, opt.init_noise);
    }
    d0 = d0.cwiseMax(0.0).cwiseMin(1.0);

    Factors x{initial_states(d0, k, opt.normalized), Matrix::Zero(k, f.cols())};
    FitResult res;
    res.rank = k;
    res.restart = restart;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt.max_iter; ++it) {
        effect_step(f, w, x);
        res.history.push_back(chi_squared(f, x.s * x.e, variance));
        state_step(f, w, opt.normalized, x);
        const double cur = chi_squared(f, x.s * x.e, variance);
        res.history.push_back(cur);
        res.iterations = it + 1;
        if (cur <= 0.0 || (std::isfinite(prev) && (prev - cur) <= opt.tol * cur)) {
            res.converged = true;
            break;
        }
        prev = cur;
    }
    res.states = std::move(x.s);
    res.effects = std::move(x.e);
    res.d_matrix = (res.states * res.effects).cwiseMax(0.0).cwiseMin(1.0);
    res.chi2 = chi_squared(f, res.d_matrix, variance);
    return res;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::vector<double> off_diagonal(const Matrix& m) {
    std::vector<double> out;
    for (Eigen::Index a = 0; a < m.rows(); ++a)
        for (Eigen::Index b = 0; b < m.cols(); ++b)
            if (a != b) out.push_back(m(a, b));
    return out;
}

}  // namespace

FitResult fit_rank_k(const Matrix& f, const Matrix& variance, int k, const FitOptions& options) {
    if (f.rows() != variance.rows() || f.cols() != variance.cols())
        throw InvalidArgument("fit_rank_k: frequency and variance shapes differ");
    if (k < 1 || k > std::min(f.rows(), f.cols())) throw InvalidArgument("fit_rank_k: rank out of range");
    if ((variance.array() <= 0.0).any()) throw InvalidArgument("fit_rank_k: variances must be positive");
    if (options.restarts < 1 || options.max_iter < 1) throw InvalidArgument("fit_rank_k: need restarts, max_iter >= 1");

    const Matrix w = variance.cwiseInverse();
    const Matrix d_svd = truncated_svd(f, k);
    FitResult best;
    bool have = false;
    for (int r = 0; r < options.restarts; ++r) {
        FitResult cand = run_restart(f, variance, w, k, options, d_svd, r);
        if (!have || cand.chi2 < best.chi2) {
            best = std::move(cand);
            have = true;
        }
    }
    return best;
}

FitResult fit_rank_k(const FrequencyTable& table, int k, const FitOptions& options) {
    const Matrix var = table.variance.size() == table.entries.size() ? table.variance : variance_table(table);
    return fit_rank_k(table.entries, var, k, options);
}

double RankScan::mean_train_error(std::size_t r) const { return mean_of(train_errors.at(r)); }

double RankScan::mean_test_error(std::size_t r) const { return mean_of(off_diagonal(test_errors.at(r))); }

double RankScan::test_error_stddev(std::size_t r) const { return stddev_of(off_diagonal(test_errors.at(r))); }

std::vector<DiffStats> RankScan::diff_stats() const {
    std::vector<DiffStats> out;
    for (std::size_t r = 1; r < ranks.size() && r < test_error_diffs.size(); ++r) {
        const auto& v = test_error_diffs[r];
        DiffStats s;
        s.rank = ranks[r];
        s.count = v.size();
        s.mean = mean_of(v);
        s.stddev = stddev_of(v);
        s.stderr_ = v.empty() ? 0.0 : s.stddev / std::sqrt(static_cast<double>(v.size()));
        out.push_back(s);
    }
    return out;
}

RankScan rank_scan(const std::vector<FrequencyTable>& tables, const std::vector<int>& ranks,
                   const FitOptions& options) {
    if (tables.size() < 2) throw InvalidArgument("rank_scan: need at least two tables");
    if (ranks.empty()) throw InvalidArgument("rank_scan: no ranks requested");
    for (std::size_t r = 1; r < ranks.size(); ++r)
        if (ranks[r] != ranks[r - 1] + 1) throw InvalidArgument("rank_scan: ranks must be contiguous and increasing");
    const Eigen::Index m = tables.front().rows();
    const Eigen::Index n = tables.front().cols();
    for (const auto& t : tables)
        if (t.rows() != m || t.cols() != n) throw InvalidArgument("rank_scan: tables differ in shape");

    std::vector<Matrix> variances;
    for (const auto& t : tables) variances.push_back(t.variance.size() == t.entries.size() ? t.variance : variance_table(t));

    const std::size_t nt = tables.size();
    RankScan scan;
    scan.ranks = ranks;
    scan.tables = nt;
    for (std::size_t r = 0; r < ranks.size(); ++r) {
        std::vector<double> train(nt);
        Matrix test = Matrix::Constant(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt),
                                       std::numeric_limits<double>::quiet_NaN());
        for (std::size_t a = 0; a < nt; ++a) {
            FitOptions opt = options;
            opt.seed = derive_key(options.seed, {static_cast<std::uint64_t>(ranks[r]), a});
            const FitResult fit = fit_rank_k(tables[a].entries, variances[a], ranks[r], opt);
            train[a] = fit.chi2;
            for (std::size_t b = 0; b < nt; ++b)
                if (a != b)
                    test(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        chi_squared(tables[b].entries, fit.d_matrix, variances[b]);
        }
        scan.train_errors.push_back(std::move(train));
        scan.test_errors.push_back(std::move(test));
        std::vector<double> diffs;
        if (r > 0) {
            const Matrix& cur = scan.test_errors[r];
            const Matrix& prev = scan.test_errors[r - 1];
            for (Eigen::Index a = 0; a < cur.rows(); ++a)
                for (Eigen::Index b = 0; b < cur.cols(); ++b)
                    if (a != b) diffs.push_back(cur(a, b) - prev(a, b));
        }
        scan.test_error_diffs.push_back(std::move(diffs));
    }
    return scan;
}

int select_rank(const RankScan& scan) {
    const auto stats = scan.diff_stats();
    for (std::size_t i = 0; i + 1 < stats.size(); ++i) {
        const DiffStats& here = stats[i];
        const DiffStats& next = stats[i + 1];
        if (here.mean < 0.0 && next.mean > 0.0 && std::abs(here.mean) > here.stderr_ &&
            std::abs(next.mean) > next.stderr_)
            return here.rank;
    }
    // Fallback: interior minimum of the mean test error.
    if (scan.test_errors.size() >= 3) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < scan.test_errors.size(); ++r)
            if (scan.mean_test_error(r) < scan.mean_test_error(best)) best = r;
        if (best > 0 && best + 1 < scan.test_errors.size()) return scan.ranks[best];
    }
    throw AmbiguousSelection("select_rank: no sign change in test-error differences and no interior minimum", scan);
}

FrequencyTable stack_tables(const std::vector<FrequencyTable>& tables) {
    if (tables.empty()) throw InvalidArgument("stack_tables: no tables");
    const Eigen::Index n = tables.front().cols();
    const std::int64_t shots = tables.front().shots;
    Eigen::Index total = 0;
    for (const auto& t : tables) {
        if (t.cols() != n) throw InvalidArgument("stack_tables: tables differ in measurement count");
        if (t.shots != shots) throw InvalidArgument("stack_tables: tables differ in shot count");
        total += t.rows();
    }
    if (tables.size() == 1) return tables.front();

    FrequencyTable out;
    out.entries.resize(total, n);
    out.variance.resize(total, n);
    out.shots = shots;
    out.tau_us = tables.front().tau_us;
    out.seed = tables.front().seed;
    Eigen::Index row = 0;
    for (const auto& t : tables) {
        for (const auto& blk : t.layout()) {
            out.blocks.push_back({blk.tau_us, row + blk.first_row, blk.rows, blk.seed});
        }
        out.entries.middleRows(row, t.rows()) = t.entries;
        out.variance.middleRows(row, t.rows()) =
            t.variance.size() == t.entries.size() ? t.variance : variance_table(t);
        row += t.rows();
    }
    return out;
}

FrequencyTable slice_block(const FrequencyTable& stacked, std::size_t block) {
    const auto layout = stacked.layout();
    if (block >= layout.size()) throw InvalidArgument("slice_block: block index out of range");
    const auto& blk = layout[block];
    FrequencyTable out;
    out.entries = stacked.entries.middleRows(blk.first_row, blk.rows);
    if (stacked.variance.size() == stacked.entries.size())
        out.variance = stacked.variance.middleRows(blk.first_row, blk.rows);
    out.shots = stacked.shots;
    out.tau_us = blk.tau_us;
    out.seed = blk.seed;
    return out;
}

}  // namespace gptomo::fit
