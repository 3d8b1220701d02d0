#include "gptomo/lp.hpp"

#include "gptomo/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gptomo::lp {

std::string_view to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration-limit";
    }
    return "unknown";
}

namespace {

// Dense revised simplex over [A | I] where the identity block holds the phase-one artificials.
class RevisedSimplex {
public:
    RevisedSimplex(const Problem& p, const Options& opt) : opt_(opt) {
        rows_ = p.a.rows();
        cols_ = p.a.cols();
        a_.resize(rows_, cols_ + rows_);
        a_.leftCols(cols_) = p.a;
        a_.rightCols(rows_).setIdentity();
        b_ = p.b;
        sign_ = Vector::Ones(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (b_(i) < 0.0) {
                sign_(i) = -1.0;
                b_(i) = -b_(i);
                a_.row(i).head(cols_) *= -1.0;
            }
        }
        basis_.resize(static_cast<std::size_t>(rows_));
        is_basic_.assign(static_cast<std::size_t>(cols_ + rows_), 0);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            basis_[static_cast<std::size_t>(i)] = cols_ + i;
            is_basic_[static_cast<std::size_t>(cols_ + i)] = 1;
        }
    }

    Result run(const Vector& c) {
        Result res;
        // Phase one: minimize the sum of artificials.
        Vector phase1 = Vector::Zero(cols_ + rows_);
        phase1.tail(rows_).setOnes();
        const Status s1 = iterate(phase1, /*allow_artificial=*/true, res);
        if (s1 == Status::iteration_limit) {
            res.status = s1;
            return res;
        }
        refactor();
        const Vector xb = binv_ * b_;
        double infeas = 0.0;
        for (Eigen::Index i = 0; i < rows_; ++i)
            if (basis_[static_cast<std::size_t>(i)] >= cols_) infeas += std::max(0.0, xb(i));
        res.infeasibility = infeas;
        if (infeas > opt_.feasibility_tol * (1.0 + b_.lpNorm<Eigen::Infinity>())) {
            res.status = Status::infeasible;
            return res;
        }
        drive_out_artificials();

        Vector cost = Vector::Zero(cols_ + rows_);
        cost.head(cols_) = c;
        const Status s2 = iterate(cost, /*allow_artificial=*/false, res);
        res.status = s2;
        if (s2 != Status::optimal) return res;

        refactor();
        Vector xb2 = binv_ * b_;
        res.x = Vector::Zero(cols_);
        for (Eigen::Index i = 0; i < rows_; ++i) {
            const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
            if (j < cols_) res.x(j) = std::max(0.0, xb2(i));
        }
        Vector cb(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
        res.duals = (binv_.transpose() * cb).cwiseProduct(sign_);
        res.objective = c.dot(res.x);
        return res;
    }

private:
    void refactor() {
        Matrix bm(rows_, rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) bm.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
        Eigen::PartialPivLU<Matrix> lu(bm);
        binv_ = lu.inverse();
    }

    Status iterate(const Vector& cost, bool allow_artificial, Result& res) {
        const Eigen::Index limit = allow_artificial ? cols_ + rows_ : cols_;
        int degenerate_run = 0;
        while (true) {
            if (res.iterations >= opt_.max_iterations) return Status::iteration_limit;
            refactor();
            const Vector xb = binv_ * b_;
            Vector cb(rows_);
            for (Eigen::Index i = 0; i < rows_; ++i) cb(i) = cost(basis_[static_cast<std::size_t>(i)]);
            const Vector y = binv_.transpose() * cb;
            const Vector reduced = cost.head(limit) - a_.leftCols(limit).transpose() * y;

            const bool bland = degenerate_run >= opt_.degenerate_switch;
            Eigen::Index entering = -1;
            double best = -opt_.optimality_tol;
            for (Eigen::Index j = 0; j < limit; ++j) {
                if (is_basic_[static_cast<std::size_t>(j)]) continue;
                const double dj = reduced(j);
                if (dj < best) {
                    entering = j;
                    if (bland) break;
                    best = dj;
                }
            }
            if (entering < 0) return Status::optimal;

            const Vector w = binv_ * a_.col(entering);
            Eigen::Index leaving = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows_; ++i) {
                if (w(i) <= opt_.pivot_tol) continue;
                const double r = std::max(0.0, xb(i)) / w(i);
                if (leaving < 0 || r < ratio - 1e-13 * (1.0 + ratio)) {
                    ratio = r;
                    leaving = i;
                } else if (r <= ratio + 1e-13 * (1.0 + ratio)) {
                    const bool prefer = bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leaving)]
                                              : w(i) > w(leaving);
                    if (prefer) {
                        ratio = std::min(ratio, r);
                        leaving = i;
                    }
                }
            }
            if (leaving < 0) {
                res.ray = Vector::Zero(cols_);
                if (entering < cols_) res.ray(entering) = 1.0;
                for (Eigen::Index i = 0; i < rows_; ++i) {
                    const Eigen::Index j = basis_[static_cast<std::size_t>(i)];
                    if (j < cols_) res.ray(j) = -w(i);
                }
                return Status::unbounded;
            }
            degenerate_run = ratio <= opt_.feasibility_tol ? degenerate_run + 1 : 0;
            is_basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(leaving)])] = 0;
            basis_[static_cast<std::size_t>(leaving)] = entering;
            is_basic_[static_cast<std::size_t>(entering)] = 1;
            ++res.iterations;
        }
    }

    // Replace artificials still in the basis (at value zero) by structural columns where possible.
    void drive_out_artificials() {
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (basis_[static_cast<std::size_t>(i)] < cols_) continue;
            refactor();
            const RowVector row = binv_.row(i) * a_.leftCols(cols_);
            Eigen::Index pick = -1;
            double mag = 1e-9;
            for (Eigen::Index j = 0; j < cols_; ++j) {
                if (is_basic_[static_cast<std::size_t>(j)]) continue;
                if (std::abs(row(j)) > mag) {
                    mag = std::abs(row(j));
                    pick = j;
                }
            }
            if (pick < 0) continue;  // redundant row; the artificial stays basic at zero
            is_basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = 0;
            basis_[static_cast<std::size_t>(i)] = pick;
            is_basic_[static_cast<std::size_t>(pick)] = 1;
        }
    }

    Options opt_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    Matrix a_;
    Vector b_;
    Vector sign_;
    Matrix binv_;
    std::vector<Eigen::Index> basis_;
    std::vector<char> is_basic_;
};

}  // namespace

Result solve(const Problem& problem, const Options& options) {
    if (problem.a.rows() != problem.b.size() || problem.a.cols() != problem.c.size())
        throw InvalidArgument("lp::solve: inconsistent problem dimensions");
    if (problem.a.rows() == 0) {
        Result r;
        r.x = Vector::Zero(problem.c.size());
        if ((problem.c.array() < -options.optimality_tol).any()) {
            r.status = Status::unbounded;
            r.ray = (problem.c.array() < 0.0).cast<double>().matrix();
        } else {
            r.status = Status::optimal;
        }
        return r;
    }
    RevisedSimplex simplex(problem, options);
    return simplex.run(problem.c);
}

}  // namespace gptomo::lp
