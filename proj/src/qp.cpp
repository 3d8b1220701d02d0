#include "gptomo/qp.hpp"

#include "gptomo/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gptomo::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Append the direction d (already J'n) to the factorization; Givens rotations zero d below iq.
bool add_constraint(Matrix& r, Matrix& j, Vector& d, int& iq, double& r_norm) {
    const auto n = static_cast<int>(d.size());
    for (int col = n - 1; col >= iq + 1; --col) {
        double cc = d(col - 1);
        double ss = d(col);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        d(col) = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d(col - 1) = -h;
        } else {
            d(col - 1) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = 0; k < n; ++k) {
            const double t1 = j(k, col - 1);
            const double t2 = j(k, col);
            j(k, col - 1) = t1 * cc + t2 * ss;
            j(k, col) = xny * (t1 + j(k, col - 1)) - t2;
        }
    }
    ++iq;
    r.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d(iq - 1)) <= std::numeric_limits<double>::epsilon() * r_norm) return false;
    r_norm = std::max(r_norm, std::abs(d(iq - 1)));
    return true;
}

void delete_constraint(Matrix& r, Matrix& j, std::vector<int>& active, Vector& u, int& iq, int position) {
    const auto n = static_cast<int>(j.rows());
    for (int i = position; i < iq - 1; ++i) {
        active[static_cast<std::size_t>(i)] = active[static_cast<std::size_t>(i + 1)];
        u(i) = u(i + 1);
        r.col(i) = r.col(i + 1);
    }
    active[static_cast<std::size_t>(iq - 1)] = active[static_cast<std::size_t>(iq)];
    u(iq - 1) = u(iq);
    active[static_cast<std::size_t>(iq)] = -1;
    u(iq) = 0.0;
    r.col(iq - 1).setZero();
    --iq;
    if (iq == 0) return;
    for (int col = position; col < iq; ++col) {
        double cc = r(col, col);
        double ss = r(col + 1, col);
        const double h = std::hypot(cc, ss);
        if (h == 0.0) continue;
        cc /= h;
        ss /= h;
        r(col + 1, col) = 0.0;
        if (cc < 0.0) {
            r(col, col) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            r(col, col) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = col + 1; k < iq; ++k) {
            const double t1 = r(col, k);
            const double t2 = r(col + 1, k);
            r(col, k) = t1 * cc + t2 * ss;
            r(col + 1, k) = xny * (t1 + r(col, k)) - t2;
        }
        for (int k = 0; k < n; ++k) {
            const double t1 = j(k, col);
            const double t2 = j(k, col + 1);
            j(k, col) = t1 * cc + t2 * ss;
            j(k, col + 1) = xny * (j(k, col) + t1) - t2;
        }
    }
}

}  // namespace

Result solve(const Problem& problem, double violation_tol, int max_iterations) {
    const auto n = static_cast<int>(problem.hessian.rows());
    const auto p = static_cast<int>(problem.constraints.cols());
    if (problem.hessian.cols() != n || problem.linear.size() != n || problem.constraints.rows() != n ||
        problem.offsets.size() != p)
        throw InvalidArgument("qp::solve: inconsistent problem dimensions");

    Eigen::LLT<Matrix> llt(problem.hessian);
    if (llt.info() != Eigen::Success) throw InvalidArgument("qp::solve: Hessian is not positive definite");

    // J = L^{-T}; G^{-1} = J J'.
    const Matrix l_inv = llt.matrixL().solve(Matrix::Identity(n, n));
    Matrix j = l_inv.transpose();
    Matrix r = Matrix::Zero(n, n);
    double r_norm = 1.0;

    Result res;
    Vector x = -(j * (j.transpose() * problem.linear));
    std::vector<int> active(static_cast<std::size_t>(n + 1), -1);
    std::vector<char> is_active(static_cast<std::size_t>(p), 0);
    Vector u = Vector::Zero(n + 1);
    int iq = 0;

    Vector slack(p);
    Vector d(n);
    Vector z(n);
    Vector rr(n);

    while (true) {
        if (res.iterations++ >= max_iterations) break;
        slack = problem.constraints.transpose() * x + problem.offsets;
        int ip = -1;
        double worst = -violation_tol;
        for (int i = 0; i < p; ++i) {
            if (is_active[static_cast<std::size_t>(i)]) continue;
            if (slack(i) < worst) {
                worst = slack(i);
                ip = i;
            }
        }
        if (ip < 0) {
            res.feasible = true;
            break;
        }
        const Vector np = problem.constraints.col(ip);
        u(iq) = 0.0;
        active[static_cast<std::size_t>(iq)] = ip;
        double sp = slack(ip);

        bool infeasible = false;
        while (true) {
            d = j.transpose() * np;
            z = j.rightCols(n - iq) * d.tail(n - iq);
            if (iq > 0)
                rr.head(iq) = r.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));

            double t1 = kInf;
            int drop = -1;
            for (int k = 0; k < iq; ++k) {
                if (rr(k) > 0.0 && u(k) / rr(k) < t1) {
                    t1 = u(k) / rr(k);
                    drop = k;
                }
            }
            const double znp = z.dot(np);
            const double t2 = (z.norm() > std::numeric_limits<double>::epsilon() && znp > 0.0) ? -sp / znp : kInf;
            const double t = std::min(t1, t2);
            if (t >= kInf) {
                infeasible = true;
                break;
            }
            if (t2 >= kInf) {
                if (iq > 0) u.head(iq) -= t * rr.head(iq);
                u(iq) += t;
                is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
                delete_constraint(r, j, active, u, iq, drop);
                continue;
            }
            x += t * z;
            if (iq > 0) u.head(iq) -= t * rr.head(iq);
            u(iq) += t;
            if (t == t2) {
                if (!add_constraint(r, j, d, iq, r_norm)) {
                    infeasible = true;
                    break;
                }
                is_active[static_cast<std::size_t>(ip)] = 1;
                break;
            }
            is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(drop)])] = 0;
            delete_constraint(r, j, active, u, iq, drop);
            sp = problem.constraints.col(ip).dot(x) + problem.offsets(ip);
        }
        if (infeasible) break;
    }

    slack = problem.constraints.transpose() * x + problem.offsets;
    res.max_violation = p > 0 ? std::max(0.0, -slack.minCoeff()) : 0.0;
    res.feasible = res.max_violation <= std::max(violation_tol, 1e-9);
    res.x = x;
    res.objective = 0.5 * x.dot(problem.hessian * x) + problem.linear.dot(x);
    return res;
}

}  // namespace gptomo::qp
