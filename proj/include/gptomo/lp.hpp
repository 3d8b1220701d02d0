#pragma once

#include "gptomo/linalg.hpp"

#include <string_view>

namespace gptomo::lp {

/// Standard-form linear program: minimize c'x subject to A x = b, x >= 0.
struct Problem {
    Matrix a;
    Vector b;
    Vector c;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(Status s);

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    int max_iterations = 200000;
    /// Consecutive degenerate pivots before switching from Dantzig to Bland pricing.
    int degenerate_switch = 50;
};

struct Result {
    Status status = Status::infeasible;
    Vector x;          ///< primal solution (size n) when optimal
    Vector duals;      ///< row duals y with c - A'y >= 0 at optimum
    double objective = 0.0;
    int iterations = 0;
    /// Phase-one residual (sum of artificial values); > 0 when infeasible.
    double infeasibility = 0.0;
    /// Direction of unboundedness (A d = 0, d >= 0, c'd < 0) when unbounded.
    Vector ray;
};

Result solve(const Problem& problem, const Options& options = {});

}  // namespace gptomo::lp
