#pragma once

#include "gptomo/linalg.hpp"

namespace gptomo::qp {

/// minimize 1/2 x'Gx + g'x  subject to  C'x + c0 >= 0  (one column of C per constraint).
struct Problem {
    Matrix hessian;      ///< G, symmetric positive definite (n x n)
    Vector linear;       ///< g (n)
    Matrix constraints;  ///< C (n x p)
    Vector offsets;      ///< c0 (p)
};

struct Result {
    Vector x;
    double objective = 0.0;
    bool feasible = false;
    int iterations = 0;
    /// Largest constraint violation at x (0 when feasible).
    double max_violation = 0.0;
};

/// Goldfarb-Idnani dual active-set method. `violation_tol` is the absolute slack accepted as satisfied.
Result solve(const Problem& problem, double violation_tol = 1e-12, int max_iterations = 10000);

}  // namespace gptomo::qp
