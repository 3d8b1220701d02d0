#pragma once

// Weighted low-rank fitting of frequency tables and train/test rank selection.

#include "gptomo/error.hpp"
#include "gptomo/linalg.hpp"
#include "gptomo/synthdata.hpp"

#include <cstdint>
#include <vector>

namespace gptomo::fit {

using synth::FrequencyTable;

struct FitOptions {
    int restarts = 5;
    double tol = 1e-8;        ///< relative chi-squared change that counts as converged
    int max_iter = 500;
    std::uint64_t seed = 0;
    double init_noise = 0.05; ///< amplitude of the uniform perturbation applied to restarts > 0
    /// Constrain the first state coordinate to 1, so the unit effect lies in the fitted row space.
    bool normalized = true;
};

struct FitResult {
    Matrix d_matrix;  ///< m x n, entries in [0, 1]
    Matrix states;    ///< m x k factor S
    Matrix effects;   ///< k x n factor E, D = S E before clamping
    int rank = 0;
    double chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    int restart = 0;
    /// Chi-squared after every half-step of the winning restart.
    std::vector<double> history;
};

/// F(1 - F)/N per entry with floor 1/(4 N^2).
Matrix variance_table(const FrequencyTable& table);

/// Sum over cells of (F - D)^2 / variance.
double chi_squared(const Matrix& f, const Matrix& d, const Matrix& variance);

FitResult fit_rank_k(const Matrix& f, const Matrix& variance, int k, const FitOptions& options = {});
FitResult fit_rank_k(const FrequencyTable& table, int k, const FitOptions& options = {});

/// Summary of the test-error change from rank k-1 to rank k over all ordered train/test pairs.
struct DiffStats {
    int rank = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double stderr_ = 0.0;
    std::size_t count = 0;
};

struct RankScan {
    std::vector<int> ranks;  ///< contiguous, increasing
    std::size_t tables = 0;
    /// train_errors[r][t]: chi-squared of the rank ranks[r] fit on table t.
    std::vector<std::vector<double>> train_errors;
    /// test_errors[r](a, b): model trained on table a evaluated on table b; NaN on the diagonal.
    std::vector<Matrix> test_errors;
    /// test_error_diffs[r]: chi2_k(F_b, D_k^a) - chi2_{k-1}(F_b, D_{k-1}^a) over pairs a != b (empty for r = 0).
    std::vector<std::vector<double>> test_error_diffs;

    std::size_t pair_count() const { return tables * (tables > 0 ? tables - 1 : 0); }
    double mean_train_error(std::size_t r) const;
    double mean_test_error(std::size_t r) const;
    double test_error_stddev(std::size_t r) const;
    std::vector<DiffStats> diff_stats() const;
};

class AmbiguousSelection : public Error {
public:
    AmbiguousSelection(const std::string& what, RankScan scan) : Error(what), scan_(std::move(scan)) {}
    const RankScan& scan() const { return scan_; }

private:
    RankScan scan_;
};

RankScan rank_scan(const std::vector<FrequencyTable>& tables, const std::vector<int>& ranks,
                   const FitOptions& options = {});

/// Smallest k with mean diff(k) < 0 < mean diff(k+1), both beyond one standard error.
/// Falls back to the arg-min of mean test error when that minimum is interior to the scanned range.
int select_rank(const RankScan& scan);

/// Stack tables sharing the same measurements into one table with per-block tau labels.
FrequencyTable stack_tables(const std::vector<FrequencyTable>& tables);

/// Block t of a stacked table as a standalone table.
FrequencyTable slice_block(const FrequencyTable& stacked, std::size_t block);

}  // namespace gptomo::fit
