#pragma once

// GPT state/effect representation of a fitted probability table.

#include "gptomo/error.hpp"
#include "gptomo/linalg.hpp"

#include <optional>
#include <vector>

namespace gptomo::gpt {

/// States as rows (first coordinate = normalization), effects as columns.
///
/// Effect columns are ordered (unit, zero, e_1..e_n, u - e_1..u - e_n).
struct GptModel {
    Matrix states;
    Matrix effects;
    int rank = 0;
    /// One label per state row, empty when the model has a single waiting time.
    std::vector<double> tau_labels;

    Eigen::Index num_states() const { return states.rows(); }
    Eigen::Index num_effects() const { return effects.cols(); }
    /// Number of measured effects n (excluding unit, zero and complements).
    Eigen::Index num_measured() const { return (effects.cols() - 2) / 2; }

    Vector unit() const { return effects.col(0); }
    /// The measured effects e_1..e_n as columns.
    Matrix measured_effects() const { return effects.middleCols(2, num_measured()); }
    /// Pairings s_i . e_j for every state and every effect column.
    Matrix probabilities() const { return states * effects; }

    /// Distinct waiting times in order of first appearance.
    std::vector<double> taus() const;
    /// State rows carrying the given waiting-time label; throws InvalidArgument if none match.
    Matrix states_at(double tau_us) const;

    /// Throws InvalidArgument when the structural invariants fail.
    void validate(double prob_slack = 1e-9) const;
};

enum class FactorMethod { qr, svd };

/// Factor [1 | D] = S E' and append the zero effect and complements.
///
/// Throws RankMismatch when [1 | D] does not have numerical rank k.
GptModel factorize(const Matrix& d, int k, FactorMethod method = FactorMethod::qr,
                   std::vector<double> tau_labels = {});

/// Invertible k x k matrix L acting as S -> S L, E -> L^-1 E.
struct Reparametrization {
    Matrix linear_map;
};

/// L with S_a L = S_b and L^-1 E_a = E_b; throws IncompatibleModels if the models describe different tables.
Reparametrization relate_factorizations(const GptModel& a, const GptModel& b);

/// Throws InvalidArgument if L is singular.
GptModel apply_reparametrization(const GptModel& model, const Reparametrization& l);

/// max over effect columns of |e . (s - s')|.
double distinguishability(const Vector& s, const Vector& s_prime, const Matrix& effects);

/// f(s_i) = max over other states s' of the distinguishability of s_i and s'.
std::vector<double> per_state_f(const GptModel& model);
double max_pairwise_distinguishability(const GptModel& model);

/// Lower bound (1 + max_dist)/2 on the largest eigenvalue of every prepared density matrix.
double purity_lower_bound(double max_dist);

/// Copy of the model restricted to the state rows with the given label.
GptModel restrict_states(const GptModel& model, double tau_us);

}  // namespace gptomo::gpt
