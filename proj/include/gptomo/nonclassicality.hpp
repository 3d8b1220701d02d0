#pragma once

// Simplex-embedding linear program and robustness of nonclassicality.

#include "gptomo/error.hpp"
#include "gptomo/gptmodel.hpp"
#include "gptomo/linalg.hpp"

#include <optional>
#include <vector>

namespace gptomo::ctx {

struct EmbeddingProblem {
    Matrix states;   ///< extremal states as rows
    Matrix effects;  ///< effects as columns (unit and zero may be included)
    Vector unit;
    Vector mixed;    ///< average of the extremal states
};

/// s -> (1 - r) s + r (u.s) m.
struct DepolarizationMap {
    double r = 0.0;
    Vector mixed;
    Vector unit;

    Vector apply(const Vector& s) const;
    /// Applies the map to every row.
    Matrix apply_rows(const Matrix& states) const;
    /// The k x k matrix acting on column vectors.
    Matrix matrix() const;
};

struct OntologicalModel {
    /// epistemic(i, l): probability of ontic state l for state i.
    Matrix epistemic;
    /// response(j, l): probability that effect j fires in ontic state l.
    Matrix response;
    /// Indices of the state-cone facets that label the ontic states.
    std::vector<Eigen::Index> ontic_facets;

    /// Outcome probabilities epistemic * response^T (states x effects).
    Matrix predict() const { return epistemic * response.transpose(); }
};

struct RobustnessResult {
    double r = 0.0;
    /// sigma(p, q) >= 0 indexed by (effect-cone facet, state-cone facet).
    Matrix witness;
    Matrix state_facets;   ///< H_Omega, rows
    Matrix effect_facets;  ///< H_E, rows
    /// Orthonormal basis of the common span used when the fragment does not span R^k.
    std::optional<Matrix> projection;
    int lp_iterations = 0;
    std::optional<OntologicalModel> model;
};

/// Builds the problem for the states labelled tau (all states when tau is empty).
EmbeddingProblem build_problem(const gpt::GptModel& model, std::optional<double> tau = std::nullopt);

/// Problem from explicit states and effects; interior states are discarded.
EmbeddingProblem make_problem(const Matrix& states, const Matrix& effects, const Vector& unit);

struct RobustnessOptions {
    /// Precomputed H_E for problems sharing one effect set.
    std::optional<Matrix> effect_facets;
    bool reconstruct = true;
};

/// Minimal r with H_E^T sigma H_Omega = (1 - r) I + r m u^T and sigma >= 0.
RobustnessResult robustness(const EmbeddingProblem& problem, const RobustnessOptions& options = {});

/// Unit-normalized facet rows of the cone generated by the effect columns.
Matrix effect_cone_facets(const Matrix& effects);

/// Ontological model of the problem's states and effects.
OntologicalModel reconstruct_model(const EmbeddingProblem& problem, const RobustnessResult& result);

/// Same, evaluated on arbitrary states (rows) and effects (columns) of the fragment's cones.
OntologicalModel reconstruct_model(const EmbeddingProblem& problem, const RobustnessResult& result,
                                   const Matrix& states, const Matrix& effects);

struct RobustnessSeries {
    std::vector<double> taus;
    /// values[t][rep]
    std::vector<std::vector<double>> values;
    std::vector<double> mean;
    /// Sample standard deviation; absent with a single repetition.
    std::vector<std::optional<double>> stddev;
};

/// Mean and spread per waiting time of values[t][rep].
RobustnessSeries summarize(const std::vector<double>& taus, const std::vector<std::vector<double>>& values);

/// Robustness at every waiting time of every repetition model.
RobustnessSeries robustness_vs_tau(const std::vector<gpt::GptModel>& repetitions);

}  // namespace gptomo::ctx
