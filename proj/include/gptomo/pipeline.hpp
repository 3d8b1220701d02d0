#pragma once

// End-to-end runs: simulate, fit, factor, dual, reparametrize, robustness, volumes.

#include "gptomo/error.hpp"
#include "gptomo/gptmodel.hpp"
#include "gptomo/linalg.hpp"
#include "gptomo/nonclassicality.hpp"
#include "gptomo/reparam.hpp"
#include "gptomo/synthdata.hpp"
#include "gptomo/tomofit.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gptomo::pipe {

/// Relative volumes Vol(S^tau)/Vol(S_consistent) per waiting time, values[t][rep].
struct VolumeSeries {
    std::vector<double> taus;
    std::vector<std::vector<double>> values;
    std::vector<double> mean;
    /// Sample standard deviation across repetitions; absent with one repetition.
    std::vector<std::optional<double>> stddev;
};

VolumeSeries make_volume_series(const std::vector<double>& taus, const std::vector<std::vector<double>>& values);

/// Vol(conv states)/Vol(conv consistent) for 3-D point sets in one frame.
/// Throws DegenerateGeometry when the consistent space has zero volume.
double relative_volume(const Matrix& states, const Matrix& consistent);

/// One repetition in the shared sphere frame: states keep their tau labels.
struct FramedRepetition {
    gpt::GptModel model;
    Matrix consistent;  ///< consistent states, 3-D coordinates of the same frame
};

VolumeSeries relative_volumes(const std::vector<FramedRepetition>& reps);

struct DecayFit {
    double a = 0.0;
    double b = 0.0;  ///< decay time, microseconds
    double a_err = 0.0;
    double b_err = 0.0;
    Matrix covariance;  ///< 2 x 2 over (A, B), scaled by the reduced chi-squared
    std::vector<double> residuals;
    double chi2 = 0.0;
    int dof = 0;
};

/// Weighted least squares of A exp(-tau/B) with weights 1/sigma^2.
/// Starts from A = first value and B from a log-linear regression.
DecayFit fit_decay(const std::vector<double>& taus, const std::vector<double>& values,
                   const std::vector<double>& sigmas);

/// Uses the across-repetition standard deviations as sigmas. Missing spreads count as 1;
/// zero spreads are raised to the smallest positive spread of the series.
DecayFit fit_decay(const VolumeSeries& series);

struct Interval {
    double tau_a = 0.0;
    double tau_b = 0.0;
    double increase = 0.0;
    double combined_sigma = 0.0;
};

/// Consecutive pairs whose mean volume grows by more than threshold * sqrt(sd_a^2 + sd_b^2).
std::vector<Interval> detect_nonmarkovianity(const VolumeSeries& series, double threshold_sigmas = 3.0);

struct SimulateConfig {
    int m = 100;
    int n = 100;
    std::int64_t shots = 2000;
    std::vector<double> taus{0, 5, 10, 15, 20, 30, 40, 50};
    synth::ChannelParams channel;
};

struct FitConfig {
    /// A single rank skips the scan.
    std::vector<int> ranks{2, 3, 4, 5, 6};
    int scan_tables = 10;
    fit::FitOptions options;
};

struct ContextualityConfig {
    bool enabled = true;
    int repetitions = 7;
};

struct VolumesConfig {
    bool enabled = true;
    double threshold_sigmas = 3.0;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    SimulateConfig simulate;
    FitConfig fit;
    ContextualityConfig contextuality;
    VolumesConfig volumes;
    /// Artifacts are written here when non-empty.
    std::string out_dir;

    /// Throws InvalidArgument with the offending field.
    void validate() const;
};

/// A stage failed; files written by earlier stages are kept.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RankSummary {
    bool scanned = false;
    int selected = 0;
    std::vector<int> ranks;
    std::vector<double> mean_train;
    std::vector<double> mean_test;
    std::vector<fit::DiffStats> diffs;
};

struct RepetitionResult {
    gpt::GptModel model;  ///< factorized stacked fit
    double chi2 = 0.0;
    Matrix consistent;    ///< consistent states, ambient coordinates
    std::optional<rp::SphereFit> frame;
    std::vector<double> robustness;  ///< per tau
    std::vector<double> volumes;     ///< per tau, relative
    double max_distinguishability = 0.0;  ///< first waiting time
};

struct RunReport {
    RankSummary rank;
    std::vector<double> taus;
    std::optional<ctx::RobustnessSeries> robustness;
    /// First waiting time from which every mean robustness is zero.
    std::optional<double> tau_star;
    std::optional<VolumeSeries> volumes;
    std::optional<DecayFit> decay;
    std::optional<std::string> decay_failure;
    std::vector<Interval> intervals;
    double max_distinguishability = 0.0;
    double purity_bound = 0.5;
    std::vector<std::string> skipped;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, std::string> artifact_hashes;
    std::vector<RepetitionResult> repetitions;
};

/// Simulates the tables of one repetition, stacks and fits them at rank k, and analyses every waiting time.
RepetitionResult run_repetition(const PipelineConfig& config, int k, int rep);

RunReport run_full_pipeline(const PipelineConfig& config);

}  // namespace gptomo::pipe
