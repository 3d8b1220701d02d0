#include "gptomo/pipeline.hpp"

#include "gptomo/io.hpp"
#include "gptomo/polytope.hpp"
#include "gptomo/rng.hpp"

#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

namespace gptomo::pipe {

namespace {

struct DecayResiduals {
    using Scalar = double;
    using InputType = Vector;
    using ValueType = Vector;
    using JacobianType = Matrix;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const std::vector<double>* t = nullptr;
    const std::vector<double>* y = nullptr;
    const std::vector<double>* s = nullptr;

    int inputs() const { return 2; }
    int values() const { return static_cast<int>(t->size()); }

    int operator()(const Vector& x, Vector& out) const {
        for (std::size_t i = 0; i < t->size(); ++i)
            out(static_cast<Eigen::Index>(i)) = (x(0) * std::exp(-(*t)[i] / x(1)) - (*y)[i]) / (*s)[i];
        return 0;
    }
    int df(const Vector& x, Matrix& jac) const {
        for (std::size_t i = 0; i < t->size(); ++i) {
            const double e = std::exp(-(*t)[i] / x(1));
            const auto r = static_cast<Eigen::Index>(i);
            jac(r, 0) = e / (*s)[i];
            jac(r, 1) = x(0) * e * (*t)[i] / (x(1) * x(1)) / (*s)[i];
        }
        return 0;
    }
};

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

template <class F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    }
}

std::vector<double> block_labels(const synth::FrequencyTable& stacked) {
    std::vector<double> labels;
    labels.reserve(static_cast<std::size_t>(stacked.rows()));
    for (const auto& b : stacked.layout())
        for (Eigen::Index i = 0; i < b.rows; ++i) labels.push_back(b.tau_us);
    return labels;
}

}  // namespace

VolumeSeries make_volume_series(const std::vector<double>& taus, const std::vector<std::vector<double>>& values) {
    const ctx::RobustnessSeries s = ctx::summarize(taus, values);
    return VolumeSeries{s.taus, s.values, s.mean, s.stddev};
}

double relative_volume(const Matrix& states, const Matrix& consistent) {
    const double whole = poly::volume(poly::VPolytope{consistent});
    if (!(whole > 0.0)) throw DegenerateGeometry("consistent state space has zero volume");
    return poly::volume(poly::VPolytope{states}) / whole;
}

VolumeSeries relative_volumes(const std::vector<FramedRepetition>& reps) {
    if (reps.empty()) throw InvalidArgument("need at least one repetition");
    const std::vector<double> taus = reps.front().model.taus();
    std::vector<std::vector<double>> values(taus.size());
    for (const auto& rep : reps) {
        if (rep.model.taus() != taus) throw InvalidArgument("repetitions disagree on the waiting-time grid");
        if (rep.model.rank != 4 || rep.consistent.cols() != 3)
            throw InvalidArgument("volumes are defined for rank-4 models in a 3-D frame");
        for (std::size_t t = 0; t < taus.size(); ++t)
            values[t].push_back(relative_volume(rep.model.states_at(taus[t]).rightCols(3), rep.consistent));
    }
    return make_volume_series(taus, values);
}

DecayFit fit_decay(const std::vector<double>& taus, const std::vector<double>& values,
                   const std::vector<double>& sigmas) {
    const std::size_t n = taus.size();
    if (values.size() != n || sigmas.size() != n) throw InvalidArgument("taus, values and sigmas differ in length");
    if (n < 3) throw FitFailure("decay fit needs at least 3 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(values[i] > 0.0)) throw FitFailure("decay fit needs positive values");
        if (!(sigmas[i] > 0.0)) throw FitFailure("decay fit needs positive uncertainties");
    }

    // log y = log A - tau/B, weighted by (y/sigma)^2.
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::pow(values[i] / sigmas[i], 2);
        const double l = std::log(values[i]);
        sw += w;
        st += w * taus[i];
        sl += w * l;
        stt += w * taus[i] * taus[i];
        stl += w * taus[i] * l;
    }
    const double denom = sw * stt - st * st;
    if (!(denom > 0.0)) throw FitFailure("waiting times are all equal");
    const double slope = (sw * stl - st * sl) / denom;
    const double scale = std::max(std::abs(taus.back() - taus.front()), 1.0);
    if (!(slope < -1e-12 / scale)) {
        std::ostringstream msg;
        msg << "series does not decay (log-linear slope " << slope << ")";
        throw FitFailure(msg.str());
    }

    DecayResiduals f;
    f.t = &taus;
    f.y = &values;
    f.s = &sigmas;
    Vector x(2);
    x << values.front(), -1.0 / slope;
    Eigen::LevenbergMarquardt<DecayResiduals> lm(f);
    lm.parameters.xtol = 1e-15;
    lm.parameters.ftol = 1e-15;
    lm.parameters.maxfev = 2000;
    lm.minimize(x);
    if (!std::isfinite(x(0)) || !std::isfinite(x(1)) || x(0) <= 0.0 || x(1) <= 0.0)
        throw FitFailure("decay fit left the region A > 0, B > 0");

    Vector r(static_cast<Eigen::Index>(n));
    Matrix jac(static_cast<Eigen::Index>(n), 2);
    f(x, r);
    f.df(x, jac);
    const Matrix normal = jac.transpose() * jac;
    Eigen::JacobiSVD<Matrix> svd(normal);
    const Vector& sv = svd.singularValues();
    if (!(sv(1) > 1e-14 * sv(0))) throw FitFailure("singular normal equations in the decay fit");

    DecayFit out;
    out.a = x(0);
    out.b = x(1);
    out.chi2 = r.squaredNorm();
    out.dof = static_cast<int>(n) - 2;
    const double factor = out.dof > 0 ? out.chi2 / out.dof : 1.0;
    out.covariance = normal.inverse() * factor;
    out.a_err = std::sqrt(out.covariance(0, 0));
    out.b_err = std::sqrt(out.covariance(1, 1));
    for (std::size_t i = 0; i < n; ++i) out.residuals.push_back(values[i] - x(0) * std::exp(-taus[i] / x(1)));
    return out;
}

DecayFit fit_decay(const VolumeSeries& series) {
    double floor = std::numeric_limits<double>::infinity();
    for (const auto& s : series.stddev)
        if (s && *s > 0.0) floor = std::min(floor, *s);
    if (!std::isfinite(floor)) floor = 1.0;
    std::vector<double> sigmas;
    for (const auto& s : series.stddev) sigmas.push_back(!s ? 1.0 : std::max(*s, floor));
    return fit_decay(series.taus, series.mean, sigmas);
}

std::vector<Interval> detect_nonmarkovianity(const VolumeSeries& series, double threshold_sigmas) {
    if (series.mean.size() != series.taus.size() || series.stddev.size() != series.taus.size())
        throw InvalidArgument("series is incomplete");
    std::vector<Interval> out;
    for (std::size_t t = 0; t + 1 < series.taus.size(); ++t) {
        if (!series.stddev[t] || !series.stddev[t + 1])
            throw InvalidArgument("non-Markovianity detection needs spreads from several repetitions");
        const double combined = std::hypot(*series.stddev[t], *series.stddev[t + 1]);
        const double increase = series.mean[t + 1] - series.mean[t];
        if (increase > 0.0 && increase > threshold_sigmas * combined)
            out.push_back(Interval{series.taus[t], series.taus[t + 1], increase, combined});
    }
    return out;
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument("config: " + what); };
    simulate.channel.validate();
    if (simulate.m < 1 || simulate.n < 1) fail("simulate.m and simulate.n must be positive");
    if (simulate.shots < 1) fail("simulate.shots must be positive");
    if (simulate.taus.empty()) fail("simulate.taus is empty");
    for (std::size_t t = 0; t < simulate.taus.size(); ++t) {
        if (simulate.taus[t] < 0.0) fail("simulate.taus must be nonnegative");
        if (t > 0 && simulate.taus[t] <= simulate.taus[t - 1]) fail("simulate.taus must be increasing");
    }
    if (fit.ranks.empty()) fail("fit.ranks is empty");
    for (std::size_t r = 0; r < fit.ranks.size(); ++r) {
        if (fit.ranks[r] < 1 || fit.ranks[r] > std::min(simulate.m, simulate.n)) fail("fit.ranks out of range");
        if (r > 0 && fit.ranks[r] != fit.ranks[r - 1] + 1) fail("fit.ranks must be contiguous and increasing");
    }
    if (fit.ranks.size() > 1 && fit.scan_tables < 2) fail("fit.scan_tables must be at least 2");
    if (fit.options.restarts < 1 || fit.options.max_iter < 1 || !(fit.options.tol > 0.0))
        fail("fit options must be positive");
    if (contextuality.repetitions < 1) fail("contextuality.repetitions must be positive");
    if (!(volumes.threshold_sigmas >= 0.0)) fail("volumes.threshold_sigmas must be nonnegative");
}

RepetitionResult run_repetition(const PipelineConfig& config, int k, int rep) {
    const auto& sim = config.simulate;
    const auto preps = synth::fibonacci_directions(sim.m);
    const auto meas = synth::fibonacci_directions(sim.n);
    const std::uint64_t table_seed = derive_key(config.seed, {1, static_cast<std::uint64_t>(rep)});
    std::vector<synth::FrequencyTable> tables;
    for (std::size_t t = 0; t < sim.taus.size(); ++t)
        tables.push_back(synth::sample_frequency_table(preps, meas, sim.taus[t], sim.shots, sim.channel, table_seed, t));
    const synth::FrequencyTable stacked = fit::stack_tables(tables);

    fit::FitOptions opt = config.fit.options;
    opt.seed = derive_key(config.seed, {2, static_cast<std::uint64_t>(rep)});
    const fit::FitResult fitted = fit::fit_rank_k(stacked, k, opt);

    RepetitionResult out;
    out.chi2 = fitted.chi2;
    out.model = gpt::factorize(fitted.d_matrix, k, gpt::FactorMethod::qr, block_labels(stacked));
    out.consistent = poly::consistent_dual(out.model.effects.transpose(), out.model.unit()).vertices;
    out.max_distinguishability = gpt::max_pairwise_distinguishability(gpt::restrict_states(out.model, sim.taus.front()));

    if (config.contextuality.enabled) {
        ctx::RobustnessOptions ro;
        ro.effect_facets = ctx::effect_cone_facets(out.model.effects);
        ro.reconstruct = false;
        for (double tau : sim.taus) out.robustness.push_back(ctx::robustness(ctx::build_problem(out.model, tau), ro).r);
    }
    if (config.volumes.enabled && k == 4) {
        rp::SphereFitOptions so;
        so.seed = derive_key(config.seed, {4, static_cast<std::uint64_t>(rep)});
        out.frame = rp::fit_sphere_transform(out.consistent.rightCols(3), so);
        const gpt::GptModel framed = gpt::apply_reparametrization(out.model, rp::induced_map(*out.frame));
        const Matrix cons = rp::apply_transform(*out.frame, out.consistent.rightCols(3));
        for (double tau : sim.taus) out.volumes.push_back(relative_volume(framed.states_at(tau).rightCols(3), cons));
    }
    return out;
}

RunReport run_full_pipeline(const PipelineConfig& config) {
    config.validate();
    RunReport report;
    report.seed = config.seed;
    report.taus = config.simulate.taus;
    report.config_hash = io::sha256_hex(io::to_json(config).dump());
    const bool persist = !config.out_dir.empty();
    auto save_json = [&](const std::string& name, const io::json& j) {
        if (persist) report.artifact_hashes[name] = io::write_json(join_path(config.out_dir, name), j);
    };
    auto save_text = [&](const std::string& name, const std::string& text) {
        if (persist) report.artifact_hashes[name] = io::write_file(join_path(config.out_dir, name), text);
    };
    save_json("config.json", io::to_json(config));

    // Rank selection on independent tables at the first waiting time.
    report.rank.ranks = config.fit.ranks;
    if (config.fit.ranks.size() == 1) {
        report.rank.selected = config.fit.ranks.front();
        report.skipped.push_back("rank-scan");
    } else {
        stage("rank-scan", [&] {
            const auto& sim = config.simulate;
            const auto preps = synth::fibonacci_directions(sim.m);
            const auto meas = synth::fibonacci_directions(sim.n);
            std::vector<synth::FrequencyTable> tables;
            for (int i = 0; i < config.fit.scan_tables; ++i) {
                tables.push_back(synth::sample_frequency_table(preps, meas, sim.taus.front(), sim.shots, sim.channel,
                                                               derive_key(config.seed, {3, static_cast<std::uint64_t>(i)})));
                save_json("scan_tables/table_" + std::to_string(i) + ".json", io::to_json(tables.back()));
            }
            save_text("frequency_table.csv", io::matrix_csv(tables.front().entries));
            fit::FitOptions opt = config.fit.options;
            opt.seed = derive_key(config.seed, {5});
            const fit::RankScan scan = fit::rank_scan(tables, config.fit.ranks, opt);
            report.rank.scanned = true;
            for (std::size_t r = 0; r < scan.ranks.size(); ++r) {
                report.rank.mean_train.push_back(scan.mean_train_error(r));
                report.rank.mean_test.push_back(scan.mean_test_error(r));
            }
            report.rank.diffs = scan.diff_stats();
            save_json("scan.json", io::to_json(scan));
            save_text("rank_scan.csv", io::scan_csv(scan));
            report.rank.selected = fit::select_rank(scan);
            return 0;
        });
    }
    const int k = report.rank.selected;

    stage("repetitions", [&] {
        for (int rep = 0; rep < config.contextuality.repetitions; ++rep) {
            RepetitionResult r = run_repetition(config, k, rep);
            const std::string tag = "rep_" + std::to_string(rep);
            save_json("models/" + tag + ".json", io::to_json(r.model, io::json{{"chi2", r.chi2}, {"seed", config.seed},
                                                                                  {"repetition", rep}}));
            save_json("consistent/" + tag + ".json", io::to_json(poly::VPolytope{r.consistent}));
            if (r.frame) save_json("frames/" + tag + ".json", io::to_json(*r.frame));
            report.repetitions.push_back(std::move(r));
        }
        return 0;
    });

    double dist = 0.0;
    for (const auto& r : report.repetitions) dist += r.max_distinguishability;
    report.max_distinguishability = dist / static_cast<double>(report.repetitions.size());
    report.purity_bound = gpt::purity_lower_bound(std::clamp(report.max_distinguishability, 0.0, 1.0));

    const std::size_t nt = config.simulate.taus.size();
    if (config.contextuality.enabled) {
        std::vector<std::vector<double>> values(nt);
        for (const auto& r : report.repetitions)
            for (std::size_t t = 0; t < nt; ++t) values[t].push_back(r.robustness[t]);
        report.robustness = ctx::summarize(config.simulate.taus, values);
        if (report.robustness->mean.back() == 0.0) {
            std::size_t t = nt - 1;
            while (t > 0 && report.robustness->mean[t - 1] == 0.0) --t;
            report.tau_star = config.simulate.taus[t];
        }
        save_text("robustness.csv", io::robustness_csv(*report.robustness));
    } else {
        report.skipped.push_back("contextuality");
    }

    if (config.volumes.enabled && k == 4) {
        stage("volumes", [&] {
            std::vector<std::vector<double>> values(nt);
            for (const auto& r : report.repetitions)
                for (std::size_t t = 0; t < nt; ++t) values[t].push_back(r.volumes[t]);
            report.volumes = make_volume_series(config.simulate.taus, values);
            try {
                report.decay = fit_decay(*report.volumes);
            } catch (const FitFailure& e) {
                report.decay_failure = e.what();
            }
            if (report.repetitions.size() > 1)
                report.intervals = detect_nonmarkovianity(*report.volumes, config.volumes.threshold_sigmas);
            else
                report.skipped.push_back("non-markovianity (single repetition)");
            save_text("volumes.csv", io::volumes_csv(*report.volumes));
            return 0;
        });
    } else {
        report.skipped.push_back(config.volumes.enabled ? "volumes (rank is not 4)" : "volumes");
    }

    if (persist) io::write_json(join_path(config.out_dir, "report.json"), io::to_json(report));
    return report;
}

}  // namespace gptomo::pipe
