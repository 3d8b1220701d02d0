// Acceptance run: one PASS/FAIL line per criterion. Arguments select a subset, e.g. `acceptance 2 5`.

#include "oracles.hpp"

#include "gptomo/fragments.hpp"
#include "gptomo/gptmodel.hpp"
#include "gptomo/nonclassicality.hpp"
#include "gptomo/pipeline.hpp"
#include "gptomo/polytope.hpp"
#include "gptomo/rng.hpp"
#include "gptomo/synthdata.hpp"
#include "gptomo/tomofit.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace gptomo;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double max_abs(const Matrix& m) { return m.lpNorm<Eigen::Infinity>(); }

// Seed replications used by the Markovian volume criterion and shared with criteria 3, 9 and 10.
constexpr int kVolumeSeeds = 20;

pipe::PipelineConfig default_config(std::uint64_t seed, bool bump) {
    pipe::PipelineConfig c;
    c.seed = seed;
    if (bump) c.simulate.channel.bump = synth::CouplingBump{};
    return c;
}

struct SeedRun {
    std::vector<pipe::RepetitionResult> reps;
    pipe::VolumeSeries volumes;
};

SeedRun run_seed(std::uint64_t seed, bool bump) {
    const auto config = default_config(seed, bump);
    SeedRun out;
    std::vector<std::vector<double>> values(config.simulate.taus.size());
    for (int r = 0; r < config.contextuality.repetitions; ++r) {
        out.reps.push_back(pipe::run_repetition(config, 4, r));
        for (std::size_t t = 0; t < values.size(); ++t) values[t].push_back(out.reps.back().volumes[t]);
    }
    out.volumes = pipe::make_volume_series(config.simulate.taus, values);
    return out;
}

// Markovian runs are shared between criteria and computed on first use.
const SeedRun& markovian_run(std::uint64_t seed) {
    static std::map<std::uint64_t, SeedRun> cache;
    auto it = cache.find(seed);
    if (it == cache.end()) it = cache.emplace(seed, run_seed(seed, false)).first;
    return it->second;
}

const SeedRun& first_markovian_run() { return markovian_run(1); }

double depolarized_residual(const ctx::EmbeddingProblem& p, const ctx::RobustnessResult& res) {
    const ctx::DepolarizationMap dm{res.r, p.mixed, p.unit};
    return max_abs(res.model->predict() - dm.apply_rows(p.states) * p.effects);
}

// 1. Rank recovery over seed replications.
void rank_recovery(Outcome& o) {
    const auto dirs = synth::fibonacci_directions(100);
    const std::vector<int> ranks{2, 3, 4, 5, 6};
    int pattern_ok = 0, selected_four = 0;
    int fixed_seed_selection = -1;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        std::vector<synth::FrequencyTable> tables;
        for (std::uint64_t i = 0; i < 10; ++i)
            tables.push_back(synth::sample_frequency_table(dirs, dirs, 0.0, 2000, synth::ChannelParams{},
                                                           derive_key(1000 + rep, {i})));
        fit::FitOptions opt;
        opt.seed = rep;
        const auto scan = fit::rank_scan(tables, ranks, opt);
        int selected = -1;
        try {
            selected = fit::select_rank(scan);
        } catch (const fit::AmbiguousSelection&) {
        }
        if (rep == 0) fixed_seed_selection = selected;
        if (selected == 4) ++selected_four;
        bool ok = true;
        for (const auto& d : scan.diff_stats()) ok = ok && (d.rank <= 4 ? d.mean < 0.0 : d.mean > 0.0);
        if (ok) ++pattern_ok;
    }
    o.detail << "fixed-seed selection " << fixed_seed_selection << ", sign pattern in " << pattern_ok
             << "/10, rank 4 selected in " << selected_four << "/10";
    o.require(fixed_seed_selection == 4, "fixed seed selects 4");
    o.require(pattern_ok >= 8, "sign pattern in >= 8 of 10");
}

// 2. Contextuality anchors.
void anchors(Outcome& o) {
    auto r_of = [](const ctx::Fragment& f) { return ctx::robustness(ctx::make_problem(f.states, f.effects, f.unit)).r; };
    for (int d = 2; d <= 4; ++d) o.require(r_of(ctx::classical_fragment(d)) == 0.0, "classical simplex d=" + std::to_string(d));
    const double stab = r_of(ctx::stabilizer_fragment());
    o.require(stab == 0.0, "stabilizer r = 0");
    const double golden[] = {0.472135955, 0.61803398875, 0.654508497187};
    double previous = 0.0;
    o.detail << "stabilizer r=" << stab << ", icosphere r =";
    for (int level = 0; level <= 2; ++level) {
        const double r = r_of(ctx::icosphere_fragment(level));
        o.detail << " " << r;
        o.require(r > 0.0 && std::abs(r - golden[level]) < 1e-6, "icosphere golden level " + std::to_string(level));
        o.require(r >= previous, "nondecreasing under refinement");
        previous = r;
    }
}

// 3. Robustness reaches zero and stays there.
void decoherence_to_classicality(Outcome& o) {
    const auto& run = first_markovian_run();
    const auto taus = default_config(1, false).simulate.taus;
    std::vector<std::vector<double>> values(taus.size());
    for (const auto& rep : run.reps)
        for (std::size_t t = 0; t < taus.size(); ++t) values[t].push_back(rep.robustness[t]);
    const auto series = ctx::summarize(taus, values);
    std::optional<std::size_t> star;
    for (std::size_t t = taus.size(); t-- > 0;) {
        if (series.mean[t] != 0.0) break;
        star = t;
    }
    o.detail << "r(0)=" << series.mean[0] << " over " << run.reps.size() << " repetitions, tau*=";
    if (star) o.detail << taus[*star] << " us";
    else o.detail << "none";
    o.require(run.reps.size() == 7, "7 repetitions");
    o.require(series.mean[0] > 0.0, "r(0) > 0");
    o.require(star.has_value() && *star > 0, "zero tail");
    if (star)
        for (std::size_t t = *star; t < taus.size(); ++t)
            for (double v : values[t]) o.require(v == 0.0, "zero spread at tau " + std::to_string(taus[t]));
    o.require(star && taus[*star] == 15.0, "tau* matches the recorded golden of 15 us");
}

// 4. Volume monotonicity, planted non-Markovian interval, affine scaling.
void volumes(Outcome& o) {
    int clean = 0, decreasing = 0;
    for (int seed = 1; seed <= kVolumeSeeds; ++seed) {
        const auto& run = markovian_run(static_cast<std::uint64_t>(seed));
        if (pipe::detect_nonmarkovianity(run.volumes).empty()) ++clean;
        bool dec = true;
        for (std::size_t t = 1; t < run.volumes.mean.size(); ++t) dec = dec && run.volumes.mean[t] < run.volumes.mean[t - 1];
        if (dec) ++decreasing;
    }
    o.detail << "no detection in " << clean << "/" << kVolumeSeeds << " Markovian seeds (" << decreasing
             << " strictly decreasing)";
    o.require(clean >= 19, ">= 95% clean");

    const auto bumped = run_seed(1, true);
    const auto found = pipe::detect_nonmarkovianity(bumped.volumes);
    o.detail << ", bump run detects";
    for (const auto& iv : found) o.detail << " (" << iv.tau_a << ", " << iv.tau_b << ")";
    const synth::CouplingBump planted;
    o.require(found.size() == 1 && found[0].tau_a == planted.start_us && found[0].tau_b == planted.end_us,
              "exactly the planted interval");

    Rng rng(404);
    Matrix pts(40, 3);
    for (int i = 0; i < 40; ++i)
        pts.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized().transpose() * rng.uniform(0.5, 1.0);
    const double base = poly::volume(poly::VPolytope{pts});
    double worst = 0.0;
    int maps = 0;
    while (maps < 100) {
        const Mat3 tm = Mat3::NullaryExpr([&] { return rng.uniform(-1.0, 1.0); });
        if (std::abs(tm.determinant()) < 0.05) continue;
        const Vec3 shift(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
        const Matrix mapped = (pts * tm.transpose()).rowwise() + shift.transpose();
        const double expect = std::abs(tm.determinant()) * base;
        worst = std::max(worst, std::abs(poly::volume(poly::VPolytope{mapped}) - expect) / expect);
        ++maps;
    }
    o.detail << ", affine worst relative error " << worst;
    o.require(worst < 1e-9, "|det T| scaling");
}

// 5. Purity bound.
void purity(Outcome& o) {
    const double c = gpt::purity_lower_bound(0.691);
    o.detail << "purity_lower_bound(0.691) = " << c;
    o.require(std::abs(c - 0.8455) <= 5e-4, "0.8455 +- 5e-4");
}

// 6. Factorization uniqueness up to an invertible map.
void factorization(Outcome& o) {
    Rng rng(606);
    double worst_s = 0.0, worst_e = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int k = 2 + t % 4;
        const int m = 8 + static_cast<int>(rng.uniform(0, 20));
        const int n = 8 + static_cast<int>(rng.uniform(0, 20));
        const Matrix d = oracle::planted_table(m, n, k, rng);
        const auto a = gpt::factorize(d, k, gpt::FactorMethod::qr);
        const auto b = gpt::factorize(d, k, gpt::FactorMethod::svd);
        const Matrix l = gpt::relate_factorizations(a, b).linear_map;
        worst_s = std::max(worst_s, max_abs(a.states * l - b.states));
        worst_e = std::max(worst_e, max_abs(l.inverse() * a.effects - b.effects));
    }
    o.detail << "100 tables, worst |SL - S'| " << worst_s << ", |L^-1 E - E'| " << worst_e;
    o.require(worst_s < 1e-8 && worst_e < 1e-8, "residuals below 1e-8");
}

// 7. Polytope engine.
void polytopes(Outcome& o) {
    auto round_trip = [&](const Matrix& verts, Eigen::Index facets, const std::string& name) {
        const auto h = poly::v_to_h(poly::VPolytope{verts});
        const auto v = poly::h_to_v(h);
        o.require(h.size() == facets, name + " facet count");
        o.require(v.size() == verts.rows(), name + " vertex count");
        double worst = 0.0;
        for (Eigen::Index i = 0; i < verts.rows(); ++i)
            worst = std::max(worst, (v.vertices.rowwise() - verts.row(i)).rowwise().norm().minCoeff());
        worst = std::max(worst, ((h.a * verts.transpose()).colwise() - h.b).maxCoeff());
        o.require(worst < 1e-9, name + " residual");
    };
    Matrix cube(8, 3);
    for (int i = 0; i < 8; ++i) cube.row(i) << (i & 1) * 1.0, ((i >> 1) & 1) * 1.0, ((i >> 2) & 1) * 1.0;
    round_trip(cube, 6, "cube");
    Matrix oct(6, 3);
    oct << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    round_trip(oct, 8, "octahedron");
    Rng rng(707);
    for (int t = 0; t < 20; ++t) {
        const int n = 6 + t;
        Matrix p(n, 3);
        for (int i = 0; i < n; ++i) p.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized().transpose();
        // Points on a sphere in general position: every one is a vertex and the hull is simplicial.
        round_trip(p, 2 * n - 4, "random polytope " + std::to_string(t));
    }

    int agree = 0;
    for (int t = 0; t < 1000; ++t) {
        const int n = 3 + static_cast<int>(rng.uniform(0, 40));
        Matrix p(n, 2);
        for (int i = 0; i < n; ++i) p.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
        const auto kept = poly::extreme_point_indices(p);
        const std::set<Eigen::Index> mine(kept.begin(), kept.end());
        const auto reduced = poly::remove_interior(p);
        if (mine == oracle::gift_wrap(p) && reduced.size() == static_cast<Eigen::Index>(mine.size())) ++agree;
    }
    const double unit = poly::volume(poly::VPolytope{cube});
    o.detail << "cube, octahedron and 20 random round trips; remove_interior agrees on " << agree
             << "/1000; unit cube volume " << unit;
    o.require(agree == 1000, "hull oracle");
    o.require(std::abs(unit - 1.0) < 1e-9, "unit cube volume");
}

// 8. See-saw contract.
void seesaw(Outcome& o) {
    Rng rng(808);
    bool monotone = true;
    double worst_chi2 = 0.0, worst_sv = 0.0;
    auto check_history = [&](const fit::FitResult& r) {
        for (std::size_t i = 1; i < r.history.size(); ++i)
            monotone = monotone && r.history[i] <= r.history[i - 1] * (1.0 + 1e-10) + 1e-10;
    };
    for (int k = 2; k <= 5; ++k)
        for (int t = 0; t < 3; ++t) {
            const Matrix d = oracle::planted_table(40, 30, k, rng);
            fit::FitOptions opt;
            opt.seed = static_cast<std::uint64_t>(10 * k + t);
            opt.max_iter = 5000;
            opt.tol = 1e-14;
            const auto r = fit::fit_rank_k(d, synth::variance_table(d, 2000), k, opt);
            check_history(r);
            worst_chi2 = std::max(worst_chi2, r.chi2);
            Eigen::JacobiSVD<Matrix> svd(r.d_matrix);
            worst_sv = std::max(worst_sv, svd.singularValues()(k) / svd.singularValues()(0));
        }
    const auto dirs = synth::fibonacci_directions(100);
    const auto table = synth::sample_frequency_table(dirs, dirs, 0.0, 2000, synth::ChannelParams{}, 88);
    for (int k = 2; k <= 6; ++k) check_history(fit::fit_rank_k(table, k));
    o.detail << "planted worst chi2 " << worst_chi2 << ", worst sigma_{k+1}/sigma_1 " << worst_sv
             << ", histories monotone: " << (monotone ? "yes" : "no");
    o.require(monotone, "non-increasing chi2");
    o.require(worst_chi2 < 1e-6, "planted chi2");
    o.require(worst_sv < 1e-8, "rank-k output");
}

// 9. Reconstructed ontological models reproduce the depolarized tables.
void soundness(Outcome& o) {
    double worst = 0.0;
    auto check = [&](const ctx::EmbeddingProblem& p) {
        const auto res = ctx::robustness(p);
        o.require(res.model.has_value(), "reconstruction present");
        if (res.model) worst = std::max(worst, depolarized_residual(p, res));
    };
    std::vector<ctx::Fragment> frags{ctx::classical_fragment(2), ctx::classical_fragment(3), ctx::classical_fragment(4),
                                     ctx::stabilizer_fragment(), ctx::octahedron_cube_fragment()};
    for (int level = 0; level <= 2; ++level) frags.push_back(ctx::icosphere_fragment(level));
    for (const auto& f : frags) check(ctx::make_problem(f.states, f.effects, f.unit));
    const double anchor_worst = worst;
    int fitted = 0;
    for (const auto& rep : first_markovian_run().reps)
        for (double tau : rep.model.taus()) {
            check(ctx::build_problem(rep.model, tau));
            ++fitted;
        }
    o.detail << "anchors worst residual " << anchor_worst << ", " << fitted << " fitted fragments worst " << worst;
    o.require(worst < 1e-8, "entrywise 1e-8");
}

// 10. Decay fit.
void decay(Outcome& o) {
    const std::vector<double> taus{0, 5, 10, 15, 20, 30, 40, 50};
    std::vector<double> y, s(taus.size(), 1.0);
    for (double t : taus) y.push_back(0.47 * std::exp(-t / 4.4));
    const auto planted = pipe::fit_decay(taus, y, s);
    o.detail << "planted (0.47, 4.4) -> (" << planted.a << ", " << planted.b << ")";
    o.require(std::abs(planted.a - 0.47) < 1e-6 && std::abs(planted.b - 4.4) < 1e-6, "planted recovery");

    const auto& v = first_markovian_run().volumes;
    const auto fitted = pipe::fit_decay(v);
    double floor = 1e300;
    for (const auto& sd : v.stddev)
        if (sd && *sd > 0) floor = std::min(floor, *sd);
    std::vector<double> sig;
    for (const auto& sd : v.stddev) sig.push_back(sd && *sd > 0 ? *sd : floor);
    const auto [a_o, b_o] = oracle::profile_decay_oracle(v.taus, v.mean, sig);
    o.detail << "; simulation A=" << fitted.a << "+-" << fitted.a_err << " B=" << fitted.b << "+-" << fitted.b_err
             << " us, oracle (" << a_o << ", " << b_o << ")";
    o.require(std::abs(fitted.a - a_o) <= fitted.a_err && std::abs(fitted.b - b_o) <= fitted.b_err,
              "oracle within reported uncertainties");
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"rank recovery", rank_recovery},
        {"contextuality anchors", anchors},
        {"decoherence to classicality", decoherence_to_classicality},
        {"volume monotonicity and non-Markovianity", volumes},
        {"purity bound", purity},
        {"factorization uniqueness", factorization},
        {"polytope engine", polytopes},
        {"see-saw contract", seesaw},
        {"ontological-model soundness", soundness},
        {"decay fit", decay},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
