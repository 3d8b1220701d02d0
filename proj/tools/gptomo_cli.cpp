// Command-line front end: one subcommand per pipeline stage plus `run`.

#include "gptomo/io.hpp"
#include "gptomo/pipeline.hpp"
#include "gptomo/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using namespace gptomo;
using io::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageError = 3;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InvalidArgument("not a number: '" + item + "'");
        }
    }
    return out;
}

std::vector<int> parse_ranks(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        std::vector<int> out;
        for (double v : parse_list(text)) out.push_back(static_cast<int>(v));
        return out;
    }
    const int lo = std::stoi(text.substr(0, colon));
    const int hi = std::stoi(text.substr(colon + 1));
    std::vector<int> out;
    for (int r = lo; r <= hi; ++r) out.push_back(r);
    if (out.empty()) throw InvalidArgument("empty rank range " + text);
    return out;
}

struct LoadedTable {
    std::string path;
    synth::FrequencyTable table;
};

// Tables from a file or a directory, ordered by file name.
std::vector<LoadedTable> load_tables(const std::string& input) {
    std::vector<std::string> paths;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input))
            if (e.path().extension() == ".json") paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
    } else {
        paths.push_back(input);
    }
    std::vector<LoadedTable> out;
    for (const auto& p : paths) out.push_back({p, io::table_from_json(io::read_json(p))});
    if (out.empty()) throw InvalidArgument("no tables found in " + input);
    return out;
}

int rep_of(const std::string& path) {
    static const std::regex re(R"(table_r(\d+)_t\d+\.json$)");
    std::smatch m;
    const std::string name = fs::path(path).filename().string();
    return std::regex_search(name, m, re) ? std::stoi(m[1]) : -1;
}

// Stacks the tables of one repetition in waiting-time order.
synth::FrequencyTable stacked_input(const std::string& input, int rep) {
    auto tables = load_tables(input);
    if (tables.size() == 1) return tables.front().table;
    std::vector<synth::FrequencyTable> chosen;
    for (auto& t : tables)
        if (rep_of(t.path) == rep || rep_of(t.path) < 0) chosen.push_back(t.table);
    if (chosen.empty()) throw InvalidArgument("no tables for repetition " + std::to_string(rep));
    std::stable_sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return a.tau_us < b.tau_us; });
    for (std::size_t i = 1; i < chosen.size(); ++i)
        if (chosen[i].tau_us == chosen[i - 1].tau_us)
            throw InvalidArgument("several tables share tau = " + std::to_string(chosen[i].tau_us) + "; pass --rep");
    return fit::stack_tables(chosen);
}

std::vector<double> labels_of(const synth::FrequencyTable& t) {
    std::vector<double> labels;
    if (t.blocks.empty()) return labels;
    for (const auto& b : t.layout())
        for (Eigen::Index i = 0; i < b.rows; ++i) labels.push_back(b.tau_us);
    return labels;
}

std::vector<gpt::GptModel> load_models(const std::vector<std::string>& paths) {
    std::vector<gpt::GptModel> out;
    for (const auto& p : paths) out.push_back(io::model_from_json(io::read_json(p)));
    return out;
}

std::string sibling(const std::string& path, const std::string& suffix) {
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string tau_tag(double tau) { return io::format_double(tau); }

void print_report(const json& r, std::ostream& os) {
    const auto& rank = r.at("rank_selection");
    os << "rank: " << rank.at("selected") << (rank.at("scanned").get<bool>() ? " (scanned)" : " (fixed)") << "\n";
    for (const auto& d : rank.at("diffs"))
        os << "  diff k=" << d.at("rank") << ": " << d.at("mean") << " +- " << d.at("stddev") << " (stderr "
           << d.at("stderr") << ")\n";
    if (!r.at("robustness").is_null()) {
        const auto& rb = r.at("robustness");
        os << "robustness:\n";
        for (std::size_t t = 0; t < rb.at("taus").size(); ++t)
            os << "  tau " << rb.at("taus")[t] << " us: r = " << rb.at("r_mean")[t] << " +- " << rb.at("r_std")[t] << "\n";
        os << "  tau* = " << r.at("tau_star_us") << "\n";
    }
    if (!r.at("volumes").is_null()) {
        const auto& v = r.at("volumes");
        os << "relative volumes:\n";
        for (std::size_t t = 0; t < v.at("taus").size(); ++t)
            os << "  tau " << v.at("taus")[t] << " us: " << v.at("mean")[t] << " +- " << v.at("stddev")[t] << "\n";
    }
    if (!r.at("decay_fit").is_null()) os << "decay fit: " << r.at("decay_fit").dump() << "\n";
    os << "non-Markovian intervals: " << r.at("nonmarkovian_intervals").dump() << "\n";
    os << "purity: " << r.at("purity").dump() << "\n";
    os << "skipped: " << r.at("skipped").dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Theory-independent tomography of a decohering two-level system"};
    app.require_subcommand(1);
    std::function<void()> action;

    // simulate
    auto* sim = app.add_subcommand("simulate", "Sample frequency tables");
    pipe::SimulateConfig sc;
    std::string taus_text = "0,5,10,15,20,30,40,50", bump_text, sim_out;
    int tables = 1;
    std::uint64_t sim_seed = 1;
    sim->add_option("--m", sc.m, "Preparations");
    sim->add_option("--n", sc.n, "Measurements");
    sim->add_option("--shots", sc.shots, "Shots per cell");
    sim->add_option("--taus", taus_text, "Waiting times in us, comma separated");
    sim->add_option("--t1", sc.channel.t1_us, "T1 in us");
    sim->add_option("--t2", sc.channel.t2_us, "T2 in us");
    sim->add_option("--fidelity", sc.channel.readout_fidelity, "Readout fidelity");
    sim->add_option("--tables", tables, "Repetitions per waiting time");
    sim->add_option("--seed", sim_seed, "Master seed");
    sim->add_option("--bump", bump_text, "Coherence revival start,end,amplitude (us, us, 1)");
    sim->add_option("--out", sim_out, "Output directory")->required();
    sim->callback([&] {
        action = [&] {
            sc.taus = parse_list(taus_text);
            if (!bump_text.empty()) {
                const auto b = parse_list(bump_text);
                if (b.size() != 3) throw InvalidArgument("--bump needs start,end,amplitude");
                sc.channel.bump = synth::CouplingBump{b[0], b[1], b[2]};
            }
            if (tables < 1) throw InvalidArgument("--tables must be positive");
            sc.channel.validate();
            const auto preps = synth::fibonacci_directions(sc.m);
            const auto meas = synth::fibonacci_directions(sc.n);
            for (int r = 0; r < tables; ++r)
                for (std::size_t t = 0; t < sc.taus.size(); ++t) {
                    const auto table = synth::sample_frequency_table(
                        preps, meas, sc.taus[t], sc.shots, sc.channel,
                        derive_key(sim_seed, {1, static_cast<std::uint64_t>(r)}), t);
                    io::write_json(sim_out + "/table_r" + std::to_string(r) + "_t" + std::to_string(t) + ".json",
                                   io::to_json(table));
                }
            std::cout << "wrote " << tables * static_cast<int>(sc.taus.size()) << " tables to " << sim_out << "\n";
        };
    });

    // fit
    auto* fitc = app.add_subcommand("fit", "Fit a rank-k table");
    int fit_rank = 4, fit_rep = 0;
    fit::FitOptions fopt;
    std::string fit_in, fit_out;
    fitc->add_option("--rank", fit_rank, "Rank k")->required();
    fitc->add_option("--restarts", fopt.restarts, "Multi-starts");
    fitc->add_option("--tol", fopt.tol, "Relative chi-squared tolerance");
    fitc->add_option("--max-iter", fopt.max_iter, "Iteration cap");
    fitc->add_option("--seed", fopt.seed, "Restart seed");
    fitc->add_option("--rep", fit_rep, "Repetition to stack when the input is a simulate directory");
    fitc->add_option("--input", fit_in, "Table file or directory")->required();
    fitc->add_option("--out", fit_out, "Fit file")->required();
    fitc->callback([&] {
        action = [&] {
            const auto table = stacked_input(fit_in, fit_rep);
            const auto r = fit::fit_rank_k(table, fit_rank, fopt);
            json j = io::to_json(r, labels_of(table));
            j["options"] = io::to_json(fopt);
            j["input_sha256"] = io::sha256_hex(io::to_json(table).dump());
            io::write_json(fit_out, j);
            std::cout << "rank " << fit_rank << " chi2 " << r.chi2 << (r.converged ? "" : " (not converged)") << "\n";
        };
    });

    // rank-scan
    auto* scanc = app.add_subcommand("rank-scan", "Train/test errors over ranks");
    std::string ranks_text = "2:9", scan_in, scan_out;
    double scan_tau = 0.0;
    fit::FitOptions sopt;
    scanc->add_option("--ranks", ranks_text, "Range lo:hi or list");
    scanc->add_option("--tau", scan_tau, "Waiting time of the tables to use");
    scanc->add_option("--restarts", sopt.restarts, "Multi-starts");
    scanc->add_option("--seed", sopt.seed, "Restart seed");
    scanc->add_option("--input", scan_in, "Directory of tables")->required();
    scanc->add_option("--out", scan_out, "Scan file; a CSV is written next to it")->required();
    scanc->callback([&] {
        action = [&] {
            std::vector<synth::FrequencyTable> chosen;
            for (auto& t : load_tables(scan_in))
                if (t.table.tau_us == scan_tau && t.table.blocks.empty()) chosen.push_back(t.table);
            const auto scan = fit::rank_scan(chosen, parse_ranks(ranks_text), sopt);
            json j = io::to_json(scan);
            try {
                j["selected_rank"] = fit::select_rank(scan);
            } catch (const fit::AmbiguousSelection& e) {
                j["selected_rank"] = nullptr;
                j["selection_error"] = e.what();
            }
            io::write_json(scan_out, j);
            io::write_file(sibling(scan_out, ".csv"), io::scan_csv(scan));
            std::cout << "selected rank " << j["selected_rank"] << "\n";
        };
    });

    // factor
    auto* fac = app.add_subcommand("factor", "Factor a fitted table into states and effects");
    int fac_rank = 4;
    std::string fac_in, fac_out, fac_method = "qr";
    fac->add_option("--rank", fac_rank, "Rank k")->required();
    fac->add_option("--method", fac_method, "qr or svd")->check(CLI::IsMember({"qr", "svd"}));
    fac->add_option("--input", fac_in, "Fit file or table file")->required();
    fac->add_option("--out", fac_out, "Model file")->required();
    fac->callback([&] {
        action = [&] {
            const json in = io::read_json(fac_in);
            Matrix d;
            std::vector<double> labels;
            json prov{{"input_sha256", io::sha256_hex(in.dump())}};
            if (in.contains("d_matrix")) {
                d = io::matrix_from_rows(in.at("d_matrix"));
                labels = in.value("tau_labels", std::vector<double>{});
                if (in.contains("options")) prov["fit_options"] = in.at("options");
            } else {
                const auto table = io::table_from_json(in);
                fit::FitOptions o;
                const auto r = fit::fit_rank_k(table, fac_rank, o);
                d = r.d_matrix;
                labels = labels_of(table);
                prov["fit_options"] = io::to_json(o);
            }
            const auto method = fac_method == "svd" ? gpt::FactorMethod::svd : gpt::FactorMethod::qr;
            const auto model = gpt::factorize(d, fac_rank, method, labels);
            io::write_json(fac_out, io::to_json(model, prov));
            std::cout << "model with " << model.num_states() << " states and " << model.num_effects() << " effects\n";
        };
    });

    // dual
    auto* dual = app.add_subcommand("dual", "Consistent state or effect space");
    std::string dual_model, dual_side = "states", dual_out;
    dual->add_option("--model", dual_model, "Model file")->required();
    dual->add_option("--side", dual_side, "states or effects")->check(CLI::IsMember({"states", "effects"}));
    dual->add_option("--out", dual_out, "Polytope file")->required();
    dual->callback([&] {
        action = [&] {
            const auto model = io::model_from_json(io::read_json(dual_model));
            const poly::VPolytope p = dual_side == "states"
                                          ? poly::consistent_dual(model.effects.transpose(), model.unit())
                                          : poly::consistent_dual(model.states);
            io::write_json(dual_out, io::to_json(p));
            std::cout << p.size() << " vertices\n";
        };
    });

    // reparam
    auto* rep = app.add_subcommand("reparam", "Sphere frame from a consistent space, applied to models");
    std::string rep_cons, rep_out;
    std::vector<std::string> rep_models;
    std::uint64_t rep_seed = 0;
    rep->add_option("--consistent", rep_cons, "Consistent-state polytope")->required();
    rep->add_option("--models", rep_models, "Model files");
    rep->add_option("--seed", rep_seed, "Multi-start seed");
    rep->add_option("--out", rep_out, "Output directory")->required();
    rep->callback([&] {
        action = [&] {
            const auto cons = io::vpolytope_from_json(io::read_json(rep_cons));
            if (cons.dimension() < 3) throw InvalidArgument("consistent space must have at least 3 coordinates");
            const Matrix pts = cons.vertices.rightCols(3);
            rp::SphereFitOptions so;
            so.seed = rep_seed;
            const auto frame = rp::fit_sphere_transform(pts, so);
            io::write_json(rep_out + "/frame.json", io::to_json(frame));
            io::write_file(rep_out + "/consistent.csv", io::matrix_csv(rp::apply_transform(frame, pts)));
            for (const auto& path : rep_models) {
                const auto model = io::model_from_json(io::read_json(path));
                const std::string stem = fs::path(path).stem().string();
                const std::vector<double> taus = model.tau_labels.empty() ? std::vector<double>{} : model.taus();
                if (taus.empty()) {
                    io::write_file(rep_out + "/" + stem + ".csv",
                                   io::matrix_csv(rp::apply_transform(frame, model.states.rightCols(3))));
                }
                for (double tau : taus)
                    io::write_file(rep_out + "/" + stem + "_tau" + tau_tag(tau) + ".csv",
                                   io::matrix_csv(rp::apply_transform(frame, model.states_at(tau).rightCols(3))));
            }
            std::cout << "objective " << frame.objective << "\n";
        };
    });

    // contextuality
    auto* con = app.add_subcommand("contextuality", "Robustness of nonclassicality per waiting time");
    std::vector<std::string> con_models;
    std::string con_out;
    con->add_option("--model", con_models, "Model files, one per repetition")->required();
    con->add_option("--out", con_out, "Robustness file")->required();
    con->callback([&] {
        action = [&] {
            const auto models = load_models(con_models);
            const std::string wdir = sibling(con_out, "_witness");
            std::vector<double> taus = models.front().tau_labels.empty() ? std::vector<double>{0.0} : models.front().taus();
            std::vector<std::vector<double>> values(taus.size());
            json witnesses = json::array();
            for (std::size_t m = 0; m < models.size(); ++m) {
                const auto& model = models[m];
                ctx::RobustnessOptions ro;
                ro.effect_facets = ctx::effect_cone_facets(model.effects);
                for (std::size_t t = 0; t < taus.size(); ++t) {
                    const auto problem = model.tau_labels.empty() ? ctx::build_problem(model)
                                                                  : ctx::build_problem(model, taus[t]);
                    const auto res = ctx::robustness(problem, ro);
                    values[t].push_back(res.r);
                    const std::string wpath =
                        wdir + "/model" + std::to_string(m) + "_tau" + tau_tag(taus[t]) + ".json";
                    io::write_json(wpath, io::to_json(res));
                    witnesses.push_back(wpath);
                }
            }
            const auto series = ctx::summarize(taus, values);
            json j = io::to_json(series);
            j["witnesses"] = witnesses;
            io::write_json(con_out, j);
            for (std::size_t t = 0; t < taus.size(); ++t) std::cout << "tau " << taus[t] << ": r = " << series.mean[t] << "\n";
        };
    });

    // volumes
    auto* vol = app.add_subcommand("volumes", "Relative state-space volumes, decay fit and non-Markovian steps");
    std::vector<std::string> vol_models;
    std::string vol_out;
    double vol_threshold = 3.0;
    vol->add_option("--model", vol_models, "Rank-4 model files, one per repetition")->required();
    vol->add_option("--threshold", vol_threshold, "Detection threshold in standard deviations");
    vol->add_option("--out", vol_out, "Volume file; a CSV is written next to it")->required();
    vol->callback([&] {
        action = [&] {
            std::vector<pipe::FramedRepetition> reps;
            for (const auto& model : load_models(vol_models)) {
                const Matrix cons = poly::consistent_dual(model.effects.transpose(), model.unit()).vertices;
                const auto frame = rp::fit_sphere_transform(cons.rightCols(3));
                reps.push_back({gpt::apply_reparametrization(model, rp::induced_map(frame)),
                                rp::apply_transform(frame, cons.rightCols(3))});
            }
            const auto series = pipe::relative_volumes(reps);
            json j{{"volumes", io::to_json(series)}};
            try {
                j["decay_fit"] = io::to_json(pipe::fit_decay(series));
            } catch (const FitFailure& e) {
                j["decay_fit"] = {{"failure", e.what()}};
            }
            json intervals = json::array();
            if (reps.size() > 1)
                for (const auto& iv : pipe::detect_nonmarkovianity(series, vol_threshold))
                    intervals.push_back({{"tau_a_us", iv.tau_a}, {"tau_b_us", iv.tau_b}, {"increase", iv.increase}});
            j["nonmarkovian_intervals"] = intervals;
            io::write_json(vol_out, j);
            io::write_file(sibling(vol_out, ".csv"), io::volumes_csv(series));
            std::cout << j["decay_fit"].dump() << "\n";
        };
    });

    // report
    auto* rpt = app.add_subcommand("report", "Print a run report");
    std::string rpt_in;
    rpt->add_option("--input", rpt_in, "Run directory or report file")->required();
    rpt->callback([&] {
        action = [&] {
            const std::string path = fs::is_directory(rpt_in) ? rpt_in + "/report.json" : rpt_in;
            print_report(io::read_json(path), std::cout);
        };
    });

    // run
    auto* run = app.add_subcommand("run", "Full pipeline");
    std::string run_config, run_out;
    std::optional<std::uint64_t> run_seed;
    run->add_option("--config", run_config, "Config file (defaults apply when omitted)");
    run->add_option("--seed", run_seed, "Overrides the config seed");
    run->add_option("--out", run_out, "Overrides the output directory");
    run->callback([&] {
        action = [&] {
            pipe::PipelineConfig c;
            if (!run_config.empty()) c = io::config_from_json(io::read_json(run_config));
            if (run_seed) c.seed = *run_seed;
            if (!run_out.empty()) c.out_dir = run_out;
            c.validate();
            const auto report = pipe::run_full_pipeline(c);
            print_report(io::to_json(report), std::cout);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    try {
        action();
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const pipe::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kStageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kStageError;
    }
    return 0;
}
