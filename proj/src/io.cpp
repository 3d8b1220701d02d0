#include "gptomo/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace gptomo::io {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(number_or_null(x));
    return out;
}

json optional_json(const std::vector<std::optional<double>>& v) {
    json out = json::array();
    for (const auto& x : v) out.push_back(x ? json(*x) : json(nullptr));
    return out;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw InvalidArgument("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw InvalidArgument("config: unknown key '" + key + "' in " + where);
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

// "2:6" or [2, 3, 4, 5, 6].
std::vector<int> parse_ranks(const json& j) {
    if (j.is_array()) return j.get<std::vector<int>>();
    const std::string s = j.get<std::string>();
    const auto colon = s.find(':');
    if (colon == std::string::npos) return {std::stoi(s)};
    const int lo = std::stoi(s.substr(0, colon));
    const int hi = std::stoi(s.substr(colon + 1));
    if (hi < lo) throw InvalidArgument("config: empty rank range " + s);
    std::vector<int> out;
    for (int r = lo; r <= hi; ++r) out.push_back(r);
    return out;
}

}  // namespace

json matrix_rows(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_or_null(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_rows(const json& rows) {
    if (!rows.is_array()) throw InvalidArgument("matrix must be an array of rows");
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r > 0 ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const json& row = rows.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != c) throw InvalidArgument("matrix rows differ in length");
        for (Eigen::Index j = 0; j < c; ++j) {
            const json& v = row.at(static_cast<std::size_t>(j));
            m(i, j) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
        }
    }
    return m;
}

json to_json(const synth::FrequencyTable& t) {
    json j{{"m", t.rows()}, {"n", t.cols()}, {"shots", t.shots}, {"tau_us", t.tau_us},
           {"seed", t.seed}, {"rows", matrix_rows(t.entries)}};
    if (!t.blocks.empty()) {
        json blocks = json::array();
        for (const auto& b : t.blocks)
            blocks.push_back({{"tau_us", b.tau_us}, {"first_row", b.first_row}, {"rows", b.rows}, {"seed", b.seed}});
        j["blocks"] = blocks;
    }
    return j;
}

synth::FrequencyTable table_from_json(const json& j) {
    try {
        synth::FrequencyTable t;
        t.entries = matrix_from_rows(j.at("rows"));
        t.shots = j.at("shots").get<std::int64_t>();
        t.tau_us = j.value("tau_us", 0.0);
        t.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("m") && j.at("m").get<Eigen::Index>() != t.rows()) throw InvalidArgument("table: m disagrees with rows");
        if (j.contains("n") && j.at("n").get<Eigen::Index>() != t.cols()) throw InvalidArgument("table: n disagrees with rows");
        if (t.shots < 1) throw InvalidArgument("table: shots must be positive");
        if (t.entries.size() == 0 || t.entries.minCoeff() < 0.0 || t.entries.maxCoeff() > 1.0)
            throw InvalidArgument("table: frequencies must lie in [0, 1]");
        if (j.contains("blocks"))
            for (const auto& b : j.at("blocks"))
                t.blocks.push_back(synth::TableBlock{b.at("tau_us").get<double>(), b.at("first_row").get<Eigen::Index>(),
                                                     b.at("rows").get<Eigen::Index>(), b.value("seed", std::uint64_t{0})});
        t.variance = synth::variance_table(t.entries, t.shots);
        return t;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("table: ") + e.what());
    }
}

json to_json(const gpt::GptModel& model, const json& provenance) {
    return json{{"rank", model.rank},
                {"tau_labels", model.tau_labels},
                {"states", matrix_rows(model.states)},
                {"effects", matrix_rows(model.effects.transpose())},
                {"provenance", provenance}};
}

gpt::GptModel model_from_json(const json& j) {
    try {
        gpt::GptModel m;
        m.rank = j.at("rank").get<int>();
        m.tau_labels = j.value("tau_labels", std::vector<double>{});
        m.states = matrix_from_rows(j.at("states"));
        m.effects = matrix_from_rows(j.at("effects")).transpose();
        if (m.states.cols() != m.rank || m.effects.rows() != m.rank) throw InvalidArgument("model: shapes disagree with rank");
        if (!m.tau_labels.empty() && static_cast<Eigen::Index>(m.tau_labels.size()) != m.states.rows())
            throw InvalidArgument("model: one tau label per state is required");
        return m;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("model: ") + e.what());
    }
}

json to_json(const poly::VPolytope& p) {
    return json{{"dimension", p.dimension()}, {"kind", "V"}, {"rows", matrix_rows(p.vertices)}};
}

json to_json(const poly::HPolytope& p) {
    return json{{"dimension", p.dimension()},
                {"kind", "H"},
                {"rows", matrix_rows(p.a)},
                {"offsets", vector_json(std::vector<double>(p.b.data(), p.b.data() + p.b.size()))}};
}

poly::VPolytope vpolytope_from_json(const json& j) {
    try {
        if (j.at("kind").get<std::string>() != "V") throw InvalidArgument("polytope: expected a V-representation");
        poly::VPolytope p{matrix_from_rows(j.at("rows"))};
        if (p.dimension() != j.at("dimension").get<Eigen::Index>()) throw InvalidArgument("polytope: dimension mismatch");
        return p;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("polytope: ") + e.what());
    }
}

json to_json(const fit::FitOptions& o) {
    return json{{"restarts", o.restarts}, {"tol", o.tol},           {"max_iter", o.max_iter},
                {"seed", o.seed},         {"init_noise", o.init_noise}, {"normalized", o.normalized}};
}

json to_json(const fit::FitResult& r, const std::vector<double>& tau_labels) {
    return json{{"rank", r.rank},
                {"chi2", r.chi2},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"restart", r.restart},
                {"tau_labels", tau_labels},
                {"history", vector_json(r.history)},
                {"d_matrix", matrix_rows(r.d_matrix)}};
}

json to_json(const fit::RankScan& scan) {
    json j{{"ranks", scan.ranks}, {"tables", scan.tables}, {"pairs", scan.pair_count()}};
    json train = json::array(), test = json::array(), diffs = json::array(), summary = json::array();
    for (std::size_t r = 0; r < scan.ranks.size(); ++r) {
        train.push_back(vector_json(scan.train_errors[r]));
        test.push_back(matrix_rows(scan.test_errors[r]));
        diffs.push_back(vector_json(scan.test_error_diffs[r]));
        summary.push_back({{"rank", scan.ranks[r]},
                           {"mean_train", scan.mean_train_error(r)},
                           {"mean_test", scan.mean_test_error(r)},
                           {"test_stddev", scan.test_error_stddev(r)}});
    }
    json stats = json::array();
    for (const auto& d : scan.diff_stats())
        stats.push_back({{"rank", d.rank}, {"mean", d.mean}, {"stddev", d.stddev}, {"stderr", d.stderr_}, {"count", d.count}});
    j["train_errors"] = train;
    j["test_errors"] = test;
    j["test_error_diffs"] = diffs;
    j["summary"] = summary;
    j["diff_stats"] = stats;
    return j;
}

json to_json(const ctx::RobustnessResult& r) {
    json j{{"r", r.r},
           {"lp_iterations", r.lp_iterations},
           {"witness", matrix_rows(r.witness)},
           {"state_facets", matrix_rows(r.state_facets)},
           {"effect_facets", matrix_rows(r.effect_facets)}};
    if (r.projection) j["projection"] = matrix_rows(*r.projection);
    if (r.model) {
        j["model"] = {{"epistemic", matrix_rows(r.model->epistemic)},
                      {"response", matrix_rows(r.model->response)},
                      {"ontic_facets", r.model->ontic_facets}};
    }
    return j;
}

json to_json(const ctx::RobustnessSeries& s) {
    json values = json::array();
    for (const auto& v : s.values) values.push_back(vector_json(v));
    return json{{"taus", s.taus}, {"r_mean", vector_json(s.mean)}, {"r_std", optional_json(s.stddev)}, {"values", values}};
}

json to_json(const rp::SphereFit& f) {
    return json{{"sigma", {f.sigma(0), f.sigma(1), f.sigma(2)}},
                {"angles", {f.angles(0), f.angles(1), f.angles(2)}},
                {"mean", {f.mean(0), f.mean(1), f.mean(2)}},
                {"objective", f.objective},
                {"initial_objective", f.initial_objective},
                {"start", f.start}};
}

rp::SphereFit sphere_fit_from_json(const json& j) {
    try {
        rp::SphereFit f;
        for (int i = 0; i < 3; ++i) {
            f.sigma(i) = j.at("sigma").at(static_cast<std::size_t>(i)).get<double>();
            f.angles(i) = j.at("angles").at(static_cast<std::size_t>(i)).get<double>();
            f.mean(i) = j.at("mean").at(static_cast<std::size_t>(i)).get<double>();
        }
        f.objective = j.value("objective", 0.0);
        f.initial_objective = j.value("initial_objective", 0.0);
        f.start = j.value("start", 0);
        return f;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("frame: ") + e.what());
    }
}

json to_json(const pipe::VolumeSeries& s) {
    json values = json::array();
    for (const auto& v : s.values) values.push_back(vector_json(v));
    return json{{"taus", s.taus}, {"mean", vector_json(s.mean)}, {"stddev", optional_json(s.stddev)}, {"values", values}};
}

json to_json(const pipe::DecayFit& f) {
    return json{{"A", f.a},           {"B_us", f.b},         {"A_err", f.a_err},
                {"B_err_us", f.b_err}, {"chi2", f.chi2},      {"dof", f.dof},
                {"covariance", matrix_rows(f.covariance)}, {"residuals", vector_json(f.residuals)}};
}

json to_json(const pipe::RunReport& r) {
    json rank{{"scanned", r.rank.scanned}, {"selected", r.rank.selected}, {"ranks", r.rank.ranks},
              {"mean_train", vector_json(r.rank.mean_train)}, {"mean_test", vector_json(r.rank.mean_test)}};
    json diffs = json::array();
    for (const auto& d : r.rank.diffs)
        diffs.push_back({{"rank", d.rank}, {"mean", d.mean}, {"stddev", d.stddev}, {"stderr", d.stderr_}, {"count", d.count}});
    rank["diffs"] = diffs;

    json j{{"rank_selection", rank}, {"taus", r.taus}};
    j["robustness"] = r.robustness ? to_json(*r.robustness) : json(nullptr);
    j["tau_star_us"] = r.tau_star ? json(*r.tau_star) : json(nullptr);
    j["volumes"] = r.volumes ? to_json(*r.volumes) : json(nullptr);
    if (r.decay) j["decay_fit"] = to_json(*r.decay);
    else if (r.decay_failure) j["decay_fit"] = {{"failure", *r.decay_failure}};
    else j["decay_fit"] = nullptr;
    json intervals = json::array();
    for (const auto& iv : r.intervals)
        intervals.push_back({{"tau_a_us", iv.tau_a}, {"tau_b_us", iv.tau_b}, {"increase", iv.increase},
                             {"combined_sigma", iv.combined_sigma}});
    j["nonmarkovian_intervals"] = intervals;
    j["purity"] = {{"max_distinguishability", r.max_distinguishability}, {"lower_bound", r.purity_bound}};
    j["skipped"] = r.skipped;
    j["provenance"] = {{"seed", r.seed}, {"config_sha256", r.config_hash}, {"artifacts", r.artifact_hashes}};
    return j;
}

json to_json(const pipe::PipelineConfig& c) {
    json sim{{"m", c.simulate.m},
             {"n", c.simulate.n},
             {"shots", c.simulate.shots},
             {"taus", c.simulate.taus},
             {"t1", c.simulate.channel.t1_us},
             {"t2", c.simulate.channel.t2_us},
             {"fidelity", c.simulate.channel.readout_fidelity}};
    if (c.simulate.channel.bump) {
        const auto& b = *c.simulate.channel.bump;
        sim["bump"] = {{"start", b.start_us}, {"end", b.end_us}, {"amplitude", b.amplitude}};
    } else {
        sim["bump"] = nullptr;
    }
    json fit{{"ranks", c.fit.ranks},
             {"scan_tables", c.fit.scan_tables},
             {"restarts", c.fit.options.restarts},
             {"tol", c.fit.options.tol},
             {"max_iter", c.fit.options.max_iter},
             {"normalized", c.fit.options.normalized}};
    return json{{"seed", c.seed},
                {"simulate", sim},
                {"fit", fit},
                {"contextuality", {{"enabled", c.contextuality.enabled}, {"repetitions", c.contextuality.repetitions}}},
                {"volumes", {{"enabled", c.volumes.enabled}, {"threshold_sigmas", c.volumes.threshold_sigmas}}},
                {"out_dir", c.out_dir}};
}

pipe::PipelineConfig config_from_json(const json& j) {
    pipe::PipelineConfig c;
    try {
        reject_unknown(j, {"seed", "simulate", "fit", "contextuality", "volumes", "out_dir"}, "config");
        read_opt(j, "seed", c.seed);
        read_opt(j, "out_dir", c.out_dir);
        if (j.contains("simulate")) {
            const json& s = j.at("simulate");
            reject_unknown(s, {"m", "n", "shots", "taus", "t1", "t2", "fidelity", "bump"}, "simulate");
            read_opt(s, "m", c.simulate.m);
            read_opt(s, "n", c.simulate.n);
            read_opt(s, "shots", c.simulate.shots);
            read_opt(s, "taus", c.simulate.taus);
            read_opt(s, "t1", c.simulate.channel.t1_us);
            read_opt(s, "t2", c.simulate.channel.t2_us);
            read_opt(s, "fidelity", c.simulate.channel.readout_fidelity);
            if (s.contains("bump") && !s.at("bump").is_null()) {
                const json& b = s.at("bump");
                reject_unknown(b, {"start", "end", "amplitude"}, "simulate.bump");
                synth::CouplingBump bump;
                read_opt(b, "start", bump.start_us);
                read_opt(b, "end", bump.end_us);
                read_opt(b, "amplitude", bump.amplitude);
                c.simulate.channel.bump = bump;
            }
        }
        if (j.contains("fit")) {
            const json& f = j.at("fit");
            reject_unknown(f, {"ranks", "scan_tables", "restarts", "tol", "max_iter", "normalized"}, "fit");
            if (f.contains("ranks")) c.fit.ranks = parse_ranks(f.at("ranks"));
            read_opt(f, "scan_tables", c.fit.scan_tables);
            read_opt(f, "restarts", c.fit.options.restarts);
            read_opt(f, "tol", c.fit.options.tol);
            read_opt(f, "max_iter", c.fit.options.max_iter);
            read_opt(f, "normalized", c.fit.options.normalized);
        }
        if (j.contains("contextuality")) {
            const json& x = j.at("contextuality");
            reject_unknown(x, {"enabled", "repetitions"}, "contextuality");
            read_opt(x, "enabled", c.contextuality.enabled);
            read_opt(x, "repetitions", c.contextuality.repetitions);
        }
        if (j.contains("volumes")) {
            const json& v = j.at("volumes");
            reject_unknown(v, {"enabled", "threshold_sigmas"}, "volumes");
            read_opt(v, "enabled", c.volumes.enabled);
            read_opt(v, "threshold_sigmas", c.volumes.threshold_sigmas);
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    } catch (const std::logic_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    return c;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw InternalError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_file(const std::string& path, std::string_view bytes) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidArgument("write failed for " + path);
    return sha256_hex(bytes);
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw InvalidArgument(path + ": " + e.what());
    }
}

std::string write_json(const std::string& path, const json& j) { return write_file(path, j.dump(2) + "\n"); }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::optional<double>>>& rows) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ",";
            if (row[c]) out += format_double(*row[c]);
        }
        out += "\n";
    }
    return out;
}

std::string matrix_csv(const Matrix& m) {
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < m.cols(); ++j) header.push_back("c" + std::to_string(j));
    std::vector<std::vector<std::optional<double>>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<std::optional<double>> row;
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.emplace_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return csv(header, rows);
}

std::vector<std::vector<double>> parse_csv(const std::string& text) {
    std::vector<std::vector<double>> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::size_t start = 0;
        for (;;) {
            const std::size_t end = line.find(',', start);
            const std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!cell.empty() && cell != "nan") {
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc()) throw InvalidArgument("bad CSV cell '" + cell + "'");
            }
            row.push_back(v);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::string scan_csv(const fit::RankScan& scan) {
    const auto stats = scan.diff_stats();
    std::vector<std::vector<std::optional<double>>> rows;
    for (std::size_t r = 0; r < scan.ranks.size(); ++r) {
        std::vector<std::optional<double>> row{static_cast<double>(scan.ranks[r]), scan.mean_train_error(r),
                                               scan.mean_test_error(r), scan.test_error_stddev(r)};
        std::optional<double> mean, sd, se;
        for (const auto& d : stats)
            if (d.rank == scan.ranks[r]) {
                mean = d.mean;
                sd = d.stddev;
                se = d.stderr_;
            }
        row.push_back(mean);
        row.push_back(sd);
        row.push_back(se);
        rows.push_back(std::move(row));
    }
    return csv({"rank", "mean_train", "mean_test", "test_stddev", "diff_mean", "diff_stddev", "diff_stderr"}, rows);
}

std::string robustness_csv(const ctx::RobustnessSeries& s) {
    std::vector<std::vector<std::optional<double>>> rows;
    for (std::size_t t = 0; t < s.taus.size(); ++t) rows.push_back({s.taus[t], s.mean[t], s.stddev[t]});
    return csv({"tau_us", "r_mean", "r_std"}, rows);
}

std::string volumes_csv(const pipe::VolumeSeries& s) {
    std::vector<std::vector<std::optional<double>>> rows;
    for (std::size_t t = 0; t < s.taus.size(); ++t) rows.push_back({s.taus[t], s.mean[t], s.stddev[t]});
    return csv({"tau_us", "relative_volume_mean", "relative_volume_std"}, rows);
}

}  // namespace gptomo::io
