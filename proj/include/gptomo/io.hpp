#pragma once

// Structured-text files (JSON), CSV series and content hashes.

#include "gptomo/gptmodel.hpp"
#include "gptomo/nonclassicality.hpp"
#include "gptomo/pipeline.hpp"
#include "gptomo/polytope.hpp"
#include "gptomo/synthdata.hpp"
#include "gptomo/tomofit.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace gptomo::io {

using nlohmann::json;

json matrix_rows(const Matrix& m);
Matrix matrix_from_rows(const json& rows);

/// {m, n, shots, tau_us, seed, rows[, blocks]}; the variance is recomputed on load.
json to_json(const synth::FrequencyTable& table);
synth::FrequencyTable table_from_json(const json& j);

/// {rank, tau_labels, states (rows), effects (columns), provenance}.
json to_json(const gpt::GptModel& model, const json& provenance = json::object());
gpt::GptModel model_from_json(const json& j);

/// {dimension, kind: "V", rows} and {dimension, kind: "H", rows, offsets}.
json to_json(const poly::VPolytope& p);
json to_json(const poly::HPolytope& p);
poly::VPolytope vpolytope_from_json(const json& j);

json to_json(const fit::FitResult& r, const std::vector<double>& tau_labels = {});
json to_json(const fit::FitOptions& o);
json to_json(const fit::RankScan& scan);
json to_json(const ctx::RobustnessResult& r);
json to_json(const ctx::RobustnessSeries& s);
json to_json(const rp::SphereFit& f);
rp::SphereFit sphere_fit_from_json(const json& j);
json to_json(const pipe::VolumeSeries& s);
json to_json(const pipe::DecayFit& f);
json to_json(const pipe::RunReport& r);

/// Sections {seed, simulate, fit, contextuality, volumes, out_dir}; unknown keys are rejected.
json to_json(const pipe::PipelineConfig& c);
pipe::PipelineConfig config_from_json(const json& j);

std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::string& path);
/// Writes the bytes, creating parent directories; returns their SHA-256.
std::string write_file(const std::string& path, std::string_view bytes);
json read_json(const std::string& path);
/// Pretty-printed JSON with a trailing newline; returns the SHA-256.
std::string write_json(const std::string& path, const json& j);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Header line plus one line per row; missing values are written as empty cells.
std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::optional<double>>>& rows);
std::string matrix_csv(const Matrix& m);
/// Parses numeric CSV with one header line; empty cells become NaN.
std::vector<std::vector<double>> parse_csv(const std::string& text);

std::string scan_csv(const fit::RankScan& scan);
std::string robustness_csv(const ctx::RobustnessSeries& s);
std::string volumes_csv(const pipe::VolumeSeries& s);

}  // namespace gptomo::io
