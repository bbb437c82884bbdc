// File formats: numeric CSV for observations and noise, JSON for priors and
// evaluation reports, CSV for traces, posterior summaries and curves. Every
// double is written with 17 significant digits.
#pragma once

#include "ebmnm/core.hpp"
#include "ebmnm/posterior.hpp"
#include "ebmnm/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace ebmnm::io {

namespace fs = std::filesystem;

std::string format_double(double v);

/// Plain numeric CSV, one matrix row per line. A leading non-numeric header
/// line is skipped.
Matrix read_matrix_csv(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Matrix& m);

/// Shared noise is an R x R block; per-observation noise is n stacked R x R
/// blocks (n*R rows).
Noise read_noise_csv(const fs::path& path, Eigen::Index n, Eigen::Index R);
void write_noise_csv(const fs::path& path, const Noise& noise);

Dataset read_dataset(const fs::path& x_path, const fs::path& noise_path);

/// {"K", "R", "pi", "s", "U": [[row, ...], ...], "constraints": [{"kind", "base"?}]}
nlohmann::json prior_to_json(const MixturePrior& m);
MixturePrior prior_from_json(const nlohmann::json& j);
std::string serialize_prior(const MixturePrior& m);
/// MalformedInput on parse failure, InvariantViolation on invalid contents.
MixturePrior deserialize_prior(std::string_view text);

MixturePrior read_prior(const fs::path& path);
void write_prior(const fs::path& path, const MixturePrior& m);

/// Columns: phase, iteration, objective, seconds.
void write_trace_csv(const fs::path& path, const FitTrace& trace);

/// Columns: observation, coordinate, x, posterior_mean, posterior_sd, lfsr.
void write_summary_csv(const fs::path& path, const Dataset& d, const PosteriorSummary& s);

nlohmann::json report_to_json(const EvalReport& rep);
/// Columns: threshold, power, fsr, significant.
void write_curve_csv(const fs::path& path, const std::vector<CurvePoint>& curve);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

}  // namespace ebmnm::io
