#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "srpc/data.hpp"
#include "srpc/diagnostics.hpp"
#include "srpc/postprocess.hpp"
#include "srpc/sampler.hpp"

namespace srpc {

nlohmann::json to_json(const Hyperparameters& h);
Hyperparameters hyper_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChainConfig& c);
ChainConfig chain_config_from_json(const nlohmann::json& j);

// Chain directory: samples/<block>.csv (one row per retained draw),
// loglik.csv (one row per iteration) and meta.json.
void write_chain(const ChainOutput& chain, const std::filesystem::path& dir);
ChainOutput read_chain(const std::filesystem::path& dir);

nlohmann::json summary_to_json(const PosteriorSummary& s);
// Inverse of summary_to_json for the scalar fields, assignment and parameter
// blocks (modal patterns and G_mean are not restored).
PosteriorSummary summary_from_json(const nlohmann::json& j);
PosteriorSummary read_summary(const std::filesystem::path& path);
// summary.json and modal_patterns.csv (plus nu_grid.csv for RPC fits).
void write_summary(const PosteriorSummary& s, const std::filesystem::path& dir);
std::string modal_patterns_csv(const PosteriorSummary& s);

nlohmann::json fit_report_to_json(const FitReport& r);
nlohmann::json ppc_report_to_json(const PpcReport& r);

// "SIMILARITY float32 n=<n>\n" followed by n*n little-endian float32 values.
void write_similarity(const SimilarityMatrix& sim, const std::filesystem::path& path);
SimilarityMatrix read_similarity(const std::filesystem::path& path);

// Self-contained SVG heatmaps of the modal pattern grid and the nu grid.
std::string modal_pattern_svg(const PosteriorSummary& s);
std::string nu_grid_svg(const PosteriorSummary& s);

// Deterministic JSON text (sorted keys, one space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);

}  // namespace srpc
