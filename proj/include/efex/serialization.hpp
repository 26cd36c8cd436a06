#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>

#include <json.hpp>

#include "efex/cscg.hpp"
#include "efex/env.hpp"
#include "efex/metrics.hpp"

namespace efex {

using Json = nlohmann::json;

// {n_actions, n_nodes, n_observations, emission, transitions: [[a,z,z',p]...],
//  home, boundary: [[a,z]...], layout?}
Json env_to_json(const GroundTruthGraph& graph);
GroundTruthGraph env_from_json(const Json& j);

// {format, n_actions, clones_per_obs, pseudocount, initial,
//  row_fill: [[a,z,f]...], transitions: [[a,z,z',p]...]}. Each row is `f`
// except for the listed entries.
Json model_to_json(const LearnedModel& model, const CloneAllocation& allocation);
std::pair<LearnedModel, CloneAllocation> model_from_json(const Json& j);

// Sparse [[a,z,z',c]...] listing of nonzero counts.
Json counts_to_json(const CountTensor& counts);

// Directed multigraph of transitions above `threshold`, one edge per action.
std::string model_to_dot(const LearnedModel& model, const CloneAllocation& allocation, double threshold = 0.05);

// Columns step,ell,ell_se,wcov,prec,prec_se,seed,policy.
void write_trace_csv(std::ostream& out, const MetricTrace& trace);
MetricTrace read_trace_csv(std::istream& in);

// Shortest text that parses back to the same double.
std::string format_double(double x);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over `path`.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace efex
