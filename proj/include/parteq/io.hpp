// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "parteq/inference.hpp"
#include "parteq/study.hpp"

namespace parteq {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// CSV schemas, selected by header row:
//   group,successes,trials   -> GroupedCounts
//   group,n,mean,sd          -> GroupedGaussian from summaries
//   group,value              -> GroupedGaussian from raw observations
// Parse errors name the line. Groups keep first-appearance order.
GroupedData read_grouped_csv(const std::string& path);
GroupedData parse_grouped_csv(std::istream& in, const std::string& name);

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Posterior payload: { k, prior, model, method, top_partitions, size_probs,
// pairwise_equal, group_means, diagnostics, seeds, ... }. Probabilities
// below 1e-12 are clamped to zero and flagged.
Json result_json(const PosteriorSummary& summary, const std::string& prior,
                 const std::string& model);

Json study_summary_json(const StudyResult& result);
// One row per (rep, method) with claim counts, errors and runtime.
std::string study_csv(const StudyResult& result);

std::string dump_json(const Json& j);  // 2-space indent, trailing newline

std::string iso8601_utc_now();

Json make_manifest(const std::vector<std::string>& argv, std::uint64_t seed,
                   const Json& config_echo,
                   const std::vector<std::pair<std::string, std::string>>&
                       input_digests,
                   const std::string& output_path,
                   const std::string& output_digest,
                   const std::string& started_utc,
                   const std::string& finished_utc);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace parteq
