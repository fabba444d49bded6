// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "parteq/models.hpp"
#include "parteq/numeric.hpp"
#include "parteq/priors.hpp"

namespace parteq {

struct SamplerConfig {
  int iterations = 12000;
  int burnin = 2000;
  int chains = 4;
  int thin = 1;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = runtime default
  int max_param_draws = 10000;
  bool collect_draws = false;
};

struct ExactConfig {
  int max_groups = kMaxEnumerationGroups;
  int threads = 0;
  std::uint64_t seed = 1;
  int param_draws = 0;
  int top_partitions = 4096;  // 0 keeps the full enumeration in memory
};

struct ChainDiagnostics {
  double ess_logpost = 0.0;
  double ess_blocks = 0.0;
};

struct Diagnostics {
  std::vector<ChainDiagnostics> per_chain;
  double rhat_logpost = kNaN;
};

struct PartitionProb {
  Partition partition;
  double prob = 0.0;
};

struct PosteriorSummary {
  int k = 0;
  std::string method;  // "exact" or "gibbs"
  std::vector<PartitionProb> top;  // prob desc, ties in partition order
  bool top_truncated = false;
  std::vector<double> pairwise_equal;  // k*k row-major, diagonal 1
  std::vector<double> size_probs;      // index d-1
  std::vector<double> group_means;     // model-averaged; empty for flat
  std::vector<std::vector<double>> param_draws;
  Diagnostics diagnostics;
  std::vector<std::uint64_t> chain_seeds;
  double log_normalizer = kNaN;  // exact method only

  double prob_equal(int i, int j) const {
    return pairwise_equal[std::size_t(i) * k + j];
  }
  double prob_of(const Partition& p) const;  // 0 when absent from top
};

// Full-enumeration posterior; throws capacity_error past max_groups and
// points at gibbs_run.
PosteriorSummary exact_posterior(const PriorSpec& prior,
                                 const ModelSpec& model,
                                 const GroupedData& data,
                                 const ExactConfig& cfg = {});

struct ChainResult {
  std::uint64_t seed = 0;
  long long kept = 0;
  std::vector<std::pair<Partition, long long>> counts;
  std::vector<double> trace_logpost;
  std::vector<double> trace_blocks;
  std::vector<std::vector<double>> draws;
};

// Collapsed Gibbs over membership vectors: each site resampled against all K
// candidate labels under pmf-over-representations times marginal likelihood.
PosteriorSummary gibbs_run(const PriorSpec& prior, const ModelSpec& model,
                           const GroupedData& data,
                           const SamplerConfig& cfg = {});

PosteriorSummary summarize(const std::vector<ChainResult>& chains, int k,
                           const ModelSpec& model, const GroupedData& data);

// The sampler's per-site candidate log weights (additive constant arbitrary),
// exposed so tests can check the incremental fast path against direct
// log_pmf_membership + log_marginal evaluation.
std::vector<double> gibbs_site_log_weights(const PriorSpec& prior,
                                           const ModelSpec& model,
                                           const GroupedData& data,
                                           const std::vector<int>& labels,
                                           int site);

// Effective sample size via the initial monotone positive-sequence
// estimator on a scalar trace; capped at the trace length.
double ess_initial_monotone(std::span<const double> trace);

// Split-chain potential scale reduction of a scalar trace.
double split_rhat(const std::vector<std::vector<double>>& traces);

}  // namespace parteq
