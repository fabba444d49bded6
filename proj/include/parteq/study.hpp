// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "parteq/inference.hpp"

namespace parteq {

struct TruthSpec {
  Partition partition;
  std::vector<double> group_means;  // centered over groups
  int requested_blocks = 0;         // fraction rounded to a block count
};

// Raw block means step by effect_step in order of each block's smallest
// member; the vector is then centered so the group means sum to zero.
std::vector<double> step_means(const Partition& p, double effect_step = 0.20);

// equality_fraction f maps to d = k - round(f * (k - 1)) blocks; the
// partition is uniform among those with d blocks.
TruthSpec make_truth(int k, double equality_fraction, Rng& rng,
                     double effect_step = 0.20);

struct StudyConfig {
  int k = 5;
  int n_per_group = 100;
  int reps = 100;
  double equality_fraction = 0.0;
  double effect_step = 0.20;
  std::vector<PriorSpec> priors;
  ModelSpec model = JzsAnovaModel{};
  double decision_threshold = 0.5;  // claim a difference when P(neq) > this
  std::uint64_t seed = 1;
  int threads = 0;
  int exact_max_groups = 8;  // larger k falls back to the Gibbs sampler
  SamplerConfig sampler{.iterations = 6000, .burnin = 1000, .chains = 2,
                        .thin = 1, .seed = 1, .threads = 1};
  double max_failed_fraction = 0.02;
};

// Pairwise difference claims, stored row-major over group pairs.
struct ClaimSet {
  int k = 0;
  std::vector<std::uint8_t> different;
  bool claims(int i, int j) const { return different[std::size_t(i) * k + j]; }
  int count() const;
};

ClaimSet claims_from_pairwise(const std::vector<double>& pairwise_equal,
                              int k, double threshold);
ClaimSet claims_from_log_bf(const PairwiseBayesFactors& bf, double threshold);
// True when "claimed equal" is an equivalence relation, i.e. some partition
// reproduces the claims exactly.
bool claims_transitive(const ClaimSet& claims);

struct MethodOutcome {
  std::string method;  // prior label, or "pairwise_bf" for the baseline
  int claimed_different = 0;
  int false_differences = 0;   // claims on truly equal pairs
  int missed_differences = 0;  // truly different pairs left unclaimed
  bool transitive = true;
  double runtime_ms = 0.0;
};

struct RepRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<MethodOutcome> outcomes;  // config order, baseline last
};

struct MethodSummary {
  std::string method;
  double fwer = 0.0;  // fraction of reps with >= 1 false difference claim
  double false_null_rate = 0.0;  // mean missed fraction where differences exist
  double mean_claims = 0.0;
};

struct StudyResult {
  StudyConfig config;
  TruthSpec truth;
  std::vector<RepRecord> reps;
  std::vector<MethodSummary> summaries;  // same order as rep outcomes
  int failed_reps = 0;

  const MethodSummary& summary_for(const std::string& method) const;
};

// Seeded desk-scale error study: one truth per run, Gaussian unit-variance
// data per rep, every prior scored against the truth next to the pairwise
// Bayes-factor baseline. Marginal likelihoods are computed once per rep and
// shared across priors on the exact path. Fails when more than
// max_failed_fraction of reps error out.
StudyResult run_study(const StudyConfig& cfg);

}  // namespace parteq
