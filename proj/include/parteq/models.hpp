// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "parteq/partition.hpp"
#include "parteq/rng.hpp"

namespace parteq {

struct GroupedCounts {
  std::vector<long long> successes;
  std::vector<long long> trials;
  std::vector<std::string> names;  // optional, parallel to groups
  int k_groups() const { return static_cast<int>(trials.size()); }
};

struct GroupedGaussian {
  std::vector<long long> n;
  std::vector<double> mean;
  std::vector<double> sse;  // within-group sum of squared deviations
  std::vector<std::string> names;
  int k_groups() const { return static_cast<int>(n.size()); }
};

using GroupedData = std::variant<GroupedCounts, GroupedGaussian>;

int k_groups(const GroupedData& data);
void validate(const GroupedCounts& data);
void validate(const GroupedGaussian& data);
void validate(const GroupedData& data);
GroupedData restrict_to_pair(const GroupedData& data, int i, int j);

// Groups in a block share one parameter drawn from the base prior.
struct BinomialBetaModel {
  double a = 1.0, b = 1.0;
};
struct NormalKnownVarModel {
  double sigma2 = 1.0, m0 = 0.0, v0 = 1.0;
};
struct NormalNigModel {
  double m0 = 0.0, kappa0 = 1.0, a0 = 1.0, b0 = 1.0;
};
// One-way layout: flat priors on the grand mean and log sigma, g-prior
// N(0, g sigma^2 I) on standardized block effects in the centered
// block-indicator column space, g ~ IG(1/2, r^2/2) integrated by adaptive
// Simpson quadrature on u = g/(1+g).
struct JzsAnovaModel {
  double r = 1.0;
  double tol = 1e-8;
  int max_panels = 1 << 20;
};
// Constant likelihood; posteriors reduce to the prior. Diagnostic plug-in.
struct FlatModel {};

using ModelSpec = std::variant<BinomialBetaModel, NormalKnownVarModel,
                               NormalNigModel, JzsAnovaModel, FlatModel>;

std::string model_label(const ModelSpec& model);
// binom[:A,B] | normal[:S2,M0,V0] | nig[:M0,K0,A0,B0] | jzs[:R] | flat
// (long names binomial_beta, normal_known_var, normal_nig, jzs_anova accepted)
ModelSpec parse_model(const std::string& text);
bool wants_counts(const ModelSpec& model);

// Pooled sufficient statistics of one block; O(1) add/remove of a group.
struct BlockStats {
  int groups = 0;
  long long successes = 0, trials = 0;
  double log_choose = 0.0;
  long long n = 0;
  double sum = 0.0;
  double raw_ss = 0.0;  // sum over members of sse_j + n_j * mean_j^2

  void add(const GroupedCounts& d, int j);
  void remove(const GroupedCounts& d, int j);
  void add(const GroupedGaussian& d, int j);
  void remove(const GroupedGaussian& d, int j);
  double pooled_mean() const { return sum / double(n); }
  double pooled_sse() const;
};

// log of the block evidence under the model's base prior; 0 for an empty
// block. Not defined for jzs (its evidence is not block-separable).
double block_log_marginal(const ModelSpec& model, const BlockStats& stats);

double log_marginal(const ModelSpec& model, const Partition& p,
                    const GroupedData& data);

double jzs_log_marginal(const Partition& p, const GroupedGaussian& data,
                        const JzsAnovaModel& model);
// Balanced-design reduction to sufficient statistics (common block size
// block_m), exposed for oracle tests.
double jzs_log_marginal_moments(long long n_total, int d, double tss,
                                double ssb, double block_m, double r,
                                double tol, int max_panels);

struct PairwiseBayesFactors {
  int k = 0;
  std::vector<double> log_bf_equal;  // row-major k*k, log BF(equal vs not)
  bool diagonal_undefined = true;    // diagonal stored as 0
  double at(int i, int j) const { return log_bf_equal[i * k + j]; }
};
PairwiseBayesFactors pairwise_bayes_factors(const ModelSpec& model,
                                            const GroupedData& data);

// One joint draw of the per-group parameter vector given the partition.
// Empty for FlatModel (no parameters).
std::vector<double> draw_group_parameters(const ModelSpec& model,
                                          const Partition& p,
                                          const GroupedData& data, Rng& rng);

// Exact posterior mean of each group's parameter given the partition
// (quadrature for jzs). Empty for FlatModel.
std::vector<double> group_posterior_means(const ModelSpec& model,
                                          const Partition& p,
                                          const GroupedData& data);

}  // namespace parteq
