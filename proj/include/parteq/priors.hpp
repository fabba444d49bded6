// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <vector>

#include "parteq/partition.hpp"
#include "parteq/rng.hpp"

namespace parteq {

enum class PriorKind { kUniform, kBetaBinomial, kDirichletProcess };

// uniform | beta_binomial(a, b) | dirichlet_process(alpha or symmetric).
// Symmetric mode solves alpha so the null and full partitions get equal mass.
struct PriorSpec {
  PriorKind kind = PriorKind::kUniform;
  double a = 1.0;
  double b = 1.0;
  double alpha = 1.0;
  bool dp_symmetric = false;

  static PriorSpec Uniform();
  static PriorSpec BetaBinomial(double a, double b);
  static PriorSpec DirichletProcess(double alpha);
  static PriorSpec DirichletProcessSymmetric();

  std::string label() const;  // round-trips through parse_prior
};

// Mini-grammar: uniform | bb:A,B | bb:A,k | bb:A,k2 | dp:A | dp:symmetric
// ("k" expands to K, "k2" to K*(K-1)/2). Throws data_error on bad input.
PriorSpec parse_prior(const std::string& text, int k);

// Comma-separated list of the above (the bb:A,B commas are handled).
std::vector<PriorSpec> parse_prior_list(const std::string& text, int k);

// Resolves the DP concentration, solving the symmetric target when set.
double dp_alpha_for(const PriorSpec& prior, int k);

double log_pmf(const PriorSpec& prior, const Partition& p);
double log_pmf_membership(const PriorSpec& prior, const std::vector<int>& labels);

// Distribution of the block count d; vector index d-1. The DP case sums over
// the enumeration, so it inherits the k <= 12 cap.
double log_pmf_size(const PriorSpec& prior, int d, int k);
std::vector<double> size_log_pmf(const PriorSpec& prior, int k);

// Probability that the (j+1)-th element opens a new block given the first j
// elements occupy b blocks (1 <= b <= j < k). Companion old-block rule:
// proportional to block sizes for DP, uniform over blocks otherwise.
double prediction_new_prob(const PriorSpec& prior, int k, int j, int b);

Partition sample_partition(const PriorSpec& prior, int k, Rng& rng);

// Closed forms from the elicitation table.
double log_null_prob(const PriorSpec& prior, int k);
double log_full_prob(const PriorSpec& prior, int k);

enum class ElicitTarget { kNullProb, kFullProb, kNullFullRatio };

// Solves for DP alpha, or for BB beta with alpha held at fixed_a, by monotone
// bisection on a log-spaced bracket [1e-8, 1e8] to |f - value| <= 1e-10.
// Unattainable targets raise numerical_error.
PriorSpec elicit(PriorKind kind, int k, ElicitTarget target, double value,
                 double fixed_a = 1.0);

struct MonotonicityReport {
  bool nonincreasing = false;       // pmf never rises as d grows
  bool strictly_decreasing = false; // pmf strictly falls as d grows
};
// Exhaustive check over the enumeration; k <= 10.
MonotonicityReport partition_monotonicity(const PriorSpec& prior, int k);

// True when log_pmf is a function of the block count alone (uniform, BB).
bool pmf_depends_only_on_blockcount(const PriorSpec& prior);

}  // namespace parteq
