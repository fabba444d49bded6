// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "parteq/errors.hpp"

namespace parteq {

namespace {

int resolve_threads(int requested) {
#ifdef _OPENMP
  return requested > 0 ? requested : omp_get_max_threads();
#else
  (void)requested;
  return 1;
#endif
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

GroupedGaussian simulate_gaussian(int k, int n_per_group,
                                  const std::vector<double>& means, Rng& rng) {
  GroupedGaussian out;
  out.n.assign(k, n_per_group);
  out.mean.resize(k);
  out.sse.resize(k);
  for (int j = 0; j < k; ++j) {
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n_per_group; ++i) {
      const double y = means[j] + rng.normal();
      sum += y;
      sumsq += y * y;
    }
    out.mean[j] = sum / n_per_group;
    out.sse[j] = std::max(0.0, sumsq - sum * sum / n_per_group);
  }
  return out;
}

void score(const ClaimSet& claims, const Partition& truth,
           MethodOutcome* out) {
  const int k = claims.k;
  out->claimed_different = 0;
  out->false_differences = 0;
  out->missed_differences = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const bool claimed = claims.claims(i, j);
      const bool truly_equal = truth.same_block(i, j);
      out->claimed_different += claimed;
      out->false_differences += claimed && truly_equal;
      out->missed_differences += !claimed && !truly_equal;
    }
  out->transitive = claims_transitive(claims);
}

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

int ClaimSet::count() const {
  int c = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) c += claims(i, j);
  return c;
}

ClaimSet claims_from_pairwise(const std::vector<double>& pairwise_equal,
                              int k, double threshold) {
  ClaimSet out;
  out.k = k;
  out.different.assign(std::size_t(k) * k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (1.0 - pairwise_equal[std::size_t(i) * k + j] > threshold) {
        out.different[std::size_t(i) * k + j] = 1;
        out.different[std::size_t(j) * k + i] = 1;
      }
  return out;
}

ClaimSet claims_from_log_bf(const PairwiseBayesFactors& bf, double threshold) {
  ClaimSet out;
  out.k = bf.k;
  out.different.assign(std::size_t(bf.k) * bf.k, 0);
  for (int i = 0; i < bf.k; ++i)
    for (int j = i + 1; j < bf.k; ++j) {
      const double p_equal = 1.0 / (1.0 + std::exp(-bf.at(i, j)));
      if (1.0 - p_equal > threshold) {
        out.different[std::size_t(i) * bf.k + j] = 1;
        out.different[std::size_t(j) * bf.k + i] = 1;
      }
    }
  return out;
}

bool claims_transitive(const ClaimSet& claims) {
  // the claims fit a partition iff the transitive closure of "claimed
  // equal" never connects a claimed-different pair
  Dsu dsu(claims.k);
  for (int i = 0; i < claims.k; ++i)
    for (int j = i + 1; j < claims.k; ++j)
      if (!claims.claims(i, j)) dsu.unite(i, j);
  for (int i = 0; i < claims.k; ++i)
    for (int j = i + 1; j < claims.k; ++j)
      if (claims.claims(i, j) && dsu.find(i) == dsu.find(j)) return false;
  return true;
}

std::vector<double> step_means(const Partition& p, double effect_step) {
  const int k = p.k_groups();
  std::vector<double> means(k);
  double total = 0.0;
  for (int j = 0; j < k; ++j) {
    means[j] = effect_step * p.label(j);
    total += means[j];
  }
  for (double& m : means) m -= total / k;
  return means;
}

TruthSpec make_truth(int k, double equality_fraction, Rng& rng,
                     double effect_step) {
  if (k < 1) throw data_error("make_truth: k must be >= 1");
  if (equality_fraction < 0.0 || equality_fraction > 1.0)
    throw data_error("make_truth: equality fraction outside [0,1]");
  int d = k - int(std::llround(equality_fraction * (k - 1)));
  d = std::clamp(d, 1, k);
  TruthSpec out;
  out.requested_blocks = d;
  out.partition = sample_uniform_partition_with_blocks(k, d, rng);
  out.group_means = step_means(out.partition, effect_step);
  return out;
}

const MethodSummary& StudyResult::summary_for(const std::string& method) const {
  for (const auto& s : summaries)
    if (s.method == method) return s;
  throw data_error("study: no summary for method " + method);
}

StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.k < 2) throw data_error("study: k must be >= 2");
  if (cfg.reps < 1) throw data_error("study: reps must be >= 1");
  if (cfg.n_per_group < 2) throw data_error("study: n_per_group must be >= 2");
  if (cfg.decision_threshold <= 0.0 || cfg.decision_threshold >= 1.0)
    throw data_error("study: decision threshold outside (0,1)");
  if (cfg.priors.empty()) throw data_error("study: no priors given");
  if (wants_counts(cfg.model))
    throw data_error("study: simulated data is gaussian; counts models "
                     "are unsupported");

  StudyResult result;
  result.config = cfg;
  Rng truth_rng = Rng::stream(cfg.seed, 0);
  result.truth =
      make_truth(cfg.k, cfg.equality_fraction, truth_rng, cfg.effect_step);

  const int k = cfg.k;
  const int n_priors = int(cfg.priors.size());
  int n_diff_pairs = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      n_diff_pairs += !result.truth.partition.same_block(i, j);

  const bool exact =
      k <= std::min(cfg.exact_max_groups, kMaxEnumerationGroups);
  std::vector<Partition> partitions;
  std::vector<std::vector<double>> log_prior(n_priors);
  if (exact) {
    partitions = all_partitions(k);
    for (int q = 0; q < n_priors; ++q) {
      log_prior[q].reserve(partitions.size());
      for (const auto& p : partitions)
        log_prior[q].push_back(log_pmf(cfg.priors[q], p));
    }
  }

  std::vector<std::string> methods;
  for (const auto& pr : cfg.priors) methods.push_back(pr.label());
  methods.push_back("pairwise_bf");

  result.reps.assign(cfg.reps, RepRecord{});
  const int nt = resolve_threads(cfg.threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
#endif
  for (int r = 0; r < cfg.reps; ++r) {
    RepRecord rec;
    rec.rep = r;
    rec.seed = Rng::stream_seed(cfg.seed, std::uint64_t(r) + 1);
    try {
      Rng rng = Rng::stream(cfg.seed, std::uint64_t(r) + 1);
      const GroupedGaussian gauss =
          simulate_gaussian(k, cfg.n_per_group, result.truth.group_means, rng);
      const GroupedData data = gauss;

      if (exact) {
        const double t0 = now_ms();
        std::vector<double> lm(partitions.size());
        for (std::size_t i = 0; i < partitions.size(); ++i)
          lm[i] = log_marginal(cfg.model, partitions[i], data);
        const double shared = (now_ms() - t0) / n_priors;
        std::vector<double> logw(partitions.size());
        std::vector<double> pairwise(std::size_t(k) * k);
        for (int q = 0; q < n_priors; ++q) {
          const double t1 = now_ms();
          for (std::size_t i = 0; i < partitions.size(); ++i)
            logw[i] = log_prior[q][i] + lm[i];
          const double logz = log_sum_exp(logw);
          std::fill(pairwise.begin(), pairwise.end(), 0.0);
          for (std::size_t i = 0; i < partitions.size(); ++i) {
            const double prob = std::exp(logw[i] - logz);
            for (int a = 0; a < k; ++a)
              for (int b = a + 1; b < k; ++b)
                if (partitions[i].same_block(a, b))
                  pairwise[std::size_t(a) * k + b] += prob;
          }
          for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b)
              pairwise[std::size_t(b) * k + a] = pairwise[std::size_t(a) * k + b];
          MethodOutcome mo;
          mo.method = methods[q];
          score(claims_from_pairwise(pairwise, k, cfg.decision_threshold),
                result.truth.partition, &mo);
          mo.runtime_ms = shared + (now_ms() - t1);
          rec.outcomes.push_back(std::move(mo));
        }
      } else {
        for (int q = 0; q < n_priors; ++q) {
          const double t1 = now_ms();
          SamplerConfig sc = cfg.sampler;
          sc.threads = 1;
          sc.seed = Rng::stream_seed(rec.seed, std::uint64_t(q) + 1);
          const PosteriorSummary ps =
              gibbs_run(cfg.priors[q], cfg.model, data, sc);
          MethodOutcome mo;
          mo.method = methods[q];
          score(claims_from_pairwise(ps.pairwise_equal, k,
                                     cfg.decision_threshold),
                result.truth.partition, &mo);
          mo.runtime_ms = now_ms() - t1;
          rec.outcomes.push_back(std::move(mo));
        }
      }

      {
        const double t1 = now_ms();
        const PairwiseBayesFactors bf = pairwise_bayes_factors(cfg.model, data);
        MethodOutcome mo;
        mo.method = methods.back();
        score(claims_from_log_bf(bf, cfg.decision_threshold),
              result.truth.partition, &mo);
        mo.runtime_ms = now_ms() - t1;
        rec.outcomes.push_back(std::move(mo));
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      rec.outcomes.clear();
    }
    result.reps[r] = std::move(rec);
  }

  std::string first_error;
  for (const auto& rec : result.reps) {
    if (rec.failed) {
      ++result.failed_reps;
      if (first_error.empty()) first_error = rec.error;
    }
  }
  const int completed = cfg.reps - result.failed_reps;
  if (completed == 0 ||
      result.failed_reps > cfg.max_failed_fraction * cfg.reps)
    throw numerical_error("study: " + std::to_string(result.failed_reps) +
                          " of " + std::to_string(cfg.reps) +
                          " replications failed; first error: " + first_error);

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary s;
    s.method = methods[m];
    double any_false = 0.0, missed = 0.0, claims = 0.0;
    for (const auto& rec : result.reps) {
      if (rec.failed) continue;
      const auto& mo = rec.outcomes[m];
      any_false += mo.false_differences > 0;
      claims += mo.claimed_different;
      if (n_diff_pairs > 0)
        missed += double(mo.missed_differences) / n_diff_pairs;
    }
    s.fwer = any_false / completed;
    s.false_null_rate = n_diff_pairs > 0 ? missed / completed : 0.0;
    s.mean_claims = claims / completed;
    result.summaries.push_back(std::move(s));
  }
  return result;
}

}  // namespace parteq
