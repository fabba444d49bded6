// Apache License, Version 2.0, refer to LICENSE.txt
//
// Acceptance gate: ten end-to-end criteria, one pass/fail line each.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>
#include <variant>
#include <vector>

#include "parteq/combinatorics.hpp"
#include "parteq/inference.hpp"
#include "parteq/io.hpp"
#include "parteq/models.hpp"
#include "parteq/partition.hpp"
#include "parteq/priors.hpp"
#include "parteq/rng.hpp"
#include "parteq/study.hpp"

namespace {

using namespace parteq;
using combinatorics::bell;
using combinatorics::r_bell;
using combinatorics::r_stirling2;
using combinatorics::stirling2;

const std::string kData = PARTEQ_DATA_DIR;
const std::string kCli = PARTEQ_CLI_PATH;

struct Check {
  bool ok = true;
  std::string why;
  void require(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// The seven priors every table/normalization criterion ranges over.
std::vector<PriorSpec> standard_priors(int k) {
  return {PriorSpec::Uniform(),
          PriorSpec::BetaBinomial(1.0, 1.0),
          PriorSpec::BetaBinomial(1.0, double(k)),
          PriorSpec::BetaBinomial(1.0, 0.5 * k * (k - 1)),
          PriorSpec::DirichletProcess(0.5),
          PriorSpec::DirichletProcess(1.0),
          PriorSpec::DirichletProcessSymmetric()};
}

double tv_between(const PosteriorSummary& a,
                  const std::vector<Partition>& parts,
                  const std::vector<double>& ref) {
  double tv = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i)
    tv += std::abs(a.prob_of(parts[i]) - ref[i]);
  return 0.5 * tv;
}

// 1. Exact counting tables and their r-restricted generalizations.
void c1_counts(Check& c) {
  c.require(bell(5) == 52, "bell(5) != 52");
  c.require(bell(10) == 115975, "bell(10) != 115975");
  for (int n = 1; n <= 10; ++n)
    for (int k = 0; k <= n; ++k)
      c.require(r_stirling2(n, k, 1) == stirling2(n, k),
                "r_stirling2(n,k,1) != stirling2 at n=" + std::to_string(n) +
                    " k=" + std::to_string(k));
  for (int n = 0; n <= 10; ++n)
    c.require(r_bell(n, 0) == bell(n),
              "r_bell(n,0) != bell at n=" + std::to_string(n));
}

// 2. Every prior pmf sums to one over the full enumeration.
void c2_normalization(Check& c) {
  for (int k = 3; k <= 8; ++k) {
    for (const PriorSpec& prior : standard_priors(k)) {
      double total = 0.0;
      for_each_partition(
          k, [&](const Partition& p) { total += std::exp(log_pmf(prior, p)); });
      c.require(std::abs(total - 1.0) <= 1e-10,
                prior.label() + " at k=" + std::to_string(k) + " sums to " +
                    fmt("%.14f", total));
    }
  }
}

// 3. Element-by-element construction probabilities multiply to the pmf.
void c3_prediction_rule(Check& c) {
  for (int k = 2; k <= 6; ++k) {
    const auto parts = all_partitions(k);
    for (const PriorSpec& prior : standard_priors(k)) {
      const bool size_based = prior.kind == PriorKind::kDirichletProcess;
      for (const Partition& p : parts) {
        std::vector<int> size(std::size_t(k), 0);
        size[0] = 1;
        int blocks = 1;
        double prob = 1.0;
        for (int j = 1; j < k; ++j) {
          const double pnew = prediction_new_prob(prior, k, j, blocks);
          const int lab = p.label(j);
          if (lab == blocks) {
            prob *= pnew;
            ++blocks;
          } else if (size_based) {
            prob *= (1.0 - pnew) * double(size[std::size_t(lab)]) / double(j);
          } else {
            prob *= (1.0 - pnew) / double(blocks);
          }
          ++size[std::size_t(lab)];
        }
        c.require(std::abs(prob - std::exp(log_pmf(prior, p))) <= 1e-10,
                  prior.label() + " k=" + std::to_string(k) + " partition " +
                      p.to_string() + ": product " + fmt("%.14f", prob) +
                      " vs pmf " + fmt("%.14f", std::exp(log_pmf(prior, p))));
      }
    }
  }
}

// 4. Pairwise-calibrated beta-binomial priors sit exactly on the
// monotonicity boundary; the DP crosses it at alpha = 1.
void c4_monotonicity(Check& c) {
  for (int k : {5, 9}) {
    const double k2 = 0.5 * k * (k - 1);
    const auto at = partition_monotonicity(PriorSpec::BetaBinomial(1.0, k2), k);
    c.require(at.nonincreasing,
              "bb(1,k2) not nonincreasing at k=" + std::to_string(k));
    const auto past =
        partition_monotonicity(PriorSpec::BetaBinomial(1.0, k2 + 1.0), k);
    c.require(past.strictly_decreasing,
              "bb(1,k2+1) not strictly decreasing at k=" + std::to_string(k));
  }
  for (double alpha : {0.25, 1.0})
    c.require(
        partition_monotonicity(PriorSpec::DirichletProcess(alpha), 5).nonincreasing,
        "dp(" + fmt("%.2f", alpha) + ") not monotone at k=5");
  for (double alpha : {1.05, 2.2133638394006434})
    c.require(!partition_monotonicity(PriorSpec::DirichletProcess(alpha), 5)
                   .nonincreasing,
              "dp(" + fmt("%.2f", alpha) + ") unexpectedly monotone at k=5");
}

// 5. Symmetric DP concentration at k=5 plus elicitation round trips.
void c5_elicitation(Check& c) {
  const double alpha = dp_alpha_for(PriorSpec::DirichletProcessSymmetric(), 5);
  c.require(std::abs(alpha - 2.213) <= 1e-3,
            "symmetric alpha at k=5 is " + fmt("%.6f", alpha));
  for (int k = 3; k <= 8; ++k) {
    const double a = dp_alpha_for(PriorSpec::DirichletProcessSymmetric(), k);
    const PriorSpec fixed = PriorSpec::DirichletProcess(a);
    c.require(std::abs(log_null_prob(fixed, k) - log_full_prob(fixed, k)) <= 1e-8,
              "symmetric solve off at k=" + std::to_string(k));
  }
  for (double target : {0.2, 0.5, 0.9}) {
    for (PriorKind kind :
         {PriorKind::kDirichletProcess, PriorKind::kBetaBinomial}) {
      const PriorSpec s = elicit(kind, 5, ElicitTarget::kNullProb, target);
      c.require(std::abs(std::exp(log_null_prob(s, 5)) - target) <= 1e-8,
                s.label() + " null-prob round trip off at " + fmt("%.2f", target));
    }
  }
  for (double target : {0.05, 0.3}) {
    const PriorSpec s =
        elicit(PriorKind::kDirichletProcess, 4, ElicitTarget::kFullProb, target);
    c.require(std::abs(std::exp(log_full_prob(s, 4)) - target) <= 1e-8,
              "full-prob round trip off at " + fmt("%.2f", target));
  }
  for (double target : {0.5, 1.0, 8.0}) {
    for (PriorKind kind :
         {PriorKind::kDirichletProcess, PriorKind::kBetaBinomial}) {
      const PriorSpec s = elicit(kind, 5, ElicitTarget::kNullFullRatio, target);
      const double got = std::exp(log_null_prob(s, 5) - log_full_prob(s, 5));
      c.require(std::abs(got - target) <= 1e-8,
                s.label() + " ratio round trip off at " + fmt("%.2f", target));
    }
  }
}

// 6. Long Gibbs runs agree with exact enumeration on the four-group
// binomial fixture, and recover the prior under a flat likelihood.
void c6_sampler_vs_exact(Check& c) {
  const GroupedData data = read_grouped_csv(kData + "/binom4.csv");
  const auto parts = all_partitions(4);
  const auto priors = standard_priors(4);
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const PriorSpec& prior = priors[i];
    ExactConfig ec;
    ec.top_partitions = 0;
    const PosteriorSummary ex =
        exact_posterior(prior, BinomialBetaModel{}, data, ec);
    std::vector<double> ref(parts.size());
    for (std::size_t j = 0; j < parts.size(); ++j) ref[j] = ex.prob_of(parts[j]);

    SamplerConfig sc;
    sc.iterations = 50000;
    sc.burnin = 2000;
    sc.chains = 2;
    sc.seed = 1000 + i;
    const PosteriorSummary gb = gibbs_run(prior, BinomialBetaModel{}, data, sc);
    const double tv = tv_between(gb, parts, ref);
    c.require(tv <= 0.02, prior.label() + ": sampler-vs-exact tv " +
                              fmt("%.4f", tv) + " > 0.02");

    std::vector<double> pri(parts.size());
    for (std::size_t j = 0; j < parts.size(); ++j)
      pri[j] = std::exp(log_pmf(prior, parts[j]));
    SamplerConfig fc = sc;
    fc.seed = 2000 + i;
    const PosteriorSummary fl = gibbs_run(prior, FlatModel{}, data, fc);
    const double tvf = tv_between(fl, parts, pri);
    c.require(tvf <= 0.02, prior.label() + ": flat prior-recovery tv " +
                               fmt("%.4f", tvf) + " > 0.02");
  }
}

struct TwoGroup {
  long long n1, n2;
  double m1, m2, s1, s2, r;
};

GroupedGaussian gaussian_pair(long long n1, long long n2, double m1, double m2,
                              double s1, double s2) {
  GroupedGaussian g;
  g.n = {n1, n2};
  g.mean = {m1, m2};
  g.sse = {s1, s2};
  g.names = {"g1", "g2"};
  return g;
}

// 7. Two-group evidence: quadrature vs a prior-sampling Monte Carlo
// oracle, plus invariance to group order and measurement scale.
void c7_evidence_oracle(Check& c) {
  const std::vector<TwoGroup> sets = {
      {12, 15, 0.3, 1.1, 10.0, 14.2, 1.0},
      {50, 50, 0.0, 0.5, 45.0, 52.0, 1.0},
      {8, 40, -1.0, -0.8, 6.5, 35.0, 1.0},
      {100, 100, 2.0, 2.02, 98.0, 101.0, 0.7071067811865476},
      {20, 10, 5.0, 3.0, 30.0, 12.0, 1.4142135623730951},
  };
  const Partition full2 = Partition::parse("0,1");
  const Partition null2 = Partition::pooled(2);
  for (std::size_t si = 0; si < sets.size(); ++si) {
    const TwoGroup& t = sets[si];
    const GroupedGaussian g = gaussian_pair(t.n1, t.n2, t.m1, t.m2, t.s1, t.s2);
    const JzsAnovaModel model{t.r, 1e-10, 1 << 20};
    const double lbf =
        jzs_log_marginal(full2, g, model) - jzs_log_marginal(null2, g, model);

    // Oracle: average the two-block likelihood over draws of the effect
    // scale g ~ IG(1/2, r^2/2); the one-block evidence is closed form.
    const double nn = double(t.n1 + t.n2);
    const double grand = (t.n1 * t.m1 + t.n2 * t.m2) / nn;
    const double ssb = t.n1 * (t.m1 - grand) * (t.m1 - grand) +
                       t.n2 * (t.m2 - grand) * (t.m2 - grand);
    const double tss = ssb + t.s1 + t.s2;
    const double lam = 2.0 * double(t.n1) * double(t.n2) / nn;
    const double base = -std::log(2.0) - 0.5 * (nn - 1.0) * std::log(M_PI) -
                        0.5 * std::log(nn) + std::lgamma(0.5 * (nn - 1.0));
    const int n_draws = 400000;
    Rng rng(Rng::stream_seed(4242, std::uint64_t(si)));
    std::vector<double> logw(std::size_t(n_draws), 0.0);
    for (double& w : logw) {
      const double scale = (t.r * t.r / 2.0) / rng.gamma(0.5);
      const double gl = scale * lam;
      w = base - 0.5 * std::log1p(gl) -
          0.5 * (nn - 1.0) * std::log(tss - ssb * gl / (1.0 + gl));
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double s = 0.0, s2 = 0.0;
    for (double w : logw) {
      const double e = std::exp(w - mx);
      s += e;
      s2 += e * e;
    }
    const double mean = s / n_draws;
    const double var = (s2 - n_draws * mean * mean) / (n_draws - 1.0);
    const double se = std::sqrt(var / n_draws) / mean;
    const double lbf_mc = (mx + std::log(mean)) -
                          (base - 0.5 * (nn - 1.0) * std::log(tss));
    c.require(std::abs(lbf - lbf_mc) <= 3.0 * se,
              "set " + std::to_string(si) + ": |quadrature - oracle| " +
                  fmt("%.3e", std::abs(lbf - lbf_mc)) + " > 3se " +
                  fmt("%.3e", 3.0 * se));

    // Swapping the two groups must not move the evidence.
    const GroupedGaussian sw =
        gaussian_pair(t.n2, t.n1, t.m2, t.m1, t.s2, t.s1);
    c.require(std::abs(jzs_log_marginal(full2, sw, model) -
                       jzs_log_marginal(full2, g, model)) <= 1e-8,
              "set " + std::to_string(si) + ": group swap moved the evidence");

    // Rescaling the data must not move the Bayes factor.
    for (double scale : {0.25, 4.0}) {
      GroupedGaussian sc = g;
      for (double& m : sc.mean) m *= scale;
      for (double& v : sc.sse) v *= scale * scale;
      const double lbf_sc = jzs_log_marginal(full2, sc, model) -
                            jzs_log_marginal(null2, sc, model);
      c.require(std::abs(lbf_sc - lbf) <= 1e-6,
                "set " + std::to_string(si) + ": scale " + fmt("%.2f", scale) +
                    " moved log bf by " + fmt("%.3e", std::abs(lbf_sc - lbf)));
    }
  }

  // Three unbalanced groups: evidence is invariant to relabeling the
  // groups, for both a two-block and the full partition.
  const GroupedGaussian g3 = [] {
    GroupedGaussian g;
    g.n = {5, 3, 4};
    g.mean = {0.4800000000000001, -0.5, 2.125};
    g.sse = {1.248, 0.62, 0.9274999999999998};
    g.names = {"a", "b", "c"};
    return g;
  }();
  const JzsAnovaModel m3{};
  for (const std::string& rgs : {std::string("0,0,1"), std::string("0,1,2")}) {
    const Partition p = Partition::parse(rgs);
    const double ref = jzs_log_marginal(p, g3, m3);
    std::vector<int> perm = {0, 1, 2};
    do {
      GroupedGaussian pg;
      std::vector<int> labels(3);
      for (int j = 0; j < 3; ++j) {
        pg.n.push_back(g3.n[std::size_t(perm[std::size_t(j)])]);
        pg.mean.push_back(g3.mean[std::size_t(perm[std::size_t(j)])]);
        pg.sse.push_back(g3.sse[std::size_t(perm[std::size_t(j)])]);
        labels[std::size_t(j)] = p.label(perm[std::size_t(j)]);
      }
      const double got =
          jzs_log_marginal(Partition::from_labels(labels), pg, m3);
      c.require(std::abs(got - ref) <= 1e-8,
                "3-group relabeling moved the evidence for " + rgs);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

// 8. Seeded null study: family-wise error ordering across priors.
void c8_null_study(Check& c) {
  StudyConfig cfg;
  cfg.k = 5;
  cfg.n_per_group = 100;
  cfg.reps = 100;
  cfg.equality_fraction = 1.0;
  cfg.priors = parse_prior_list("uniform,bb:1,k,dp:symmetric", cfg.k);
  cfg.model = JzsAnovaModel{};
  cfg.seed = 1;
  const StudyResult res = run_study(cfg);
  const double fw_u = res.summary_for("uniform").fwer;
  const double fw_dp = res.summary_for("dp:symmetric").fwer;
  const double fw_bb = res.summary_for("bb:1,5").fwer;
  c.require(fw_u > fw_dp, "fwer(uniform)=" + fmt("%.3f", fw_u) +
                              " not above fwer(dp:symmetric)=" +
                              fmt("%.3f", fw_dp));
  c.require(fw_dp > fw_bb, "fwer(dp:symmetric)=" + fmt("%.3f", fw_dp) +
                               " not above fwer(bb:1,5)=" + fmt("%.3f", fw_bb));
  c.require(fw_bb <= 0.15, "fwer(bb:1,5)=" + fmt("%.3f", fw_bb) + " > 0.15");
}

// 9. Model-averaged means sit between per-group MLEs and the planted
// cluster means; equality probabilities separate the two clusters.
void c9_shrinkage(Check& c) {
  const GroupedData data = read_grouped_csv(kData + "/proportions8.csv");
  const auto& counts = std::get<GroupedCounts>(data);
  ExactConfig ec;
  ec.top_partitions = 0;
  const PosteriorSummary s = exact_posterior(PriorSpec::BetaBinomial(1.0, 1.0),
                                             BinomialBetaModel{}, data, ec);
  long long sa = 0, ta = 0, sb = 0, tb = 0;
  for (int j = 0; j < 4; ++j) {
    sa += counts.successes[std::size_t(j)];
    ta += counts.trials[std::size_t(j)];
    sb += counts.successes[std::size_t(j + 4)];
    tb += counts.trials[std::size_t(j + 4)];
  }
  const double cm_a = double(sa) / double(ta);
  const double cm_b = double(sb) / double(tb);
  int strict = 0;
  for (int j = 0; j < 8; ++j) {
    const double mle =
        double(counts.successes[std::size_t(j)]) / double(counts.trials[std::size_t(j)]);
    const double cm = j < 4 ? cm_a : cm_b;
    const double post = s.group_means[std::size_t(j)];
    strict += int(post > std::min(mle, cm)) + int(post < std::max(mle, cm));
  }
  c.require(strict >= 14, "only " + std::to_string(strict) +
                              "/16 strict between-bounds comparisons hold");
  double within_min = 1.0, between_max = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      const double pe = s.prob_equal(i, j);
      if ((i < 4) == (j < 4))
        within_min = std::min(within_min, pe);
      else
        between_max = std::max(between_max, pe);
    }
  }
  c.require(within_min > between_max,
            "within-cluster min " + fmt("%.4f", within_min) +
                " not above between-cluster max " + fmt("%.4f", between_max));
}

// 10. Same command, same seed: byte-identical stdout payloads.
void c10_reproducibility(Check& c) {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() / ("parteq_acceptance_" + std::to_string(getpid()));
  fs::create_directories(dir);
  const auto run = [&](const std::string& args, const fs::path& out) {
    const std::string cmd =
        kCli + " " + args + " > " + out.string() + " 2> " + (dir / "err.txt").string();
    return std::system(cmd.c_str());
  };
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::vector<std::string> commands = {
      "test proportions --input " + kData + "/binom4.csv --prior dp:1 "
          "--model binom --force-mcmc --iterations 4000 --burnin 500 "
          "--chains 2 --seed 42 --draws 50",
      "test means --input " + kData + "/gauss3_raw.csv --prior bb:1,k "
          "--model jzs --exact --draws 64 --seed 9",
      "simulate --k 4 --n 50 --reps 6 --equalities 0.5 "
          "--priors uniform,dp:1 --model normal --seed 5",
      "priors --k 5 --prior uniform --prior bb:1,k --prior dp:symmetric "
          "--by-size",
  };
  for (std::size_t i = 0; i < commands.size(); ++i) {
    const fs::path a = dir / ("a" + std::to_string(i) + ".json");
    const fs::path b = dir / ("b" + std::to_string(i) + ".json");
    const int ra = run(commands[i], a);
    const int rb = run(commands[i], b);
    c.require(ra == 0 && rb == 0,
              "command " + std::to_string(i) + " exited nonzero");
    const std::string pa = slurp(a), pb = slurp(b);
    c.require(!pa.empty(), "command " + std::to_string(i) + " wrote no output");
    c.require(pa == pb, "command " + std::to_string(i) + " output differs between runs");
  }
  fs::remove_all(dir);
}

struct Criterion {
  const char* name;
  double limit_s;  // 0 = no stated budget
  void (*fn)(Check&);
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"exact combinatorial counts and r-generalizations", 1.0, c1_counts},
      {"prior normalization over enumerated partitions", 10.0, c2_normalization},
      {"sequential construction reproduces each partition pmf", 0.0,
       c3_prediction_rule},
      {"block-count monotonicity at the design boundaries", 5.0,
       c4_monotonicity},
      {"symmetric DP concentration and elicitation round trips", 0.0,
       c5_elicitation},
      {"collapsed Gibbs matches exact posterior on four groups", 120.0,
       c6_sampler_vs_exact},
      {"two-group evidence quadrature vs Monte Carlo oracle", 0.0,
       c7_evidence_oracle},
      {"null-study family-wise error ordering across priors", 1800.0,
       c8_null_study},
      {"model-averaged means shrink toward planted cluster means", 0.0,
       c9_shrinkage},
      {"repeated same-seed CLI runs emit identical bytes", 0.0,
       c10_reproducibility},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Criterion& cr = criteria[i];
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.fn(check);
    } catch (const std::exception& e) {
      check.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (cr.limit_s > 0.0 && elapsed > cr.limit_s)
      check.require(false, fmt("%.1f", elapsed) + "s exceeds the " +
                               fmt("%.0f", cr.limit_s) + "s budget");
    std::printf("%s  %2zu. %-58s %7.2fs%s%s\n", check.ok ? "PASS" : "FAIL",
                i + 1, cr.name, elapsed, check.ok ? "" : "  ",
                check.ok ? "" : check.why.c_str());
    std::fflush(stdout);
    failures += check.ok ? 0 : 1;
  }
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
