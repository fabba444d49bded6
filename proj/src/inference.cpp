// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/inference.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <unordered_map>

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

// Membership-vector pmf pieces precomputed per (prior, k). For uniform and
// BB the pmf is a function of the block count alone; for DP the running
// sum of lgamma(block size) is maintained by the sampler instead.
struct PriorTables {
  bool is_dp = false;
  double log_alpha = 0.0;
  double dp_const = 0.0;  // lgamma(alpha) - lgamma(k + alpha)
  std::vector<double> log_repr;      // index d
  std::vector<double> dp_base;       // index d: d*log_alpha - log_repr[d]
  std::vector<double> membership;    // index d (uniform/BB only)

  static PriorTables build(const PriorSpec& prior, int k) {
    PriorTables t;
    t.log_repr.assign(k + 1, 0.0);
    for (int d = 1; d <= k; ++d)
      t.log_repr[d] = log_count_representations(k, d);
    if (prior.kind == PriorKind::kDirichletProcess) {
      t.is_dp = true;
      const double alpha = dp_alpha_for(prior, k);
      t.log_alpha = std::log(alpha);
      t.dp_const = std::lgamma(alpha) - std::lgamma(k + alpha);
      t.dp_base.assign(k + 1, kNegInf);
      for (int d = 1; d <= k; ++d)
        t.dp_base[d] = d * t.log_alpha - t.log_repr[d];
    } else {
      t.membership.assign(k + 1, kNegInf);
      for (int d = 1; d <= k; ++d) {
        double lp;
        if (prior.kind == PriorKind::kUniform) {
          lp = -combinatorics::log_bell(k);
        } else {
          lp = lchoose(k - 1, d - 1) +
               lbeta(d - 1 + prior.a, k - d + prior.b) -
               lbeta(prior.a, prior.b) - combinatorics::log_stirling2(k, d);
        }
        t.membership[d] = lp - t.log_repr[d];
      }
    }
    return t;
  }
};

struct Sampler {
  const PriorSpec& prior;
  const ModelSpec& model;
  const GroupedData& data;
  int k;
  PriorTables tables;
  bool has_stats = false;  // conjugate families maintain pooled block stats
  bool is_flat = false;
  bool is_jzs = false;
  const JzsAnovaModel* jzs_model = nullptr;
  const GroupedGaussian* gauss = nullptr;

  std::vector<int> labels, sizes;
  int d = 0;
  std::vector<BlockStats> stats;
  std::vector<double> lm_single;  // per-group singleton block evidence

  std::unordered_map<Partition, double, PartitionHash> jzs_cache;
  static constexpr std::size_t kCacheCap = std::size_t(1) << 20;

  std::vector<double> weights;
  std::vector<int> scratch;

  Sampler(const PriorSpec& pr, const ModelSpec& mo, const GroupedData& da)
      : prior(pr), model(mo), data(da), k(k_groups(da)),
        tables(PriorTables::build(pr, k)) {
    is_flat = std::holds_alternative<FlatModel>(model);
    is_jzs = std::holds_alternative<JzsAnovaModel>(model);
    has_stats = !is_flat && !is_jzs;
    if (is_jzs) {
      jzs_model = &std::get<JzsAnovaModel>(model);
      gauss = &std::get<GroupedGaussian>(data);
    }
    weights.resize(k);
    scratch.resize(k);
    lm_single.assign(k, 0.0);
    if (has_stats) {
      for (int j = 0; j < k; ++j) {
        BlockStats s;
        std::visit([&](const auto& dd) { s.add(dd, j); }, data);
        lm_single[j] = block_log_marginal(model, s);
      }
    }
  }

  void set_labels(const std::vector<int>& init) {
    labels = init;
    sizes.assign(k, 0);
    for (int v : labels) ++sizes[v];
    d = 0;
    for (int s : sizes) d += s > 0;
    if (has_stats) {
      stats.assign(k, BlockStats{});
      std::visit(
          [&](const auto& dd) {
            for (int j = 0; j < k; ++j) stats[labels[j]].add(dd, j);
          },
          data);
    }
  }

  double jzs_marginal_for(const Partition& p) {
    auto it = jzs_cache.find(p);
    if (it != jzs_cache.end()) return it->second;
    const double v = jzs_log_marginal(p, *gauss, *jzs_model);
    if (jzs_cache.size() < kCacheCap) jzs_cache.emplace(p, v);
    return v;
  }

  // candidate log weights for site j with the site already removed;
  // d_rm = block count without it
  void fill_weights(int j, int d_rm) {
    if (is_jzs) {
      scratch = labels;
      for (int c = 0; c < k; ++c) {
        scratch[j] = c;
        const Partition p = canonicalize(scratch);
        double prior_part;
        if (tables.is_dp) {
          prior_part = tables.dp_base[p.n_blocks()] + tables.dp_const;
          for (int sz : p.block_sizes()) prior_part += std::lgamma(double(sz));
        } else {
          prior_part = tables.membership[p.n_blocks()];
        }
        weights[c] = prior_part + jzs_marginal_for(p);
      }
      return;
    }
    double lm_empty = is_flat ? 0.0 : lm_single[j];
    for (int c = 0; c < k; ++c) {
      const bool occupied = sizes[c] > 0;
      const int dc = d_rm + (occupied ? 0 : 1);
      double w = tables.is_dp
                     ? tables.dp_base[dc] +
                           (occupied ? std::log(double(sizes[c])) : 0.0)
                     : tables.membership[dc];
      if (has_stats) {
        if (occupied) {
          BlockStats with = stats[c];
          std::visit([&](const auto& dd) { with.add(dd, j); }, data);
          w += block_log_marginal(model, with) -
               block_log_marginal(model, stats[c]);
        } else {
          w += lm_empty;
        }
      } else if (!occupied) {
        w += lm_empty;  // flat: zero either way
      }
      weights[c] = w;
    }
  }

  void check_weights(int j) const {
    double best = kNegInf;
    for (double w : weights) {
      if (std::isnan(w))
        throw numerical_error("gibbs: non-finite weight at state " +
                              canonicalize(labels).to_string() + " site " +
                              std::to_string(j));
      best = std::max(best, w);
    }
    if (best == kNegInf)
      throw numerical_error("gibbs: all-zero weights at state " +
                            canonicalize(labels).to_string() + " site " +
                            std::to_string(j));
  }

  void update_site(int j, Rng& rng) {
    const int old = labels[j];
    --sizes[old];
    if (has_stats)
      std::visit([&](const auto& dd) { stats[old].remove(dd, j); }, data);
    const int d_rm = d - (sizes[old] == 0 ? 1 : 0);
    fill_weights(j, d_rm);
    check_weights(j);
    const int pick = rng.categorical_logw(weights);
    labels[j] = pick;
    d = d_rm + (sizes[pick] == 0 ? 1 : 0);
    ++sizes[pick];
    if (has_stats)
      std::visit([&](const auto& dd) { stats[pick].add(dd, j); }, data);
  }

  double log_membership() const {
    if (!tables.is_dp) return tables.membership[d];
    double v = tables.dp_base[d] + tables.dp_const;
    for (int c = 0; c < k; ++c)
      if (sizes[c] > 0) v += std::lgamma(double(sizes[c]));
    return v;
  }

  double log_marginal_current(const Partition& canonical) {
    if (is_flat) return 0.0;
    if (is_jzs) return jzs_marginal_for(canonical);
    double v = 0.0;
    for (int c = 0; c < k; ++c)
      if (sizes[c] > 0) v += block_log_marginal(model, stats[c]);
    return v;
  }
};

std::vector<int> init_labels_from_prior(const PriorSpec& prior, int k,
                                        Rng& rng) {
  const Partition p0 = sample_partition(prior, k, rng);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = k - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  std::vector<int> labels(k);
  for (int j = 0; j < k; ++j) labels[j] = perm[p0.label(j)];
  return labels;
}

ChainResult run_chain(const PriorSpec& prior, const ModelSpec& model,
                      const GroupedData& data, const SamplerConfig& cfg,
                      int chain_index) {
  const int k = k_groups(data);
  Sampler s(prior, model, data);
  Rng rng = Rng::stream(cfg.seed, std::uint64_t(chain_index));

  ChainResult out;
  out.seed = Rng::stream_seed(cfg.seed, std::uint64_t(chain_index));
  s.set_labels(init_labels_from_prior(prior, k, rng));

  const long long kept_total =
      (cfg.iterations - cfg.burnin + cfg.thin - 1) / cfg.thin;
  long long draw_stride = 0;
  if (cfg.collect_draws && !std::holds_alternative<FlatModel>(model)) {
    const long long budget =
        std::max(1LL, (long long)cfg.max_param_draws / cfg.chains);
    draw_stride = std::max(1LL, kept_total / budget);
  }
  out.trace_logpost.reserve(kept_total);
  out.trace_blocks.reserve(kept_total);
  std::map<Partition, long long> counts;

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int j = 0; j < k; ++j) s.update_site(j, rng);
    if (it < cfg.burnin || (it - cfg.burnin) % cfg.thin != 0) continue;
    const Partition canonical = canonicalize(s.labels);
    ++counts[canonical];
    out.trace_logpost.push_back(s.log_membership() +
                                s.log_marginal_current(canonical));
    out.trace_blocks.push_back(double(s.d));
    if (draw_stride > 0 && out.kept % draw_stride == 0)
      out.draws.push_back(draw_group_parameters(model, canonical, data, rng));
    ++out.kept;
  }
  out.counts.assign(counts.begin(), counts.end());
  return out;
}

}  // namespace

double PosteriorSummary::prob_of(const Partition& p) const {
  for (const auto& e : top)
    if (e.partition == p) return e.prob;
  return 0.0;
}

std::vector<double> gibbs_site_log_weights(const PriorSpec& prior,
                                           const ModelSpec& model,
                                           const GroupedData& data,
                                           const std::vector<int>& labels,
                                           int site) {
  const int k = k_groups(data);
  if (int(labels.size()) != k) throw data_error("site weights: label length");
  for (int v : labels)
    if (v < 0 || v >= k) throw data_error("site weights: label out of range");
  if (site < 0 || site >= k) throw data_error("site weights: bad site");
  Sampler s(prior, model, data);
  s.set_labels(labels);
  const int old = s.labels[site];
  --s.sizes[old];
  if (s.has_stats)
    std::visit([&](const auto& dd) { s.stats[old].remove(dd, site); }, data);
  const int d_rm = s.d - (s.sizes[old] == 0 ? 1 : 0);
  s.fill_weights(site, d_rm);
  return s.weights;
}

double ess_initial_monotone(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n < 8) return double(n);
  double mean = 0.0;
  for (double x : trace) mean += x;
  mean /= double(n);
  double c0 = 0.0;
  for (double x : trace) c0 += (x - mean) * (x - mean);
  c0 /= double(n);
  if (!(c0 > 0) || !std::isfinite(c0)) return double(n);

  const auto acov = [&](std::size_t t) {
    double c = 0.0;
    for (std::size_t i = 0; i + t < n; ++i)
      c += (trace[i] - mean) * (trace[i + t] - mean);
    return c / double(n);
  };

  const std::size_t max_lag = std::min(n - 2, std::size_t(4096));
  double tau = -1.0;
  double prev_gamma = kNaN;
  for (std::size_t m = 0; 2 * m + 1 <= max_lag; ++m) {
    double gamma = (acov(2 * m) + acov(2 * m + 1)) / c0;
    if (gamma <= 0.0) break;
    if (!std::isnan(prev_gamma)) gamma = std::min(gamma, prev_gamma);
    prev_gamma = gamma;
    tau += 2.0 * gamma;
  }
  tau = std::max(tau, 1e-6);
  return std::min(double(n), double(n) / tau);
}

double split_rhat(const std::vector<std::vector<double>>& traces) {
  std::vector<double> seq_mean, seq_var;
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& t : traces)
    if (t.size() >= 4) len = std::min(len, t.size() / 2);
  if (len == std::numeric_limits<std::size_t>::max() || len < 2) return kNaN;
  for (const auto& t : traces) {
    if (t.size() < 4) continue;
    const std::span<const double> halves[2] = {
        std::span<const double>(t).subspan(0, len),
        std::span<const double>(t).subspan(t.size() - len, len)};
    for (const auto& h : halves) {
      double m = 0.0;
      for (double x : h) m += x;
      m /= double(len);
      double v = 0.0;
      for (double x : h) v += (x - m) * (x - m);
      v /= double(len - 1);
      seq_mean.push_back(m);
      seq_var.push_back(v);
    }
  }
  const std::size_t m = seq_mean.size();
  if (m < 2) return kNaN;
  double w = 0.0;
  for (double v : seq_var) w += v;
  w /= double(m);
  double grand = 0.0;
  for (double x : seq_mean) grand += x;
  grand /= double(m);
  double var_means = 0.0;
  for (double x : seq_mean) var_means += (x - grand) * (x - grand);
  var_means /= double(m - 1);
  if (w <= 0.0) return var_means <= 0.0 ? 1.0 : kNaN;
  const double var_plus = double(len - 1) / double(len) * w + var_means;
  return std::sqrt(var_plus / w);
}

PosteriorSummary summarize(const std::vector<ChainResult>& chains, int k,
                           const ModelSpec& model, const GroupedData& data) {
  PosteriorSummary out;
  out.k = k;
  out.method = "gibbs";
  std::map<Partition, long long> merged;
  long long total = 0;
  for (const auto& c : chains) {
    total += c.kept;
    for (const auto& [p, n] : c.counts) merged[p] += n;
  }
  if (total == 0) throw data_error("summarize: no kept samples");

  out.top.reserve(merged.size());
  for (const auto& [p, n] : merged)
    out.top.push_back({p, double(n) / double(total)});
  std::stable_sort(out.top.begin(), out.top.end(),
                   [](const PartitionProb& a, const PartitionProb& b) {
                     return a.prob > b.prob;
                   });

  out.pairwise_equal.assign(std::size_t(k) * k, 0.0);
  out.size_probs.assign(k, 0.0);
  const bool is_flat = std::holds_alternative<FlatModel>(model);
  const bool is_jzs = std::holds_alternative<JzsAnovaModel>(model);
  if (!is_flat) out.group_means.assign(k, 0.0);
  for (const auto& [p, n] : merged) {
    const double prob = double(n) / double(total);
    out.size_probs[p.n_blocks() - 1] += prob;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if (p.same_block(i, j)) {
          out.pairwise_equal[std::size_t(i) * k + j] += prob;
          out.pairwise_equal[std::size_t(j) * k + i] += prob;
        }
    if (!is_flat && (!is_jzs || prob >= 1e-10)) {
      const auto means = group_posterior_means(model, p, data);
      for (int j = 0; j < k; ++j) out.group_means[j] += prob * means[j];
    }
  }
  for (int i = 0; i < k; ++i) out.pairwise_equal[std::size_t(i) * k + i] = 1.0;

  for (const auto& c : chains) {
    out.diagnostics.per_chain.push_back(
        {ess_initial_monotone(c.trace_logpost),
         ess_initial_monotone(c.trace_blocks)});
    out.chain_seeds.push_back(c.seed);
    for (const auto& dr : c.draws) out.param_draws.push_back(dr);
  }
  std::vector<std::vector<double>> traces;
  for (const auto& c : chains) traces.push_back(c.trace_logpost);
  out.diagnostics.rhat_logpost = split_rhat(traces);
  return out;
}

PosteriorSummary gibbs_run(const PriorSpec& prior, const ModelSpec& model,
                           const GroupedData& data, const SamplerConfig& cfg) {
  validate(data);
  const int k = k_groups(data);
  if (cfg.iterations <= cfg.burnin || cfg.burnin < 0)
    throw data_error("gibbs_run: need iterations > burnin >= 0");
  if (cfg.chains < 1 || cfg.thin < 1)
    throw data_error("gibbs_run: need chains >= 1 and thin >= 1");
  // surfaces model/data mismatches before any chain starts
  log_marginal(model, Partition::pooled(k), data);

  if (k == 1) {
    PosteriorSummary out;
    out.k = 1;
    out.method = "gibbs";
    out.top = {{Partition::pooled(1), 1.0}};
    out.pairwise_equal = {1.0};
    out.size_probs = {1.0};
    if (!std::holds_alternative<FlatModel>(model))
      out.group_means = group_posterior_means(model, Partition::pooled(1), data);
    out.chain_seeds = {Rng::stream_seed(cfg.seed, 0)};
    return out;
  }

  std::vector<ChainResult> results(cfg.chains);
  std::vector<std::exception_ptr> errors(cfg.chains);
  const int nt = std::min(resolve_threads(cfg.threads), cfg.chains);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
#endif
  for (int c = 0; c < cfg.chains; ++c) {
    try {
      results[c] = run_chain(prior, model, data, cfg, c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorSummary out = summarize(results, k, model, data);
  out.method = "gibbs";
  return out;
}

PosteriorSummary exact_posterior(const PriorSpec& prior,
                                 const ModelSpec& model,
                                 const GroupedData& data,
                                 const ExactConfig& cfg) {
  validate(data);
  const int k = k_groups(data);
  if (k > cfg.max_groups)
    throw capacity_error("exact_posterior: k=" + std::to_string(k) +
                         " exceeds cap " + std::to_string(cfg.max_groups) +
                         "; use gibbs_run");
  log_marginal(model, Partition::pooled(k), data);

  std::vector<std::uint64_t> codes;
  for_each_partition(
      k, [&](const Partition& p) { codes.push_back(pack_rgs(p.rgs())); },
      cfg.max_groups);
  const std::size_t n = codes.size();

  std::vector<double> logw(n);
  const int nt = resolve_threads(cfg.threads);
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
#endif
  {
    std::vector<int> buf;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
      unpack_rgs(codes[i], k, &buf);
      const Partition p = Partition::from_rgs(buf);
      logw[i] = log_pmf(prior, p) + log_marginal(model, p, data);
    }
  }

  double logz = log_sum_exp(logw);
  if (!std::isfinite(logz))
    throw numerical_error("exact_posterior: non-finite normalizer");

  PosteriorSummary out;
  out.k = k;
  out.method = "exact";
  out.log_normalizer = logz;
  out.pairwise_equal.assign(std::size_t(k) * k, 0.0);
  out.size_probs.assign(k, 0.0);
  const bool is_flat = std::holds_alternative<FlatModel>(model);
  const bool is_jzs = std::holds_alternative<JzsAnovaModel>(model);
  if (!is_flat) out.group_means.assign(k, 0.0);

  // fixed-size chunks with ordered reduction keep results identical for
  // every thread count
  constexpr std::size_t kChunk = 8192;
  const std::size_t nchunks = (n + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> pw(nchunks), sz(nchunks), gm(nchunks);
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
#endif
  {
    std::vector<int> buf;
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (std::ptrdiff_t ci = 0; ci < std::ptrdiff_t(nchunks); ++ci) {
      auto& lpw = pw[ci];
      auto& lsz = sz[ci];
      auto& lgm = gm[ci];
      lpw.assign(std::size_t(k) * k, 0.0);
      lsz.assign(k, 0.0);
      if (!is_flat) lgm.assign(k, 0.0);
      const std::size_t lo = std::size_t(ci) * kChunk;
      const std::size_t hi = std::min(n, lo + kChunk);
      for (std::size_t i = lo; i < hi; ++i) {
        const double prob = std::exp(logw[i] - logz);
        unpack_rgs(codes[i], k, &buf);
        const Partition p = Partition::from_rgs(buf);
        lsz[p.n_blocks() - 1] += prob;
        for (int a = 0; a < k; ++a)
          for (int b = a + 1; b < k; ++b)
            if (p.same_block(a, b)) {
              lpw[std::size_t(a) * k + b] += prob;
              lpw[std::size_t(b) * k + a] += prob;
            }
        if (!is_flat && (!is_jzs || prob >= 1e-13)) {
          const auto means = group_posterior_means(model, p, data);
          for (int j = 0; j < k; ++j) lgm[j] += prob * means[j];
        }
      }
    }
  }
  for (std::size_t ci = 0; ci < nchunks; ++ci) {
    for (std::size_t t = 0; t < out.pairwise_equal.size(); ++t)
      out.pairwise_equal[t] += pw[ci][t];
    for (int t = 0; t < k; ++t) out.size_probs[t] += sz[ci][t];
    if (!is_flat)
      for (int t = 0; t < k; ++t) out.group_means[t] += gm[ci][t];
  }
  for (int i = 0; i < k; ++i) out.pairwise_equal[std::size_t(i) * k + i] = 1.0;

  const std::size_t keep =
      cfg.top_partitions <= 0 ? n : std::min(n, std::size_t(cfg.top_partitions));
  out.top_truncated = keep < n;
  // (prob asc, rgs desc) min-heap ordering so the root is the weakest entry
  std::vector<int> bufa, bufb;
  const auto worse = [&](std::size_t a, std::size_t b) {
    if (logw[a] != logw[b]) return logw[a] > logw[b];
    unpack_rgs(codes[a], k, &bufa);
    unpack_rgs(codes[b], k, &bufb);
    return bufa < bufb;
  };
  std::vector<std::size_t> heap;
  heap.reserve(keep + 1);
  for (std::size_t i = 0; i < n; ++i) {
    heap.push_back(i);
    std::push_heap(heap.begin(), heap.end(), worse);
    if (heap.size() > keep) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.pop_back();
    }
  }
  std::sort_heap(heap.begin(), heap.end(), worse);
  std::vector<int> buf;
  for (std::size_t i : heap) {
    unpack_rgs(codes[i], k, &buf);
    out.top.push_back({Partition::from_rgs(buf), std::exp(logw[i] - logz)});
  }

  if (cfg.param_draws > 0 && !is_flat) {
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      cum[i + 1] = cum[i] + std::exp(logw[i] - logz);
    Rng rng = Rng::stream(cfg.seed, 0);
    for (int t = 0; t < cfg.param_draws; ++t) {
      const double u = rng.uniform() * cum[n];
      const std::size_t idx =
          std::size_t(std::upper_bound(cum.begin(), cum.end(), u) -
                      cum.begin()) -
          1;
      unpack_rgs(codes[std::min(idx, n - 1)], k, &buf);
      out.param_draws.push_back(draw_group_parameters(
          model, Partition::from_rgs(buf), data, rng));
    }
  }
  out.chain_seeds = {cfg.seed};
  return out;
}

}  // namespace parteq
