// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/priors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parteq/errors.hpp"
#include "parteq/numeric.hpp"

namespace parteq {

namespace c10s = combinatorics;

namespace {

std::string fmt_param(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

double require_positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v))
    throw data_error(std::string("prior: ") + what + " must be positive");
  return v;
}

}  // namespace

PriorSpec PriorSpec::Uniform() { return PriorSpec{}; }

PriorSpec PriorSpec::BetaBinomial(double a, double b) {
  PriorSpec s;
  s.kind = PriorKind::kBetaBinomial;
  s.a = require_positive(a, "alpha");
  s.b = require_positive(b, "beta");
  return s;
}

PriorSpec PriorSpec::DirichletProcess(double alpha) {
  PriorSpec s;
  s.kind = PriorKind::kDirichletProcess;
  s.alpha = require_positive(alpha, "alpha");
  return s;
}

PriorSpec PriorSpec::DirichletProcessSymmetric() {
  PriorSpec s;
  s.kind = PriorKind::kDirichletProcess;
  s.dp_symmetric = true;
  return s;
}

std::string PriorSpec::label() const {
  switch (kind) {
    case PriorKind::kUniform:
      return "uniform";
    case PriorKind::kBetaBinomial:
      return "bb:" + fmt_param(a) + "," + fmt_param(b);
    case PriorKind::kDirichletProcess:
      return dp_symmetric ? "dp:symmetric" : "dp:" + fmt_param(alpha);
  }
  return "?";
}

namespace {

// stod accepts numeric prefixes; demand the whole token parses
double parse_spec_number(const std::string& s, const char* what,
                         const std::string& text) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw data_error(std::string("prior: bad ") + what + " in '" + text +
                     "'");
  }
  if (pos != s.size() || !std::isfinite(v))
    throw data_error(std::string("prior: bad ") + what + " in '" + text +
                     "'");
  return v;
}

}  // namespace

PriorSpec parse_prior(const std::string& text, int k) {
  if (text == "uniform") return PriorSpec::Uniform();
  if (text.rfind("bb:", 0) == 0) {
    const std::string rest = text.substr(3);
    const auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw data_error("prior: expected bb:A,B in '" + text + "'");
    const double a = parse_spec_number(rest.substr(0, comma), "alpha", text);
    double b;
    const std::string bs = rest.substr(comma + 1);
    if (bs == "k") {
      if (k < 1) throw data_error("prior: 'k' expansion needs a group count");
      b = k;
    } else if (bs == "k2") {
      if (k < 2) throw data_error("prior: 'k2' expansion needs k >= 2");
      b = double(k) * (k - 1) / 2.0;
    } else {
      b = parse_spec_number(bs, "beta", text);
    }
    return PriorSpec::BetaBinomial(a, b);
  }
  if (text.rfind("dp:", 0) == 0) {
    const std::string rest = text.substr(3);
    if (rest == "symmetric") return PriorSpec::DirichletProcessSymmetric();
    return PriorSpec::DirichletProcess(
        parse_spec_number(rest, "concentration", text));
  }
  throw data_error("prior: unrecognized spec '" + text + "'");
}

std::vector<PriorSpec> parse_prior_list(const std::string& text, int k) {
  std::vector<std::string> pieces;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const bool starts_new = tok == "uniform" || tok.rfind("bb:", 0) == 0 ||
                            tok.rfind("dp:", 0) == 0;
    if (starts_new || pieces.empty()) {
      pieces.push_back(tok);
    } else {
      pieces.back() += "," + tok;  // the commas inside bb:A,B
    }
  }
  std::vector<PriorSpec> out;
  for (const auto& p : pieces) out.push_back(parse_prior(p, k));
  if (out.empty()) throw data_error("prior: empty prior list");
  return out;
}

double dp_alpha_for(const PriorSpec& prior, int k) {
  if (prior.kind != PriorKind::kDirichletProcess)
    throw data_error("dp_alpha_for: not a DP prior");
  if (!prior.dp_symmetric) return prior.alpha;
  if (k < 2) throw data_error("dp_alpha_for: symmetric mode needs k >= 2");
  // null/full ratio (K-1)!/alpha^(K-1) = 1
  return std::exp(std::lgamma(double(k)) / double(k - 1));
}

double log_pmf(const PriorSpec& prior, const Partition& p) {
  const int k = p.k_groups();
  const int d = p.n_blocks();
  switch (prior.kind) {
    case PriorKind::kUniform:
      return -c10s::log_bell(k);
    case PriorKind::kBetaBinomial:
      return lchoose(k - 1, d - 1) + lbeta(d - 1 + prior.a, k - d + prior.b) -
             lbeta(prior.a, prior.b) - c10s::log_stirling2(k, d);
    case PriorKind::kDirichletProcess: {
      const double alpha = dp_alpha_for(prior, k);
      double lp = d * std::log(alpha) + std::lgamma(alpha) -
                  std::lgamma(k + alpha);
      for (int sz : p.block_sizes()) lp += std::lgamma(double(sz));
      return lp;
    }
  }
  return kNaN;
}

double log_pmf_membership(const PriorSpec& prior,
                          const std::vector<int>& labels) {
  const Partition p = canonicalize(labels);
  return log_pmf(prior, p) -
         log_count_representations(p.k_groups(), p.n_blocks());
}

double log_pmf_size(const PriorSpec& prior, int d, int k) {
  if (d < 1 || d > k) throw data_error("log_pmf_size: d outside 1..k");
  switch (prior.kind) {
    case PriorKind::kUniform:
      return c10s::log_stirling2(k, d) - c10s::log_bell(k);
    case PriorKind::kBetaBinomial:
      return lchoose(k - 1, d - 1) + lbeta(d - 1 + prior.a, k - d + prior.b) -
             lbeta(prior.a, prior.b);
    case PriorKind::kDirichletProcess:
      return size_log_pmf(prior, k)[d - 1];
  }
  return kNaN;
}

std::vector<double> size_log_pmf(const PriorSpec& prior, int k) {
  std::vector<double> out(k, kNegInf);
  if (prior.kind == PriorKind::kDirichletProcess) {
    // sum the pmf over the enumeration; inherits the k <= 12 cap
    for_each_partition(k, [&](const Partition& p) {
      out[p.n_blocks() - 1] = log_sum_exp(out[p.n_blocks() - 1], log_pmf(prior, p));
    });
    return out;
  }
  for (int d = 1; d <= k; ++d) out[d - 1] = log_pmf_size(prior, d, k);
  return out;
}

double prediction_new_prob(const PriorSpec& prior, int k, int j, int b) {
  if (!(1 <= b && b <= j && j < k))
    throw data_error("prediction_new_prob: need 1 <= b <= j < k");
  switch (prior.kind) {
    case PriorKind::kUniform: {
      const double log_new = c10s::log_r_bell(k - j - 1, b + 1);
      const double log_old =
          std::log(double(b)) + c10s::log_r_bell(k - j - 1, b);
      return std::exp(log_new - log_sum_exp(log_new, log_old));
    }
    case PriorKind::kDirichletProcess: {
      const double alpha = dp_alpha_for(prior, k);
      return alpha / (alpha + j);
    }
    case PriorKind::kBetaBinomial: {
      // per-partition mass w(d) spread over the completion counts
      std::vector<double> nw, ow;
      for (int d = 1; d <= k; ++d) {
        const double logw = log_pmf_size(prior, d, k) - c10s::log_stirling2(k, d);
        nw.push_back(logw + c10s::log_r_stirling2(k - j + b, d, b + 1));
        ow.push_back(logw + c10s::log_r_stirling2(k - j + b - 1, d, b));
      }
      const double log_new = log_sum_exp(nw);
      const double log_old = std::log(double(b)) + log_sum_exp(ow);
      return std::exp(log_new - log_sum_exp(log_new, log_old));
    }
  }
  return kNaN;
}

Partition sample_partition(const PriorSpec& prior, int k, Rng& rng) {
  if (k < 1) throw data_error("sample_partition: k must be >= 1");
  switch (prior.kind) {
    case PriorKind::kUniform:
      return sample_uniform_partition(k, rng);
    case PriorKind::kBetaBinomial: {
      const auto logp = size_log_pmf(prior, k);
      const int d = rng.categorical_logw(logp) + 1;
      return sample_uniform_partition_with_blocks(k, d, rng);
    }
    case PriorKind::kDirichletProcess: {
      const double alpha = dp_alpha_for(prior, k);
      std::vector<int> labels(k, 0);
      std::vector<double> w;
      std::vector<int> sizes{1};
      for (int j = 1; j < k; ++j) {
        w.assign(sizes.begin(), sizes.end());
        w.push_back(alpha);
        const int c = rng.categorical(w);
        if (c == int(sizes.size())) {
          sizes.push_back(1);
        } else {
          ++sizes[c];
        }
        labels[j] = c;
      }
      return Partition::from_labels(labels);
    }
  }
  throw data_error("sample_partition: bad prior kind");
}

double log_null_prob(const PriorSpec& prior, int k) {
  switch (prior.kind) {
    case PriorKind::kUniform:
      return -c10s::log_bell(k);
    case PriorKind::kBetaBinomial:
      return lbeta(prior.a, k - 1 + prior.b) - lbeta(prior.a, prior.b);
    case PriorKind::kDirichletProcess: {
      const double alpha = dp_alpha_for(prior, k);
      return std::log(alpha) + std::lgamma(alpha) + std::lgamma(double(k)) -
             std::lgamma(k + alpha);
    }
  }
  return kNaN;
}

double log_full_prob(const PriorSpec& prior, int k) {
  switch (prior.kind) {
    case PriorKind::kUniform:
      return -c10s::log_bell(k);
    case PriorKind::kBetaBinomial:
      return lbeta(k - 1 + prior.a, prior.b) - lbeta(prior.a, prior.b);
    case PriorKind::kDirichletProcess: {
      const double alpha = dp_alpha_for(prior, k);
      return k * std::log(alpha) + std::lgamma(alpha) -
             std::lgamma(k + alpha);
    }
  }
  return kNaN;
}

namespace {

double elicit_eval_log(PriorKind kind, int k, ElicitTarget target,
                       double param, double fixed_a) {
  PriorSpec s = kind == PriorKind::kDirichletProcess
                    ? PriorSpec::DirichletProcess(param)
                    : PriorSpec::BetaBinomial(fixed_a, param);
  switch (target) {
    case ElicitTarget::kNullProb:
      return log_null_prob(s, k);
    case ElicitTarget::kFullProb:
      return log_full_prob(s, k);
    case ElicitTarget::kNullFullRatio:
      return log_null_prob(s, k) - log_full_prob(s, k);
  }
  return kNaN;
}

}  // namespace

PriorSpec elicit(PriorKind kind, int k, ElicitTarget target, double value,
                 double fixed_a) {
  if (kind == PriorKind::kUniform)
    throw data_error("elicit: the uniform prior has no free parameter");
  if (k < 2) throw data_error("elicit: k must be >= 2");
  if (!(value > 0) || !std::isfinite(value))
    throw data_error("elicit: target value must be positive and finite");
  const double lt = std::log(value);
  double lo = -8.0, hi = 8.0;  // log10 bracket
  auto eval = [&](double x) {
    return elicit_eval_log(kind, k, target, std::pow(10.0, x), fixed_a);
  };
  double flo = eval(lo), fhi = eval(hi);
  const bool increasing = fhi > flo;
  if (lt < std::min(flo, fhi) || lt > std::max(flo, fhi))
    throw numerical_error("elicit: target " + std::to_string(value) +
                          " unattainable within the bracket");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = eval(mid);
    if ((fm < lt) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double param = std::pow(10.0, 0.5 * (lo + hi));
  const double achieved = std::exp(eval(0.5 * (lo + hi)));
  // absolute for probability-scale targets, relative for large ratios
  if (std::abs(achieved - value) > 1e-10 * std::max(1.0, std::abs(value)))
    throw numerical_error("elicit: could not meet tolerance",
                          std::abs(achieved - value));
  return kind == PriorKind::kDirichletProcess
             ? PriorSpec::DirichletProcess(param)
             : PriorSpec::BetaBinomial(fixed_a, param);
}

MonotonicityReport partition_monotonicity(const PriorSpec& prior, int k) {
  if (k > 10)
    throw capacity_error("partition_monotonicity: exhaustive check capped at k=10");
  std::vector<double> lo(k + 1, std::numeric_limits<double>::infinity());
  std::vector<double> hi(k + 1, -std::numeric_limits<double>::infinity());
  for_each_partition(k, [&](const Partition& p) {
    const double lp = log_pmf(prior, p);
    lo[p.n_blocks()] = std::min(lo[p.n_blocks()], lp);
    hi[p.n_blocks()] = std::max(hi[p.n_blocks()], lp);
  });
  MonotonicityReport rep{true, true};
  for (int d = 1; d < k; ++d) {
    const double eps =
        1e-12 * std::max({1.0, std::abs(lo[d]), std::abs(hi[d + 1])});
    if (lo[d] < hi[d + 1] - eps) rep.nonincreasing = false;
    if (lo[d] <= hi[d + 1] + eps) rep.strictly_decreasing = false;
  }
  if (!rep.nonincreasing) rep.strictly_decreasing = false;
  return rep;
}

bool pmf_depends_only_on_blockcount(const PriorSpec& prior) {
  return prior.kind != PriorKind::kDirichletProcess;
}

}  // namespace parteq
