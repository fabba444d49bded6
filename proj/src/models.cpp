// Apache License, Version 2.0, refer to LICENSE.txt
#include "parteq/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "parteq/errors.hpp"
#include "parteq/numeric.hpp"

namespace parteq {

int k_groups(const GroupedData& data) {
  return std::visit([](const auto& d) { return d.k_groups(); }, data);
}

void validate(const GroupedCounts& data) {
  const std::size_t k = data.trials.size();
  if (k == 0) throw data_error("counts: no groups");
  if (data.successes.size() != k)
    throw data_error("counts: successes/trials length mismatch");
  for (std::size_t j = 0; j < k; ++j) {
    if (data.trials[j] < 1)
      throw data_error("counts: group " + std::to_string(j) +
                       " has no trials");
    if (data.successes[j] < 0 || data.successes[j] > data.trials[j])
      throw data_error("counts: group " + std::to_string(j) +
                       " successes outside 0..trials");
  }
}

void validate(const GroupedGaussian& data) {
  const std::size_t k = data.n.size();
  if (k == 0) throw data_error("gaussian: no groups");
  if (data.mean.size() != k || data.sse.size() != k)
    throw data_error("gaussian: field length mismatch");
  for (std::size_t j = 0; j < k; ++j) {
    if (data.n[j] < 1)
      throw data_error("gaussian: group " + std::to_string(j) + " is empty");
    if (!std::isfinite(data.mean[j]) || !std::isfinite(data.sse[j]) ||
        data.sse[j] < 0)
      throw data_error("gaussian: group " + std::to_string(j) +
                       " has invalid moments");
    if (data.n[j] == 1 && data.sse[j] != 0)
      throw data_error("gaussian: group " + std::to_string(j) +
                       " has n=1 but nonzero sse");
  }
}

void validate(const GroupedData& data) {
  std::visit([](const auto& d) { validate(d); }, data);
}

GroupedData restrict_to_pair(const GroupedData& data, int i, int j) {
  if (std::holds_alternative<GroupedCounts>(data)) {
    const auto& d = std::get<GroupedCounts>(data);
    GroupedCounts out;
    out.successes = {d.successes[i], d.successes[j]};
    out.trials = {d.trials[i], d.trials[j]};
    return out;
  }
  const auto& d = std::get<GroupedGaussian>(data);
  GroupedGaussian out;
  out.n = {d.n[i], d.n[j]};
  out.mean = {d.mean[i], d.mean[j]};
  out.sse = {d.sse[i], d.sse[j]};
  return out;
}

namespace {

std::string fmt_param(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// Argument lists are all-or-nothing: "binom" and "binom:2,3" are valid,
// "binom:2" is not.
std::vector<double> parse_args(const std::string& text, std::size_t n_args) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (...) {
      throw data_error("model: bad numeric argument '" + tok + "'");
    }
    if (pos != tok.size() || !std::isfinite(v))
      throw data_error("model: bad numeric argument '" + tok + "'");
    out.push_back(v);
  }
  if (out.size() != n_args)
    throw data_error("model: expected " + std::to_string(n_args) +
                     " arguments in '" + text + "'");
  return out;
}

double positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v))
    throw data_error(std::string("model: ") + what + " must be positive");
  return v;
}

void check_compat(const ModelSpec& model, const GroupedData& data) {
  if (std::holds_alternative<FlatModel>(model)) return;
  if (std::holds_alternative<JzsAnovaModel>(model)) {
    if (!std::holds_alternative<GroupedGaussian>(data))
      throw data_error("jzs model needs gaussian data");
    return;
  }
  if (wants_counts(model) != std::holds_alternative<GroupedCounts>(data))
    throw data_error("model/data kind mismatch");
}

}  // namespace

std::string model_label(const ModelSpec& model) {
  struct V {
    std::string operator()(const BinomialBetaModel& m) const {
      return "binom:" + fmt_param(m.a) + "," + fmt_param(m.b);
    }
    std::string operator()(const NormalKnownVarModel& m) const {
      return "normal:" + fmt_param(m.sigma2) + "," + fmt_param(m.m0) + "," +
             fmt_param(m.v0);
    }
    std::string operator()(const NormalNigModel& m) const {
      return "nig:" + fmt_param(m.m0) + "," + fmt_param(m.kappa0) + "," +
             fmt_param(m.a0) + "," + fmt_param(m.b0);
    }
    std::string operator()(const JzsAnovaModel& m) const {
      return "jzs:" + fmt_param(m.r);
    }
    std::string operator()(const FlatModel&) const { return "flat"; }
  };
  return std::visit(V{}, model);
}

ModelSpec parse_model(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string rest =
      colon == std::string::npos ? "" : text.substr(colon + 1);
  if (name == "binom" || name == "binomial_beta") {
    const auto a = parse_args(rest, 2);
    BinomialBetaModel m;
    if (a.size() > 0) m.a = positive(a[0], "a");
    if (a.size() > 1) m.b = positive(a[1], "b");
    return m;
  }
  if (name == "normal" || name == "normal_known_var") {
    const auto a = parse_args(rest, 3);
    NormalKnownVarModel m;
    if (a.size() > 0) m.sigma2 = positive(a[0], "sigma2");
    if (a.size() > 1) m.m0 = a[1];
    if (a.size() > 2) m.v0 = positive(a[2], "v0");
    return m;
  }
  if (name == "nig" || name == "normal_nig") {
    const auto a = parse_args(rest, 4);
    NormalNigModel m;
    if (a.size() > 0) m.m0 = a[0];
    if (a.size() > 1) m.kappa0 = positive(a[1], "kappa0");
    if (a.size() > 2) m.a0 = positive(a[2], "a0");
    if (a.size() > 3) m.b0 = positive(a[3], "b0");
    return m;
  }
  if (name == "jzs" || name == "jzs_anova") {
    const auto a = parse_args(rest, 1);
    JzsAnovaModel m;
    if (a.size() > 0) m.r = positive(a[0], "r");
    return m;
  }
  if (name == "flat" && rest.empty()) return FlatModel{};
  throw data_error("model: unrecognized spec '" + text + "'");
}

bool wants_counts(const ModelSpec& model) {
  return std::holds_alternative<BinomialBetaModel>(model);
}

void BlockStats::add(const GroupedCounts& d, int j) {
  ++groups;
  successes += d.successes[j];
  trials += d.trials[j];
  log_choose += lchoose(double(d.trials[j]), double(d.successes[j]));
}

void BlockStats::remove(const GroupedCounts& d, int j) {
  --groups;
  successes -= d.successes[j];
  trials -= d.trials[j];
  log_choose -= lchoose(double(d.trials[j]), double(d.successes[j]));
}

void BlockStats::add(const GroupedGaussian& d, int j) {
  ++groups;
  n += d.n[j];
  sum += double(d.n[j]) * d.mean[j];
  raw_ss += d.sse[j] + double(d.n[j]) * d.mean[j] * d.mean[j];
}

void BlockStats::remove(const GroupedGaussian& d, int j) {
  --groups;
  n -= d.n[j];
  sum -= double(d.n[j]) * d.mean[j];
  raw_ss -= d.sse[j] + double(d.n[j]) * d.mean[j] * d.mean[j];
}

double BlockStats::pooled_sse() const {
  return std::max(0.0, raw_ss - sum * sum / double(n));
}

double block_log_marginal(const ModelSpec& model, const BlockStats& stats) {
  if (std::holds_alternative<JzsAnovaModel>(model))
    throw data_error("jzs evidence is not block-separable");
  if (stats.groups == 0) return 0.0;
  struct V {
    const BlockStats& s;
    double operator()(const BinomialBetaModel& m) const {
      return s.log_choose +
             lbeta(m.a + double(s.successes),
                   m.b + double(s.trials - s.successes)) -
             lbeta(m.a, m.b);
    }
    double operator()(const NormalKnownVarModel& m) const {
      const double nn = double(s.n);
      return -0.5 * nn * std::log(2.0 * M_PI * m.sigma2) -
             s.pooled_sse() / (2.0 * m.sigma2) +
             0.5 * std::log(2.0 * M_PI * m.sigma2 / nn) +
             log_normal_pdf(s.pooled_mean(), m.m0, m.v0 + m.sigma2 / nn);
    }
    double operator()(const NormalNigModel& m) const {
      const double nn = double(s.n);
      const double kn = m.kappa0 + nn;
      const double an = m.a0 + 0.5 * nn;
      const double dm = s.pooled_mean() - m.m0;
      const double bn =
          m.b0 + 0.5 * (s.pooled_sse() + m.kappa0 * nn * dm * dm / kn);
      return std::lgamma(an) - std::lgamma(m.a0) + m.a0 * std::log(m.b0) -
             an * std::log(bn) + 0.5 * (std::log(m.kappa0) - std::log(kn)) -
             0.5 * nn * std::log(2.0 * M_PI);
    }
    double operator()(const JzsAnovaModel&) const {
      throw data_error("jzs evidence is not block-separable");
    }
    double operator()(const FlatModel&) const { return 0.0; }
  };
  return std::visit(V{stats}, model);
}

namespace {

// Collapsed one-way layout: y ~ N(mu + sigma * theta_block, sigma^2) with
// theta = Q beta, Q an orthonormal basis of the sum-to-zero block space,
// beta ~ N(0, g I_{d-1}). Integrating (mu, log sigma, beta) analytically
// leaves a 1-D integral over g whose integrand depends on the eigenvalues
// lambda of B = Q' (diag(M) - M M'/N) Q and on e = V' Q' M delta, where M
// holds block sizes and delta the centered block means.
struct JzsContext {
  long long n_total = 0;
  int d = 0;
  double ybar = 0, tss = 0, ssb = 0;
  std::vector<double> block_n;
  std::vector<double> lambda;            // d-1 eigenvalues of B
  std::vector<double> e;                 // effect loadings in the eigenbasis
  std::vector<double> e2;                // e squared
  std::vector<std::vector<double>> qv;   // d x (d-1), Q times eigenvectors
};

JzsContext jzs_context(const Partition& p, const GroupedGaussian& data) {
  JzsContext m;
  m.d = p.n_blocks();
  const int k = data.k_groups();
  std::vector<double> block_mean(m.d, 0.0);
  m.block_n.assign(m.d, 0.0);
  double sum = 0;
  for (int j = 0; j < k; ++j) {
    m.n_total += data.n[j];
    sum += double(data.n[j]) * data.mean[j];
    m.block_n[p.label(j)] += double(data.n[j]);
    block_mean[p.label(j)] += double(data.n[j]) * data.mean[j];
  }
  m.ybar = sum / double(m.n_total);
  for (int c = 0; c < m.d; ++c) block_mean[c] /= m.block_n[c];
  for (int j = 0; j < k; ++j) {
    const double dev = data.mean[j] - m.ybar;
    m.tss += data.sse[j] + double(data.n[j]) * dev * dev;
  }
  for (int c = 0; c < m.d; ++c) {
    const double dev = block_mean[c] - m.ybar;
    m.ssb += m.block_n[c] * dev * dev;
  }
  if (m.d < 2) return m;

  const int d = m.d, e = d - 1;
  // Helmert columns span the sum-to-zero subspace of block space
  Eigen::MatrixXd q(d, e);
  q.setZero();
  for (int j = 0; j < e; ++j) {
    const double norm = std::sqrt(double(j + 1) * double(j + 2));
    for (int c = 0; c <= j; ++c) q(c, j) = 1.0 / norm;
    q(j + 1, j) = -double(j + 1) / norm;
  }
  Eigen::VectorXd mn(d), delta(d);
  for (int c = 0; c < d; ++c) {
    mn(c) = m.block_n[c];
    delta(c) = block_mean[c] - m.ybar;
  }
  const Eigen::MatrixXd mq = mn.asDiagonal() * q;
  const Eigen::MatrixXd b =
      q.transpose() * mq - (q.transpose() * mn) * (mn.transpose() * q) /
                               double(m.n_total);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  const Eigen::VectorXd ev = es.eigenvalues();
  const Eigen::MatrixXd qv = q * es.eigenvectors();
  const Eigen::VectorXd coef = es.eigenvectors().transpose() *
                               (mq.transpose() * delta);
  m.lambda.resize(e);
  m.e.resize(e);
  m.e2.resize(e);
  m.qv.assign(d, std::vector<double>(e));
  for (int i = 0; i < e; ++i) {
    m.lambda[i] = std::max(ev(i), 0.0);
    m.e[i] = coef(i);
    m.e2[i] = coef(i) * coef(i);
    for (int c = 0; c < d; ++c) m.qv[c][i] = qv(c, i);
  }
  return m;
}

double log_u_integrand(double u, double nn, int d, double tss,
                       const std::vector<double>& lambda,
                       const std::vector<double>& e2, double r) {
  if (u <= 0.0) return kNegInf;
  double v = std::log(r) - 0.5 * std::log(2.0 * M_PI) - 1.5 * std::log(u) -
             r * r * (1.0 - u) / (2.0 * u);
  if (d != 2) {
    if (u >= 1.0) return kNegInf;
    v += 0.5 * (double(d) - 2.0) * std::log1p(-u);
  }
  double resid = tss;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double denom = (1.0 - u) + u * lambda[i];
    v -= 0.5 * std::log(denom);
    resid -= e2[i] * u / denom;
  }
  if (!(resid > 0.0)) return kNegInf;
  return v - 0.5 * (nn - 1.0) * std::log(resid);
}

struct QuadBudget {
  long long used = 0;
  long long cap = 0;
};

template <class F>
double adaptive_simpson(const F& f, double a, double m, double b, double fa,
                        double fm, double fb, double whole, double tol,
                        QuadBudget& budget) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  budget.used += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
  if (budget.used >= budget.cap)
    throw numerical_error("jzs quadrature: refinement cap reached",
                          std::abs(err) / 15.0);
  return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, budget) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, budget);
}

// integral of exp(logf(u) - shift) over (0,1); 64 seed panels so a narrow
// interior peak cannot hide from the error estimate
template <class LogF>
double integrate_unit_interval(const LogF& logf, double tol,
                               long long max_panels, double* shift_out) {
  constexpr int kSeed = 64;
  double node_log[kSeed + 1];
  double shift = kNegInf;
  for (int i = 0; i <= kSeed; ++i) {
    node_log[i] = logf(double(i) / kSeed);
    shift = std::max(shift, node_log[i]);
  }
  *shift_out = shift;
  if (shift == kNegInf) return 0.0;
  const auto f = [&](double u) { return std::exp(logf(u) - shift); };
  QuadBudget budget{0, max_panels};
  double total = 0.0;
  for (int i = 0; i < kSeed; ++i) {
    const double a = double(i) / kSeed, b = double(i + 1) / kSeed;
    const double m = 0.5 * (a + b);
    const double fa = std::exp(node_log[i] - shift);
    const double fb = std::exp(node_log[i + 1] - shift);
    const double fm = f(m);
    ++budget.used;
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson(f, a, m, b, fa, fm, fb, whole, tol / kSeed,
                              budget);
  }
  return total;
}

// posterior mean of w_i(u) = u / ((1-u) + u lambda_i), the shrinkage weight
// of the i-th effect eigencoordinate
std::vector<double> jzs_posterior_shrinkage(const JzsContext& ctx,
                                            const JzsAnovaModel& model) {
  const double nn = double(ctx.n_total);
  const auto logh = [&](double u) {
    return log_u_integrand(u, nn, ctx.d, ctx.tss, ctx.lambda, ctx.e2,
                           model.r);
  };
  double s0 = 0;
  const double i0 =
      integrate_unit_interval(logh, model.tol, model.max_panels, &s0);
  std::vector<double> wbar(ctx.lambda.size());
  for (std::size_t i = 0; i < ctx.lambda.size(); ++i) {
    const double lam = ctx.lambda[i];
    const auto logh_w = [&](double u) {
      if (u <= 0.0) return kNegInf;
      return std::log(u) - std::log((1.0 - u) + u * lam) + logh(u);
    };
    double s1 = 0;
    const double i1 =
        integrate_unit_interval(logh_w, model.tol, model.max_panels, &s1);
    wbar[i] = std::exp(s1 - s0) * i1 / i0;
  }
  return wbar;
}

}  // namespace

double jzs_log_marginal_moments(long long n_total, int d, double tss,
                                double ssb, double block_m, double r,
                                double tol, int max_panels) {
  if (d < 1) throw data_error("jzs: d must be >= 1");
  if (!(n_total > d + 1))
    throw data_error("jzs: needs total observations > blocks + 1");
  const double nn = double(n_total);
  if (!(tss > 0))
    throw numerical_error("jzs: zero total variation; evidence diverges");
  const double base = -std::log(2.0) - 0.5 * (nn - 1.0) * std::log(M_PI) -
                      0.5 * std::log(nn) + std::lgamma(0.5 * (nn - 1.0));
  if (d == 1) return base - 0.5 * (nn - 1.0) * std::log(tss);
  if (!(block_m > 0)) throw data_error("jzs: block size must be positive");
  if (!(tss - ssb > 1e-12 * tss))
    throw numerical_error("jzs: no residual variation; evidence diverges");
  // balanced design: every eigenvalue equals the common block size and the
  // effect loadings satisfy sum e_i^2 = block_m * ssb
  std::vector<double> lambda(std::size_t(d) - 1, block_m);
  std::vector<double> e2(std::size_t(d) - 1, 0.0);
  e2[0] = block_m * ssb;
  const auto logh = [&](double u) {
    return log_u_integrand(u, nn, d, tss, lambda, e2, r);
  };
  double shift = 0;
  const double integral =
      integrate_unit_interval(logh, tol, max_panels, &shift);
  if (!(integral > 0))
    throw numerical_error("jzs quadrature: integral underflow");
  return base + shift + std::log(integral);
}

double jzs_log_marginal(const Partition& p, const GroupedGaussian& data,
                        const JzsAnovaModel& model) {
  if (p.k_groups() != data.k_groups())
    throw data_error("jzs: partition/data size mismatch");
  const JzsContext ctx = jzs_context(p, data);
  if (!(ctx.n_total > ctx.d + 1))
    throw data_error("jzs: needs total observations > blocks + 1");
  const double nn = double(ctx.n_total);
  if (!(ctx.tss > 0))
    throw numerical_error("jzs: zero total variation; evidence diverges");
  const double base = -std::log(2.0) - 0.5 * (nn - 1.0) * std::log(M_PI) -
                      0.5 * std::log(nn) + std::lgamma(0.5 * (nn - 1.0));
  if (ctx.d == 1) return base - 0.5 * (nn - 1.0) * std::log(ctx.tss);
  if (!(ctx.tss - ctx.ssb > 1e-12 * ctx.tss))
    throw numerical_error("jzs: no residual variation; evidence diverges");
  const auto logh = [&](double u) {
    return log_u_integrand(u, nn, ctx.d, ctx.tss, ctx.lambda, ctx.e2,
                           model.r);
  };
  double shift = 0;
  const double integral =
      integrate_unit_interval(logh, model.tol, model.max_panels, &shift);
  if (!(integral > 0))
    throw numerical_error("jzs quadrature: integral underflow");
  return base + shift + std::log(integral);
}

double log_marginal(const ModelSpec& model, const Partition& p,
                    const GroupedData& data) {
  if (p.k_groups() != k_groups(data))
    throw data_error("log_marginal: partition/data size mismatch");
  check_compat(model, data);
  if (std::holds_alternative<FlatModel>(model)) return 0.0;
  if (std::holds_alternative<JzsAnovaModel>(model)) {
    return jzs_log_marginal(p, std::get<GroupedGaussian>(data),
                            std::get<JzsAnovaModel>(model));
  }
  double total = 0.0;
  std::vector<BlockStats> stats(p.n_blocks());
  std::visit(
      [&](const auto& d) {
        for (int j = 0; j < d.k_groups(); ++j) stats[p.label(j)].add(d, j);
      },
      data);
  for (const auto& s : stats) total += block_log_marginal(model, s);
  return total;
}

PairwiseBayesFactors pairwise_bayes_factors(const ModelSpec& model,
                                            const GroupedData& data) {
  const int k = k_groups(data);
  PairwiseBayesFactors out;
  out.k = k;
  out.log_bf_equal.assign(std::size_t(k) * k, 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const GroupedData pair = restrict_to_pair(data, i, j);
      const double eq = log_marginal(model, Partition::pooled(2), pair);
      const double ne = log_marginal(model, Partition::singletons(2), pair);
      out.log_bf_equal[std::size_t(i) * k + j] = eq - ne;
      out.log_bf_equal[std::size_t(j) * k + i] = eq - ne;
    }
  }
  return out;
}

std::vector<double> draw_group_parameters(const ModelSpec& model,
                                          const Partition& p,
                                          const GroupedData& data, Rng& rng) {
  if (p.k_groups() != k_groups(data))
    throw data_error("draw: partition/data size mismatch");
  check_compat(model, data);
  const int k = p.k_groups();
  const int d = p.n_blocks();
  if (std::holds_alternative<FlatModel>(model)) return {};

  if (std::holds_alternative<JzsAnovaModel>(model)) {
    const auto& m = std::get<JzsAnovaModel>(model);
    const auto& gd = std::get<GroupedGaussian>(data);
    const JzsContext ctx = jzs_context(p, gd);
    const double nn = double(ctx.n_total);
    const int e = d - 1;
    std::vector<double> w(std::size_t(std::max(e, 0)), 0.0);
    double resid = ctx.tss;
    if (d > 1) {
      // 256-point grid draw of u proportional to the integrand
      constexpr int kGrid = 256;
      std::vector<double> logw(kGrid);
      for (int i = 0; i < kGrid; ++i) {
        const double ui = (i + 0.5) / kGrid;
        logw[i] = log_u_integrand(ui, nn, d, ctx.tss, ctx.lambda, ctx.e2,
                                  m.r);
      }
      const double u = (rng.categorical_logw(logw) + 0.5) / kGrid;
      for (int i = 0; i < e; ++i) {
        w[i] = u / ((1.0 - u) + u * ctx.lambda[i]);
        resid -= ctx.e2[i] * w[i];
      }
    }
    const double sigma2 =
        0.5 * std::max(resid, 0.0) / rng.gamma(0.5 * (nn - 1.0));
    // effect eigencoordinates: mean w_i e_i, variance sigma2 w_i
    std::vector<double> eff(d, 0.0);
    for (int i = 0; i < e; ++i) {
      const double x =
          w[i] * ctx.e[i] + std::sqrt(sigma2 * w[i]) * rng.normal();
      for (int c = 0; c < d; ++c) eff[c] += ctx.qv[c][i] * x;
    }
    double msum = 0.0;
    for (int c = 0; c < d; ++c) msum += ctx.block_n[c] * eff[c];
    const double mu =
        ctx.ybar - msum / nn + std::sqrt(sigma2 / nn) * rng.normal();
    std::vector<double> theta(k);
    for (int j = 0; j < k; ++j) theta[j] = mu + eff[p.label(j)];
    return theta;
  }

  std::vector<BlockStats> stats(d);
  std::visit(
      [&](const auto& dd) {
        for (int j = 0; j < k; ++j) stats[p.label(j)].add(dd, j);
      },
      data);
  std::vector<double> block_draw(d, 0.0);
  for (int c = 0; c < d; ++c) {
    const auto& s = stats[c];
    if (std::holds_alternative<BinomialBetaModel>(model)) {
      const auto& m = std::get<BinomialBetaModel>(model);
      block_draw[c] = rng.beta(m.a + double(s.successes),
                               m.b + double(s.trials - s.successes));
    } else if (std::holds_alternative<NormalKnownVarModel>(model)) {
      const auto& m = std::get<NormalKnownVarModel>(model);
      const double prec = 1.0 / m.v0 + double(s.n) / m.sigma2;
      const double vn = 1.0 / prec;
      const double mean_n = vn * (m.m0 / m.v0 + s.sum / m.sigma2);
      block_draw[c] = mean_n + std::sqrt(vn) * rng.normal();
    } else {
      const auto& m = std::get<NormalNigModel>(model);
      const double nn = double(s.n);
      const double kn = m.kappa0 + nn;
      const double an = m.a0 + 0.5 * nn;
      const double dm = s.pooled_mean() - m.m0;
      const double bn =
          m.b0 + 0.5 * (s.pooled_sse() + m.kappa0 * nn * dm * dm / kn);
      const double sigma2 = bn / rng.gamma(an);
      const double mn = (m.kappa0 * m.m0 + s.sum) / kn;
      block_draw[c] = mn + std::sqrt(sigma2 / kn) * rng.normal();
    }
  }
  std::vector<double> out(k);
  for (int j = 0; j < k; ++j) out[j] = block_draw[p.label(j)];
  return out;
}

std::vector<double> group_posterior_means(const ModelSpec& model,
                                          const Partition& p,
                                          const GroupedData& data) {
  if (p.k_groups() != k_groups(data))
    throw data_error("means: partition/data size mismatch");
  check_compat(model, data);
  const int k = p.k_groups();
  const int d = p.n_blocks();
  if (std::holds_alternative<FlatModel>(model)) return {};

  if (std::holds_alternative<JzsAnovaModel>(model)) {
    const auto& m = std::get<JzsAnovaModel>(model);
    const auto& gd = std::get<GroupedGaussian>(data);
    const JzsContext ctx = jzs_context(p, gd);
    std::vector<double> out(k, ctx.ybar);
    if (d > 1) {
      const std::vector<double> wbar = jzs_posterior_shrinkage(ctx, m);
      std::vector<double> eff(d, 0.0);
      for (int i = 0; i < d - 1; ++i) {
        const double x = wbar[i] * ctx.e[i];
        for (int c = 0; c < d; ++c) eff[c] += ctx.qv[c][i] * x;
      }
      double msum = 0.0;
      for (int c = 0; c < d; ++c) msum += ctx.block_n[c] * eff[c];
      const double shift = msum / double(ctx.n_total);
      for (int j = 0; j < k; ++j)
        out[j] = ctx.ybar - shift + eff[p.label(j)];
    }
    return out;
  }

  std::vector<BlockStats> stats(d);
  std::visit(
      [&](const auto& dd) {
        for (int j = 0; j < k; ++j) stats[p.label(j)].add(dd, j);
      },
      data);
  std::vector<double> block_mean(d, 0.0);
  for (int c = 0; c < d; ++c) {
    const auto& s = stats[c];
    if (std::holds_alternative<BinomialBetaModel>(model)) {
      const auto& m = std::get<BinomialBetaModel>(model);
      block_mean[c] = (m.a + double(s.successes)) /
                      (m.a + m.b + double(s.trials));
    } else if (std::holds_alternative<NormalKnownVarModel>(model)) {
      const auto& m = std::get<NormalKnownVarModel>(model);
      const double prec = 1.0 / m.v0 + double(s.n) / m.sigma2;
      block_mean[c] = (m.m0 / m.v0 + s.sum / m.sigma2) / prec;
    } else {
      const auto& m = std::get<NormalNigModel>(model);
      block_mean[c] = (m.kappa0 * m.m0 + s.sum) / (m.kappa0 + double(s.n));
    }
  }
  std::vector<double> out(k);
  for (int j = 0; j < k; ++j) out[j] = block_mean[p.label(j)];
  return out;
}

}  // namespace parteq
