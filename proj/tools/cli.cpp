// Apache License, Version 2.0, refer to LICENSE.txt
#include <cstdio>
#include <iostream>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "parteq/combinatorics.hpp"
#include "parteq/errors.hpp"
#include "parteq/inference.hpp"
#include "parteq/io.hpp"
#include "parteq/partition.hpp"
#include "parteq/priors.hpp"
#include "parteq/study.hpp"

namespace {

using parteq::Json;

// Exit codes: 0 ok, 2 usage, 3 data, 4 numerical, 5 capacity.
struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

void print_error(const std::string& type, const std::string& message) {
  Json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  std::cerr << j.dump() << "\n";
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// quotes CSV fields only when the content requires it
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

struct CombinatArgs {
  std::string op;
  std::vector<long long> args;
};

int run_combinat(const CombinatArgs& a) {
  const auto need = [&](std::size_t n) {
    if (a.args.size() != n)
      throw usage_error("combinat " + a.op + " takes " + std::to_string(n) +
                        " integer argument(s)");
  };
  const auto arg = [&](std::size_t i) {
    if (a.args[i] < 0 || a.args[i] > 1u << 20)
      throw usage_error("combinat: argument out of range");
    return int(a.args[i]);
  };
  parteq::combinatorics::BigCount v;
  if (a.op == "bell") {
    need(1);
    v = parteq::combinatorics::bell(arg(0));
  } else if (a.op == "stirling2") {
    need(2);
    v = parteq::combinatorics::stirling2(arg(0), arg(1));
  } else if (a.op == "rbell") {
    need(2);
    v = parteq::combinatorics::r_bell(arg(0), arg(1));
  } else if (a.op == "rstirling2") {
    need(3);
    v = parteq::combinatorics::r_stirling2(arg(0), arg(1), arg(2));
  } else if (a.op == "binomial") {
    need(2);
    v = parteq::combinatorics::binomial(arg(0), arg(1));
  } else if (a.op == "factorial") {
    need(1);
    v = parteq::combinatorics::factorial(arg(0));
  } else {
    throw usage_error("combinat: unknown operation '" + a.op +
                      "' (bell, stirling2, rbell, rstirling2, binomial, "
                      "factorial)");
  }
  std::cout << v << "\n";
  return 0;
}

int run_enumerate(int k) {
  parteq::for_each_partition(
      k, [](const parteq::Partition& p) { std::cout << p.to_string() << "\n"; });
  return 0;
}

struct PriorsArgs {
  int k = 5;
  std::vector<std::string> priors;
  bool by_size = false;
  std::string out;
};

int run_priors(const PriorsArgs& a) {
  std::vector<parteq::PriorSpec> specs;
  for (const auto& s : a.priors) {
    try {
      specs.push_back(parteq::parse_prior(s, a.k));
    } catch (const parteq::data_error& e) {
      throw usage_error(e.what());
    }
  }
  std::string csv;
  if (a.by_size) {
    csv = "prior,d,probability,log_probability\n";
    for (const auto& spec : specs) {
      const auto logp = parteq::size_log_pmf(spec, a.k);
      for (int d = 1; d <= a.k; ++d)
        csv += csv_field(spec.label()) + "," + std::to_string(d) + "," +
               fmt17(std::exp(logp[d - 1])) + "," + fmt17(logp[d - 1]) + "\n";
    }
  } else {
    csv = "prior,partition,d,probability,log_probability\n";
    const auto parts = parteq::all_partitions(a.k);
    for (const auto& spec : specs) {
      for (const auto& p : parts) {
        const double lp = parteq::log_pmf(spec, p);
        csv += csv_field(spec.label()) + "," + csv_field(p.to_string()) +
               "," + std::to_string(p.n_blocks()) + "," +
               fmt17(std::exp(lp)) + "," + fmt17(lp) + "\n";
      }
    }
  }
  for (const auto& spec : specs)
    if (spec.kind == parteq::PriorKind::kDirichletProcess && spec.dp_symmetric)
      std::cerr << spec.label()
                << ": alpha = " << fmt17(parteq::dp_alpha_for(spec, a.k))
                << "\n";
  if (a.out.empty())
    std::cout << csv;
  else
    parteq::write_file(a.out, csv);
  return 0;
}

struct TestArgs {
  std::string kind;
  std::string input;
  std::string prior = "bb:1,1";
  std::string model;
  bool exact = false;
  bool force_mcmc = false;
  int iterations = 12000;
  int burnin = 2000;
  int chains = 4;
  int thin = 1;
  std::uint64_t seed = 1;
  int threads = 0;
  int draws = 0;
  int top = 64;
  std::string out;
};

int run_test(const TestArgs& a, const std::vector<std::string>& argv) {
  if (a.exact && a.force_mcmc)
    throw usage_error("test: --exact conflicts with --force-mcmc");
  if (a.top < 0) throw usage_error("test: --top must be >= 0");
  const std::string started = parteq::iso8601_utc_now();
  const std::string input_bytes = parteq::read_file(a.input);
  const parteq::GroupedData data = parteq::read_grouped_csv(a.input);
  const int k = parteq::k_groups(data);
  if (k < 2)
    throw parteq::data_error("test: need at least 2 groups, got " +
                             std::to_string(k));

  const bool have_counts = std::holds_alternative<parteq::GroupedCounts>(data);
  if (a.kind == "proportions" && !have_counts)
    throw parteq::data_error(
        "test proportions: input must use the group,successes,trials schema");
  if (a.kind == "means" && have_counts)
    throw parteq::data_error(
        "test means: input must use a gaussian schema (group,value or "
        "group,n,mean,sd)");

  parteq::ModelSpec model;
  if (!a.model.empty()) {
    try {
      model = parteq::parse_model(a.model);
    } catch (const parteq::data_error& e) {
      throw usage_error(e.what());
    }
    const bool flat = std::holds_alternative<parteq::FlatModel>(model);
    if (!flat && parteq::wants_counts(model) != have_counts)
      throw parteq::data_error("test: model '" + a.model +
                               "' does not match the input schema");
  } else if (a.kind == "proportions") {
    model = parteq::BinomialBetaModel{};
  } else {
    model = parteq::JzsAnovaModel{};
  }

  parteq::PriorSpec prior;
  try {
    prior = parteq::parse_prior(a.prior, k);
  } catch (const parteq::data_error& e) {
    throw usage_error(e.what());
  }

  const bool use_exact = !a.force_mcmc && (a.exact || k <= 8);
  parteq::PosteriorSummary summary;
  if (use_exact) {
    parteq::ExactConfig cfg;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.param_draws = a.draws;
    cfg.top_partitions = a.top;  // 0 keeps the full enumeration
    summary = parteq::exact_posterior(prior, model, data, cfg);
  } else {
    parteq::SamplerConfig cfg;
    cfg.iterations = a.iterations;
    cfg.burnin = a.burnin;
    cfg.chains = a.chains;
    cfg.thin = a.thin;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.collect_draws = a.draws > 0;
    if (a.draws > 0) cfg.max_param_draws = a.draws;
    summary = parteq::gibbs_run(prior, model, data, cfg);
  }
  if (a.top > 0 && summary.top.size() > std::size_t(a.top)) {
    summary.top.resize(a.top);
    summary.top_truncated = true;
  }

  const Json payload_json =
      parteq::result_json(summary, prior.label(), parteq::model_label(model));
  const std::string payload = parteq::dump_json(payload_json);
  if (a.out.empty()) {
    std::cout << payload;
    return 0;
  }
  parteq::write_file(a.out, payload);
  Json echo;
  echo["kind"] = a.kind;
  echo["input"] = a.input;
  echo["prior"] = prior.label();
  echo["model"] = parteq::model_label(model);
  echo["method"] = summary.method;
  echo["iterations"] = a.iterations;
  echo["burnin"] = a.burnin;
  echo["chains"] = a.chains;
  echo["thin"] = a.thin;
  echo["draws"] = a.draws;
  echo["top"] = a.top;
  const Json manifest = parteq::make_manifest(
      argv, a.seed, echo, {{a.input, parteq::fnv1a64_hex(input_bytes)}},
      a.out, parteq::fnv1a64_hex(payload), started,
      parteq::iso8601_utc_now());
  parteq::write_file(a.out + ".manifest.json", parteq::dump_json(manifest));
  return 0;
}

struct SimulateArgs {
  int k = 5;
  int n = 100;
  int reps = 100;
  double equalities = 0.0;
  double step = 0.20;
  std::string priors = "uniform,bb:1,k,dp:symmetric";
  std::string model = "jzs";
  double threshold = 0.5;
  std::uint64_t seed = 1;
  int threads = 0;
  int iterations = 6000;
  int burnin = 1000;
  int chains = 2;
  std::string out;
};

int run_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const std::string started = parteq::iso8601_utc_now();
  parteq::StudyConfig cfg;
  cfg.k = a.k;
  cfg.n_per_group = a.n;
  cfg.reps = a.reps;
  cfg.equality_fraction = a.equalities;
  cfg.effect_step = a.step;
  try {
    cfg.priors = parteq::parse_prior_list(a.priors, a.k);
    cfg.model = parteq::parse_model(a.model);
  } catch (const parteq::data_error& e) {
    throw usage_error(e.what());
  }
  cfg.decision_threshold = a.threshold;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.sampler.iterations = a.iterations;
  cfg.sampler.burnin = a.burnin;
  cfg.sampler.chains = a.chains;

  const parteq::StudyResult result = parteq::run_study(cfg);
  const std::string summary = parteq::dump_json(study_summary_json(result));
  if (!a.out.empty()) {
    const std::string csv = parteq::study_csv(result);
    parteq::write_file(a.out, csv);
    Json echo;
    echo["k"] = a.k;
    echo["n"] = a.n;
    echo["reps"] = a.reps;
    echo["equalities"] = a.equalities;
    echo["step"] = a.step;
    echo["priors"] = a.priors;
    echo["model"] = a.model;
    echo["threshold"] = a.threshold;
    echo["iterations"] = a.iterations;
    echo["burnin"] = a.burnin;
    echo["chains"] = a.chains;
    const Json manifest = parteq::make_manifest(
        argv, a.seed, echo, {}, a.out, parteq::fnv1a64_hex(csv), started,
        parteq::iso8601_utc_now());
    parteq::write_file(a.out + ".manifest.json", parteq::dump_json(manifest));
  }
  std::cout << summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian equality testing across groups via partition priors"};
  app.require_subcommand(1);

  CombinatArgs combinat;
  auto* sub_combinat =
      app.add_subcommand("combinat", "evaluate partition-counting numbers");
  sub_combinat->add_option("op", combinat.op,
                           "bell | stirling2 | rbell | rstirling2 | binomial "
                           "| factorial")
      ->required();
  sub_combinat->add_option("args", combinat.args, "integer arguments");

  int enum_k = 0;
  auto* sub_enumerate =
      app.add_subcommand("enumerate", "list all partitions of k groups");
  sub_enumerate->add_option("--k", enum_k, "number of groups")->required();

  PriorsArgs priors;
  auto* sub_priors =
      app.add_subcommand("priors", "tabulate partition prior pmfs");
  sub_priors->add_option("--k", priors.k, "number of groups")->required();
  sub_priors
      ->add_option("--prior", priors.priors,
                   "prior spec (repeatable): uniform | bb:A,B | bb:A,k | "
                   "bb:A,k2 | dp:A | dp:symmetric")
      ->required();
  sub_priors->add_flag("--by-size", priors.by_size,
                       "tabulate the block-count pmf instead of partitions");
  sub_priors->add_option("--out", priors.out, "write CSV here (else stdout)");

  TestArgs test;
  auto* sub_test = app.add_subcommand(
      "test", "posterior over equality configurations for grouped data");
  sub_test->add_option("kind", test.kind, "proportions | means")
      ->required()
      ->check(CLI::IsMember({"proportions", "means"}));
  sub_test->add_option("--input", test.input, "CSV input path")->required();
  sub_test->add_option("--prior", test.prior, "partition prior spec");
  sub_test->add_option("--model", test.model,
                       "override the data model (binom:A,B, normal:S2,M0,V0, "
                       "nig:M0,K0,A0,B0, jzs:R, flat)");
  sub_test->add_flag("--exact", test.exact,
                     "force exact enumeration (k <= 12)");
  sub_test->add_flag("--force-mcmc", test.force_mcmc,
                     "force the Gibbs sampler even for small k");
  sub_test->add_option("--iterations", test.iterations, "Gibbs sweeps");
  sub_test->add_option("--burnin", test.burnin, "discarded sweeps");
  sub_test->add_option("--chains", test.chains, "independent chains");
  sub_test->add_option("--thin", test.thin, "keep every thin-th sweep");
  sub_test->add_option("--seed", test.seed, "RNG seed");
  sub_test->add_option("--threads", test.threads, "worker cap (0 = auto)");
  sub_test->add_option("--draws", test.draws,
                       "posterior parameter draws to collect");
  sub_test->add_option("--top", test.top,
                       "partitions kept in the payload (0 = all)");
  sub_test->add_option("--out", test.out,
                       "write JSON here plus a sibling manifest");

  SimulateArgs sim;
  auto* sub_simulate = app.add_subcommand(
      "simulate", "error-rate study on synthetic gaussian data");
  sub_simulate->add_option("--k", sim.k, "number of groups");
  sub_simulate->add_option("--n", sim.n, "observations per group");
  sub_simulate->add_option("--reps", sim.reps, "replications");
  sub_simulate->add_option("--equalities", sim.equalities,
                           "fraction of true equalities in [0,1]");
  sub_simulate->add_option("--step", sim.step, "block mean step");
  sub_simulate->add_option("--priors", sim.priors,
                           "comma-separated prior specs");
  sub_simulate->add_option("--model", sim.model, "data model");
  sub_simulate->add_option("--threshold", sim.threshold,
                           "claim a difference when P(neq) exceeds this");
  sub_simulate->add_option("--seed", sim.seed, "RNG seed");
  sub_simulate->add_option("--threads", sim.threads, "worker cap (0 = auto)");
  sub_simulate->add_option("--iterations", sim.iterations,
                           "Gibbs sweeps (k > 8 only)");
  sub_simulate->add_option("--burnin", sim.burnin, "discarded sweeps");
  sub_simulate->add_option("--chains", sim.chains, "chains per fit");
  sub_simulate->add_option("--out", sim.out,
                           "write the per-rep CSV here plus a manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  const std::vector<std::string> args(argv, argv + argc);
  try {
    if (sub_combinat->parsed()) return run_combinat(combinat);
    if (sub_enumerate->parsed()) return run_enumerate(enum_k);
    if (sub_priors->parsed()) return run_priors(priors);
    if (sub_test->parsed()) return run_test(test, args);
    if (sub_simulate->parsed()) return run_simulate(sim, args);
  } catch (const usage_error& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const parteq::data_error& e) {
    print_error("data", e.what());
    return 3;
  } catch (const parteq::capacity_error& e) {
    print_error("capacity", e.what());
    return 5;
  } catch (const parteq::numerical_error& e) {
    print_error("numerical", e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
