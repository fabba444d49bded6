// Apache License, Version 2.0, refer to LICENSE.txt
// Times the OpenMP paths against the serial reference (threads = 1) and
// checks that both produce bit-identical results.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "parteq/inference.hpp"
#include "parteq/study.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double wall_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

parteq::GroupedCounts synthetic_counts(int k) {
  parteq::GroupedCounts d;
  parteq::Rng rng(99);
  for (int j = 0; j < k; ++j) {
    d.trials.push_back(200);
    const double p = 0.3 + 0.4 * ((j % 3) / 2.0);
    long long e = 0;
    for (int i = 0; i < 200; ++i) e += rng.uniform() < p;
    d.successes.push_back(e);
  }
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  int exact_k = 11;
  int gibbs_k = 24;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--quick") {
      exact_k = 9;
      gibbs_k = 12;
    }

#ifdef _OPENMP
  std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("openmp disabled; both columns run serial code\n");
#endif

  const auto prior = parteq::PriorSpec::BetaBinomial(1.0, 1.0);
  const parteq::ModelSpec model = parteq::BinomialBetaModel{};

  {
    const parteq::GroupedData data = synthetic_counts(exact_k);
    parteq::ExactConfig serial;
    serial.threads = 1;
    parteq::ExactConfig parallel;
    parallel.threads = 0;
    double t0 = wall_ms();
    const auto a = parteq::exact_posterior(prior, model, data, serial);
    const double serial_ms = wall_ms() - t0;
    t0 = wall_ms();
    const auto b = parteq::exact_posterior(prior, model, data, parallel);
    const double parallel_ms = wall_ms() - t0;
    const bool same = bitwise_equal(a.pairwise_equal, b.pairwise_equal) &&
                      bitwise_equal(a.size_probs, b.size_probs) &&
                      a.log_normalizer == b.log_normalizer;
    std::printf("exact_posterior k=%d: serial %.1f ms, parallel %.1f ms, "
                "speedup %.2fx, bitwise identical: %s\n",
                exact_k, serial_ms, parallel_ms, serial_ms / parallel_ms,
                same ? "yes" : "NO");
    if (!same) return 1;
  }

  {
    const parteq::GroupedData data = synthetic_counts(gibbs_k);
    parteq::SamplerConfig serial;
    serial.iterations = 4000;
    serial.burnin = 500;
    serial.chains = 4;
    serial.threads = 1;
    parteq::SamplerConfig parallel = serial;
    parallel.threads = 0;
    double t0 = wall_ms();
    const auto a = parteq::gibbs_run(prior, model, data, serial);
    const double serial_ms = wall_ms() - t0;
    t0 = wall_ms();
    const auto b = parteq::gibbs_run(prior, model, data, parallel);
    const double parallel_ms = wall_ms() - t0;
    const bool same = bitwise_equal(a.pairwise_equal, b.pairwise_equal) &&
                      bitwise_equal(a.size_probs, b.size_probs);
    std::printf("gibbs_run k=%d (4 chains): serial %.1f ms, parallel %.1f ms, "
                "speedup %.2fx, bitwise identical: %s\n",
                gibbs_k, serial_ms, parallel_ms, serial_ms / parallel_ms,
                same ? "yes" : "NO");
    if (!same) return 1;
  }

  {
    parteq::StudyConfig cfg;
    cfg.k = 5;
    cfg.n_per_group = 50;
    cfg.reps = 16;
    cfg.equality_fraction = 1.0;
    cfg.priors = {parteq::PriorSpec::Uniform(),
                  parteq::PriorSpec::BetaBinomial(1.0, 5.0)};
    cfg.model = parteq::NormalKnownVarModel{};
    cfg.threads = 1;
    double t0 = wall_ms();
    const auto a = parteq::run_study(cfg);
    const double serial_ms = wall_ms() - t0;
    cfg.threads = 0;
    t0 = wall_ms();
    const auto b = parteq::run_study(cfg);
    const double parallel_ms = wall_ms() - t0;
    bool same = a.summaries.size() == b.summaries.size();
    for (std::size_t i = 0; same && i < a.summaries.size(); ++i)
      same = a.summaries[i].fwer == b.summaries[i].fwer &&
             a.summaries[i].false_null_rate == b.summaries[i].false_null_rate;
    std::printf("run_study k=5 reps=16: serial %.1f ms, parallel %.1f ms, "
                "speedup %.2fx, identical summaries: %s\n",
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                same ? "yes" : "NO");
    if (!same) return 1;
  }
  return 0;
}
