// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "parteq/errors.hpp"
#include "parteq/io.hpp"
#include "parteq/models.hpp"
#include "parteq/numeric.hpp"
#include "parteq/partition.hpp"

using namespace parteq;

namespace {

GroupedCounts counts2() {
  return GroupedCounts{{3, 5}, {10, 10}, {"a", "b"}};
}

GroupedGaussian tiny2() {
  // raw values {1.2,-0.4,0.8,0.3} and {-0.9,0.1,-1.3}
  return GroupedGaussian{{4, 3},
                         {0.47500000000000003, -0.7000000000000001},
                         {1.4275, 1.04},
                         {"g1", "g2"}};
}

GroupedGaussian three_unbalanced() {
  // raw: {0.5,1.1,-0.3,0.9,0.2} {-0.6,-1.0,0.1} {1.9,2.3,1.5,2.8}
  return GroupedGaussian{{5, 3, 4},
                         {0.4800000000000001, -0.5, 2.125},
                         {1.248, 0.62, 0.9274999999999998},
                         {"a", "b", "c"}};
}

GroupedGaussian balanced2() {
  return GroupedGaussian{{8, 8},
                         {0.35375, -0.4225},
                         {6.3783875000000005, 5.42515},
                         {"yA", "yB"}};
}

}  // namespace

TEST_CASE("data validation") {
  CHECK_THROWS_AS(validate(GroupedCounts{{}, {}, {}}), data_error);
  CHECK_THROWS_AS(validate(GroupedCounts{{5}, {4}, {"a"}}), data_error);
  CHECK_THROWS_AS(validate(GroupedCounts{{-1}, {4}, {"a"}}), data_error);
  CHECK_THROWS_AS(validate(GroupedCounts{{1, 2}, {4}, {"a"}}), data_error);
  CHECK_NOTHROW(validate(counts2()));
  CHECK_THROWS_AS(validate(GroupedGaussian{{0}, {0.0}, {0.0}, {"a"}}),
                  data_error);
  CHECK_THROWS_AS(validate(GroupedGaussian{{2}, {0.0}, {-1.0}, {"a"}}),
                  data_error);
  CHECK_THROWS_AS(validate(GroupedGaussian{{1}, {0.0}, {0.5}, {"a"}}),
                  data_error);
  CHECK_NOTHROW(validate(tiny2()));
}

TEST_CASE("model spec labels parse back") {
  for (const char* spec : {"binom", "binom:2,3", "normal", "normal:2,0,4",
                           "nig", "nig:0,1,2,3", "jzs", "jzs:0.5", "flat"}) {
    const ModelSpec m = parse_model(spec);
    const ModelSpec back = parse_model(model_label(m));
    CHECK(model_label(back) == model_label(m));
  }
  CHECK(wants_counts(parse_model("binom")));
  CHECK_FALSE(wants_counts(parse_model("jzs")));
  CHECK_FALSE(wants_counts(parse_model("flat")));
  CHECK_THROWS_AS((void)parse_model("what"), data_error);
  CHECK_THROWS_AS((void)parse_model("binom:1"), data_error);
  CHECK_THROWS_AS((void)parse_model("binom:0,1"), data_error);
  CHECK_THROWS_AS((void)parse_model("jzs:-1"), data_error);
  CHECK_THROWS_AS((void)parse_model("jzs:1,2"), data_error);
}

TEST_CASE("model and data kinds must match") {
  const GroupedData counts = counts2();
  const GroupedData gauss = tiny2();
  const Partition p2 = Partition::pooled(2);
  CHECK_THROWS_AS((void)log_marginal(parse_model("jzs"), p2, counts),
                  data_error);
  CHECK_THROWS_AS((void)log_marginal(parse_model("binom"), p2, gauss),
                  data_error);
  CHECK_THROWS_AS((void)log_marginal(parse_model("normal"), p2, counts),
                  data_error);
  CHECK_NOTHROW((void)log_marginal(parse_model("flat"), p2, counts));
  CHECK_NOTHROW((void)log_marginal(parse_model("flat"), p2, gauss));
  CHECK_THROWS_AS(
      (void)log_marginal(parse_model("binom"), Partition::pooled(3), counts),
      data_error);
}

TEST_CASE("binomial evidence: exact fractions") {
  // Beta(1,1): a single group with 1 success of 2 trials integrates to 1/3
  const GroupedData one = GroupedCounts{{1}, {2}, {"a"}};
  CHECK(log_marginal(BinomialBetaModel{}, Partition::pooled(1), one) ==
        doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-13));

  // pooled vs split on s=(3,5), t=(10,10)
  const GroupedData data = counts2();
  const double m_null =
      log_marginal(BinomialBetaModel{}, Partition::pooled(2), data);
  const double m_full =
      log_marginal(BinomialBetaModel{}, Partition::singletons(2), data);
  CHECK(m_null == doctest::Approx(-4.471400669776302).epsilon(1e-13));
  CHECK(m_full == doctest::Approx(-4.795790545596741).epsilon(1e-13));
  // uniform prior over the two configurations
  CHECK(1.0 / (1.0 + std::exp(m_full - m_null)) ==
        doctest::Approx(5808.0 / 10007.0).epsilon(1e-13));
}

TEST_CASE("block evidence adds over blocks for separable models") {
  const GroupedData counts = GroupedCounts{{3, 5, 2, 7}, {10, 10, 9, 12},
                                           {"a", "b", "c", "d"}};
  const GroupedData gauss = three_unbalanced();
  for (const char* spec : {"binom:2,3", "normal:1.5,0.2,2", "nig:0,1,2,3"}) {
    const ModelSpec m = parse_model(spec);
    const GroupedData& data = wants_counts(m) ? counts : gauss;
    const int k = k_groups(data);
    for_each_partition(k, [&](const Partition& p) {
      double total = 0.0;
      for (const auto& block : p.blocks()) {
        BlockStats s;
        for (int j : block)
          std::visit([&](const auto& d) { s.add(d, j); }, data);
        total += block_log_marginal(m, s);
      }
      CHECK(log_marginal(m, p, data) == doctest::Approx(total).epsilon(1e-12));
    });
  }
  BlockStats empty;
  CHECK(block_log_marginal(parse_model("binom"), empty) == 0.0);
  CHECK_THROWS_AS((void)block_log_marginal(parse_model("jzs"), empty),
                  data_error);
}

TEST_CASE("known-variance normal evidence") {
  // one observation, prior N(0,1), noise 1: evidence N(0 | 0, 2)
  const GroupedData one = GroupedGaussian{{1}, {0.0}, {0.0}, {"a"}};
  CHECK(log_marginal(NormalKnownVarModel{}, Partition::pooled(1), one) ==
        doctest::Approx(log_normal_pdf(0.0, 0.0, 2.0)).epsilon(1e-13));
  const GroupedData one2 = GroupedGaussian{{1}, {0.7}, {0.0}, {"a"}};
  CHECK(log_marginal(NormalKnownVarModel{2.0, 0.1, 3.0}, Partition::pooled(1),
                     one2) ==
        doctest::Approx(log_normal_pdf(0.7, 0.1, 5.0)).epsilon(1e-13));
}

TEST_CASE("one-way evidence matches independent oracles") {
  const JzsAnovaModel m;
  const GroupedGaussian two = tiny2();
  // adaptive quadrature vs an independent integrator and a brute-force
  // integral over the un-collapsed parameter space
  CHECK(jzs_log_marginal(Partition::singletons(2), two, m) ==
        doctest::Approx(-8.747424240050151).epsilon(1e-9));
  CHECK(jzs_log_marginal(Partition::pooled(2), two, m) ==
        doctest::Approx(-9.134344889123987).epsilon(1e-12));

  const GroupedGaussian three = three_unbalanced();
  CHECK(jzs_log_marginal(Partition::parse("0,1,2"), three, m) ==
        doctest::Approx(-14.8924645668).epsilon(1e-8));
  CHECK(jzs_log_marginal(Partition::parse("0,0,1"), three, m) ==
        doctest::Approx(-15.2847378379).epsilon(1e-8));
  CHECK(jzs_log_marginal(Partition::parse("0,1,1"), three, m) ==
        doctest::Approx(-20.3167889247).epsilon(1e-8));
  CHECK(jzs_log_marginal(Partition::parse("0,1,0"), three, m) ==
        doctest::Approx(-18.0982912768).epsilon(1e-8));

  // two balanced groups: the standard two-sample default-prior Bayes factor
  // (effect-size scale sqrt(2) * r)
  const GroupedGaussian bal = balanced2();
  const double bf10 = jzs_log_marginal(Partition::singletons(2), bal, m) -
                      jzs_log_marginal(Partition::pooled(2), bal, m);
  CHECK(bf10 == doctest::Approx(-0.19948039766452408).epsilon(1e-8));

  // balanced-moments entry point agrees with the general path exactly
  const double gbar = 0.5 * (0.35375 - 0.4225);
  const double da = 0.35375 - gbar, db = -0.4225 - gbar;
  const double ssb = 8 * da * da + 8 * db * db;
  const double tss = 6.3783875000000005 + 5.42515 + ssb;
  CHECK(jzs_log_marginal_moments(16, 2, tss, ssb, 8.0, 1.0, 1e-8, 1 << 20) ==
        jzs_log_marginal(Partition::singletons(2), bal, m));
}

TEST_CASE("one-way evidence is invariant to group order") {
  const GroupedGaussian g{{5, 3, 4, 6},
                          {0.48, -0.5, 2.125, 0.9},
                          {1.248, 0.62, 0.9275, 2.11},
                          {"a", "b", "c", "d"}};
  const JzsAnovaModel m;
  const std::vector<int> perm{2, 0, 3, 1};
  GroupedGaussian pg;
  pg.n.resize(4);
  pg.mean.resize(4);
  pg.sse.resize(4);
  pg.names.resize(4);
  for (int j = 0; j < 4; ++j) {
    pg.n[std::size_t(perm[std::size_t(j)])] = g.n[std::size_t(j)];
    pg.mean[std::size_t(perm[std::size_t(j)])] = g.mean[std::size_t(j)];
    pg.sse[std::size_t(perm[std::size_t(j)])] = g.sse[std::size_t(j)];
    pg.names[std::size_t(perm[std::size_t(j)])] = g.names[std::size_t(j)];
  }
  for_each_partition(4, [&](const Partition& p) {
    std::vector<int> plabels(4);
    for (int j = 0; j < 4; ++j)
      plabels[std::size_t(perm[std::size_t(j)])] = p.label(j);
    const Partition pp = Partition::from_labels(plabels);
    CHECK(std::abs(jzs_log_marginal(p, g, m) - jzs_log_marginal(pp, pg, m)) <=
          1e-8);
  });
}

TEST_CASE("one-way evidence shifts predictably under data rescaling") {
  const GroupedGaussian g = three_unbalanced();
  const JzsAnovaModel m;
  const double c = 3.7;
  GroupedGaussian scaled = g;
  for (std::size_t j = 0; j < 3; ++j) {
    scaled.mean[j] *= c;
    scaled.sse[j] *= c * c;
  }
  const double nn = 12.0;
  for_each_partition(3, [&](const Partition& p) {
    const double lm = jzs_log_marginal(p, g, m);
    const double lms = jzs_log_marginal(p, scaled, m);
    CHECK(std::abs(lms - (lm - (nn - 1.0) * std::log(c))) <= 1e-6);
  });
  // hence Bayes factors between partitions are scale-free
  const double bf = jzs_log_marginal(Partition::singletons(3), g, m) -
                    jzs_log_marginal(Partition::pooled(3), g, m);
  const double bfs = jzs_log_marginal(Partition::singletons(3), scaled, m) -
                     jzs_log_marginal(Partition::pooled(3), scaled, m);
  CHECK(std::abs(bf - bfs) <= 1e-6);
}

TEST_CASE("one-way evidence penalizes needless splits") {
  // identical group moments: pooling must win, and more decisively with n
  double last = 0.0;
  for (long long n : {20LL, 100LL, 400LL}) {
    const GroupedGaussian g{{n, n},
                            {0.0, 0.0},
                            {double(n - 1), double(n - 1)},
                            {"a", "b"}};
    const JzsAnovaModel m;
    const double bf01 = jzs_log_marginal(Partition::pooled(2), g, m) -
                        jzs_log_marginal(Partition::singletons(2), g, m);
    CHECK(bf01 > last);
    last = bf01;
  }
  CHECK(last > std::log(10.0));  // n=400, t=0: strong support for equality
}

TEST_CASE("quadrature tolerance tightening is stable") {
  const GroupedGaussian g = three_unbalanced();
  JzsAnovaModel coarse;
  coarse.tol = 1e-6;
  JzsAnovaModel fine;
  fine.tol = 1e-10;
  for_each_partition(3, [&](const Partition& p) {
    CHECK(std::abs(jzs_log_marginal(p, g, coarse) -
                   jzs_log_marginal(p, g, fine)) < 1e-7);
  });
}

TEST_CASE("quadrature failure paths") {
  const JzsAnovaModel m;
  // no variation at all
  const GroupedGaussian flat{{5, 5}, {1.0, 1.0}, {0.0, 0.0}, {"a", "b"}};
  CHECK_THROWS_AS(
      (void)jzs_log_marginal(Partition::singletons(2), flat, m),
      numerical_error);
  // no residual variation: block means explain everything
  const GroupedGaussian sep{{5, 5}, {0.0, 1.0}, {0.0, 0.0}, {"a", "b"}};
  CHECK_THROWS_AS((void)jzs_log_marginal(Partition::singletons(2), sep, m),
                  numerical_error);
  // too few observations
  const GroupedGaussian small{{1, 1, 1}, {0.0, 0.5, 1.0}, {0.0, 0.0, 0.0},
                              {"a", "b", "c"}};
  CHECK_THROWS_AS((void)jzs_log_marginal(Partition::singletons(3), small, m),
                  data_error);
  // refinement cap reports the achieved error bound
  JzsAnovaModel strangled;
  strangled.tol = 1e-14;
  strangled.max_panels = 200;
  try {
    (void)jzs_log_marginal(Partition::singletons(3), three_unbalanced(),
                           strangled);
    FAIL("expected numerical_error");
  } catch (const numerical_error& e) {
    CHECK(e.achieved_bound > 0.0);
  }
}

TEST_CASE("pairwise Bayes factors") {
  const GroupedData counts = GroupedCounts{{3, 5, 9}, {10, 10, 10},
                                           {"a", "b", "c"}};
  const auto bf = pairwise_bayes_factors(BinomialBetaModel{}, counts);
  CHECK(bf.k == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(bf.at(i, i) == 0.0);
    for (int j = 0; j < 3; ++j) CHECK(bf.at(i, j) == bf.at(j, i));
  }
  // the pair (i,j) factor only sees groups i and j
  const GroupedData pair = GroupedCounts{{3, 5}, {10, 10}, {"a", "b"}};
  const double eq = log_marginal(BinomialBetaModel{}, Partition::pooled(2), pair);
  const double ne =
      log_marginal(BinomialBetaModel{}, Partition::singletons(2), pair);
  CHECK(bf.at(0, 1) == doctest::Approx(eq - ne).epsilon(1e-12));
  // closer groups favor equality more
  CHECK(bf.at(0, 1) > bf.at(0, 2));

  const auto bfg = pairwise_bayes_factors(JzsAnovaModel{}, three_unbalanced());
  CHECK(bfg.at(0, 1) > bfg.at(0, 2));  // c is far from a and b
}

TEST_CASE("posterior draws respect the partition and the seed") {
  const GroupedData counts = GroupedCounts{{3, 5, 9}, {10, 10, 10},
                                           {"a", "b", "c"}};
  const Partition p = Partition::parse("0,0,1");
  Rng r1(7), r2(7), r3(8);
  const auto d1 = draw_group_parameters(BinomialBetaModel{}, p, counts, r1);
  const auto d2 = draw_group_parameters(BinomialBetaModel{}, p, counts, r2);
  const auto d3 = draw_group_parameters(BinomialBetaModel{}, p, counts, r3);
  REQUIRE(d1.size() == 3);
  CHECK(d1 == d2);
  CHECK(d1 != d3);
  CHECK(d1[0] == d1[1]);
  CHECK(d1[0] != d1[2]);
  CHECK(d1[0] > 0.0);
  CHECK(d1[2] < 1.0);

  Rng r4(9);
  const auto dj = draw_group_parameters(JzsAnovaModel{}, p,
                                        three_unbalanced(), r4);
  REQUIRE(dj.size() == 3);
  CHECK(dj[0] == dj[1]);
  CHECK(dj[0] != dj[2]);

  Rng r5(10);
  CHECK(draw_group_parameters(FlatModel{}, p, counts, r5).empty());
}

TEST_CASE("posterior means shrink toward pooled values") {
  const GroupedData counts = GroupedCounts{{3, 9}, {10, 10}, {"a", "b"}};
  const auto full =
      group_posterior_means(BinomialBetaModel{}, Partition::singletons(2),
                            counts);
  CHECK(full[0] == doctest::Approx(4.0 / 12.0).epsilon(1e-13));
  CHECK(full[1] == doctest::Approx(10.0 / 12.0).epsilon(1e-13));
  const auto pooled =
      group_posterior_means(BinomialBetaModel{}, Partition::pooled(2), counts);
  CHECK(pooled[0] == doctest::Approx(13.0 / 22.0).epsilon(1e-13));
  CHECK(pooled[0] == pooled[1]);

  // one-way layout: conditional means sit between block means and grand mean
  const GroupedGaussian bal = balanced2();
  const auto mj =
      group_posterior_means(JzsAnovaModel{}, Partition::singletons(2), bal);
  const double gbar = 0.5 * (0.35375 - 0.4225);
  CHECK(mj[0] > gbar);
  CHECK(mj[0] < 0.35375);
  CHECK(mj[1] < gbar);
  CHECK(mj[1] > -0.4225);
  // same-block groups report one value
  const auto mp =
      group_posterior_means(JzsAnovaModel{}, Partition::pooled(2), bal);
  CHECK(mp[0] == mp[1]);
  CHECK(mp[0] == doctest::Approx(gbar).epsilon(1e-12));
}

TEST_CASE("posterior draws of the one-way layout center on the means") {
  // Monte Carlo average of draws matches the quadrature means
  const GroupedGaussian bal = balanced2();
  const Partition p = Partition::singletons(2);
  Rng rng(123);
  double s0 = 0.0, s1 = 0.0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_group_parameters(JzsAnovaModel{}, p, bal, rng);
    s0 += d[0];
    s1 += d[1];
  }
  const auto mj = group_posterior_means(JzsAnovaModel{}, p, bal);
  CHECK(std::abs(s0 / n - mj[0]) < 0.02);
  CHECK(std::abs(s1 / n - mj[1]) < 0.02);
}

TEST_CASE("csv reader: three schemas") {
  const std::string dir = PARTEQ_DATA_DIR;
  const GroupedData counts = read_grouped_csv(dir + "/binom4.csv");
  REQUIRE(std::holds_alternative<GroupedCounts>(counts));
  const auto& c = std::get<GroupedCounts>(counts);
  CHECK(c.k_groups() == 4);
  CHECK(c.successes == std::vector<long long>{30, 32, 60, 58});
  CHECK(c.trials == std::vector<long long>{100, 100, 100, 100});
  CHECK(c.names == std::vector<std::string>{"g1", "g2", "g3", "g4"});

  // raw per-observation rows and their summary form agree
  const GroupedData raw = read_grouped_csv(dir + "/gauss3_raw.csv");
  const GroupedData summ = read_grouped_csv(dir + "/gauss3_summary.csv");
  REQUIRE(std::holds_alternative<GroupedGaussian>(raw));
  REQUIRE(std::holds_alternative<GroupedGaussian>(summ));
  const auto& gr = std::get<GroupedGaussian>(raw);
  const auto& gs = std::get<GroupedGaussian>(summ);
  REQUIRE(gr.k_groups() == 3);
  REQUIRE(gs.k_groups() == 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(gr.n[std::size_t(j)] == gs.n[std::size_t(j)]);
    CHECK(gr.mean[std::size_t(j)] ==
          doctest::Approx(gs.mean[std::size_t(j)]).epsilon(1e-12));
    CHECK(gr.sse[std::size_t(j)] ==
          doctest::Approx(gs.sse[std::size_t(j)]).epsilon(1e-12));
  }
  for_each_partition(3, [&](const Partition& p) {
    CHECK(std::abs(log_marginal(JzsAnovaModel{}, p, raw) -
                   log_marginal(JzsAnovaModel{}, p, summ)) < 1e-9);
  });
}

TEST_CASE("csv reader: malformed input names the line") {
  const auto expect_error = [](const std::string& body,
                               const std::string& needle) {
    try {
      std::istringstream in(body);
      (void)parse_grouped_csv(in, "test.csv");
      FAIL_CHECK("expected data_error for: " << body);
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("nope,nope\n", "header");
  expect_error("group,successes,trials\n", "no data");
  expect_error("group,successes,trials\ng1,5\n", "line 2");
  expect_error("group,successes,trials\ng1,5,x\n", "line 2");
  expect_error("group,successes,trials\ng1,11,10\n", "successes");
  expect_error("group,successes,trials\ng1,5,10\ng1,6,10\n", "duplicate");
  expect_error("group,n,mean,sd\ng1,2,0.5,-1\n", "line 2");
  expect_error("group,value\ng1,0.5\ng1,abc\n", "line 3");
  // single group parses; downstream domain checks reject k = 1 separately
  std::istringstream one_in("group,value\ng1,0.5\ng1,0.7\n");
  const GroupedData one = parse_grouped_csv(one_in, "test.csv");
  CHECK(k_groups(one) == 1);
}
