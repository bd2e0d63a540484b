#include <catch2/catch_amalgamated.hpp>

#include "sephit/harmonic.hpp"
#include "sephit/montecarlo.hpp"

using namespace sephit;
using Catch::Approx;

TEST_CASE("rng streams are deterministic and portable", "[montecarlo]") {
  RngStream r(42, 0);
  double u0 = r.uniform();
  double u1 = r.uniform();
  REQUIRE(u0 == Approx(0.7160925324007007).margin(1e-16));
  REQUIRE(u1 == Approx(0.64578692003991167).margin(1e-16));

  RngStream again(42, 0);
  REQUIRE(again.uniform() == u0);
  REQUIRE(again.uniform() == u1);

  RngStream other(42, 1);
  REQUIRE(other.uniform() == Approx(0.15247747311055027).margin(1e-16));

  RngStream e1(7, 3), e2(7, 3);
  double x = e2.uniform();
  REQUIRE(e1.exponential(2.0) == Approx(-std::log1p(-x) / 2.0).margin(1e-16));
}

TEST_CASE("product sampling matches the density", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  RngStream rng(5, 0);
  long long occ = 0, n = 20000;
  for (long long i = 0; i < n; ++i) occ += sample_product(box, 0.3, rng).count();
  double mean = (double)occ / (n * box.sites());
  REQUIRE(mean == Approx(0.3).margin(0.01));
}

TEST_CASE("simulated survival brackets the exact curve", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  Pattern pat{{box.origin_site()}, 1};
  auto spec = GeneratorSpec::ssep(box, 0.5, pat);
  RateEnumerator gen(spec);
  auto sp = StateSpace::alive(box, pat);
  auto nu = nu_weights(sp, 0.5);
  auto M = build_matrix(gen, sp, BuildMode::Forward);

  std::vector<double> times{1.0, 2.0, 3.0};
  auto curve = survival_mc(spec, times, 20000, 777);
  REQUIRE(curve.alive[0] == 4347);  // deterministic under the fixed seed
  REQUIRE(curve.alive[1] == 2353);
  REQUIRE(curve.alive[2] == 1406);
  for (size_t j = 0; j < times.size(); ++j) {
    double ex = survival_exact(M, nu, times[j]);
    REQUIRE(curve.lo[j] <= ex);
    REQUIRE(ex <= curve.hi[j]);
  }

  REQUIRE_THROWS_AS(survival_mc(spec, {2.0, 1.0}, 10, 0), std::invalid_argument);
}

TEST_CASE("decay-rate fit recovers the slope of the exact curve", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  Pattern pat{{box.origin_site()}, 1};
  auto spec = GeneratorSpec::ssep(box, 0.5, pat);
  RateEnumerator gen(spec);
  auto sp = StateSpace::alive(box, pat);
  auto nu = nu_weights(sp, 0.5);
  auto M = build_matrix(gen, sp, BuildMode::Forward);
  auto res = principal_killed(M, nu);

  std::vector<double> times{6.0, 8.0, 10.0}, p;
  for (double t : times) p.push_back(survival_exact(M, nu, t));
  auto fit = fit_decay_rate(times, p, 1000000000000LL);
  REQUIRE(fit.points == 3);
  REQUIRE(fit.lambda == Approx(res.lambda).margin(2e-3));  // leftover transient curvature

  auto empty = fit_decay_rate({1.0, 2.0}, {1.0, 1.0}, 100);  // saturated points are dropped
  REQUIRE(empty.points == 0);
  REQUIRE(empty.lambda == 0.0);
}

TEST_CASE("time-t marginals agree with the transposed semigroup", "[montecarlo]") {
  Box box = Box::rect({{0, 1}, {0, 2}});
  Pattern pat{{1, 4}, 2};
  auto spec = GeneratorSpec::beta_bond(box, 0.5, pat, 3.0);
  auto chk = marginals_vs_exact(spec, 1.0, 20000, 2024);
  REQUIRE(chk.surv_mc == Approx(0.2388).margin(1e-12));  // deterministic under the seed
  REQUIRE(chk.surv_exact == Approx(0.236024560393379).margin(1e-10));
  REQUIRE(chk.max_abs_z < 4.0);
}

TEST_CASE("conditioned rejection sampler matches the exact conditioned law", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  Pattern pat{{box.origin_site()}, 1};
  auto spec = GeneratorSpec::ssep(box, 0.5, pat);
  RateEnumerator gen(spec);
  auto sp = StateSpace::alive(box, pat);
  auto nu = nu_weights(sp, 0.5);
  auto M = build_matrix(gen, sp, BuildMode::Forward);
  double t = 2.5;

  auto cs = conditioned_sample(spec, t, 5000, 99);
  REQUIRE(cs.acceptance > 0.05);
  auto law = conditioned_law(M, nu, t);
  std::vector<double> emp(sp.size(), 0.0);
  for (const auto& c : cs.states) emp[sp.find(c)] += 1.0 / cs.states.size();
  double tv = 0;
  for (int i = 0; i < sp.size(); ++i) tv += std::abs(emp[i] - law[i]);
  tv /= 2;
  REQUIRE(tv < 0.05);

  // survival to t=40 is ~2e-9: the pilot must refuse
  REQUIRE_THROWS_AS(conditioned_sample(spec, 40.0, 10, 1), std::runtime_error);
  REQUIRE_THROWS_AS(conditioned_sample(GeneratorSpec::ssep(box, 0.5), t, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("interacting-particle sampler lands near the conditioned law", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  Pattern pat{{box.origin_site()}, 1};
  auto spec = GeneratorSpec::ssep(box, 0.5, pat);
  RateEnumerator gen(spec);
  auto sp = StateSpace::alive(box, pat);
  auto nu = nu_weights(sp, 0.5);
  auto M = build_matrix(gen, sp, BuildMode::Forward);
  double t = 2.5;
  auto law = conditioned_law(M, nu, t);
  auto fv = fleming_viot(spec, t, 256, 4242);
  REQUIRE((int)fv.size() == 256);
  std::vector<double> emp(sp.size(), 0.0);
  for (const auto& c : fv) emp[sp.find(c)] += 1.0 / fv.size();
  double tv = 0;
  for (int i = 0; i < sp.size(); ++i) tv += std::abs(emp[i] - law[i]);
  REQUIRE(tv / 2 < 0.2);  // finite-population bias and noise; exploratory tool

  REQUIRE_THROWS_AS(fleming_viot(spec, t, 1, 0), std::invalid_argument);
}

TEST_CASE("domination battery flags only real violations", "[montecarlo]") {
  Box box = Box::cube(1, 2);
  Pattern pat{{box.origin_site()}, 1};
  auto spec = GeneratorSpec::ssep(box, 0.5, pat);
  auto self = domination_mc(spec, spec, 1.0, 5000, 1234);
  REQUIRE(self.consistent);
  REQUIRE(self.worst_z < 4.0);
  REQUIRE(self.statistics == 11);

  auto dense = GeneratorSpec::ssep(box, 0.7, pat);
  auto sparse = GeneratorSpec::ssep(box, 0.2, pat);
  auto rep = domination_mc(dense, sparse, 0.3, 5000, 1234);
  REQUIRE_FALSE(rep.consistent);
  REQUIRE(rep.worst_z > 10.0);
}

TEST_CASE("coupled copies stay ordered exactly when the bond can cover", "[montecarlo]") {
  Box box = Box::rect({{0, 1}, {0, 2}});
  Pattern pat{{1, 4}, 2};
  auto prof = solve_hitting(box, {1, 4});
  auto w = weights(prof, constant_for_A2(prof), 0.5, PsiForm::IndicatorProduct, pat);
  Config x0 = Config::from_string("000101");
  Config y0 = Config::from_string("010101");

  RateEnumerator g1(GeneratorSpec::beta_bond(box, 0.5, pat, 1.0));
  RateEnumerator g3(GeneratorSpec::beta_bond(box, 0.5, pat, 3.0));

  auto b1p = coupling_battery(g1, w, x0, y0, 5.0, 10000, 31337, true);
  REQUIRE(b1p.violations == 156);  // paired construction still leaks: bond rate 1 < 1.25
  REQUIRE(b1p.first_violation_time < 0.01);

  auto b3p = coupling_battery(g3, w, x0, y0, 5.0, 10000, 31337, true);
  REQUIRE(b3p.violations == 0);  // bond rate 3 covers every dangerous entry
  REQUIRE(b3p.mismatch_events > 10000);

  auto b1n = coupling_battery(g1, w, x0, y0, 5.0, 10000, 31337, false);
  auto b3n = coupling_battery(g3, w, x0, y0, 5.0, 10000, 31337, false);
  REQUIRE(b1n.violations == 1037);  // shared clocks alone fail at either rate
  REQUIRE(b3n.violations == 1001);

  // identical starts collapse to a single trajectory
  RngStream rng(1, 0);
  auto same = coupled_pair(g3, w, y0, y0, 3.0, rng, true);
  REQUIRE_FALSE(same.order_broken);
  REQUIRE(same.x == same.y);

  RngStream rng2(1, 1);
  REQUIRE_THROWS_AS(coupled_pair(g3, w, y0, x0, 1.0, rng2, true), std::invalid_argument);
}

TEST_CASE("coupling marginals reproduce the tilted semigroup", "[montecarlo]") {
  Box box = Box::rect({{0, 1}, {0, 2}});
  Pattern pat{{1, 4}, 2};
  auto prof = solve_hitting(box, {1, 4});
  auto w = weights(prof, constant_for_A2(prof), 0.5, PsiForm::IndicatorProduct, pat);
  RateEnumerator gen(GeneratorSpec::beta_bond(box, 0.5, pat, 3.0));
  Config x0 = Config::from_string("000101");
  Config y0 = Config::from_string("010101");
  double t = 1.5;

  // exact time-t law of the upper copy: tilted chain from its start
  auto sp = StateSpace::alive(box, pat);
  auto M = build_matrix(gen, sp, BuildMode::Tilted, &w);
  std::vector<double> delta(sp.size(), 0.0);
  delta[sp.find(y0)] = 1.0;
  auto law = semigroup_apply(M, t, delta, 1e-12, /*transpose=*/true);

  int ns = box.sites();
  std::vector<double> occ_exact(ns, 0.0);
  for (int i = 0; i < sp.size(); ++i)
    for (int s = 0; s < ns; ++s)
      if (sp.states[i].get(s)) occ_exact[s] += law[i];

  long long trials = 10000;
  std::vector<long long> occ(ns, 0);
  for (long long trial = 0; trial < trials; ++trial) {
    RngStream rng(90210, (uint64_t)trial);
    auto out = coupled_pair(gen, w, x0, y0, t, rng, true);
    REQUIRE_FALSE(out.order_broken);
    for (int s = 0; s < ns; ++s)
      if (out.y.get(s)) ++occ[s];
  }
  for (int s = 0; s < ns; ++s) {
    double p = occ_exact[s];
    double se = std::sqrt(std::max(p * (1 - p), 1e-12) / trials);
    REQUIRE(std::abs((double)occ[s] / trials - p) / se < 4.5);
  }
}
