#pragma once

#include <cstring>
#include <map>
#include <random>
#include <string>
#include <tuple>

#include "sephit/exact.hpp"

namespace sephit {

// Deterministic stream family: one engine per (seed, stream) pair, with a
// portable uniform mapping so results are reproducible across platforms.
struct RngStream {
  std::mt19937_64 eng;

  static uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  RngStream(uint64_t seed, uint64_t stream)
      : eng(splitmix(splitmix(seed) ^ splitmix(stream ^ 0xA5A5A5A55A5A5A5AULL))) {}

  double uniform() { return (double)(eng() >> 11) * 0x1.0p-53; }  // [0,1)

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
};

inline Config sample_product(const Box& box, double rho, RngStream& rng) {
  Config c = Config::zeros(box.sites());
  for (int i = 0; i < box.sites(); ++i)
    if (rng.uniform() < rho) c.set(i, true);
  return c;
}

struct GillespieOutcome {
  double final_time = 0;  // the horizon, or the killing time
  Config state;
  bool killed = false;
  long long steps = 0;
};

// Rates are re-enumerated from scratch after every event; ties in the
// cumulative scan resolve to the first transition in enumeration order.
inline GillespieOutcome gillespie_run(const RateEnumerator& gen, Config start, double t_max,
                                      RngStream& rng) {
  GillespieOutcome out;
  out.state = start;
  double t = 0;
  for (;;) {
    TransitionList tl = gen.transitions(out.state);
    double total = 0;
    for (const auto& m : tl.moves) total += m.rate;
    if (total <= 0) break;  // absorbing
    t += rng.exponential(total);
    if (t > t_max) break;
    double u = rng.uniform() * total, cum = 0;
    size_t pick = tl.moves.size() - 1;
    for (size_t k = 0; k < tl.moves.size(); ++k) {
      cum += tl.moves[k].rate;
      if (u < cum) {
        pick = k;
        break;
      }
    }
    out.state = tl.moves[pick].target;
    ++out.steps;
    if (tl.moves[pick].killing) {
      out.killed = true;
      out.final_time = t;
      return out;
    }
  }
  out.final_time = t_max;
  return out;
}

struct Wilson {
  double p, lo, hi;
};

inline Wilson wilson_interval(long long k, long long n, double z = 1.959963984540054) {
  double p = (double)k / (double)n;
  double z2 = z * z;
  double denom = 1 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {p, center - half, center + half};
}

struct RateFit {
  double lambda = 0;
  double stderr_ = 0;
  int points = 0;
};

// Unweighted least squares on -log p(t).  The error bar propagates the
// binomial variance of each point and ignores correlation between grid
// points served by the same trials, so it is indicative rather than exact.
inline RateFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& p,
                              long long trials) {
  RateFit fit;
  std::vector<double> ts, ys, vs;
  for (size_t i = 0; i < times.size(); ++i) {
    if (p[i] <= 0 || p[i] >= 1) continue;
    ts.push_back(times[i]);
    ys.push_back(-std::log(p[i]));
    vs.push_back((1 - p[i]) / (trials * p[i]));  // delta method for log p
  }
  fit.points = (int)ts.size();
  if (fit.points < 2) return fit;
  double tbar = 0;
  for (double t : ts) tbar += t;
  tbar /= fit.points;
  double sxx = 0, sxy = 0, varsum = 0;
  for (int i = 0; i < fit.points; ++i) {
    double dt = ts[i] - tbar;
    sxx += dt * dt;
    sxy += dt * ys[i];
    varsum += dt * dt * vs[i];
  }
  fit.lambda = sxy / sxx;
  fit.stderr_ = std::sqrt(varsum) / sxx;
  return fit;
}

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<long long> alive;
  long long trials = 0;
  std::vector<double> p, lo, hi;
  RateFit fit;
};

// Trials start from the product measure on the full box; a start inside the
// pattern event counts as dead from time zero, matching the exact curve.
inline SurvivalCurve survival_mc(const GeneratorSpec& spec, const std::vector<double>& times,
                                 long long trials, uint64_t seed) {
  for (size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1]) throw std::invalid_argument("survival_mc: times must increase");
  if (times.empty() || trials <= 0) throw std::invalid_argument("survival_mc: empty request");
  RateEnumerator gen(spec);
  SurvivalCurve out;
  out.times = times;
  out.trials = trials;
  out.alive.assign(times.size(), 0);
  double horizon = times.back();
  for (long long trial = 0; trial < trials; ++trial) {
    RngStream rng(seed, (uint64_t)trial);
    Config c = sample_product(spec.box, spec.rho, rng);
    double tau = std::numeric_limits<double>::infinity();
    if (spec.pattern && in_pattern(*spec.pattern, c)) {
      tau = 0;
    } else {
      auto run = gillespie_run(gen, c, horizon, rng);
      if (run.killed) tau = run.final_time;
    }
    for (size_t j = 0; j < times.size(); ++j)
      if (tau > times[j]) ++out.alive[j];
  }
  out.p.resize(times.size());
  out.lo.resize(times.size());
  out.hi.resize(times.size());
  for (size_t j = 0; j < times.size(); ++j) {
    Wilson w = wilson_interval(out.alive[j], trials);
    out.p[j] = w.p;
    out.lo[j] = w.lo;
    out.hi[j] = w.hi;
  }
  out.fit = fit_decay_rate(out.times, out.p, trials);
  return out;
}

struct MarginalCheck {
  double t = 0;
  long long trials = 0;
  double surv_mc = 0, surv_exact = 0, surv_z = 0;
  std::vector<double> occ_mc, occ_exact, occ_z;  // per site, joint with survival
  double max_abs_z = 0;
};

// Occupation marginals at time t from simulation against the transposed
// uniformized semigroup.  z-scores use the exact binomial scale.
inline MarginalCheck marginals_vs_exact(const GeneratorSpec& spec, double t, long long trials,
                                        uint64_t seed) {
  RateEnumerator gen(spec);
  auto sp = StateSpace::alive(spec.box, spec.pattern);
  auto nu = nu_weights(sp, spec.rho);
  auto M = build_matrix(gen, sp, BuildMode::Forward);
  auto mass = semigroup_apply(M, t, nu, 1e-12, /*transpose=*/true);

  MarginalCheck chk;
  chk.t = t;
  chk.trials = trials;
  int ns = spec.box.sites();
  chk.occ_exact.assign(ns, 0.0);
  for (int i = 0; i < sp.size(); ++i) {
    chk.surv_exact += mass[i];
    for (int s = 0; s < ns; ++s)
      if (sp.states[i].get(s)) chk.occ_exact[s] += mass[i];
  }

  std::vector<long long> occ(ns, 0);
  long long alive = 0;
  for (long long trial = 0; trial < trials; ++trial) {
    RngStream rng(seed, (uint64_t)trial);
    Config c = sample_product(spec.box, spec.rho, rng);
    if (spec.pattern && in_pattern(*spec.pattern, c)) continue;
    auto run = gillespie_run(gen, c, t, rng);
    if (run.killed) continue;
    ++alive;
    for (int s = 0; s < ns; ++s)
      if (run.state.get(s)) ++occ[s];
  }
  auto zscore = [&](double khat, double pexact) {
    double se = std::sqrt(std::max(pexact * (1 - pexact), 1e-12) / trials);
    return (khat - pexact) / se;
  };
  chk.surv_mc = (double)alive / trials;
  chk.surv_z = zscore(chk.surv_mc, chk.surv_exact);
  chk.max_abs_z = std::abs(chk.surv_z);
  chk.occ_mc.resize(ns);
  chk.occ_z.resize(ns);
  for (int s = 0; s < ns; ++s) {
    chk.occ_mc[s] = (double)occ[s] / trials;
    chk.occ_z[s] = zscore(chk.occ_mc[s], chk.occ_exact[s]);
    chk.max_abs_z = std::max(chk.max_abs_z, std::abs(chk.occ_z[s]));
  }
  return chk;
}

struct ConditionedSample {
  std::vector<Config> states;
  long long attempts = 0;
  double acceptance = 0;
};

// Rejection sampling of the law conditioned on survival to time t.  A pilot
// run aborts when the acceptance rate is too small to be practical.
inline ConditionedSample conditioned_sample(const GeneratorSpec& spec, double t, long long want,
                                            uint64_t seed, long long pilot = 2000,
                                            double min_acceptance = 1e-4) {
  if (!spec.pattern) throw std::invalid_argument("conditioned_sample: nothing to condition on");
  RateEnumerator gen(spec);
  ConditionedSample out;
  long long accepted_pilot = 0;
  auto attempt = [&](long long idx, Config* got) {
    RngStream rng(seed, (uint64_t)idx);
    Config c = sample_product(spec.box, spec.rho, rng);
    if (in_pattern(*spec.pattern, c)) return false;
    auto run = gillespie_run(gen, c, t, rng);
    if (run.killed) return false;
    *got = run.state;
    return true;
  };
  Config got;
  for (long long i = 0; i < pilot; ++i) {
    ++out.attempts;
    if (attempt(out.attempts - 1, &got)) {
      ++accepted_pilot;
      if ((long long)out.states.size() < want) out.states.push_back(got);
    }
  }
  double pilot_rate = (double)accepted_pilot / pilot;
  if (pilot_rate < min_acceptance)
    throw std::runtime_error("conditioned_sample: acceptance rate " + std::to_string(pilot_rate) +
                             " below the practical floor");
  while ((long long)out.states.size() < want) {
    ++out.attempts;
    if (attempt(out.attempts - 1, &got)) out.states.push_back(got);
    if (out.attempts > 100 * want / std::max(pilot_rate, 1e-12))
      throw std::runtime_error("conditioned_sample: attempt budget exhausted");
  }
  out.acceptance = (double)out.states.size() / out.attempts;
  return out;
}

// Interacting-particle approximation of the conditioned law: a killed
// particle respawns on a uniformly chosen survivor.  The estimate carries a
// systematic finite-population bias; use it for exploration only.
inline std::vector<Config> fleming_viot(const GeneratorSpec& spec, double t, int population,
                                        uint64_t seed) {
  if (!spec.pattern) throw std::invalid_argument("fleming_viot: nothing to condition on");
  if (population < 2) throw std::invalid_argument("fleming_viot: population too small");
  RateEnumerator gen(spec);
  RngStream rng(seed, 0xF1E2D3C4ULL);
  std::vector<Config> part;
  part.reserve(population);
  while ((int)part.size() < population) {
    Config c = sample_product(spec.box, spec.rho, rng);
    if (!in_pattern(*spec.pattern, c)) part.push_back(c);
  }
  std::vector<TransitionList> tls(population);
  std::vector<double> totals(population);
  double grand = 0;
  auto refresh = [&](int i) {
    tls[i] = gen.transitions(part[i]);
    double s = 0;
    for (const auto& m : tls[i].moves) s += m.rate;
    grand += s - totals[i];
    totals[i] = s;
  };
  for (int i = 0; i < population; ++i) {
    totals[i] = 0;
    refresh(i);
  }
  double now = 0;
  for (;;) {
    now += rng.exponential(grand);
    if (now > t) break;
    double u = rng.uniform() * grand, cum = 0;
    int who = population - 1;
    for (int i = 0; i < population; ++i) {
      cum += totals[i];
      if (u < cum) {
        who = i;
        break;
      }
    }
    double v = rng.uniform() * totals[who], c2 = 0;
    size_t pick = tls[who].moves.size() - 1;
    for (size_t k = 0; k < tls[who].moves.size(); ++k) {
      c2 += tls[who].moves[k].rate;
      if (v < c2) {
        pick = k;
        break;
      }
    }
    if (tls[who].moves[pick].killing) {
      int donor = (int)(rng.uniform() * (population - 1));
      if (donor >= who) ++donor;
      part[who] = part[donor];
    } else {
      part[who] = tls[who].moves[pick].target;
    }
    refresh(who);
  }
  return part;
}

struct DominationMcReport {
  long long trials = 0;
  int statistics = 0;
  double crit = 0;
  double worst_z = 0;  // positive when the lower chain exceeds the upper
  std::string worst_stat;
  bool consistent = true;  // necessary conditions only; passing certifies nothing
};

// Samples both chains at time t and compares increasing statistics
// (per-site occupations and total-count tails).  A z beyond crit on any
// statistic flags an inconsistency with stochastic ordering; the fixed
// critical value plays the role of a Bonferroni guard for the battery.
inline DominationMcReport domination_mc(const GeneratorSpec& lower, const GeneratorSpec& upper,
                                        double t, long long trials, uint64_t seed,
                                        double crit = 4.0) {
  if (!(lower.box == upper.box)) throw std::invalid_argument("domination_mc: boxes differ");
  int ns = lower.box.sites();
  RateEnumerator gl(lower), gu(upper);
  std::vector<long long> occ_l(ns, 0), occ_u(ns, 0);
  std::vector<long long> tail_l(ns + 1, 0), tail_u(ns + 1, 0);
  long long alive_l = 0, alive_u = 0;
  auto accumulate = [&](const GeneratorSpec& spec, RateEnumerator& gen, uint64_t salt,
                        std::vector<long long>& occ, std::vector<long long>& tail,
                        long long& alive) {
    for (long long trial = 0; trial < trials; ++trial) {
      RngStream rng(seed ^ salt, (uint64_t)trial);
      Config c = sample_product(spec.box, spec.rho, rng);
      if (spec.pattern && in_pattern(*spec.pattern, c)) continue;
      auto run = gillespie_run(gen, c, t, rng);
      if (run.killed) continue;
      ++alive;
      int n = run.state.count();
      for (int s = 0; s < ns; ++s)
        if (run.state.get(s)) ++occ[s];
      for (int k = 1; k <= n; ++k) ++tail[k];
    }
  };
  accumulate(lower, gl, 0x1073ULL, occ_l, tail_l, alive_l);
  accumulate(upper, gu, 0x42ULL, occ_u, tail_u, alive_u);

  DominationMcReport rep;
  rep.trials = trials;
  rep.crit = crit;
  auto push = [&](const std::string& name, long long kl, long long ku) {
    double pl = (double)kl / trials, pu = (double)ku / trials;
    double se = std::sqrt(pl * (1 - pl) / trials + pu * (1 - pu) / trials);
    double z = se > 0 ? (pl - pu) / se : 0.0;
    ++rep.statistics;
    if (z > rep.worst_z) {
      rep.worst_z = z;
      rep.worst_stat = name;
    }
  };
  push("alive", alive_l, alive_u);
  for (int s = 0; s < ns; ++s) push("occ[" + std::to_string(s) + "]", occ_l[s], occ_u[s]);
  for (int k = 1; k <= ns; ++k)
    push("count>=" + std::to_string(k), tail_l[k], tail_u[k]);
  rep.consistent = rep.worst_z <= crit;
  return rep;
}

// ---- order-preserving coupling of two tilted chains ----

namespace detail {

struct MoveKey {
  MoveKind kind;
  int i, j;
  int dir;  // flips: 0 birth, 1 death
  bool operator<(const MoveKey& o) const {
    return std::tie(kind, i, j, dir) < std::tie(o.kind, o.i, o.j, o.dir);
  }
};

inline MoveKey key_of(const Config& c, const Transition& t) {
  if (t.kind == MoveKind::Exchange) return {MoveKind::Exchange, t.i, t.j, 0};
  return {MoveKind::Flip, t.i, -1, c.get(t.i) ? 1 : 0};
}

}  // namespace detail

struct CoupledOutcome {
  bool order_broken = false;
  double break_time = 0;
  double end_time = 0;
  long long events = 0;
  long long mismatch_events = 0;  // events fired while a pattern site disagreed
  Config x, y;
};

// Joint evolution of two copies of the tilted chain with x(0) <= y(0).
// While the copies agree on the pattern sites, shared moves run on common
// clocks (joint at the smaller rate, the excess alone).  When they disagree
// at a pattern site, the lower copy's entries into the other pattern site
// would outrun the upper copy, whose own entries there are suppressed; with
// pair_dangerous set, those entries are paired against the upper copy's
// special-bond swap, which covers them fully whenever the bond rate beats
// their total.  Any unpaired remainder runs alone and can break the order;
// the outcome records the first violation.  One draw is discarded at every
// switch between the two regimes.
inline CoupledOutcome coupled_pair(const RateEnumerator& gen, const SiteWeights& w, Config x,
                                   Config y, double t_max, RngStream& rng, bool pair_dangerous) {
  if (!gen.spec().pattern) throw std::invalid_argument("coupled_pair: needs a pattern");
  if (gen.spec().pattern->sites.size() != 2 || gen.spec().pattern->k != 2)
    throw std::invalid_argument("coupled_pair: needs a two-site bond pattern");
  if (!leq(x, y)) throw std::invalid_argument("coupled_pair: start must be ordered");
  const Pattern& pat = *gen.spec().pattern;
  int p0 = pat.sites[0], p1 = pat.sites[1];

  struct Event {
    double rate;
    bool apply_x, apply_y;
    Config tx, ty;
  };

  CoupledOutcome out;
  out.x = x;
  out.y = y;
  double now = 0;
  int prev_mode = -1;  // 0 matched, 1 mismatch
  std::vector<Event> events;
  std::map<detail::MoveKey, std::pair<double, Config>> mx, my;
  while (true) {
    int o = -1;  // pattern site where the copies disagree
    if (out.x.get(p0) != out.y.get(p0)) o = p0;
    if (out.x.get(p1) != out.y.get(p1)) o = p1;
    int mode = o >= 0 ? 1 : 0;
    if (prev_mode >= 0 && mode != prev_mode) rng.uniform();  // discarded on regime switch
    prev_mode = mode;

    TransitionList tx = gen.psi_transitions(out.x, w);
    TransitionList ty = gen.psi_transitions(out.y, w);
    mx.clear();
    my.clear();
    for (const auto& t : tx.moves) mx[detail::key_of(out.x, t)] = {t.rate, t.target};
    for (const auto& t : ty.moves) my[detail::key_of(out.y, t)] = {t.rate, t.target};

    events.clear();
    if (mode == 1) {
      if (out.x.get(o)) throw std::runtime_error("coupled_pair: order already inverted");
      int s = o == p0 ? p1 : p0;  // the other pattern site, empty in both copies
      detail::MoveKey bond{MoveKind::Exchange, std::min(p0, p1), std::max(p0, p1), 0};
      // lower copy's entries into s, suppressed for the upper copy
      double alpha = 0;
      std::vector<detail::MoveKey> dangerous;
      for (const auto& [k, rt] : mx) {
        bool into_s = rt.second.get(s) && !out.x.get(s);
        if (into_s) {
          dangerous.push_back(k);
          alpha += rt.first;
        }
      }
      double rbond = 0;
      Config ybond;
      if (auto it = my.find(bond); it != my.end()) {
        rbond = it->second.first;
        ybond = it->second.second;
      }
      double paired_frac = pair_dangerous && alpha > 0 ? std::min(1.0, rbond / alpha) : 0.0;
      for (const auto& k : dangerous) {
        auto [r, txc] = mx[k];
        if (paired_frac > 0)
          events.push_back({r * paired_frac, true, true, txc, ybond});
        if (paired_frac < 1)
          events.push_back({r * (1 - paired_frac), true, false, txc, Config{}});
        mx.erase(k);
      }
      double bond_left = pair_dangerous ? std::max(0.0, rbond - alpha) : rbond;
      if (bond_left > 0) events.push_back({bond_left, false, true, Config{}, ybond});
      my.erase(bond);
    }
    // shared clocks for everything left: joint at the smaller rate
    for (const auto& [k, rtx] : mx) {
      auto it = my.find(k);
      double ry = it == my.end() ? 0.0 : it->second.first;
      double joint = std::min(rtx.first, ry);
      if (joint > 0) events.push_back({joint, true, true, rtx.second, it->second.second});
      if (rtx.first > joint)
        events.push_back({rtx.first - joint, true, false, rtx.second, Config{}});
      if (it != my.end() && ry > joint)
        events.push_back({ry - joint, false, true, Config{}, it->second.second});
      if (it != my.end()) my.erase(it);
    }
    for (const auto& [k, rty] : my)
      events.push_back({rty.first, false, true, Config{}, rty.second});

    double total = 0;
    for (const auto& e : events) total += e.rate;
    if (total <= 0) break;
    now += rng.exponential(total);
    if (now > t_max) break;
    double u = rng.uniform() * total, cum = 0;
    size_t pick = events.size() - 1;
    for (size_t k = 0; k < events.size(); ++k) {
      cum += events[k].rate;
      if (u < cum) {
        pick = k;
        break;
      }
    }
    if (events[pick].apply_x) out.x = events[pick].tx;
    if (events[pick].apply_y) out.y = events[pick].ty;
    ++out.events;
    if (mode == 1) ++out.mismatch_events;
    if (!leq(out.x, out.y)) {
      out.order_broken = true;
      out.break_time = now;
      out.end_time = now;
      return out;
    }
  }
  out.end_time = std::min(now, t_max);
  return out;
}

struct CouplingBattery {
  long long trials = 0;
  long long violations = 0;
  double first_violation_time = std::numeric_limits<double>::infinity();
  long long mismatch_events = 0;
};

inline CouplingBattery coupling_battery(const RateEnumerator& gen, const SiteWeights& w,
                                        const Config& x0, const Config& y0, double t_max,
                                        long long trials, uint64_t seed, bool pair_dangerous) {
  CouplingBattery bat;
  bat.trials = trials;
  for (long long trial = 0; trial < trials; ++trial) {
    RngStream rng(seed, (uint64_t)trial);
    auto out = coupled_pair(gen, w, x0, y0, t_max, rng, pair_dangerous);
    bat.mismatch_events += out.mismatch_events;
    if (out.order_broken) {
      ++bat.violations;
      bat.first_violation_time = std::min(bat.first_violation_time, out.break_time);
    }
  }
  return bat;
}

}  // namespace sephit
