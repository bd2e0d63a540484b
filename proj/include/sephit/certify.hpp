#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "sephit/domination.hpp"
#include "sephit/generators.hpp"

namespace sephit {

struct VMonotoneReport {
  bool ok = true;
  bool increasing = true;  // direction that was checked
  double worst_margin = std::numeric_limits<double>::infinity();
  long long cases = 0;
  int violation_site = -1;
  std::optional<Config> violation_config;  // lower half of the offending pair, zero-filled
  double violation_delta = 0;
};

namespace detail {

// Sites whose occupancy can influence V(flip k) - V(id): the flip site, its
// neighbors, and for indicator weights the pattern plus (when k is a pattern
// site) the pattern's neighborhoods.
inline std::vector<int> delta_stencil(const Box& box, int k, const Pattern* pat) {
  std::set<int> s{k};
  for (int nb : box.neighbor_list(k)) s.insert(nb);
  if (pat) {
    for (int p : pat->sites) s.insert(p);
    if (std::find(pat->sites.begin(), pat->sites.end(), k) != pat->sites.end())
      for (int p : pat->sites)
        for (int nb : box.neighbor_list(p)) s.insert(nb);
  }
  return std::vector<int>(s.begin(), s.end());
}

template <typename PairFn>
inline VMonotoneReport scan_v_monotone(const RateEnumerator& gen, const SiteWeights& w,
                                       bool expect_increasing, double tol, PairFn&& for_pairs) {
  VMonotoneReport rep;
  rep.increasing = expect_increasing;
  for_pairs([&](int k, const Config& c, const Config& cu) {
    double dv = gen.potential_V(cu, w) - gen.potential_V(c, w);
    double margin = expect_increasing ? dv : -dv;
    ++rep.cases;
    if (margin < rep.worst_margin) rep.worst_margin = margin;
    if (margin < -tol && rep.violation_site < 0) {
      rep.ok = false;
      rep.violation_site = k;
      rep.violation_config = c;
      rep.violation_delta = dv;
    }
  });
  if (rep.worst_margin < -tol) rep.ok = false;
  return rep;
}

}  // namespace detail

// Certify that V is monotone under adding a particle anywhere: the change
// V(flip k) - V(id) depends only on the stencil of k, so it suffices to
// enumerate stencil occupancies with everything else empty.  Pairs leaving
// the indicator's support are skipped.  The first violation reported is the
// packed-order minimum over all violating pairs.
inline VMonotoneReport verify_V_monotone(const RateEnumerator& gen, const SiteWeights& w,
                                         bool expect_increasing, double tol = 1e-10) {
  const Box& box = gen.spec().box;
  if (!(w.box == box)) throw std::invalid_argument("verify_V_monotone: box mismatch");
  const Pattern* pat =
      (w.form == PsiForm::IndicatorProduct && w.pattern) ? &*w.pattern : nullptr;
  return detail::scan_v_monotone(gen, w, expect_increasing, tol, [&](auto&& visit) {
    for (int k = 0; k < box.sites(); ++k) {
      auto sten = detail::delta_stencil(box, k, pat);
      int nb = (int)sten.size();
      int pos_k = (int)(std::find(sten.begin(), sten.end(), k) - sten.begin());
      for (uint64_t m = 0; m < (uint64_t(1) << nb); ++m) {
        if ((m >> pos_k) & 1) continue;
        Config c = Config::zeros(box.sites());
        for (int t = 0; t < nb; ++t)
          if ((m >> t) & 1) c.set(sten[t], true);
        Config cu = flip(c, k);
        if (pat && (in_pattern(*pat, c) || in_pattern(*pat, cu))) continue;
        visit(k, c, cu);
      }
    }
  });
}

// Reference implementation sweeping every configuration; small boxes only.
inline VMonotoneReport verify_V_monotone_naive(const RateEnumerator& gen, const SiteWeights& w,
                                               bool expect_increasing, double tol = 1e-10) {
  const Box& box = gen.spec().box;
  if (!(w.box == box)) throw std::invalid_argument("verify_V_monotone_naive: box mismatch");
  if (box.sites() > 20) throw std::invalid_argument("verify_V_monotone_naive: box too large");
  const Pattern* pat =
      (w.form == PsiForm::IndicatorProduct && w.pattern) ? &*w.pattern : nullptr;
  return detail::scan_v_monotone(gen, w, expect_increasing, tol, [&](auto&& visit) {
    for (int k = 0; k < box.sites(); ++k) {
      for (uint64_t m = 0; m < (uint64_t(1) << box.sites()); ++m) {
        if ((m >> k) & 1) continue;
        Config c = Config::zeros(box.sites());
        c.w[0] = m;
        Config cu = flip(c, k);
        if (pat && (in_pattern(*pat, c) || in_pattern(*pat, cu))) continue;
        visit(k, c, cu);
      }
    }
  });
}

struct GenMonotoneReport {
  bool ok = true;
  int states = 0;
  long long pairs = 0;
  double theta = 0;
  double worst_deficit = 0;
  // violation certificate: a covering pair and an up-set separating their
  // one-step kernels
  std::optional<Config> vio_lower, vio_upper;
  std::vector<Config> vio_upset;
  double vio_rate_lower = 0, vio_rate_upper = 0;  // rates into the up-set
};

// Certify that the tilted chain is monotone: for Theta twice the maximal
// exit rate, the uniformized kernel I + L/Theta must map every covering
// pair of the induced order to stochastically ordered rows.  Equivalent to
// the up-set rate criterion, but checked in polynomial time per pair.
inline GenMonotoneReport verify_generator_monotone(const RateEnumerator& gen, const SiteWeights& w,
                                                   double tol = 1e-9, int max_states = 4096) {
  const Box& box = gen.spec().box;
  if (!(w.box == box)) throw std::invalid_argument("verify_generator_monotone: box mismatch");
  if (box.sites() > 20)
    throw std::invalid_argument("verify_generator_monotone: box too large");

  std::vector<Config> states;
  for (uint64_t m = 0; m < (uint64_t(1) << box.sites()); ++m) {
    Config c = Config::zeros(box.sites());
    c.w[0] = m;
    if (w.psi(c) > 0) states.push_back(c);
  }
  int S = (int)states.size();
  if (S > max_states) throw std::invalid_argument("verify_generator_monotone: too many states");
  std::map<Config, int> index;
  for (int i = 0; i < S; ++i) index[states[i]] = i;

  // tilted rates per state
  std::vector<std::vector<std::pair<int, double>>> rows(S);
  double max_rate = 0;
  for (int i = 0; i < S; ++i) {
    double tot = 0;
    for (auto& t : gen.psi_transitions(states[i], w).moves) {
      auto it = index.find(t.target);
      if (it == index.end()) throw std::logic_error("tilted move leaves the support");
      rows[i].push_back({it->second, t.rate});
      tot += t.rate;
    }
    max_rate = std::max(max_rate, tot);
  }
  double theta = max_rate > 0 ? 2 * max_rate : 1.0;

  std::vector<std::vector<int>> sup(S);
  for (int i = 0; i < S; ++i) {
    int ci = states[i].count();
    for (int j = 0; j < S; ++j)
      if (states[j].count() >= ci && leq(states[i], states[j])) sup[i].push_back(j);
  }

  auto kernel_row = [&](int i) {
    std::vector<double> r(S, 0.0);
    double tot = 0;
    for (auto& [j, rate] : rows[i]) {
      r[j] += rate / theta;
      tot += rate;
    }
    r[i] += 1 - tot / theta;
    return r;
  };

  GenMonotoneReport rep;
  rep.states = S;
  rep.theta = theta;
  for (int i = 0; i < S; ++i) {
    for (int s = 0; s < box.sites(); ++s) {
      if (states[i].get(s)) continue;
      auto it = index.find(flip(states[i], s));
      if (it == index.end()) continue;
      int j = it->second;
      ++rep.pairs;
      auto d = strassen_dominates(states, kernel_row(i), kernel_row(j), tol, &sup);
      if (d.deficit > rep.worst_deficit) rep.worst_deficit = d.deficit;
      if (!d.dominated && !rep.vio_lower) {
        rep.ok = false;
        rep.vio_lower = states[i];
        rep.vio_upper = states[j];
        std::vector<char> in_up(S, 0);
        for (int u : d.violating_upset) {
          rep.vio_upset.push_back(states[u]);
          in_up[u] = 1;
        }
        for (auto& [t, rate] : rows[i])
          if (in_up[t]) rep.vio_rate_lower += rate;
        for (auto& [t, rate] : rows[j])
          if (in_up[t]) rep.vio_rate_upper += rate;
      }
    }
  }
  if (rep.worst_deficit > tol) rep.ok = false;
  return rep;
}

}  // namespace sephit
