#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sephit/lattice.hpp"

namespace sephit {

// h(i) = P_i(hit the target set before stepping outside the box), for the
// simple random walk on Z^d restricted to the full box geometry.
struct HittingProfile {
  Box box;
  std::vector<int> targets;
  std::vector<double> h;
  double residual = 0;

  bool is_target(int site) const {
    for (int t : targets)
      if (t == site) return true;
    return false;
  }
};

namespace detail {

inline double dirichlet_residual(const Box& box, const std::vector<char>& is_t,
                                 const std::vector<double>& h) {
  double worst = 0;
  int deg = 2 * box.d;
  for (int i = 0; i < box.sites(); ++i) {
    if (is_t[i]) continue;
    int cnt = 0;
    const int* nb = box.neighbors(i, &cnt);
    double s = 0;
    for (int k = 0; k < cnt; ++k) s += h[nb[k]];
    worst = std::max(worst, std::abs(deg * h[i] - s));
  }
  return worst;
}

}  // namespace detail

// Dense factorization up to 4096 unknowns, conjugate-gradient beyond, with
// Gauss-Seidel polish until the harmonic-equation residual is <= 1e-12.
inline HittingProfile solve_hitting(const Box& box, std::vector<int> targets) {
  if (box.no_origin) throw std::invalid_argument("solve_hitting: walk lives on the full box");
  if (targets.empty()) throw std::invalid_argument("solve_hitting: no targets");
  std::vector<char> is_t(box.sites(), 0);
  for (int t : targets) {
    if (t < 0 || t >= box.sites()) throw std::invalid_argument("solve_hitting: bad target");
    is_t[t] = 1;
  }

  int n_unknown = 0;
  std::vector<int> uidx(box.sites(), -1);
  for (int i = 0; i < box.sites(); ++i)
    if (!is_t[i]) uidx[i] = n_unknown++;

  std::vector<double> h(box.sites(), 0.0);
  for (int t : targets) h[t] = 1.0;
  int deg = 2 * box.d;

  if (n_unknown > 0 && n_unknown <= 4096) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_unknown, n_unknown);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    for (int i = 0; i < box.sites(); ++i) {
      if (is_t[i]) continue;
      int r = uidx[i];
      A(r, r) = deg;
      int cnt = 0;
      const int* nb = box.neighbors(i, &cnt);
      for (int k = 0; k < cnt; ++k) {
        if (is_t[nb[k]]) rhs[r] += 1.0;
        else A(r, uidx[nb[k]]) -= 1.0;
      }
    }
    Eigen::VectorXd x = A.partialPivLu().solve(rhs);
    for (int i = 0; i < box.sites(); ++i)
      if (!is_t[i]) h[i] = x[uidx[i]];
  } else if (n_unknown > 0) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve((size_t)n_unknown * (deg + 1));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_unknown);
    for (int i = 0; i < box.sites(); ++i) {
      if (is_t[i]) continue;
      int r = uidx[i];
      trip.emplace_back(r, r, (double)deg);
      int cnt = 0;
      const int* nb = box.neighbors(i, &cnt);
      for (int k = 0; k < cnt; ++k) {
        if (is_t[nb[k]]) rhs[r] += 1.0;
        else trip.emplace_back(r, uidx[nb[k]], -1.0);
      }
    }
    Eigen::SparseMatrix<double> A(n_unknown, n_unknown);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(50000);
    cg.compute(A);
    Eigen::VectorXd x = cg.solve(rhs);
    for (int i = 0; i < box.sites(); ++i)
      if (!is_t[i]) h[i] = x[uidx[i]];
  }

  double res = detail::dirichlet_residual(box, is_t, h);
  for (int sweep = 0; sweep < 2000 && res > 1e-12; ++sweep) {
    for (int i = 0; i < box.sites(); ++i) {
      if (is_t[i]) continue;
      int cnt = 0;
      const int* nb = box.neighbors(i, &cnt);
      double s = 0;
      for (int k = 0; k < cnt; ++k) s += h[nb[k]];
      h[i] = s / deg;
    }
    res = detail::dirichlet_residual(box, is_t, h);
  }

  HittingProfile out;
  out.box = box;
  out.targets = std::move(targets);
  out.h = std::move(h);
  out.residual = res;
  return out;
}

// C for the single-site pattern: 1/(1 - 2 max_{k~0} h(k)).  Fails when the
// max reaches 1/2, which is the low-dimension obstruction.
inline double constant_for_A1(const HittingProfile& p) {
  int o = p.box.origin_site();
  if (o < 0) throw std::invalid_argument("constant_for_A1: no origin");
  int cnt = 0;
  const int* nb = p.box.neighbors(o, &cnt);
  double m = 0;
  for (int k = 0; k < cnt; ++k) m = std::max(m, p.h[nb[k]]);
  if (m >= 0.5) throw std::domain_error("constant_for_A1: neighbor hitting probability >= 1/2");
  return 1.0 / (1.0 - 2.0 * m);
}

// Smallest C with (1+C)/(1+C h(k)) >= 2 at every neighbor k of the first
// target other than the second, plus a 1e-9 margin.
inline double constant_for_A2(const HittingProfile& p) {
  if (p.targets.size() != 2) throw std::invalid_argument("constant_for_A2: need two targets");
  int t0 = p.targets[0], t1 = p.targets[1];
  int cnt = 0;
  const int* nb = p.box.neighbors(t0, &cnt);
  double m = 0;
  bool saw = false;
  for (int k = 0; k < cnt; ++k) {
    if (nb[k] == t1) continue;
    m = std::max(m, p.h[nb[k]]);
    saw = true;
  }
  if (!saw) throw std::invalid_argument("constant_for_A2: pattern fills the neighborhood");
  if (m >= 0.5) throw std::domain_error("constant_for_A2: neighbor hitting probability >= 1/2");
  return 1.0 / (1.0 - 2.0 * m) + 1e-9;
}

// Birth-death drift conditions at the origin's neighbors, with
// delta = b(1-rho)/(a rho) and gamma_k = 1/(1+C h(k)):
//   (delta/gamma - 1)(a + gamma b/delta) >= -C(1-h)/(1+C h)
//   (1/(gamma delta) - 1)(b + gamma delta a) >= -C(1-h)/(1+C h)
inline bool ab_conditions_hold(const HittingProfile& p, double a, double b, double rho, double C) {
  int o = p.box.origin_site();
  if (o < 0) throw std::invalid_argument("ab_conditions_hold: no origin");
  double delta = b * (1 - rho) / (a * rho);
  int cnt = 0;
  const int* nb = p.box.neighbors(o, &cnt);
  for (int k = 0; k < cnt; ++k) {
    double h = p.h[nb[k]];
    double g = 1.0 / (1.0 + C * h);
    double rhs = -C * (1 - h) / (1.0 + C * h);
    double lhs1 = (delta / g - 1.0) * (a + g * b / delta);
    double lhs2 = (1.0 / (g * delta) - 1.0) * (b + g * delta * a);
    if (lhs1 < rhs || lhs2 < rhs) return false;
  }
  return true;
}

// Smallest passing C on a geometric grid (quarter-octave steps).
inline double constant_for_ab(const HittingProfile& p, double a, double b, double rho) {
  if (a <= 0 || b <= 0 || rho <= 0 || rho >= 1)
    throw std::invalid_argument("constant_for_ab: need a,b > 0 and rho in (0,1)");
  for (int j = -120; j <= 240; ++j) {
    double C = std::pow(2.0, 0.25 * j);
    if (ab_conditions_hold(p, a, b, rho, C)) return C;
  }
  throw std::domain_error("constant_for_ab: no C on the scan grid");
}

enum class PsiForm {
  IndicatorProduct,  // 1_{off pattern} * prod gamma_i^{eta_i}
  Product,           // prod gamma_i^{eta_i}
  InverseProduct,    // prod gamma_i^{-eta_i}
};

// Per-site tilt weights gamma_i = 1/(1 + C h(i)) with the induced Bernoulli
// parameters alpha_i = rho gamma_i / (rho gamma_i + 1 - rho).
struct SiteWeights {
  Box box;
  std::vector<double> gamma;
  std::vector<double> alpha;
  double C = 0;
  double rho = 0.5;
  PsiForm form = PsiForm::Product;
  std::optional<Pattern> pattern;

  double alpha_tilde(int site) const {
    double gi = 1.0 / gamma[site];
    return rho * gi / (rho * gi + 1 - rho);
  }

  double psi(const Config& c) const {
    if (c.width != box.sites()) throw std::invalid_argument("psi: width mismatch");
    if (form == PsiForm::IndicatorProduct) {
      if (!pattern) throw std::logic_error("psi: indicator form needs a pattern");
      if (in_pattern(*pattern, c)) return 0.0;
    }
    double r = 1.0;
    for (int i = 0; i < c.width; ++i)
      if (c.get(i)) r *= gamma[i];
    return form == PsiForm::InverseProduct ? 1.0 / r : r;
  }

  // psi(to)/psi(from), computed from the changed sites only.
  // Requires psi(from) > 0.
  double psi_ratio(const Config& from, const Config& to) const {
    if (form == PsiForm::IndicatorProduct) {
      if (in_pattern(*pattern, from)) throw std::domain_error("psi_ratio: psi(from) = 0");
      if (in_pattern(*pattern, to)) return 0.0;
    }
    double r = 1.0;
    for (int word = 0; word < 2; ++word) {
      uint64_t x = from.w[word] ^ to.w[word];
      while (x) {
        int bit = __builtin_ctzll(x);
        x &= x - 1;
        int site = 64 * word + bit;
        if (to.get(site)) r *= gamma[site];
        else r /= gamma[site];
      }
    }
    return form == PsiForm::InverseProduct ? 1.0 / r : r;
  }
};

// Weights over target_box (defaults to the profile's box); sites are matched
// by coordinates, so a profile on the full box can serve the origin-excluded
// state geometry.
inline SiteWeights weights(const HittingProfile& p, double C, double rho, PsiForm form,
                           std::optional<Pattern> pattern = std::nullopt,
                           std::optional<Box> target_box = std::nullopt) {
  if (rho <= 0 || rho >= 1) throw std::invalid_argument("weights: rho in (0,1)");
  if (C < 0) throw std::invalid_argument("weights: C >= 0");
  SiteWeights w;
  w.box = target_box.value_or(p.box);
  w.C = C;
  w.rho = rho;
  w.form = form;
  w.pattern = std::move(pattern);
  w.gamma.resize(w.box.sites());
  w.alpha.resize(w.box.sites());
  for (int i = 0; i < w.box.sites(); ++i) {
    int src = (w.box == p.box) ? i : p.box.index_of(w.box.coords_of(i));
    if (src < 0) throw std::invalid_argument("weights: site not covered by profile");
    double g = 1.0 / (1.0 + C * p.h[src]);
    w.gamma[i] = g;
    w.alpha[i] = rho * g / (rho * g + 1 - rho);
  }
  return w;
}

struct SummabilityReport {
  std::vector<int> ns;
  std::vector<double> partial_sums;
  std::vector<double> increments;  // consecutive differences
  bool decaying = false;
};

// Trend of sum_i (1 - alpha_i/rho)^2 over a growing family of boxes.  The
// per-box weights are supplied by the caller (the zeroth site weight at the
// origin is skipped when present).
inline SummabilityReport summability_check(const std::vector<SiteWeights>& per_box) {
  if (per_box.size() < 2) throw std::invalid_argument("summability_check: need >= 2 boxes");
  SummabilityReport rep;
  for (const auto& w : per_box) {
    int o = w.box.origin_site();
    double s = 0;
    for (int i = 0; i < w.box.sites(); ++i) {
      if (i == o) continue;
      double t = 1.0 - w.alpha[i] / w.rho;
      s += t * t;
    }
    rep.ns.push_back(w.box.hi[0]);
    rep.partial_sums.push_back(s);
  }
  for (size_t i = 1; i < rep.partial_sums.size(); ++i)
    rep.increments.push_back(rep.partial_sums[i] - rep.partial_sums[i - 1]);
  rep.decaying = true;
  for (size_t i = 1; i < rep.increments.size(); ++i)
    if (rep.increments[i] >= rep.increments[i - 1]) rep.decaying = false;
  return rep;
}

struct ReturnStatistics {
  int d = 0;
  int t_max = 0;
  bool divergent = false;       // d <= 2
  double lower = 0;             // partial sum of the return series
  double upper = 0;             // partial sum + tail envelope (d >= 3)
  double tail_bound = 0;
  double p_return_lower = 0;    // E/(1+E) transform of the bounds
  double p_return_upper = 0;
  std::vector<double> pmf;      // P(S_t = 0), t = 0..t_max
};

// Expected number of returns sum_{t>=2} P_0(S_t = 0) for the simple random
// walk on Z^d.  P(S_t = 0) is computed exactly by splitting the steps over
// dimensions (binomial weights, one-dimensional central terms); the tail
// beyond t_max uses the local-CLT envelope c t^{-d/2} with
// c = 1.1 * max(asymptotic constant, observed window constant).
inline ReturnStatistics return_statistics(int d, int t_max = 200) {
  if (d < 1 || t_max < 16) throw std::invalid_argument("return_statistics: bad d or t_max");
  if (t_max % 2) ++t_max;
  auto lbinom = [](int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  };
  int half = t_max / 2;
  // q[m][k] = P(2k-step walk in m dims ends at 0)
  std::vector<std::vector<double>> q(d + 1, std::vector<double>(half + 1, 0.0));
  for (int k = 0; k <= half; ++k) q[1][k] = std::exp(lbinom(2 * k, k) - 2.0 * k * std::log(2.0));
  for (int m = 2; m <= d; ++m) {
    double logm = std::log((double)m), logm1 = std::log(m - 1.0);
    for (int k = 0; k <= half; ++k) {
      double s = 0;
      for (int j = 0; j <= k; ++j) {
        // 2j of the 2k steps move in the first dimension
        double w = std::exp(lbinom(2 * k, 2 * j) - 2.0 * k * logm + (2.0 * k - 2.0 * j) * logm1);
        s += w * q[1][j] * q[m - 1][k - j];
      }
      q[m][k] = s;
    }
  }

  ReturnStatistics r;
  r.d = d;
  r.t_max = t_max;
  r.divergent = d <= 2;
  r.pmf.assign(t_max + 1, 0.0);
  for (int k = 0; k <= half; ++k) r.pmf[2 * k] = q[d][k];
  for (int t = 2; t <= t_max; t += 2) r.lower += r.pmf[t];

  if (!r.divergent) {
    double c = 2.0 * std::pow(d / (2.0 * M_PI), 0.5 * d);
    for (int t = t_max / 2; t <= t_max; t += 2)
      c = std::max(c, r.pmf[t] * std::pow((double)t, 0.5 * d));
    c *= 1.1;
    r.tail_bound = c * std::pow((double)t_max, 1.0 - 0.5 * d) / (d - 2);
    r.upper = r.lower + r.tail_bound;
    r.p_return_lower = r.lower / (1 + r.lower);
    r.p_return_upper = r.upper / (1 + r.upper);
  }
  return r;
}

struct TwoPointReport {
  int d = 0;
  std::vector<int> ns;
  std::vector<double> pair_max;     // max_{k~0, k != 0'} P_k(hit {0,0'} before exit)
  std::vector<double> single_max;   // max_{k over the same set} P_k(hit {0} before exit)
  std::vector<double> far_max;      // max_{k over the same set} P_k(hit {0'} before exit)
  bool all_below_half = true;
  bool chain_ok = true;             // far <= single sitewise
  bool monotone_in_n = true;
};

// Pair-target hitting bound at the origin's neighbors, 0' = origin + e_1.
inline TwoPointReport two_point_bound(int d, const std::vector<int>& ns) {
  if (d < 1 || ns.empty()) throw std::invalid_argument("two_point_bound: bad input");
  TwoPointReport rep;
  rep.d = d;
  for (int n : ns) {
    if (n < 2) throw std::invalid_argument("two_point_bound: n >= 2");
    Box box = Box::cube(d, n);
    int o = box.origin_site();
    std::vector<int> oc(d, 0);
    oc[0] = 1;
    int op = box.index_of(oc);
    auto p2 = solve_hitting(box, {o, op});
    auto p0 = solve_hitting(box, {o});
    auto pp = solve_hitting(box, {op});
    int cnt = 0;
    const int* nb = box.neighbors(o, &cnt);
    double m2 = 0, m0 = 0, mp = 0;
    for (int k = 0; k < cnt; ++k) {
      int s = nb[k];
      if (s == op) continue;
      m2 = std::max(m2, p2.h[s]);
      m0 = std::max(m0, p0.h[s]);
      mp = std::max(mp, pp.h[s]);
      if (pp.h[s] > p0.h[s] + 1e-12) rep.chain_ok = false;
    }
    rep.ns.push_back(n);
    rep.pair_max.push_back(m2);
    rep.single_max.push_back(m0);
    rep.far_max.push_back(mp);
    if (m2 >= 0.5) rep.all_below_half = false;
  }
  for (size_t i = 1; i < rep.pair_max.size(); ++i)
    if (rep.pair_max[i] + 1e-12 < rep.pair_max[i - 1]) rep.monotone_in_n = false;
  return rep;
}

}  // namespace sephit
