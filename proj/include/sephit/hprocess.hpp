#pragma once

#include "sephit/montecarlo.hpp"

namespace sephit {

// Everything the conditioned-process analysis needs about one killed chain:
// the survival decay rate, the principal density u against the product
// measure, the limit law mu = u nu of the surviving chain, and the doubly
// tilted law mu_hat = u^2 nu / Z that governs the bulk of long surviving
// trajectories.  u is normalized so that mu is a probability measure.
struct QuasiStationary {
  StateSpace space;
  RateMatrix M;  // killed generator on the surviving states
  std::vector<double> nu;
  std::vector<double> u;
  double lambda = 0;
  double nu_mass = 0;    // starting probability of the surviving set
  double int_u2 = 0;     // second moment of u under nu
  std::vector<double> mu;
  std::vector<double> mu_hat;
  SpectrumResult spectral;
};

inline QuasiStationary quasi_stationary(const GeneratorSpec& spec, EigenOptions opt = {}) {
  if (!spec.pattern) throw std::invalid_argument("quasi_stationary: needs an absorbing pattern");
  RateEnumerator gen(spec);
  QuasiStationary qs{StateSpace::alive(spec.box, spec.pattern)};
  qs.nu = nu_weights(qs.space, spec.rho);
  qs.M = build_matrix(gen, qs.space, BuildMode::Forward);
  qs.spectral = principal_killed(qs.M, qs.nu, opt);
  if (!qs.spectral.converged) throw std::runtime_error("quasi_stationary: eigen solve stalled");
  qs.u = qs.spectral.u;
  qs.lambda = qs.spectral.lambda;
  int n = qs.space.size();
  qs.mu.resize(n);
  qs.mu_hat.resize(n);
  for (int i = 0; i < n; ++i) {
    qs.nu_mass += qs.nu[i];
    qs.int_u2 += qs.nu[i] * qs.u[i] * qs.u[i];
    qs.mu[i] = qs.nu[i] * qs.u[i];
  }
  for (int i = 0; i < n; ++i) qs.mu_hat[i] = qs.nu[i] * qs.u[i] * qs.u[i] / qs.int_u2;
  return qs;
}

// Conditioning on eternal survival: rates c(x,y) u(y)/u(x), conservative on
// the surviving states.
inline RateMatrix h_transform(const QuasiStationary& qs) {
  RateMatrix H;
  H.n = qs.M.n;
  H.rowptr.push_back(0);
  H.exit.resize(H.n, 0.0);
  H.potential.resize(H.n, 0.0);
  for (int i = 0; i < H.n; ++i) {
    double tot = 0;
    for (int k = qs.M.rowptr[i]; k < qs.M.rowptr[i + 1]; ++k) {
      double r = qs.M.val[k] * qs.u[qs.M.col[k]] / qs.u[i];
      H.col.push_back(qs.M.col[k]);
      H.val.push_back(r);
      tot += r;
    }
    H.exit[i] = tot;
    H.rowptr.push_back((int)H.col.size());
  }
  return H;
}

struct HTransformReport {
  double reversibility_defect = 0;  // max |mu_hat(x) c_u(x,y) - mu_hat(y) c_u(y,x)|
  double stationarity_defect = 0;   // sup norm of mu_hat applied to the generator
  double conjugation_defect = 0;    // max |(L u + lambda u)/u|: the eigen residual seen by the transform
};

inline HTransformReport h_transform_report(const QuasiStationary& qs, const RateMatrix& H) {
  HTransformReport rep;
  int n = H.n;
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int k = H.rowptr[i]; k < H.rowptr[i + 1]; ++k) dense[i][H.col[k]] += H.val[k];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rep.reversibility_defect =
          std::max(rep.reversibility_defect,
                   std::abs(qs.mu_hat[i] * dense[i][j] - qs.mu_hat[j] * dense[j][i]));
  std::vector<double> acc(n, 0.0);
  H.apply_transpose(qs.mu_hat.data(), acc.data());
  for (double x : acc) rep.stationarity_defect = std::max(rep.stationarity_defect, std::abs(x));
  std::vector<double> lu(n);
  qs.M.apply(qs.u.data(), lu.data());
  for (int i = 0; i < n; ++i)
    rep.conjugation_defect =
        std::max(rep.conjugation_defect, std::abs(lu[i] + qs.lambda * qs.u[i]) / qs.u[i]);
  return rep;
}

// E[Z_t] for the exponential martingale Z_t = u(eta_0) u(eta_t) e^{lambda t}
// 1{tau>t} / int u^2 dnu, evaluated through the semigroup rather than the
// eigen identity it reduces to.
struct MartingaleReport {
  std::vector<double> ts, expectation;
  double worst_abs_error = 0;
};

inline MartingaleReport z_martingale_check(const QuasiStationary& qs,
                                           const std::vector<double>& ts) {
  MartingaleReport rep;
  rep.ts = ts;
  for (double t : ts) {
    auto su = semigroup_apply(qs.M, t, qs.u);
    double v = 0;
    for (int i = 0; i < qs.M.n; ++i) v += qs.nu[i] * qs.u[i] * su[i];
    v *= std::exp(qs.lambda * t) / qs.int_u2;
    rep.expectation.push_back(v);
    rep.worst_abs_error = std::max(rep.worst_abs_error, std::abs(v - 1.0));
  }
  return rep;
}

// Two-sided bound on the survival probability against its exponential decay:
// exp(-H) <= P_nu(tau > t) e^{lambda t} <= 1, with H the relative entropy of
// the doubly tilted law against the product measure.  The self-adjoint case
// makes the tilted law mu_hat.
struct SandwichReport {
  std::vector<double> ts, ratio;
  double entropy = 0;
  double lower = 0;  // exp(-entropy)
  double limit = 0;  // Yaglom constant, squeezed between the two bounds
  bool holds = true;
};

inline SandwichReport fact11_check(const QuasiStationary& qs, const std::vector<double>& ts,
                                   double tol = 1e-9) {
  SandwichReport rep;
  rep.ts = ts;
  for (int i = 0; i < qs.M.n; ++i)
    rep.entropy += qs.mu_hat[i] * std::log(qs.u[i] * qs.u[i] / qs.int_u2);
  rep.lower = std::exp(-rep.entropy);
  rep.limit = 1.0 / qs.int_u2;  // (int u dnu)^2 / int u^2 dnu with int u dnu = 1
  for (double t : ts) {
    double r = survival_exact(qs.M, qs.nu, t) * std::exp(qs.lambda * t);
    rep.ratio.push_back(r);
    if (r > 1 + tol || r < rep.lower - tol) rep.holds = false;
  }
  return rep;
}

// Convergence of the survival ratio to the Yaglom constant, with the error
// checked against the decay dictated by the spectral gap.
struct YaglomRatio {
  std::vector<double> ts, ratio, err;
  double limit = 0;
  double expected_factor = 0;  // exp(-gap dt) per grid step
  double worst_factor = 0;     // observed shrink factor, worst step
  bool decay_consistent = true;
};

inline YaglomRatio fact12_check(const QuasiStationary& qs, const std::vector<double>& ts,
                                double slack = 1.25) {
  if (ts.size() < 2) throw std::invalid_argument("fact12_check: need a grid");
  double dt = ts[1] - ts[0];
  for (size_t i = 1; i < ts.size(); ++i)
    if (std::abs(ts[i] - ts[i - 1] - dt) > 1e-12)
      throw std::invalid_argument("fact12_check: grid must be uniform");
  YaglomRatio rep;
  rep.ts = ts;
  rep.limit = 1.0 / qs.int_u2;
  rep.expected_factor = std::exp(-qs.spectral.gap * dt);
  for (double t : ts) {
    double r = survival_exact(qs.M, qs.nu, t) * std::exp(qs.lambda * t);
    rep.ratio.push_back(r);
    rep.err.push_back(r - rep.limit);
  }
  for (size_t i = 1; i < ts.size(); ++i) {
    if (std::abs(rep.err[i - 1]) < 1e-13) continue;  // already at the floor
    double f = std::abs(rep.err[i]) / std::abs(rep.err[i - 1]);
    rep.worst_factor = std::max(rep.worst_factor, f);
    if (f > rep.expected_factor * slack) rep.decay_consistent = false;
  }
  return rep;
}

// int g Sbar_2t g dnu / (int Sbar_t g dnu)^2 with g = u holds exactly at
// every t, not only in the limit; both routes go through the semigroup.
struct Identity43Report {
  std::vector<double> ts, value;
  double expected = 0;
  double worst_abs_error = 0;
};

inline Identity43Report identity43_check(const QuasiStationary& qs,
                                         const std::vector<double>& ts) {
  Identity43Report rep;
  rep.ts = ts;
  rep.expected = qs.int_u2;
  for (double t : ts) {
    auto s2 = semigroup_apply(qs.M, 2 * t, qs.u);
    auto s1 = semigroup_apply(qs.M, t, qs.u);
    double num = 0, den = 0;
    for (int i = 0; i < qs.M.n; ++i) {
      num += qs.nu[i] * qs.u[i] * s2[i];
      den += qs.nu[i] * s1[i];
    }
    double v = num / (den * den);
    rep.value.push_back(v);
    rep.worst_abs_error = std::max(rep.worst_abs_error, std::abs(v - rep.expected));
  }
  return rep;
}

// Conditional correlation E_nu[f(eta_0) g(eta_t) | tau > t] against the
// factorized limit int f dmu int g dmu.
struct CorrelationReport {
  std::vector<double> ts, value;
  double limit = 0;
  std::vector<double> abs_error;
};

inline CorrelationReport prop18_check(const QuasiStationary& qs, const std::vector<double>& f,
                                      const std::vector<double>& g,
                                      const std::vector<double>& ts) {
  int n = qs.M.n;
  if ((int)f.size() != n || (int)g.size() != n)
    throw std::invalid_argument("prop18_check: size mismatch");
  CorrelationReport rep;
  rep.ts = ts;
  double mf = 0, mg = 0;
  for (int i = 0; i < n; ++i) {
    mf += f[i] * qs.mu[i];
    mg += g[i] * qs.mu[i];
  }
  rep.limit = mf * mg;
  for (double t : ts) {
    auto sg = semigroup_apply(qs.M, t, g);
    double num = 0, den = survival_exact(qs.M, qs.nu, t);
    for (int i = 0; i < n; ++i) num += qs.nu[i] * f[i] * sg[i];
    rep.value.push_back(num / den);
    rep.abs_error.push_back(std::abs(num / den - rep.limit));
  }
  return rep;
}

// Law of eta_a for the chain conditioned to survive to t.  In the bulk
// (a and t-a both large) it approaches mu_hat; at the edges it approaches
// mu.  Three factors: mass transported to a, survival from a to t, all
// normalized by the surviving mass.
inline std::vector<double> window_law(const QuasiStationary& qs, double a, double t) {
  if (a < 0 || a > t) throw std::invalid_argument("window_law: need 0 <= a <= t");
  auto mass = semigroup_apply(qs.M, a, qs.nu, 1e-12, /*transpose=*/true);
  auto tail = semigroup_apply(qs.M, t - a, std::vector<double>(qs.M.n, 1.0));
  double z = 0;
  for (int i = 0; i < qs.M.n; ++i) {
    mass[i] *= tail[i];
    z += mass[i];
  }
  for (double& x : mass) x /= z;
  return mass;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double tv = 0;
  for (size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return tv / 2;
}

struct WindowReport {
  double t = 0;
  std::vector<double> as;
  std::vector<double> tv_bulk;  // distance from mu_hat at each interior a
  double tv_edge_start = 0;     // a = 0 against mu
  double tv_edge_end = 0;       // a = t against mu
};

inline WindowReport window_report(const QuasiStationary& qs, double t,
                                  const std::vector<double>& as) {
  WindowReport rep;
  rep.t = t;
  rep.as = as;
  for (double a : as) rep.tv_bulk.push_back(total_variation(window_law(qs, a, t), qs.mu_hat));
  rep.tv_edge_start = total_variation(window_law(qs, 0.0, t), qs.mu);
  rep.tv_edge_end = total_variation(window_law(qs, t, t), qs.mu);
  return rep;
}

// Two-time decoupling: E_nu[f(eta_a) g(eta_b) | tau > t] against
// int f dmu_hat int g dmu_hat for 0 << a << b << t.
struct DecouplingReport {
  double t = 0, a = 0, b = 0;
  double value = 0, limit = 0, abs_error = 0;
};

inline DecouplingReport remark51_check(const QuasiStationary& qs, const std::vector<double>& f,
                                       const std::vector<double>& g, double a, double b,
                                       double t) {
  if (!(0 < a && a < b && b < t)) throw std::invalid_argument("remark51_check: need 0<a<b<t");
  int n = qs.M.n;
  if ((int)f.size() != n || (int)g.size() != n)
    throw std::invalid_argument("remark51_check: size mismatch");
  DecouplingReport rep;
  rep.t = t;
  rep.a = a;
  rep.b = b;
  double hf = 0, hg = 0;
  for (int i = 0; i < n; ++i) {
    hf += f[i] * qs.mu_hat[i];
    hg += g[i] * qs.mu_hat[i];
  }
  rep.limit = hf * hg;
  auto tail = semigroup_apply(qs.M, t - b, std::vector<double>(n, 1.0));
  for (int i = 0; i < n; ++i) tail[i] *= g[i];
  auto mid = semigroup_apply(qs.M, b - a, tail);
  auto mass = semigroup_apply(qs.M, a, qs.nu, 1e-12, /*transpose=*/true);
  double num = 0;
  for (int i = 0; i < n; ++i) num += mass[i] * f[i] * mid[i];
  rep.value = num / survival_exact(qs.M, qs.nu, t);
  rep.abs_error = std::abs(rep.value - rep.limit);
  return rep;
}

// One trajectory of the jump chain encoded by a conservative rate matrix.
inline int simulate_matrix_chain(const RateMatrix& M, int start, double t, RngStream& rng) {
  int x = start;
  double now = 0;
  for (;;) {
    double total = M.exit[x];
    if (total <= 0) return x;
    now += rng.exponential(total);
    if (now > t) return x;
    double u = rng.uniform() * total, cum = 0;
    int next = M.col[M.rowptr[x + 1] - 1];
    for (int k = M.rowptr[x]; k < M.rowptr[x + 1]; ++k) {
      cum += M.val[k];
      if (u < cum) {
        next = M.col[k];
        break;
      }
    }
    x = next;
  }
}

}  // namespace sephit
