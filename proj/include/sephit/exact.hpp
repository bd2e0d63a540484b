#pragma once

#include <cmath>
#include <limits>
#include <random>

#include "sephit/generators.hpp"

namespace sephit {

// Packed-ascending enumeration of configurations, optionally restricted to
// the complement of a pattern event.
struct StateSpace {
  Box box;
  std::optional<Pattern> pattern;
  std::vector<Config> states;
  std::vector<int32_t> index;  // dense lookup over packed values

  static StateSpace alive(const Box& box, const std::optional<Pattern>& pat) {
    if (box.sites() > 24) throw std::invalid_argument("StateSpace: more than 24 sites");
    StateSpace sp;
    sp.box = box;
    sp.pattern = pat;
    uint64_t n = uint64_t(1) << box.sites();
    sp.index.assign(n, -1);
    for (uint64_t m = 0; m < n; ++m) {
      Config c = Config::zeros(box.sites());
      c.w[0] = m;
      if (pat && in_pattern(*pat, c)) continue;
      sp.index[m] = (int32_t)sp.states.size();
      sp.states.push_back(c);
    }
    return sp;
  }

  static StateSpace all(const Box& box) { return alive(box, std::nullopt); }

  int size() const { return (int)states.size(); }

  int find(const Config& c) const {
    if (c.width != box.sites()) return -1;
    return index[c.w[0]];
  }
};

// product measure masses on the states (not renormalized: summing over a
// strict subset of configurations gives the event's probability)
inline std::vector<double> nu_weights(const StateSpace& sp, double rho) {
  std::vector<double> nu(sp.size());
  for (int i = 0; i < sp.size(); ++i) {
    double w = 1;
    for (int s = 0; s < sp.box.sites(); ++s) w *= sp.states[i].get(s) ? rho : 1 - rho;
    nu[i] = w;
  }
  return nu;
}

enum class BuildMode {
  Forward,      // generator restricted to the states; mass into the pattern exits
  Dual,         // adjoint Markov part plus diagonal potential
  Tilted,       // psi-transformed chain (conservative on the states)
  TiltedPlusV,  // tilted chain plus the diagonal V = (adjoint psi)/psi
};

// CSR action f -> L f with L f(x) = sum_y rate(x,y) f(y) - exit(x) f(x)
// + potential(x) f(x).
struct RateMatrix {
  int n = 0;
  std::vector<int> rowptr;
  std::vector<int> col;
  std::vector<double> val;
  std::vector<double> exit;       // total off-diagonal rate, lost mass included
  std::vector<double> potential;  // diagonal addition (Dual / TiltedPlusV)

  double max_diag_pull() const {
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, exit[i] - potential[i]);
    return m;
  }

  void apply(const double* x, double* y) const {
    for (int i = 0; i < n; ++i) {
      double s = (potential[i] - exit[i]) * x[i];
      for (int k = rowptr[i]; k < rowptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  // y = L^T x (scatter form)
  void apply_transpose(const double* x, double* y) const {
    for (int i = 0; i < n; ++i) y[i] = (potential[i] - exit[i]) * x[i];
    for (int i = 0; i < n; ++i) {
      for (int k = rowptr[i]; k < rowptr[i + 1]; ++k) y[col[k]] += val[k] * x[i];
    }
  }
};

inline RateMatrix build_matrix(const RateEnumerator& gen, const StateSpace& sp, BuildMode mode,
                               const SiteWeights* w = nullptr) {
  if ((mode == BuildMode::Tilted || mode == BuildMode::TiltedPlusV) && !w)
    throw std::invalid_argument("build_matrix: tilted modes need weights");
  RateMatrix M;
  M.n = sp.size();
  M.rowptr.reserve(M.n + 1);
  M.rowptr.push_back(0);
  M.exit.resize(M.n, 0.0);
  M.potential.resize(M.n, 0.0);
  for (int i = 0; i < M.n; ++i) {
    const Config& c = sp.states[i];
    TransitionList tl;
    switch (mode) {
      case BuildMode::Forward: tl = gen.transitions(c); break;
      case BuildMode::Dual: tl = gen.dual_transitions(c); break;
      case BuildMode::Tilted:
      case BuildMode::TiltedPlusV: tl = gen.psi_transitions(c, *w); break;
    }
    double tot = 0;
    for (const auto& t : tl.moves) {
      tot += t.rate;
      int j = sp.find(t.target);
      if (j < 0) continue;  // exits the space; contributes to exit only
      M.col.push_back(j);
      M.val.push_back(t.rate);
    }
    M.exit[i] = tot;
    if (mode == BuildMode::Dual) M.potential[i] = tl.potential;
    if (mode == BuildMode::TiltedPlusV) M.potential[i] = gen.potential_V(c, *w);
    M.rowptr.push_back((int)M.col.size());
  }
  return M;
}

// exp(tL) f by uniformization: K = I + L/Theta, Poisson-weighted powers.
// Without a potential the kernel is a contraction and the truncation error
// is bounded by the Poisson tail times ||f||; with a potential the terms
// are renormalized and summation continues until the running contribution
// is negligible.
inline std::vector<double> semigroup_apply(const RateMatrix& M, double t, std::vector<double> f,
                                           double eps = 1e-12, bool transpose = false) {
  if (t < 0) throw std::invalid_argument("semigroup_apply: t >= 0");
  int n = M.n;
  if ((int)f.size() != n) throw std::invalid_argument("semigroup_apply: size mismatch");
  if (t == 0 || n == 0) return f;
  bool has_pot = false;
  for (double p : M.potential)
    if (p != 0) has_pot = true;
  double theta = M.max_diag_pull() + 1.0;

  auto apply_K = [&](const std::vector<double>& x, std::vector<double>& y) {
    if (transpose) M.apply_transpose(x.data(), y.data());
    else M.apply(x.data(), y.data());
    for (int i = 0; i < n; ++i) y[i] = x[i] + y[i] / theta;
  };

  std::vector<double> v = std::move(f), next(n), out(n, 0.0);
  double lscale = 0;                   // log of the factor divided out of v
  double lpois = -theta * t;           // log Poisson weight at current k
  double cum = std::exp(lpois);        // Poisson cdf (exact, scale-free)
  double mean = theta * t;
  int small_streak = 0;
  for (long long k = 0;; ++k) {
    double wk = std::exp(lpois + lscale);
    double contrib = 0;
    for (int i = 0; i < n; ++i) {
      double add = wk * v[i];
      out[i] += add;
      contrib = std::max(contrib, std::abs(add));
    }
    double base = 1e-300;
    for (int i = 0; i < n; ++i) base = std::max(base, std::abs(out[i]));
    if (!has_pot) {
      if (cum >= 1 - eps && k >= (long long)mean) break;
    } else {
      small_streak = (k > mean && contrib <= eps * 1e-3 * base) ? small_streak + 1 : 0;
      if (small_streak >= 10) break;
    }
    if (k > (long long)(10 * mean) + 100000)
      throw std::runtime_error("semigroup_apply: series did not settle");
    apply_K(v, next);
    std::swap(v, next);
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m == 0) break;
    for (double& x : v) x /= m;
    lscale += std::log(m);
    lpois += std::log(mean) - std::log((double)(k + 1));
    cum += std::exp(lpois);
  }
  return out;
}

struct EigenOptions {
  double rq_tol = 1e-13;      // relative Rayleigh / growth-rate stability
  int streak = 10;            // consecutive stable iterations required
  long long max_iters = 500000;
  double residual_tol = 1e-10;
};

struct SpectrumResult {
  double lambda = 0;   // decay rate of the principal mode (killed chains)
  double lambda2 = 0;  // next mode
  double gap = 0;      // lambda2 - lambda, or the dual mixing gap
  std::vector<double> u;  // principal eigenvector, <u,1>_nu = 1
  double theta = 0;
  double residual = 0;  // sup norm of (L u + lambda u), or of L* u
  long long iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b,
                  const std::vector<double>& w) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * w[i];
  return s;
}

}  // namespace detail

// Principal eigenpair of a killed self-adjoint chain: L u = -lambda u with
// u > 0, then the next eigenvalue by nu-orthogonal deflation.
inline SpectrumResult principal_killed(const RateMatrix& M, const std::vector<double>& nu,
                                       EigenOptions opt = {}) {
  int n = M.n;
  if ((int)nu.size() != n) throw std::invalid_argument("principal_killed: size mismatch");
  SpectrumResult res;
  double theta = 2 * M.max_diag_pull();
  if (theta <= 0) theta = 1;
  res.theta = theta;

  auto apply_K = [&](const std::vector<double>& x, std::vector<double>& y) {
    M.apply(x.data(), y.data());
    for (int i = 0; i < n; ++i) y[i] = x[i] + y[i] / theta;
  };

  std::vector<double> ones(n, 1.0);
  std::vector<double> v(n, 1.0), kv(n);
  double rq = 0, prev_rq = std::numeric_limits<double>::quiet_NaN();
  double resid = std::numeric_limits<double>::infinity();
  int streak = 0;
  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    apply_K(v, kv);
    rq = detail::dot(v, kv, nu) / detail::dot(v, v, nu);
    // residual of the mass-normalized iterate; L v = theta (K v - v) is free
    double lam = theta * (1 - rq);
    double mass = std::abs(detail::dot(v, ones, nu));
    resid = 0;
    for (int i = 0; i < n; ++i)
      resid = std::max(resid, std::abs(theta * (kv[i] - v[i]) + lam * v[i]) / mass);
    streak = std::abs(rq - prev_rq) <= opt.rq_tol * std::max(1.0, std::abs(rq)) ? streak + 1 : 0;
    prev_rq = rq;
    double m = 0;
    for (double x : kv) m = std::max(m, std::abs(x));
    for (int i = 0; i < n; ++i) v[i] = kv[i] / m;
    if (streak >= opt.streak && resid <= opt.residual_tol) break;
  }
  res.lambda = theta * (1 - rq);

  double mass = detail::dot(v, ones, nu);
  res.u.resize(n);
  for (int i = 0; i < n; ++i) res.u[i] = v[i] / mass;
  std::vector<double> lu(n);
  M.apply(res.u.data(), lu.data());
  for (int i = 0; i < n; ++i)
    res.residual = std::max(res.residual, std::abs(lu[i] + res.lambda * res.u[i]));
  res.converged = streak >= opt.streak && res.residual <= opt.residual_tol;

  if (n >= 2) {
    std::mt19937_64 rng(12345);
    std::vector<double> w(n), kw(n);
    for (int i = 0; i < n; ++i) w[i] = (double)(rng() >> 11) * 0x1.0p-53 - 0.5;
    double uu = detail::dot(res.u, res.u, nu);
    auto project = [&](std::vector<double>& x) {
      double c = detail::dot(x, res.u, nu) / uu;
      for (int i = 0; i < n; ++i) x[i] -= c * res.u[i];
    };
    project(w);
    double rq2 = 0, prev2 = std::numeric_limits<double>::quiet_NaN();
    int streak2 = 0;
    for (long long it = 0; it < opt.max_iters; ++it) {
      apply_K(w, kw);
      project(kw);
      rq2 = detail::dot(w, kw, nu) / detail::dot(w, w, nu);
      double m = 0;
      for (double x : kw) m = std::max(m, std::abs(x));
      if (m == 0) break;
      for (int i = 0; i < n; ++i) w[i] = kw[i] / m;
      if (std::abs(rq2 - prev2) <= opt.rq_tol * std::max(1.0, std::abs(rq2))) {
        if (++streak2 >= opt.streak) break;
      } else {
        streak2 = 0;
      }
      prev2 = rq2;
    }
    res.lambda2 = theta * (1 - rq2);
    res.gap = res.lambda2 - res.lambda;
  } else {
    res.lambda2 = res.lambda;
    res.gap = 0;
  }
  return res;
}

// Stationary density of a conservative dual: L* u = 0 where the Perron
// value of I + L*/Theta is exactly 1 (the product measure is an exact left
// null vector).  The mixing gap comes from power iteration on the
// nu-annihilated complement, which L* preserves exactly.
inline SpectrumResult stationary_dual(const RateMatrix& M, const std::vector<double>& nu,
                                      EigenOptions opt = {}) {
  int n = M.n;
  if ((int)nu.size() != n) throw std::invalid_argument("stationary_dual: size mismatch");
  SpectrumResult res;
  double theta = 2 * M.max_diag_pull() + 1.0;
  res.theta = theta;
  res.lambda = 0;

  auto apply_K = [&](const std::vector<double>& x, std::vector<double>& y) {
    M.apply(x.data(), y.data());
    for (int i = 0; i < n; ++i) y[i] = x[i] + y[i] / theta;
  };

  std::vector<double> ones(n, 1.0);
  std::vector<double> v(n, 1.0), kv(n);
  int streak = 0;
  for (res.iterations = 0; res.iterations < opt.max_iters; ++res.iterations) {
    apply_K(v, kv);
    double mass = detail::dot(kv, ones, nu);
    double diff = 0;
    for (int i = 0; i < n; ++i) {
      kv[i] /= mass;
      diff = std::max(diff, std::abs(kv[i] - v[i]));
    }
    v.swap(kv);
    if (diff <= 1e-14) {
      if (++streak >= opt.streak) break;
    } else {
      streak = 0;
    }
  }
  res.u = v;
  std::vector<double> lu(n);
  M.apply(res.u.data(), lu.data());
  for (int i = 0; i < n; ++i) res.residual = std::max(res.residual, std::abs(lu[i]));
  res.converged = streak >= opt.streak && res.residual <= opt.residual_tol;

  if (n >= 2) {
    std::mt19937_64 rng(54321);
    std::vector<double> w(n), kw(n);
    for (int i = 0; i < n; ++i) w[i] = (double)(rng() >> 11) * 0x1.0p-53 - 0.5;
    double nu_u = detail::dot(res.u, ones, nu);
    auto project = [&](std::vector<double>& x) {
      double c = detail::dot(x, ones, nu) / nu_u;
      for (int i = 0; i < n; ++i) x[i] -= c * res.u[i];
    };
    project(w);
    double norm_prev = 0;
    for (double x : w) norm_prev += x * x;
    norm_prev = std::sqrt(norm_prev);
    double ratio = 0, smooth = 0, prev_smooth = std::numeric_limits<double>::quiet_NaN();
    double prev_ratio = std::numeric_limits<double>::quiet_NaN();
    int streak2 = 0;
    for (long long it = 0; it < opt.max_iters; ++it) {
      apply_K(w, kw);
      project(kw);
      double norm = 0;
      for (double x : kw) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0) break;
      ratio = norm;  // w was normalized to 1 below
      for (int i = 0; i < n; ++i) w[i] = kw[i] / norm;
      smooth = std::isnan(prev_ratio) ? ratio : std::sqrt(ratio * prev_ratio);
      if (!std::isnan(prev_smooth) &&
          std::abs(smooth - prev_smooth) <= 1e-11 * std::max(1.0, smooth)) {
        if (++streak2 >= opt.streak) break;
      } else {
        streak2 = 0;
      }
      prev_ratio = ratio;
      prev_smooth = smooth;
    }
    res.lambda2 = theta * (1 - smooth);
    res.gap = res.lambda2;
  }
  return res;
}

// P_nu(tau > t): mass of survivors starting from the product measure
inline double survival_exact(const RateMatrix& M, const std::vector<double>& nu, double t,
                             double eps = 1e-12) {
  std::vector<double> s = semigroup_apply(M, t, std::vector<double>(M.n, 1.0), eps);
  double p = 0;
  for (int i = 0; i < M.n; ++i) p += nu[i] * s[i];
  return p;
}

// law of the surviving chain at time t started from nu, normalized
inline std::vector<double> conditioned_law(const RateMatrix& M, const std::vector<double>& nu,
                                           double t, double eps = 1e-12) {
  std::vector<double> m = semigroup_apply(M, t, nu, eps, /*transpose=*/true);
  double z = 0;
  for (double x : m) z += x;
  if (z <= 0) throw std::runtime_error("conditioned_law: no surviving mass");
  for (double& x : m) x /= z;
  return m;
}

}  // namespace sephit
