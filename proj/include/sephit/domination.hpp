#pragma once

#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

#include "sephit/lattice.hpp"

namespace sephit {

namespace detail {

// Dinic max-flow on doubles; small graphs only.
class Dinic {
 public:
  explicit Dinic(int n) : g_(n), level_(n), it_(n) {}

  void add_edge(int u, int v, double cap) {
    g_[u].push_back({v, cap, (int)g_[v].size()});
    g_[v].push_back({u, 0.0, (int)g_[u].size() - 1});
  }

  double run(int s, int t) {
    double flow = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (true) {
        double f = dfs(s, t, 1e100);
        if (f <= eps_) break;
        flow += f;
      }
    }
    bfs(s, t);  // leave residual reachability in level_
    return flow;
  }

  bool reachable(int v) const { return level_[v] >= 0; }

 private:
  struct Edge {
    int to;
    double cap;
    int rev;
  };

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (const auto& e : g_[u]) {
        if (e.cap > eps_ && level_[e.to] < 0) {
          level_[e.to] = level_[u] + 1;
          q.push(e.to);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(int u, int t, double f) {
    if (u == t) return f;
    for (int& i = it_[u]; i < (int)g_[u].size(); ++i) {
      Edge& e = g_[u][i];
      if (e.cap > eps_ && level_[e.to] == level_[u] + 1) {
        double d = dfs(e.to, t, std::min(f, e.cap));
        if (d > eps_) {
          e.cap -= d;
          g_[e.to][e.rev].cap += d;
          return d;
        }
      }
    }
    return 0;
  }

  static constexpr double eps_ = 1e-15;
  std::vector<std::vector<Edge>> g_;
  std::vector<int> level_;
  std::vector<int> it_;
};

}  // namespace detail

struct DominationReport {
  bool dominated = false;
  double flow = 0;
  double deficit = 0;
  // certificate when violated: an up-set where p carries more mass than q
  std::vector<int> violating_upset;  // indices into the state list, ascending
  double p_mass = 0, q_mass = 0;
};

// Does q stochastically dominate p on the inclusion order of the given
// states?  Exact (up to tol) via max-flow: mass p(x) must flow to states
// above x.  supersets_opt, when given, lists for each i all j with
// states[i] <= states[j] (including i) and is reused across calls.
inline DominationReport strassen_dominates(const std::vector<Config>& states,
                                           const std::vector<double>& p,
                                           const std::vector<double>& q, double tol = 1e-9,
                                           const std::vector<std::vector<int>>* supersets_opt =
                                               nullptr) {
  int n = (int)states.size();
  if ((int)p.size() != n || (int)q.size() != n)
    throw std::invalid_argument("strassen_dominates: size mismatch");
  double sp = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    if (p[i] < -1e-12 || q[i] < -1e-12)
      throw std::invalid_argument("strassen_dominates: negative mass");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1) > 1e-6 || std::abs(sq - 1) > 1e-6)
    throw std::invalid_argument("strassen_dominates: distributions must sum to 1");

  std::vector<std::vector<int>> local;
  const std::vector<std::vector<int>>* sup = supersets_opt;
  if (!sup) {
    local.resize(n);
    for (int i = 0; i < n; ++i) {
      int ci = states[i].count();
      for (int j = 0; j < n; ++j)
        if (states[j].count() >= ci && leq(states[i], states[j])) local[i].push_back(j);
    }
    sup = &local;
  }

  int src = 2 * n, snk = 2 * n + 1;
  detail::Dinic din(2 * n + 2);
  for (int i = 0; i < n; ++i) {
    if (p[i] > 0) {
      din.add_edge(src, i, p[i]);
      for (int j : (*sup)[i]) din.add_edge(i, n + j, 2.0);
    }
    if (q[i] > 0) din.add_edge(n + i, snk, q[i]);
  }

  DominationReport rep;
  rep.flow = din.run(src, snk);
  rep.deficit = sp - rep.flow;
  rep.dominated = rep.deficit <= tol;
  if (!rep.dominated) {
    std::vector<char> in_gamma(n, 0);
    for (int i = 0; i < n; ++i)
      if (p[i] > 0 && din.reachable(i))
        for (int j : (*sup)[i]) in_gamma[j] = 1;
    for (int j = 0; j < n; ++j) {
      if (!in_gamma[j]) continue;
      rep.violating_upset.push_back(j);
      rep.p_mass += p[j];
      rep.q_mass += q[j];
    }
  }
  return rep;
}

struct UpsetSweepResult {
  bool dominated = true;
  uint64_t witness = 0;  // bitmask over state indices
  double p_mass = 0, q_mass = 0;
  long long upsets_checked = 0;
};

// Exhaustive reference check: walks every up-set of the induced poset.
// Exponential in the worst case; meant for cross-validation on tiny spaces.
inline UpsetSweepResult dominates_by_upsets(const std::vector<Config>& states,
                                            const std::vector<double>& p,
                                            const std::vector<double>& q, double tol = 1e-9) {
  int n = (int)states.size();
  if (n > 24) throw std::invalid_argument("dominates_by_upsets: too many states");
  if ((int)p.size() != n || (int)q.size() != n)
    throw std::invalid_argument("dominates_by_upsets: size mismatch");
  std::vector<uint64_t> above(n, 0);
  for (int e = 0; e < n; ++e)
    for (int f = 0; f < n; ++f)
      if (e != f && leq(states[e], states[f])) above[e] |= uint64_t(1) << f;
  UpsetSweepResult res;
  for_each_up_set(n, above, [&](uint64_t m) {
    ++res.upsets_checked;
    double pm = 0, qm = 0;
    for (uint64_t x = m; x; x &= x - 1) {
      int i = __builtin_ctzll(x);
      pm += p[i];
      qm += q[i];
    }
    if (pm > qm + tol) {
      res.dominated = false;
      res.witness = m;
      res.p_mass = pm;
      res.q_mass = qm;
      return false;
    }
    return true;
  });
  return res;
}

}  // namespace sephit
