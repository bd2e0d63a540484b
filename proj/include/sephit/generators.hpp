#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sephit/harmonic.hpp"
#include "sephit/lattice.hpp"

namespace sephit {

enum class Model { SSEP, BetaBond, BirthDeath };

// Finite-volume dynamics on a box: nearest-neighbor exchanges at rate 1
// (one special bond at rate beta for BetaBond), reservoir flips at the box
// boundary tuned to density rho, and for BirthDeath additional flips at the
// neighbors of the excluded origin (death rate a, birth rate b).
struct GeneratorSpec {
  Model model = Model::SSEP;
  Box box;
  double rho = 0.5;
  std::optional<Pattern> pattern;  // killing event; for BetaBond also the special bond
  double beta = 1.0;
  double a = 1.0, b = 1.0;

  static GeneratorSpec ssep(const Box& box, double rho,
                            std::optional<Pattern> pat = std::nullopt) {
    if (rho <= 0 || rho >= 1) throw std::invalid_argument("ssep: rho in (0,1)");
    if (box.no_origin) throw std::invalid_argument("ssep: full box expected");
    GeneratorSpec s;
    s.model = Model::SSEP;
    s.box = box;
    s.rho = rho;
    s.pattern = std::move(pat);
    return s;
  }

  static GeneratorSpec beta_bond(const Box& box, double rho, const Pattern& pat, double beta) {
    GeneratorSpec s = ssep(box, rho, pat);
    s.model = Model::BetaBond;
    s.beta = beta;
    if (beta <= 0) throw std::invalid_argument("beta_bond: beta > 0");
    if (pat.sites.size() != 2 || pat.k != 2)
      throw std::invalid_argument("beta_bond: pattern is a fully occupied pair");
    auto ci = box.coords_of(pat.sites[0]), cj = box.coords_of(pat.sites[1]);
    int dist = 0;
    for (int t = 0; t < box.d; ++t) dist += std::abs(ci[t] - cj[t]);
    if (dist != 1) throw std::invalid_argument("beta_bond: pattern sites must be adjacent");
    return s;
  }

  static GeneratorSpec birth_death(const Box& full_box, double rho, double a, double b,
                                   std::optional<Pattern> pat = std::nullopt) {
    if (rho <= 0 || rho >= 1) throw std::invalid_argument("birth_death: rho in (0,1)");
    if (a <= 0 || b <= 0) throw std::invalid_argument("birth_death: a,b > 0");
    if (full_box.origin_site() < 0)
      throw std::invalid_argument("birth_death: box must contain the origin");
    GeneratorSpec s;
    s.model = Model::BirthDeath;
    s.box = full_box.without_origin();
    s.rho = rho;
    s.a = a;
    s.b = b;
    s.pattern = std::move(pat);
    return s;
  }

  // the infinite-volume argument for the special bond needs beta >= 2d-1
  bool beta_in_bound_regime() const { return beta >= 2.0 * box.d - 1.0; }
};

enum class MoveKind : uint8_t { Exchange, Flip };

struct Transition {
  Config target;
  double rate = 0;
  bool killing = false;  // move enters the pattern event
  MoveKind kind = MoveKind::Exchange;
  int i = -1, j = -1;  // bond endpoints, or (flip site, -1)
};

struct TransitionList {
  std::vector<Transition> moves;
  double potential = 0;  // diagonal part of the adjoint (BirthDeath only)
  bool has_potential = false;
};

class RateEnumerator {
 public:
  struct Bond {
    int i, j;
    double rate;
  };

  explicit RateEnumerator(GeneratorSpec spec) : spec_(std::move(spec)) {
    const Box& box = spec_.box;
    kappa_ = std::sqrt((1 - spec_.rho) / spec_.rho);
    for (int i = 0; i < box.sites(); ++i) {
      int cnt = 0;
      const int* nb = box.neighbors(i, &cnt);
      for (int k = 0; k < cnt; ++k)
        if (nb[k] > i) bonds_.push_back({i, nb[k], 1.0});
    }
    if (spec_.model == Model::BetaBond) {
      int p0 = spec_.pattern->sites[0], p1 = spec_.pattern->sites[1];
      if (p1 < p0) std::swap(p0, p1);
      bool found = false;
      for (auto& bd : bonds_)
        if (bd.i == p0 && bd.j == p1) {
          bd.rate = spec_.beta;
          found = true;
        }
      if (!found) throw std::logic_error("beta bond missing from the box");
    }
    if (spec_.model == Model::BirthDeath) {
      std::vector<int> oc(box.d, 0);
      for (int t = 0; t < box.d; ++t) {
        for (int s : {-1, 1}) {
          oc[t] = s;
          int site = box.index_of(oc);
          if (site >= 0) n0_.push_back(site);
          oc[t] = 0;
        }
      }
      pot_coeff_ = spec_.a / (1 - spec_.rho) - spec_.b / spec_.rho;
    }
    is_n0_.assign(box.sites(), 0);
    for (int s : n0_) is_n0_[s] = 1;
    for (int i = 0; i < box.sites(); ++i)
      if (box.boundary_multiplicity(i) > 0 || is_n0_[i]) flip_sites_.push_back(i);
  }

  const GeneratorSpec& spec() const { return spec_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<int>& flip_sites() const { return flip_sites_; }
  const std::vector<int>& origin_neighbors() const { return n0_; }

  // forward flip rate at site: reservoir channel plus the a/b channel
  double flip_rate(const Config& c, int site) const {
    double r = 0;
    int m = spec_.box.boundary_multiplicity(site);
    if (m > 0) r += m * (c.get(site) ? kappa_ : 1.0 / kappa_);
    if (is_n0_[site]) r += c.get(site) ? spec_.a : spec_.b;
    return r;
  }

  // adjoint flip rate: the reservoir channel is self-adjoint, the a/b
  // channel picks up the density ratio
  double dual_flip_rate(const Config& c, int site) const {
    double r = 0;
    int m = spec_.box.boundary_multiplicity(site);
    if (m > 0) r += m * (c.get(site) ? kappa_ : 1.0 / kappa_);
    if (is_n0_[site]) {
      double rho = spec_.rho;
      r += c.get(site) ? spec_.b * (1 - rho) / rho : spec_.a * rho / (1 - rho);
    }
    return r;
  }

  // diagonal of the adjoint; zero unless BirthDeath
  double dual_potential(const Config& c) const {
    if (spec_.model != Model::BirthDeath) return 0.0;
    double s = 0;
    for (int k : n0_) s += spec_.rho - (c.get(k) ? 1.0 : 0.0);
    return pot_coeff_ * s;
  }

  TransitionList transitions(const Config& c) const { return assemble(c, false); }

  TransitionList dual_transitions(const Config& c) const { return assemble(c, true); }

  // rates of the psi-tilted chain c(x,y) psi(y)/psi(x), built on the adjoint
  // Markov part; moves annihilated by psi are dropped
  TransitionList psi_transitions(const Config& c, const SiteWeights& w) const {
    TransitionList tl = assemble(c, true);
    TransitionList out;
    out.moves.reserve(tl.moves.size());
    for (auto& t : tl.moves) {
      double r = t.rate * w.psi_ratio(c, t.target);
      if (r <= 0) continue;
      t.rate = r;
      t.killing = false;
      out.moves.push_back(t);
    }
    return out;
  }

  // V = (adjoint psi)/psi, from raw transition enumeration
  double potential_V(const Config& c, const SiteWeights& w) const {
    TransitionList tl = assemble(c, true);
    double v = tl.potential;
    for (const auto& t : tl.moves) v += t.rate * (w.psi_ratio(c, t.target) - 1.0);
    return v;
  }

  double total_rate(const Config& c) const {
    double s = 0;
    TransitionList tl = assemble(c, false);
    for (const auto& t : tl.moves) s += t.rate;
    return s;
  }

  double killing_rate(const Config& c) const {
    double s = 0;
    TransitionList tl = assemble(c, false);
    for (const auto& t : tl.moves)
      if (t.killing) s += t.rate;
    return s;
  }

 private:
  TransitionList assemble(const Config& c, bool dual) const {
    const Box& box = spec_.box;
    if (c.width != box.sites()) throw std::invalid_argument("transitions: width mismatch");
    TransitionList tl;
    tl.moves.reserve(bonds_.size() + flip_sites_.size());
    bool kill_on = spec_.pattern && !in_pattern(*spec_.pattern, c);
    for (const auto& bd : bonds_) {
      if (c.get(bd.i) == c.get(bd.j)) continue;
      Transition t;
      t.target = exchange(c, bd.i, bd.j);
      t.rate = bd.rate;
      t.kind = MoveKind::Exchange;
      t.i = bd.i;
      t.j = bd.j;
      t.killing = kill_on && in_pattern(*spec_.pattern, t.target);
      tl.moves.push_back(std::move(t));
    }
    for (int site : flip_sites_) {
      double r = dual ? dual_flip_rate(c, site) : flip_rate(c, site);
      if (r <= 0) continue;
      Transition t;
      t.target = flip(c, site);
      t.rate = r;
      t.kind = MoveKind::Flip;
      t.i = site;
      t.killing = kill_on && in_pattern(*spec_.pattern, t.target);
      tl.moves.push_back(std::move(t));
    }
    if (dual) {
      tl.potential = dual_potential(c);
      tl.has_potential = true;
    }
    return tl;
  }

  GeneratorSpec spec_;
  double kappa_ = 1;
  double pot_coeff_ = 0;
  std::vector<Bond> bonds_;
  std::vector<int> flip_sites_;
  std::vector<int> n0_;
  std::vector<char> is_n0_;
};

}  // namespace sephit
