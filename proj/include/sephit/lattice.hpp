#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sephit {

constexpr int max_dim = 6;
constexpr int max_config_sites = 128;

// Finite rectangular box in Z^d with unit-rate nearest-neighbor structure.
// The canonical box is [-n,n]^d; arbitrary [lo,hi] ranges are supported so
// that short segments and strips can be built as well.  Sites are indexed in
// lexicographic order of their coordinate tuples.  A box may exclude the
// origin (birth-death state geometry): bonds touching the origin disappear,
// the origin does not count as an outside neighbor.
class Box {
public:
  int d = 0;
  std::array<int, max_dim> lo{};
  std::array<int, max_dim> hi{};
  bool no_origin = false;

  Box() = default;

  static Box cube(int d, int n) {
    if (d < 1 || d > max_dim || n < 0) throw std::invalid_argument("Box::cube: bad d or n");
    Box b;
    b.d = d;
    for (int i = 0; i < d; ++i) { b.lo[i] = -n; b.hi[i] = n; }
    b.init();
    return b;
  }

  static Box rect(const std::vector<std::pair<int, int>>& ranges) {
    if (ranges.empty() || (int)ranges.size() > max_dim) throw std::invalid_argument("Box::rect: bad dim");
    Box b;
    b.d = (int)ranges.size();
    for (int i = 0; i < b.d; ++i) {
      if (ranges[i].first > ranges[i].second) throw std::invalid_argument("Box::rect: empty range");
      b.lo[i] = ranges[i].first;
      b.hi[i] = ranges[i].second;
    }
    b.init();
    return b;
  }

  Box without_origin() const {
    if (origin_raw_ < 0) throw std::invalid_argument("Box::without_origin: origin not in box");
    Box b = *this;
    b.no_origin = true;
    b.init();
    return b;
  }

  int sites() const { return n_sites_; }

  bool contains(const std::vector<int>& c) const {
    if ((int)c.size() != d) return false;
    for (int i = 0; i < d; ++i)
      if (c[i] < lo[i] || c[i] > hi[i]) return false;
    if (no_origin && is_origin(c)) return false;
    return true;
  }

  // -1 if the coordinate tuple is not a site of this box.
  int index_of(const std::vector<int>& c) const {
    if (!contains(c)) return -1;
    int raw = 0;
    for (int i = 0; i < d; ++i) raw += (c[i] - lo[i]) * stride_[i];
    return raw_to_site(raw);
  }

  std::vector<int> coords_of(int site) const {
    if (site < 0 || site >= n_sites_) throw std::out_of_range("Box::coords_of");
    int raw = site_to_raw(site);
    std::vector<int> c(d);
    for (int i = 0; i < d; ++i) {
      c[i] = lo[i] + raw / stride_[i];
      raw %= stride_[i];
    }
    return c;
  }

  // In-box neighbor site indices, ascending.
  const int* neighbors(int site, int* count) const {
    *count = nbr_ptr_[site + 1] - nbr_ptr_[site];
    return nbr_.data() + nbr_ptr_[site];
  }

  std::vector<int> neighbor_list(int site) const {
    int c = 0;
    const int* p = neighbors(site, &c);
    return std::vector<int>(p, p + c);
  }

  // Number of Z^d neighbors outside the box ranges.  An excluded origin is
  // interior, not outside.
  int boundary_multiplicity(int site) const { return bmult_[site]; }

  // Site index of the all-zero coordinate, -1 if absent or excluded.
  int origin_site() const {
    if (no_origin || origin_raw_ < 0) return -1;
    return raw_to_site(origin_raw_);
  }

  bool operator==(const Box& o) const {
    return d == o.d && lo == o.lo && hi == o.hi && no_origin == o.no_origin;
  }

private:
  int n_sites_ = 0;
  int raw_count_ = 0;
  int origin_raw_ = -1;
  std::array<int, max_dim> stride_{};
  std::vector<int> nbr_ptr_;
  std::vector<int> nbr_;
  std::vector<uint8_t> bmult_;

  bool is_origin(const std::vector<int>& c) const {
    for (int i = 0; i < d; ++i)
      if (c[i] != 0) return false;
    return true;
  }

  int raw_to_site(int raw) const {
    if (no_origin) {
      if (raw == origin_raw_) return -1;
      return raw > origin_raw_ ? raw - 1 : raw;
    }
    return raw;
  }

  int site_to_raw(int site) const {
    if (no_origin && site >= origin_raw_) return site + 1;
    return site;
  }

  void init() {
    long long count = 1;
    for (int i = 0; i < d; ++i) count *= (hi[i] - lo[i] + 1);
    if (count > (1 << 30)) throw std::invalid_argument("Box: too many sites");
    raw_count_ = (int)count;

    stride_[d - 1] = 1;
    for (int i = d - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * (hi[i + 1] - lo[i + 1] + 1);

    origin_raw_ = -1;
    bool origin_in = true;
    for (int i = 0; i < d; ++i)
      if (lo[i] > 0 || hi[i] < 0) origin_in = false;
    if (origin_in) {
      origin_raw_ = 0;
      for (int i = 0; i < d; ++i) origin_raw_ += (0 - lo[i]) * stride_[i];
    }
    if (no_origin && origin_raw_ < 0) throw std::invalid_argument("Box: origin not in box");

    n_sites_ = raw_count_ - (no_origin ? 1 : 0);

    nbr_ptr_.assign(n_sites_ + 1, 0);
    nbr_.clear();
    nbr_.reserve((size_t)n_sites_ * 2 * d);
    bmult_.assign(n_sites_, 0);

    std::vector<int> c(d);
    for (int site = 0; site < n_sites_; ++site) {
      int raw = site_to_raw(site);
      int rem = raw;
      for (int i = 0; i < d; ++i) {
        c[i] = lo[i] + rem / stride_[i];
        rem %= stride_[i];
      }
      int outside = 0;
      for (int i = 0; i < d; ++i) {
        for (int s = -1; s <= 1; s += 2) {
          c[i] += s;
          bool in_range = c[i] >= lo[i] && c[i] <= hi[i];
          if (!in_range) {
            ++outside;
          } else {
            int nraw = raw + s * stride_[i];
            int nsite = raw_to_site(nraw);
            if (nsite >= 0) nbr_.push_back(nsite);
            // excluded origin: bond dropped, not an outside neighbor
          }
          c[i] -= s;
        }
      }
      std::sort(nbr_.begin() + nbr_ptr_[site], nbr_.end());
      nbr_ptr_[site + 1] = (int)nbr_.size();
      bmult_[site] = (uint8_t)outside;
    }
  }
};

// Occupancy configuration, one bit per site.  Site 0 is the least significant
// bit of word 0; the canonical enumeration order of configurations is the
// ascending packed-integer order.
struct Config {
  std::array<uint64_t, 2> w{0, 0};
  int width = 0;

  static Config zeros(int width) {
    if (width < 0 || width > max_config_sites) throw std::invalid_argument("Config: width");
    Config c;
    c.width = width;
    return c;
  }

  bool get(int i) const { return (w[i >> 6] >> (i & 63)) & 1u; }

  void set(int i, bool v) {
    uint64_t m = uint64_t(1) << (i & 63);
    if (v) w[i >> 6] |= m;
    else w[i >> 6] &= ~m;
  }

  int count() const { return __builtin_popcountll(w[0]) + __builtin_popcountll(w[1]); }

  bool operator==(const Config& o) const { return width == o.width && w == o.w; }
  bool operator!=(const Config& o) const { return !(*this == o); }

  // canonical (packed-integer) order
  bool operator<(const Config& o) const {
    if (width != o.width) return width < o.width;
    if (w[1] != o.w[1]) return w[1] < o.w[1];
    return w[0] < o.w[0];
  }

  std::string to_string() const {
    std::string s(width, '0');
    for (int i = 0; i < width; ++i)
      if (get(i)) s[i] = '1';
    return s;
  }

  static Config from_string(const std::string& s) {
    Config c = zeros((int)s.size());
    for (int i = 0; i < (int)s.size(); ++i) {
      if (s[i] == '1') c.set(i, true);
      else if (s[i] != '0') throw std::invalid_argument("Config::from_string: not 0/1");
    }
    return c;
  }

  uint64_t hash() const {
    uint64_t h = w[0] * 0x9e3779b97f4a7c15ull;
    h ^= (w[1] + 0x632be59bd9b4e019ull) * 0xff51afd7ed558ccdull;
    return h ^ (h >> 33) ^ (uint64_t)width;
  }
};

// coordinatewise partial order
inline bool leq(const Config& a, const Config& b) {
  if (a.width != b.width) throw std::invalid_argument("leq: width mismatch");
  return (a.w[0] & ~b.w[0]) == 0 && (a.w[1] & ~b.w[1]) == 0;
}

inline Config flip(const Config& c, int k) {
  if (k < 0 || k >= c.width) throw std::out_of_range("flip");
  Config r = c;
  r.w[k >> 6] ^= uint64_t(1) << (k & 63);
  return r;
}

// swap occupancies of sites i and j
inline Config exchange(const Config& c, int i, int j) {
  if (i < 0 || i >= c.width || j < 0 || j >= c.width) throw std::out_of_range("exchange");
  Config r = c;
  bool bi = c.get(i), bj = c.get(j);
  r.set(i, bj);
  r.set(j, bi);
  return r;
}

// Increasing threshold event: at least k particles on the listed sites.
struct Pattern {
  std::vector<int> sites;
  int k = 1;

  Pattern() = default;
  Pattern(std::vector<int> s, int k_) : sites(std::move(s)), k(k_) {
    if (sites.empty() || k < 1 || k > (int)sites.size())
      throw std::invalid_argument("Pattern: need 1 <= k <= |sites|");
  }

  int occupied(const Config& c) const {
    int m = 0;
    for (int s : sites) m += c.get(s) ? 1 : 0;
    return m;
  }
};

inline bool in_pattern(const Pattern& p, const Config& c) { return p.occupied(c) >= p.k; }

// Enumerates every up-set of a poset on n <= 64 elements.  above[i] is the
// bitmask of elements strictly above element i.  Each up-set is reported once
// as an element bitmask; the callback returns false to stop early.  Returns
// false iff stopped early.
inline bool for_each_up_set(int n, const std::vector<uint64_t>& above,
                            const std::function<bool(uint64_t)>& cb) {
  if (n < 0 || n > 64 || (int)above.size() != n) throw std::invalid_argument("for_each_up_set");
  // process elements top-down: an element is decided after everything above it
  std::vector<int> order;
  order.reserve(n);
  uint64_t done = 0;
  while ((int)order.size() < n) {
    bool progress = false;
    for (int i = 0; i < n; ++i) {
      if ((done >> i) & 1) continue;
      if ((above[i] & ~done) == 0) {
        order.push_back(i);
        done |= uint64_t(1) << i;
        progress = true;
      }
    }
    if (!progress) throw std::invalid_argument("for_each_up_set: dominance masks are cyclic");
  }

  // iterative DFS; choice[k] = 0 means try IN next (when allowed), 1 means OUT taken
  std::vector<int> choice(n + 1, 0);
  std::vector<uint64_t> in_mask(n + 1, 0);
  int depth = 0;
  while (depth >= 0) {
    if (depth == n) {
      if (!cb(in_mask[depth])) return false;
      --depth;
      continue;
    }
    int e = order[depth];
    if (choice[depth] == 0) {
      choice[depth] = 1;
      if ((above[e] & ~in_mask[depth]) == 0) {
        in_mask[depth + 1] = in_mask[depth] | (uint64_t(1) << e);
        choice[depth + 1] = 0;
        ++depth;
        continue;
      }
    }
    if (choice[depth] == 1) {
      choice[depth] = 2;
      in_mask[depth + 1] = in_mask[depth];
      choice[depth + 1] = 0;
      ++depth;
      continue;
    }
    --depth;
  }
  return true;
}

// Strict-dominance masks for the configuration cube {0,1}^sites (sites <= 6),
// elements ordered by packed value.
inline std::vector<uint64_t> cube_above_masks(int sites) {
  if (sites < 0 || sites > 6) throw std::invalid_argument("cube_above_masks: sites > 6");
  int n = 1 << sites;
  std::vector<uint64_t> above(n, 0);
  for (int v = 0; v < n; ++v) {
    // supersets of v: standard subset-of-complement walk
    int c = ~v & (n - 1);
    for (int s = c; s; s = (s - 1) & c) above[v] |= uint64_t(1) << (v | s);
  }
  return above;
}

// Every monotone boolean function on {0,1}^sites, identified with its up-set
// of satisfying configurations (bit v of the reported mask = packed value v).
inline bool enumerate_monotone_functions(int sites, const std::function<bool(uint64_t)>& cb) {
  auto above = cube_above_masks(sites);
  return for_each_up_set(1 << sites, above, cb);
}

inline uint64_t count_monotone_functions(int sites) {
  uint64_t n = 0;
  enumerate_monotone_functions(sites, [&](uint64_t) {
    ++n;
    return true;
  });
  return n;
}

}  // namespace sephit
