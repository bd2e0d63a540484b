#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "sephit/lattice.hpp"

using namespace sephit;

TEST_CASE("cube box indexing is lexicographic", "[lattice]") {
  Box b = Box::cube(2, 1);
  REQUIRE(b.sites() == 9);
  REQUIRE(b.index_of({-1, -1}) == 0);
  REQUIRE(b.index_of({-1, 0}) == 1);
  REQUIRE(b.index_of({-1, 1}) == 2);
  REQUIRE(b.index_of({0, -1}) == 3);
  REQUIRE(b.index_of({0, 0}) == 4);
  REQUIRE(b.index_of({1, 1}) == 8);
  REQUIRE(b.origin_site() == 4);
  for (int r = 0; r < b.sites(); ++r) REQUIRE(b.index_of(b.coords_of(r)) == r);
  REQUIRE(b.index_of({2, 0}) == -1);
}

TEST_CASE("neighbors and boundary multiplicities", "[lattice]") {
  Box b = Box::cube(2, 1);
  REQUIRE(b.neighbor_list(4) == std::vector<int>{1, 3, 5, 7});
  REQUIRE(b.boundary_multiplicity(4) == 0);
  REQUIRE(b.boundary_multiplicity(0) == 2);  // corner
  REQUIRE(b.boundary_multiplicity(1) == 1);  // edge midpoint
  int total_bonds = 0;
  for (int r = 0; r < b.sites(); ++r) total_bonds += (int)b.neighbor_list(r).size();
  REQUIRE(total_bonds == 2 * 12);  // 12 bonds in a 3x3 grid

  Box seg = Box::cube(1, 2);
  REQUIRE(seg.sites() == 5);
  REQUIRE(seg.boundary_multiplicity(0) == 1);
  REQUIRE(seg.boundary_multiplicity(2) == 0);
  REQUIRE(seg.boundary_multiplicity(4) == 1);
  REQUIRE(seg.neighbor_list(2) == std::vector<int>{1, 3});
}

TEST_CASE("rect box supports strips", "[lattice]") {
  Box b = Box::rect({{0, 1}, {0, 2}});
  REQUIRE(b.d == 2);
  REQUIRE(b.sites() == 6);
  REQUIRE(b.index_of({0, 0}) == 0);
  REQUIRE(b.index_of({0, 2}) == 2);
  REQUIRE(b.index_of({1, 0}) == 3);
  REQUIRE(b.origin_site() == 0);
  // interior site of the strip still has 3 in-box neighbors
  REQUIRE(b.neighbor_list(1) == std::vector<int>{0, 2, 4});
  REQUIRE(b.boundary_multiplicity(1) == 1);
  REQUIRE(b.boundary_multiplicity(0) == 2);
}

TEST_CASE("origin-excluded box drops bonds to the origin", "[lattice]") {
  Box full = Box::cube(2, 1);
  Box b = full.without_origin();
  REQUIRE(b.sites() == 8);
  REQUIRE(b.origin_site() == -1);
  REQUIRE(b.index_of({0, 0}) == -1);
  // (0,-1) had neighbors (-1,-1),(0,0),(1,-1) plus outside; origin bond is gone
  int site = b.index_of({0, -1});
  REQUIRE(site == 3);
  auto nb = b.neighbor_list(site);
  for (int x : nb) {
    auto c = b.coords_of(x);
    REQUIRE(!(c[0] == 0 && c[1] == 0));
  }
  REQUIRE(nb.size() == 2);
  // boundary multiplicity unchanged: the origin is not an outside neighbor
  REQUIRE(b.boundary_multiplicity(site) == 1);
  // index shift across the removed origin
  REQUIRE(b.index_of({0, 1}) == 4);
  REQUIRE(b.index_of({1, 1}) == 7);
  for (int r = 0; r < b.sites(); ++r) REQUIRE(b.index_of(b.coords_of(r)) == r);
}

TEST_CASE("config bit ops and text form", "[lattice]") {
  Config c = Config::zeros(5);
  c.set(1, true);
  c.set(4, true);
  REQUIRE(c.to_string() == "01001");
  REQUIRE(c.count() == 2);
  REQUIRE(Config::from_string("01001") == c);
  Config f = flip(c, 0);
  REQUIRE(f.to_string() == "11001");
  Config e = exchange(c, 1, 2);
  REQUIRE(e.to_string() == "00101");
  REQUIRE(exchange(c, 1, 4) == c);  // both occupied
  REQUIRE(e.count() == c.count());

  Config wide = Config::zeros(100);
  wide.set(70, true);
  wide.set(3, true);
  REQUIRE(wide.count() == 2);
  REQUIRE(wide.get(70));
  REQUIRE(Config::from_string(wide.to_string()) == wide);
}

TEST_CASE("leq is the coordinatewise order", "[lattice]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Config a = Config::zeros(90), b = Config::zeros(90);
    for (int i = 0; i < 90; ++i) {
      bool x = rng() & 1, y = rng() & 1;
      a.set(i, x);
      b.set(i, y);
    }
    bool expect = true;
    for (int i = 0; i < 90; ++i)
      if (a.get(i) && !b.get(i)) expect = false;
    REQUIRE(leq(a, b) == expect);
    REQUIRE(leq(a, a));
  }
}

TEST_CASE("patterns are increasing events", "[lattice]") {
  Pattern p({1, 3, 4}, 2);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    Config a = Config::zeros(6);
    for (int i = 0; i < 6; ++i) a.set(i, rng() & 1);
    Config b = a;
    for (int i = 0; i < 6; ++i)
      if (!b.get(i) && (rng() & 1)) b.set(i, true);
    if (in_pattern(p, a)) REQUIRE(in_pattern(p, b));
  }
  REQUIRE(!in_pattern(p, Config::from_string("010000")));
  REQUIRE(in_pattern(p, Config::from_string("010110")));
}

TEST_CASE("monotone function counts", "[lattice]") {
  REQUIRE(count_monotone_functions(1) == 3);
  REQUIRE(count_monotone_functions(2) == 6);
  REQUIRE(count_monotone_functions(3) == 20);
  REQUIRE(count_monotone_functions(5) == 7581);
}

static bool mask_is_up_set(int sites, uint64_t mask) {
  int n = 1 << sites;
  for (int v = 0; v < n; ++v) {
    if (!((mask >> v) & 1)) continue;
    for (int s = 0; s < sites; ++s) {
      int w = v | (1 << s);
      if (w != v && !((mask >> w) & 1)) return false;
    }
  }
  return true;
}

TEST_CASE("up-set enumeration matches exhaustive filtering", "[lattice]") {
  for (int sites = 1; sites <= 4; ++sites) {
    std::set<uint64_t> brute;
    int n = 1 << sites;
    for (uint64_t mask = 0; mask < (uint64_t(1) << n); ++mask)
      if (mask_is_up_set(sites, mask)) brute.insert(mask);
    std::set<uint64_t> enumerated;
    enumerate_monotone_functions(sites, [&](uint64_t m) {
      REQUIRE(enumerated.insert(m).second);  // no duplicates
      return true;
    });
    REQUIRE(enumerated == brute);
  }
}

TEST_CASE("generic poset up-sets: chain and antichain", "[lattice]") {
  // chain 0 < 1 < 2: up-sets are suffixes, 4 of them
  std::vector<uint64_t> chain = {0b110, 0b100, 0b000};
  uint64_t n = 0;
  for_each_up_set(3, chain, [&](uint64_t) {
    ++n;
    return true;
  });
  REQUIRE(n == 4);
  // antichain on 4 elements: every subset
  std::vector<uint64_t> anti(4, 0);
  n = 0;
  for_each_up_set(4, anti, [&](uint64_t) {
    ++n;
    return true;
  });
  REQUIRE(n == 16);
  // early stop
  n = 0;
  bool completed = for_each_up_set(4, anti, [&](uint64_t) { return ++n < 5; });
  REQUIRE(!completed);
  REQUIRE(n == 5);
}
