#include <cstdio>

#include "sephit/lattice.hpp"

int main() {
  std::printf("sephit: subcommands not wired yet\n");
  return 2;
}
