// Times the root sweep of the arborescence decoder, single thread against the
// threaded build, on random score matrices of growing size. Both sweeps must
// agree edge for edge; the run aborts if they ever differ.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "taxokit/decode.hpp"
#include "taxokit/rng.hpp"
#include "taxokit/scoring.hpp"

namespace {

using taxokit::Rng;

taxokit::scoring::PairwiseScoreMatrix random_matrix(int n, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (int i = 0; i < n; ++i) ids.push_back("c" + std::to_string(1000 + i));
  taxokit::scoring::PairwiseScoreMatrix m("bench", ids);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      m.set_at(i, j, taxokit::uniform_unit(rng));
    }
  }
  return m;
}

double seconds(std::chrono::steady_clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 3;
  if (argc > 1) repeats = std::max(1, std::atoi(argv[1]));

  const std::vector<int> sizes = {16, 32, 64, 96, 128};
  std::printf("%8s %10s %10s %8s\n", "terms", "serial_s", "parallel_s", "speedup");

  for (int n : sizes) {
    const auto m = random_matrix(n, 0x9e3779b97f4a7c15ull + n);

    double serial_s = 0.0;
    double parallel_s = 0.0;
    for (int r = 0; r < repeats; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      const auto a = taxokit::decode::msa_serial(m);
      auto t1 = std::chrono::steady_clock::now();
      const auto b = taxokit::decode::msa(m);
      auto t2 = std::chrono::steady_clock::now();
      serial_s += seconds(t1 - t0);
      parallel_s += seconds(t2 - t1);

      if (a.root != b.root || a.graph.edges() != b.graph.edges()) {
        std::fprintf(stderr, "mismatch at n=%d: serial and parallel sweeps disagree\n", n);
        return 1;
      }
    }
    serial_s /= repeats;
    parallel_s /= repeats;
    std::printf("%8d %10.4f %10.4f %8.2f\n", n, serial_s, parallel_s,
                parallel_s > 0 ? serial_s / parallel_s : 0.0);
  }
  return 0;
}
