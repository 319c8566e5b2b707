#pragma once

#include <cstdint>
#include <vector>

#include "cmc/observations.hpp"

namespace cmc {

struct SynthSpec {
  Index n1 = 0;
  Index n2 = 0;
  int r = 1;              // target rank, regenerated until hit exactly
  int magnitude = 15;     // L: raw entries are uniform over {1, ..., L}
  double p = 0.8;         // training fraction; the rest splits evenly into val/test
  double ceiling = 10.0;  // training entries are clipped here (+inf disables)
  std::uint64_t seed = 0;
  int nmf_iters = 500;
  bool continuous = false;  // uniform reals on [0, L) instead of integers
};

struct NmfResult {
  Matrix w;  // n1 x r, nonnegative
  Matrix h;  // r x n2, nonnegative
  std::vector<double> objective;  // Frobenius reconstruction error per iteration
};

// Multiplicative-update nonnegative factorization; the reconstruction error
// is non-increasing across iterations.
NmfResult nmf_factorize(const Matrix& m, int r, int iters, std::uint64_t seed);

struct SynthInstance {
  Matrix m;  // ground truth, nonnegative, numerical rank exactly r
  ObservedEntries train;  // clipped at the ceiling
  ObservedEntries val;    // unclipped
  ObservedEntries test;   // unclipped
  double clipping_rate = 0.0;  // fraction of ALL entries of m above the ceiling
};

SynthInstance generate_synthetic(const SynthSpec& spec);

}  // namespace cmc
