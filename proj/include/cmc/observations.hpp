#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmc/linalg.hpp"

namespace cmc {

struct Observation {
  Index row;
  Index col;
  double value;
};

// Sparse observed entries together with the clipping thresholds that produced
// them. Values are post-clipping: nothing may sit above an applicable ceiling
// or below an applicable floor. Triples are kept sorted in row-major order.
class ObservedEntries {
 public:
  ObservedEntries(Index rows, Index cols, std::vector<Observation> triples, ClipSpec spec = {});

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<Observation>& triples() const { return triples_; }
  const ClipSpec& spec() const { return spec_; }
  std::size_t size() const { return triples_.size(); }

  // Dense matrix with observed values and zeros elsewhere: P_Omega(M^c).
  Matrix to_dense() const;

 private:
  Index rows_;
  Index cols_;
  std::vector<Observation> triples_;
  ClipSpec spec_;
};

struct IndexSet {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::pair<Index, Index>> members;  // sorted, unique

  bool contains(Index i, Index j) const;
  std::size_t size() const { return members.size(); }

  static IndexSet all(Index rows, Index cols);
};

// Observed entries sitting at their applicable ceiling (the set C). Requires
// a ceiling threshold.
IndexSet clipped_indices(const ObservedEntries& obs);

// Each index included independently with probability p.
IndexSet sample_bernoulli(Index rows, Index cols, double p, std::uint64_t seed);

struct GolfingSample {
  IndexSet omega;                   // union of the partitions
  std::vector<IndexSet> partitions;  // k0 independent q-Bernoulli sets
  int k0 = 0;
  double q = 0.0;
};

// k0 = ceil(log2(2 sqrt(2) sqrt(n1 n2 r))) partitions with per-partition
// inclusion probability q = 1 - (1-p)^(1/k0); the union then has marginal
// inclusion probability exactly p.
GolfingSample sample_golfing(Index rows, Index cols, double p, int r, std::uint64_t seed);

struct SplitResult {
  ObservedEntries train;
  ObservedEntries val;
  ObservedEntries test;
  bool degenerate = false;  // some part received zero entries
};

// Uniform random partition by one shuffled permutation cut at the cumulative
// ratios, so part sizes are exact. Ratios must be >= 0 and sum to 1.
SplitResult split_entries(const Matrix& full, std::array<double, 3> ratios, std::uint64_t seed);
SplitResult split_entries(const ObservedEntries& full, std::array<double, 3> ratios,
                          std::uint64_t seed);

// (P_S(X))_ij = X_ij on S and 0 elsewhere.
Matrix project(const Matrix& m, const IndexSet& s);

// Removes all ceiling-valued observations (the "ignore" preprocessing of the
// MCi variants). Requires a ceiling.
ObservedEntries drop_clipped(const ObservedEntries& obs);

// Sorted "i,j" lines, one per member.
std::string index_set_to_csv(const IndexSet& s);

}  // namespace cmc
