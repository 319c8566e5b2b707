#pragma once

#include "cmc/linalg.hpp"
#include "cmc/observations.hpp"
#include "cmc/rng.hpp"

namespace cmc::test {

inline Matrix gaussian_matrix(Index rows, Index cols, Xoshiro256pp& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.next_gaussian();
  return m;
}

inline Matrix gaussian_lowrank(Index rows, Index cols, Index rank, Xoshiro256pp& rng) {
  return gaussian_matrix(rows, rank, rng) * gaussian_matrix(rank, cols, rng);
}

// Full observation of a matrix, optionally clipped at a ceiling.
inline ObservedEntries observe_all(const Matrix& m) {
  std::vector<Observation> triples;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) triples.push_back({i, j, m(i, j)});
  return ObservedEntries(m.rows(), m.cols(), std::move(triples));
}

inline ObservedEntries observe_all_clipped(const Matrix& m, double ceiling) {
  std::vector<Observation> triples;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) triples.push_back({i, j, std::min(m(i, j), ceiling)});
  return ObservedEntries(m.rows(), m.cols(), std::move(triples), ClipSpec::with_ceiling(ceiling));
}

}  // namespace cmc::test
