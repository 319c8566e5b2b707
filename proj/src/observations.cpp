#include "cmc/observations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cmc/error.hpp"
#include "cmc/rng.hpp"

namespace cmc {

ObservedEntries::ObservedEntries(Index rows, Index cols, std::vector<Observation> triples,
                                 ClipSpec spec)
    : rows_(rows), cols_(cols), triples_(std::move(triples)), spec_(std::move(spec)) {
  if (rows_ <= 0 || cols_ <= 0) fail(Errc::invalid_argument, "ObservedEntries: empty shape");
  if (!spec_.empty()) spec_.validate(rows_, cols_);
  for (const Observation& t : triples_) {
    if (t.row < 0 || t.row >= rows_ || t.col < 0 || t.col >= cols_)
      fail(Errc::invalid_argument, "ObservedEntries: index out of bounds");
    if (!std::isfinite(t.value)) fail(Errc::invalid_argument, "ObservedEntries: non-finite value");
    if (spec_.has_ceiling()) {
      const double c = spec_.ceiling_at(t.row, t.col);
      if (t.value > c && !at_threshold(t.value, c))
        fail(Errc::invalid_argument, "ObservedEntries: value above ceiling at (" +
                                         std::to_string(t.row) + "," + std::to_string(t.col) + ")");
    }
    if (spec_.has_floor()) {
      const double f = spec_.floor_at(t.row, t.col);
      if (t.value < f && !at_threshold(t.value, f))
        fail(Errc::invalid_argument, "ObservedEntries: value below floor at (" +
                                         std::to_string(t.row) + "," + std::to_string(t.col) + ")");
    }
  }
  std::sort(triples_.begin(), triples_.end(), [](const Observation& a, const Observation& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < triples_.size(); ++k)
    if (triples_[k].row == triples_[k - 1].row && triples_[k].col == triples_[k - 1].col)
      fail(Errc::invalid_argument, "ObservedEntries: duplicate index (" +
                                       std::to_string(triples_[k].row) + "," +
                                       std::to_string(triples_[k].col) + ")");
}

Matrix ObservedEntries::to_dense() const {
  Matrix m = Matrix::Zero(rows_, cols_);
  for (const Observation& t : triples_) m(t.row, t.col) = t.value;
  return m;
}

bool IndexSet::contains(Index i, Index j) const {
  return std::binary_search(members.begin(), members.end(), std::make_pair(i, j));
}

IndexSet IndexSet::all(Index rows, Index cols) {
  IndexSet s{rows, cols, {}};
  s.members.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) s.members.emplace_back(i, j);
  return s;
}

IndexSet clipped_indices(const ObservedEntries& obs) {
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "clipped_indices: no ceiling defined");
  IndexSet s{obs.rows(), obs.cols(), {}};
  for (const Observation& t : obs.triples())
    if (at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col)))
      s.members.emplace_back(t.row, t.col);
  return s;
}

IndexSet sample_bernoulli(Index rows, Index cols, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::invalid_argument, "sample_bernoulli: p not in [0,1]");
  Xoshiro256pp rng(seed);
  IndexSet s{rows, cols, {}};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (rng.next_double() < p) s.members.emplace_back(i, j);
  return s;
}

GolfingSample sample_golfing(Index rows, Index cols, double p, int r, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::invalid_argument, "sample_golfing: p not in [0,1]");
  if (r < 1) fail(Errc::invalid_argument, "sample_golfing: rank must be >= 1");
  GolfingSample out;
  const double n1n2r = static_cast<double>(rows) * static_cast<double>(cols) * r;
  out.k0 = static_cast<int>(std::ceil(std::log2(2.0 * std::sqrt(2.0) * std::sqrt(n1n2r))));
  out.q = 1.0 - std::pow(1.0 - p, 1.0 / out.k0);
  if (p == 1.0) out.q = 1.0;

  Xoshiro256pp rng(seed);
  std::vector<bool> in_union(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), false);
  for (int k = 0; k < out.k0; ++k) {
    IndexSet part{rows, cols, {}};
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        if (rng.next_double() < out.q) {
          part.members.emplace_back(i, j);
          in_union[static_cast<std::size_t>(i) * cols + j] = true;
        }
    out.partitions.push_back(std::move(part));
  }
  out.omega = IndexSet{rows, cols, {}};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (in_union[static_cast<std::size_t>(i) * cols + j]) out.omega.members.emplace_back(i, j);
  return out;
}

namespace {

SplitResult split_triples(Index rows, Index cols, std::vector<Observation> entries,
                          std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios)
    if (r < 0.0) fail(Errc::invalid_argument, "split_entries: negative ratio");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) fail(Errc::invalid_argument, "split_entries: ratios must sum to 1");

  Xoshiro256pp rng(seed);
  // Fisher-Yates, then one cut at the cumulative ratios: exact part sizes.
  for (std::size_t n = entries.size(); n > 1; --n) {
    const std::size_t k = static_cast<std::size_t>(rng.next_below(n));
    std::swap(entries[n - 1], entries[k]);
  }
  const auto total = static_cast<double>(entries.size());
  const auto b1 = static_cast<std::size_t>(std::llround(ratios[0] * total));
  const auto b2 = static_cast<std::size_t>(std::llround((ratios[0] + ratios[1]) * total));
  std::vector<Observation> tr(entries.begin(), entries.begin() + b1);
  std::vector<Observation> va(entries.begin() + b1, entries.begin() + b2);
  std::vector<Observation> te(entries.begin() + b2, entries.end());
  const bool degenerate = tr.empty() || va.empty() || te.empty();
  return SplitResult{ObservedEntries(rows, cols, std::move(tr)),
                     ObservedEntries(rows, cols, std::move(va)),
                     ObservedEntries(rows, cols, std::move(te)), degenerate};
}

}  // namespace

SplitResult split_entries(const Matrix& full, std::array<double, 3> ratios, std::uint64_t seed) {
  require_finite(full, "split_entries");
  std::vector<Observation> entries;
  entries.reserve(static_cast<std::size_t>(full.size()));
  for (Index i = 0; i < full.rows(); ++i)
    for (Index j = 0; j < full.cols(); ++j) entries.push_back({i, j, full(i, j)});
  return split_triples(full.rows(), full.cols(), std::move(entries), ratios, seed);
}

SplitResult split_entries(const ObservedEntries& full, std::array<double, 3> ratios,
                          std::uint64_t seed) {
  return split_triples(full.rows(), full.cols(), full.triples(), ratios, seed);
}

Matrix project(const Matrix& m, const IndexSet& s) {
  if (m.rows() != s.rows || m.cols() != s.cols)
    fail(Errc::invalid_argument, "project: shape mismatch");
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (const auto& [i, j] : s.members) out(i, j) = m(i, j);
  return out;
}

ObservedEntries drop_clipped(const ObservedEntries& obs) {
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "drop_clipped: no ceiling defined");
  std::vector<Observation> kept;
  kept.reserve(obs.size());
  for (const Observation& t : obs.triples())
    if (!at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col))) kept.push_back(t);
  return ObservedEntries(obs.rows(), obs.cols(), std::move(kept), obs.spec());
}

std::string index_set_to_csv(const IndexSet& s) {
  std::ostringstream out;
  for (const auto& [i, j] : s.members) out << i << ',' << j << '\n';
  return out.str();
}

}  // namespace cmc
