#include "cmc/datagen.hpp"

#include <cmath>
#include <limits>

#include "cmc/error.hpp"
#include "cmc/rng.hpp"

namespace cmc {

NmfResult nmf_factorize(const Matrix& m, int r, int iters, std::uint64_t seed) {
  require_finite(m, "nmf_factorize");
  if ((m.array() < 0.0).any()) fail(Errc::invalid_argument, "nmf_factorize: negative input");
  if (r < 1 || r > std::min(m.rows(), m.cols()))
    fail(Errc::invalid_argument, "nmf_factorize: rank out of range");
  if (iters < 1) fail(Errc::invalid_argument, "nmf_factorize: iters must be >= 1");

  constexpr double eps = 1e-12;  // division guard in the multiplicative updates
  Xoshiro256pp rng(seed);
  Matrix w(m.rows(), r), h(r, m.cols());
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < m.rows(); ++i) w(i, j) = rng.next_double() + 0.1;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < r; ++i) h(i, j) = rng.next_double() + 0.1;

  NmfResult out;
  out.objective.reserve(iters);
  for (int it = 0; it < iters; ++it) {
    h.array() *= (w.transpose() * m).array() / ((w.transpose() * w * h).array() + eps);
    w.array() *= (m * h.transpose()).array() / ((w * h * h.transpose()).array() + eps);
    out.objective.push_back((m - w * h).norm());
  }
  out.w = std::move(w);
  out.h = std::move(h);
  return out;
}

SynthInstance generate_synthetic(const SynthSpec& spec) {
  if (spec.n1 < 1 || spec.n2 < 1) fail(Errc::invalid_argument, "generate_synthetic: empty shape");
  if (spec.r < 1 || spec.r > std::min(spec.n1, spec.n2))
    fail(Errc::invalid_argument, "generate_synthetic: rank out of range");
  if (spec.magnitude < 1) fail(Errc::invalid_argument, "generate_synthetic: magnitude must be >= 1");
  if (!(spec.p >= 0.0 && spec.p <= 1.0))
    fail(Errc::invalid_argument, "generate_synthetic: p not in [0,1]");

  constexpr int kMaxAttempts = 20;
  Xoshiro256pp rng(spec.seed);
  Matrix m;
  bool found = false;
  for (int attempt = 0; attempt < kMaxAttempts && !found; ++attempt) {
    Matrix raw(spec.n1, spec.n2);
    for (Index j = 0; j < spec.n2; ++j)
      for (Index i = 0; i < spec.n1; ++i) {
        if (spec.continuous)
          raw(i, j) = spec.magnitude * rng.next_double();
        else
          raw(i, j) = 1.0 + static_cast<double>(
                                rng.next_below(static_cast<std::uint64_t>(spec.magnitude)));
      }
    NmfResult nmf = nmf_factorize(raw, spec.r, spec.nmf_iters, rng.next());
    Matrix candidate = nmf.w * nmf.h;
    Vector sv = singular_values(candidate);
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > kDefaultRankTol * sv(0)) ++rank;
    if (rank == spec.r) {
      m = std::move(candidate);
      found = true;
    }
  }
  if (!found)
    fail(Errc::numeric_failure,
         "generate_synthetic: could not reach the target rank in 20 attempts");

  const double rest = (1.0 - spec.p) / 2.0;
  SplitResult split = split_entries(m, {spec.p, rest, rest}, rng.next());

  std::vector<Observation> clipped = split.train.triples();
  for (Observation& t : clipped) t.value = std::min(t.value, spec.ceiling);
  ClipSpec cspec;
  cspec.ceiling = spec.ceiling;
  ObservedEntries train(spec.n1, spec.n2, std::move(clipped), cspec);

  double above = 0.0;
  for (Index j = 0; j < spec.n2; ++j)
    for (Index i = 0; i < spec.n1; ++i)
      if (m(i, j) > spec.ceiling) above += 1.0;

  return SynthInstance{std::move(m), std::move(train), std::move(split.val),
                       std::move(split.test),
                       above / (static_cast<double>(spec.n1) * static_cast<double>(spec.n2))};
}

}  // namespace cmc
