#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>

namespace cmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Rank-truncated singular value decomposition: m ~= u * sigma.asDiagonal() * v^T
// with column-orthonormal u, v and strictly positive, non-increasing sigma.
struct SkinnySvd {
  Matrix u;
  Vector sigma;
  Matrix v;

  Index rank() const { return sigma.size(); }
  Matrix reconstruct() const { return u * sigma.asDiagonal() * v.transpose(); }
};

inline constexpr double kDefaultRankTol = 1e-12;

// Singular values <= rank_tol * sigma_max are dropped. Deterministic for a
// fixed input; throws Error(numeric_failure) if the backend does not converge.
SkinnySvd skinny_svd(const Matrix& m, double rank_tol = kDefaultRankTol);

// All singular values, non-increasing, without truncation.
Vector singular_values(const Matrix& m);

// Proximal map of tau * ||.||_tr: returns U max(Sigma - tau, 0) V^T, the
// minimizer of 1/2 ||X - m||_F^2 + tau ||X||_tr. If shrunk_sigma is non-null
// it receives the retained singular values.
Matrix svt_prox(const Matrix& m, double tau, Vector* shrunk_sigma = nullptr);

// Elementwise clipping thresholds. A threshold may be a scalar or a full
// matrix of per-entry values; at least one of ceiling/floor must be present,
// and floor < ceiling wherever both apply.
struct ClipSpec {
  std::optional<double> ceiling;
  std::optional<double> floor;
  std::optional<Matrix> ceiling_per_entry;
  std::optional<Matrix> floor_per_entry;

  bool has_ceiling() const { return ceiling.has_value() || ceiling_per_entry.has_value(); }
  bool has_floor() const { return floor.has_value() || floor_per_entry.has_value(); }
  bool empty() const { return !has_ceiling() && !has_floor(); }

  double ceiling_at(Index i, Index j) const {
    return ceiling_per_entry ? (*ceiling_per_entry)(i, j) : *ceiling;
  }
  double floor_at(Index i, Index j) const {
    return floor_per_entry ? (*floor_per_entry)(i, j) : *floor;
  }

  // Checks threshold shapes against (rows, cols) and floor < ceiling.
  void validate(Index rows, Index cols) const;

  static ClipSpec with_ceiling(double c) {
    ClipSpec s;
    s.ceiling = c;
    return s;
  }
};

// min with the ceiling and/or max with the floor, elementwise.
Matrix clip(const Matrix& m, const ClipSpec& spec);

// Observed values within this relative tolerance of their threshold count as
// clipped (ratings arrive through decimal text round-trips).
inline constexpr double kClipEqTol = 1e-9;

inline bool at_threshold(double value, double threshold) {
  return std::abs(value - threshold) <= kClipEqTol * std::max(1.0, std::abs(threshold));
}

enum class Norm { trace, op, fro, inf };

double matrix_norm(const Matrix& m, Norm which);

inline double trace_norm(const Matrix& m) { return matrix_norm(m, Norm::trace); }
inline double operator_norm(const Matrix& m) { return matrix_norm(m, Norm::op); }

// Binary round-trip format: little-endian uint64 rows, cols, then row-major
// doubles. Used by the CLI for caching.
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

void require_finite(const Matrix& m, const char* what);

}  // namespace cmc
