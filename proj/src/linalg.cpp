#include "cmc/linalg.hpp"

#include <Eigen/SVD>

#include <bit>
#include <cstdint>
#include <fstream>

#include "cmc/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "matrix file format assumes a little-endian host");

namespace cmc {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(Errc::invalid_argument, std::string(what) + ": non-finite entries");
}

namespace {

// JacobiSVD is the more accurate choice for tiny problems; BDCSVD is much
// faster as dimensions grow. Both are deterministic for a fixed input.
template <typename SvdT>
SkinnySvd truncate(const SvdT& svd, double rank_tol) {
  const Vector& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  Index r = 0;
  while (r < sv.size() && sv(r) > rank_tol * sigma_max && sv(r) > 0.0) ++r;
  SkinnySvd out;
  out.u = svd.matrixU().leftCols(r);
  out.sigma = sv.head(r);
  out.v = svd.matrixV().leftCols(r);
  return out;
}

}  // namespace

SkinnySvd skinny_svd(const Matrix& m, double rank_tol) {
  require_finite(m, "skinny_svd");
  if (rank_tol < 0) fail(Errc::invalid_argument, "skinny_svd: rank_tol must be >= 0");
  if (m.rows() <= 32 && m.cols() <= 32) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) fail(Errc::numeric_failure, "skinny_svd: SVD did not converge");
    return truncate(svd, rank_tol);
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(Errc::numeric_failure, "skinny_svd: SVD did not converge");
  return truncate(svd, rank_tol);
}

Vector singular_values(const Matrix& m) {
  require_finite(m, "singular_values");
  if (m.rows() <= 32 && m.cols() <= 32) {
    Eigen::JacobiSVD<Matrix> svd(m);
    if (svd.info() != Eigen::Success) fail(Errc::numeric_failure, "singular_values: SVD did not converge");
    return svd.singularValues();
  }
  Eigen::BDCSVD<Matrix> svd(m);
  if (svd.info() != Eigen::Success) fail(Errc::numeric_failure, "singular_values: SVD did not converge");
  return svd.singularValues();
}

Matrix svt_prox(const Matrix& m, double tau, Vector* shrunk_sigma) {
  if (tau < 0) fail(Errc::invalid_argument, "svt_prox: tau must be >= 0");
  if (tau == 0.0) {
    if (shrunk_sigma) *shrunk_sigma = singular_values(m);
    return m;
  }
  SkinnySvd svd = skinny_svd(m, 0.0);
  Index keep = 0;
  while (keep < svd.sigma.size() && svd.sigma(keep) > tau) ++keep;
  Vector shrunk = svd.sigma.head(keep).array() - tau;
  if (shrunk_sigma) *shrunk_sigma = shrunk;
  if (keep == 0) return Matrix::Zero(m.rows(), m.cols());
  return svd.u.leftCols(keep) * shrunk.asDiagonal() * svd.v.leftCols(keep).transpose();
}

void ClipSpec::validate(Index rows, Index cols) const {
  if (empty()) fail(Errc::invalid_argument, "ClipSpec: no threshold defined");
  if (ceiling_per_entry &&
      (ceiling_per_entry->rows() != rows || ceiling_per_entry->cols() != cols))
    fail(Errc::invalid_argument, "ClipSpec: per-entry ceiling shape mismatch");
  if (floor_per_entry && (floor_per_entry->rows() != rows || floor_per_entry->cols() != cols))
    fail(Errc::invalid_argument, "ClipSpec: per-entry floor shape mismatch");
  if (has_ceiling() && has_floor()) {
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i)
        if (!(floor_at(i, j) < ceiling_at(i, j)))
          fail(Errc::invalid_argument, "ClipSpec: floor must be strictly below ceiling");
  }
}

Matrix clip(const Matrix& m, const ClipSpec& spec) {
  spec.validate(m.rows(), m.cols());
  Matrix out = m;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      double v = out(i, j);
      if (spec.has_ceiling()) v = std::min(v, spec.ceiling_at(i, j));
      if (spec.has_floor()) v = std::max(v, spec.floor_at(i, j));
      out(i, j) = v;
    }
  }
  return out;
}

double matrix_norm(const Matrix& m, Norm which) {
  require_finite(m, "matrix_norm");
  switch (which) {
    case Norm::fro:
      return m.norm();
    case Norm::inf:
      return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    case Norm::trace:
      return singular_values(m).sum();
    case Norm::op: {
      Vector sv = singular_values(m);
      return sv.size() == 0 ? 0.0 : sv(0);
    }
  }
  fail(Errc::invalid_argument, "matrix_norm: unknown norm");
}

void save_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_failure, "save_matrix: cannot open " + path);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
  const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) fail(Errc::io_failure, "save_matrix: write failed for " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_failure, "load_matrix: cannot open " + path);
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32))
    fail(Errc::io_failure, "load_matrix: bad header in " + path);
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      m(i, j) = v;
    }
  if (!in) fail(Errc::io_failure, "load_matrix: truncated file " + path);
  require_finite(m, "load_matrix");
  return m;
}

}  // namespace cmc
