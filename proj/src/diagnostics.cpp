#include "cmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "cmc/error.hpp"
#include "cmc/rng.hpp"

namespace cmc {

SubspaceT subspace_of(const Matrix& m, double rank_tol) {
  SkinnySvd svd = skinny_svd(m, rank_tol);
  if (svd.rank() == 0) fail(Errc::invalid_argument, "subspace_of: zero matrix");
  return SubspaceT{std::move(svd.u), std::move(svd.v)};
}

Matrix project_t(const Matrix& z, const SubspaceT& t, bool orthogonal) {
  if (z.rows() != t.u.rows() || z.cols() != t.v.rows())
    fail(Errc::invalid_argument, "project_t: shape mismatch");
  const Matrix uuz = t.u * (t.u.transpose() * z);
  const Matrix zvv = (z * t.v) * t.v.transpose();
  const Matrix uuzvv = t.u * ((t.u.transpose() * zvv));
  Matrix proj = uuz + zvv - uuzvv;
  if (orthogonal) return z - proj;
  return proj;
}

CoherenceStats coherence(const Matrix& m) {
  SkinnySvd svd = skinny_svd(m);
  if (svd.rank() == 0) fail(Errc::invalid_argument, "coherence: zero matrix");
  const double mu_u = svd.u.rowwise().squaredNorm().maxCoeff();
  const double mu_v = svd.v.rowwise().squaredNorm().maxCoeff();
  const auto n1 = static_cast<double>(m.rows());
  const auto n2 = static_cast<double>(m.cols());
  const auto r = static_cast<double>(svd.rank());
  CoherenceStats out;
  out.rank = static_cast<int>(svd.rank());
  out.mu0 = std::max(n1 / r * mu_u, n2 / r * mu_v);
  out.mu_unnorm = std::max(mu_u, mu_v);
  out.mu1 = std::sqrt(n1 * n2 / r) * (svd.u * svd.v.transpose()).cwiseAbs().maxCoeff();
  return out;
}

namespace {

enum class EntryState { pass, at_ceiling, at_floor, lost };

EntryState classify(double truth, const ClipSpec& spec, Index i, Index j) {
  if (spec.has_ceiling()) {
    const double c = spec.ceiling_at(i, j);
    if (at_threshold(truth, c)) return EntryState::at_ceiling;
    if (truth > c) return EntryState::lost;
  }
  if (spec.has_floor()) {
    const double f = spec.floor_at(i, j);
    if (at_threshold(truth, f)) return EntryState::at_floor;
    if (truth < f) return EntryState::lost;
  }
  return EntryState::pass;
}

}  // namespace

Matrix apply_p_star(const Matrix& z, const Matrix& m, const ClipSpec& spec) {
  if (z.rows() != m.rows() || z.cols() != m.cols())
    fail(Errc::invalid_argument, "apply_p_star: shape mismatch");
  spec.validate(m.rows(), m.cols());
  Matrix out(z.rows(), z.cols());
  for (Index j = 0; j < z.cols(); ++j) {
    for (Index i = 0; i < z.rows(); ++i) {
      switch (classify(m(i, j), spec, i, j)) {
        case EntryState::pass: out(i, j) = z(i, j); break;
        case EntryState::at_ceiling: out(i, j) = std::max(z(i, j), 0.0); break;
        case EntryState::at_floor: out(i, j) = std::min(z(i, j), 0.0); break;
        case EntryState::lost: out(i, j) = 0.0; break;
      }
    }
  }
  return out;
}

Matrix assemble_t_b_operator(const Matrix& m, const ClipSpec& spec) {
  spec.validate(m.rows(), m.cols());
  const Index n1 = m.rows(), n2 = m.cols();
  const Index dim = n1 * n2;
  SubspaceT t = subspace_of(m);

  // membership of B: entries strictly inside the thresholds
  Matrix in_b(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i)
      in_b(i, j) = classify(m(i, j), spec, i, j) == EntryState::pass ? 1.0 : 0.0;

  Matrix op(dim, dim);
  Matrix basis = Matrix::Zero(n1, n2);
  for (Index col = 0; col < dim; ++col) {
    const Index bi = col % n1;
    const Index bj = col / n1;  // column-major vec layout
    basis(bi, bj) = 1.0;
    const Matrix pt = project_t(basis, t);
    const Matrix image = project_t(pt.cwiseProduct(in_b), t) - pt;
    op.col(col) = Eigen::Map<const Vector>(image.data(), dim);
    basis(bi, bj) = 0.0;
  }
  return op;
}

namespace {

// Largest singular value of a symmetric operator matrix: full SVD below 1024
// dimensions, power iteration above (tol 1e-10, capped at 1e4 iterations).
double symmetric_operator_norm(const Matrix& op) {
  if (op.rows() < 1024) {
    Vector sv = singular_values(op);
    return sv.size() == 0 ? 0.0 : sv(0);
  }
  Xoshiro256pp rng(0x5eedULL);
  Vector v(op.rows());
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.next_gaussian();
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = op * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

double compute_nu_b(const Matrix& m, const ClipSpec& spec) {
  if (m.rows() * m.cols() > 4096)
    fail(Errc::unsupported,
         "compute_nu_b: dense operator assembly capped at n1*n2 <= 4096; use estimate_rho "
         "style sampling for larger problems");
  return symmetric_operator_norm(assemble_t_b_operator(m, spec));
}

namespace {

double matching_norm(const Matrix& z, RhoNorm which) {
  switch (which) {
    case RhoNorm::fro: return z.norm();
    case RhoNorm::inf: return z.size() == 0 ? 0.0 : z.cwiseAbs().maxCoeff();
    case RhoNorm::op: return operator_norm(z);
  }
  fail(Errc::invalid_argument, "matching_norm: unknown norm");
}

}  // namespace

double estimate_rho(const Matrix& m, const ClipSpec& spec, RhoNorm which, int samples,
                    int ascent_steps, std::uint64_t seed) {
  if (samples < 1) fail(Errc::invalid_argument, "estimate_rho: samples must be >= 1");
  spec.validate(m.rows(), m.cols());
  SubspaceT t = subspace_of(m);
  const Index n1 = m.rows(), n2 = m.cols();
  const Matrix uv = t.u * t.v.transpose();

  double cap = 0.0;
  double prefactor = 1.0;
  switch (which) {
    case RhoNorm::fro: cap = uv.norm(); break;
    case RhoNorm::inf: cap = uv.cwiseAbs().maxCoeff(); break;
    case RhoNorm::op: {
      cap = std::sqrt(static_cast<double>(n1) * static_cast<double>(n2)) * operator_norm(uv);
      prefactor = std::sqrt(static_cast<double>(t.rank())) * coherence(m).mu1;
      break;
    }
  }

  auto ratio_of = [&](const Matrix& z) -> double {
    const double denom = matching_norm(z, which);
    if (denom < 1e-300) return -1.0;
    const Matrix star = apply_p_star(z, m, spec);
    const Matrix num = which == RhoNorm::op ? Matrix(star - z) : Matrix(project_t(star, t) - z);
    return matching_norm(num, which) / denom;
  };

  Xoshiro256pp rng(seed);
  double best = 0.0;
  Matrix best_z;
  for (int s = 0; s < samples; ++s) {
    Matrix g(n1, n2);
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i) g(i, j) = rng.next_gaussian();
    Matrix z = project_t(g, t);
    const double nz = matching_norm(z, which);
    if (nz < 1e-300) continue;
    z *= cap / nz;
    const double r = ratio_of(z);
    if (r > best || best_z.size() == 0) {
      best = std::max(best, r);
      best_z = z;
    }
  }

  // sign-aware coordinate ascent from the best draw; only improvements are
  // kept, so the returned value stays a running maximum (a lower bound).
  if (best_z.size() > 0) {
    double step = 0.25;
    for (int k = 0; k < ascent_steps; ++k) {
      const Index i = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n1)));
      const Index j = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n2)));
      Matrix basis = Matrix::Zero(n1, n2);
      basis(i, j) = 1.0;
      const Matrix dir = project_t(basis, t);
      const double dn = matching_norm(dir, which);
      if (dn < 1e-300) continue;
      bool improved = false;
      for (double sign : {1.0, -1.0}) {
        Matrix cand = best_z + sign * step * (cap / dn) * dir;
        const double cn = matching_norm(cand, which);
        if (cn < 1e-300) continue;
        cand *= cap / cn;
        const double r = ratio_of(cand);
        if (r > best) {
          best = r;
          best_z = cand;
          improved = true;
        }
      }
      if (!improved) step *= 0.9;
    }
  }
  return prefactor * std::max(0.0, best);
}

PminTerms evaluate_pmin(Index n1, Index n2, int r, double mu0, double mu1, double rho_fro,
                        double rho_inf, double rho_op, double nu_b, double beta) {
  if (n1 < 2 || n2 < 2) fail(Errc::invalid_argument, "evaluate_pmin: n1, n2 must be >= 2");
  if (r < 1) fail(Errc::invalid_argument, "evaluate_pmin: r must be >= 1");
  if (!(rho_fro < 0.5 && rho_inf < 0.5 && rho_op < 0.25 && nu_b < 0.5))
    fail(Errc::invalid_argument, "recovery condition violated; bound undefined");
  const double n1n2 = static_cast<double>(n1) * static_cast<double>(n2);
  const double log_n1n2 = std::log(n1n2);
  const double beta_floor =
      std::max({1.0, 1.0 / (4.0 * log_n1n2), 1.0 + std::log(2.0) / log_n1n2});
  if (!(beta > beta_floor))
    fail(Errc::invalid_argument, "evaluate_pmin: beta must exceed " + std::to_string(beta_floor));

  PminTerms out;
  out.k0 = static_cast<int>(std::ceil(std::log2(2.0 * std::sqrt(2.0) * std::sqrt(n1n2 * r))));
  const double sum_n = static_cast<double>(n1 + n2);
  const double max_n = static_cast<double>(std::max(n1, n2));
  const double log_sum_n = std::log(sum_n);

  out.p_fro = 8.0 * out.k0 * mu0 * beta * r / ((0.5 - rho_fro) * (0.5 - rho_fro)) * sum_n *
              log_n1n2 / n1n2;
  out.p_op1 = 8.0 * out.k0 * beta / (3.0 * (0.25 - rho_op) * (0.25 - rho_op)) * log_sum_n / max_n;
  out.p_op2 = 8.0 * out.k0 * beta * r * mu1 * mu1 / (3.0 * (0.25 - rho_op) * (0.25 - rho_op)) *
              max_n * log_sum_n / n1n2;
  out.p_inf = 8.0 * out.k0 * mu0 * r * beta / (3.0 * (0.5 - rho_inf) * (0.5 - rho_inf)) * sum_n *
              log_n1n2 / n1n2;
  out.p_main =
      8.0 * beta * r * mu0 / (3.0 * (0.5 - nu_b) * (0.5 - nu_b)) * sum_n * log_n1n2 / n1n2;
  out.p_min = std::min(
      1.0, std::max({1.0 / n1n2, out.p_fro, out.p_op1, out.p_op2, out.p_inf, out.p_main}));
  out.failure_prob = out.k0 * (std::exp(0.25) * std::pow(n1n2, -beta) +
                               2.0 * std::pow(n1n2, 1.0 - beta) + std::pow(sum_n, 1.0 - beta)) +
                     2.0 * std::pow(n1n2, 1.0 - beta);
  return out;
}

ErrorBoundTerms error_bound_terms(const Matrix& m, const Matrix& m_hat, const ClipSpec& spec,
                                  double beta1, double beta2, int k, double p, double c0) {
  if (m.rows() != m_hat.rows() || m.cols() != m_hat.cols())
    fail(Errc::invalid_argument, "error_bound_terms: shape mismatch");
  if (k < 1) fail(Errc::invalid_argument, "error_bound_terms: k must be >= 1");
  if (!(p > 0 && p <= 1)) fail(Errc::invalid_argument, "error_bound_terms: p must be in (0,1]");
  const double n1n2 = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
  const double scale = std::sqrt(n1n2);
  const Matrix m_clipped = clip(m, spec);
  const Matrix m_hat_clipped = clip(m_hat, spec);

  ErrorBoundTerms out;
  out.lhs = (m_hat - m).norm() / scale;
  out.b1 = (m - m_clipped).norm() / scale;
  out.b2 = (m_hat - m_hat_clipped).norm() / scale;
  out.b3 = (m_hat_clipped - m_clipped).norm() / scale;
  const double shared_cap =
      (std::sqrt(beta1) + std::sqrt(beta2)) * std::pow(static_cast<double>(k), 0.25) *
      std::pow(n1n2, -0.25);
  out.b1_cap = shared_cap;
  out.b2_cap = shared_cap;
  out.mu_g_plugin = m_hat_clipped.isZero(0.0) ? 0.0 : coherence(m_hat_clipped).mu_unnorm;
  const double sum_n = static_cast<double>(m.rows() + m.cols());
  out.b3_cap = std::sqrt(c0 * 2.0 * out.mu_g_plugin * out.mu_g_plugin * beta2 / p) *
               std::pow((p * k * sum_n + k * std::log(sum_n)) / n1n2, 0.25);
  return out;
}

}  // namespace cmc
