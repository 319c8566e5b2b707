#pragma once

#include <cstdint>

#include "cmc/linalg.hpp"

namespace cmc {

// Left/right singular subspaces of a matrix; spans the rank-one matrices
// sharing its row or column space.
struct SubspaceT {
  Matrix u;  // n1 x r, column-orthonormal
  Matrix v;  // n2 x r, column-orthonormal
  Index rank() const { return u.cols(); }
};

SubspaceT subspace_of(const Matrix& m, double rank_tol = kDefaultRankTol);

// P_T(Z) = U U^T Z + Z V V^T - U U^T Z V V^T; with orthogonal set, Z - P_T(Z).
Matrix project_t(const Matrix& z, const SubspaceT& t, bool orthogonal = false);

struct CoherenceStats {
  double mu0 = 0.0;       // max(n1/r mu^U, n2/r mu^V)
  double mu1 = 0.0;       // sqrt(n1 n2 / r) ||U V^T||_inf
  double mu_unnorm = 0.0;  // max(mu^U, mu^V)
  int rank = 0;
};

CoherenceStats coherence(const Matrix& m);

// Entry map describing the first-order information surviving clipping:
// pass-through strictly between the thresholds, one-sided at a threshold,
// zero beyond it. m is the unclipped ground truth.
Matrix apply_p_star(const Matrix& z, const Matrix& m, const ClipSpec& spec);

// ||P_T P_B P_T - P_T||_op with B = entries of m strictly inside the
// thresholds, computed by assembling the dense operator; n1*n2 <= 4096.
double compute_nu_b(const Matrix& m, const ClipSpec& spec);

// Dense (n1*n2) x (n1*n2) matrix of the map above (column-major vec layout).
Matrix assemble_t_b_operator(const Matrix& m, const ClipSpec& spec);

enum class RhoNorm { fro, inf, op };

// Monte-Carlo maximization of the information-loss ratio over the subspace:
// best of `samples` Gaussian draws projected onto T, optionally refined by
// sign-aware coordinate ascent. The result is a LOWER BOUND of the supremum.
double estimate_rho(const Matrix& m, const ClipSpec& spec, RhoNorm which, int samples,
                    int ascent_steps, std::uint64_t seed);

struct PminTerms {
  double p_fro = 0.0;
  double p_op1 = 0.0;
  double p_op2 = 0.0;
  double p_inf = 0.0;
  double p_main = 0.0;
  int k0 = 0;
  double p_min = 0.0;        // min{1, max{1/(n1 n2), terms...}}
  double failure_prob = 0.0;
};

// Direct arithmetic evaluation of the exact-recovery sampling bound. Throws
// when any rho/nu sits at or above its threshold or beta is below its floor
// ("recovery condition violated; bound undefined").
PminTerms evaluate_pmin(Index n1, Index n2, int r, double mu0, double mu1, double rho_fro,
                        double rho_inf, double rho_op, double nu_b, double beta = 3.0);

struct ErrorBoundTerms {
  double lhs = 0.0;  // ||m_hat - m||_F / sqrt(n1 n2)
  double b1 = 0.0;   // data term      ||m - clip(m)||_F / sqrt(n1 n2)
  double b2 = 0.0;   // hypothesis term ||m_hat - clip(m_hat)||_F / sqrt(n1 n2)
  double b3 = 0.0;   // estimation term ||clip(m_hat) - clip(m)||_F / sqrt(n1 n2)
  double b1_cap = 0.0;
  double b2_cap = 0.0;
  double b3_cap = 0.0;       // parametric in the universal constant c0
  double mu_g_plugin = 0.0;  // unnormalized coherence of clip(m_hat); plug-in, not the supremum
};

ErrorBoundTerms error_bound_terms(const Matrix& m, const Matrix& m_hat, const ClipSpec& spec,
                                  double beta1, double beta2, int k, double p, double c0 = 1.0);

}  // namespace cmc
