#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmc/observations.hpp"

namespace cmc {

enum class Variant {
  dtr_cmc,          // double trace-norm regularization, subgradient descent
  tr_cmc,           // trace-norm regularization, accelerated proximal gradient
  tr_mc,            // squared loss counterpart of tr_cmc
  tr_mci,           // tr_mc after dropping all clipped training entries
  fro_cmc,          // bilinear factors, hinge-aware alternating least squares
  fro_mc,           // squared loss counterpart of fro_cmc
  fro_mci,          // fro_mc after dropping all clipped training entries
  exact_trace_norm  // constrained trace-norm minimization by operator splitting
};

Variant variant_from_string(std::string_view name);
std::string to_string(Variant v);

struct SolverConfig {
  Variant variant = Variant::fro_cmc;

  // dtr: the two regularization weights. tr: lambda1 is the target multiplier
  // on ||P_Omega(M^c)||_op for the continuation schedule. fro: lambda1 is the
  // ridge weight.
  double lambda1 = 0.0;
  double lambda2 = 0.0;

  int rank_k = 10;      // fro only
  int max_iter = 200;   // T
  double eta0 = 1.0;    // dtr step size; tr line-search factor when enabled
  double step_decay = 0.99;
  double sv_floor = 1e-8;  // epsilon: singular values at or below this are zeroed (dtr)
  double admm_rho = 1.0;
  double tol = 1e-8;  // early-stop / residual tolerance; <= 0 disables early stop
  std::uint64_t seed = 0;

  double continuation = 0.7;   // tr: per-iteration shrink factor on lambda
  bool tr_monotone = false;    // tr: keep previous iterate if the objective rises
  bool tr_linesearch = false;  // tr: adapt the step with factor eta0 per iteration
  bool fro_literal_init = false;  // fro: P0 = Q0 = ((C+1)/sqrt(k)) E instead of sqrt((C+1)/k) E
  // fro: p-update ridge sums use the fresh Q (alternating descent). Turning
  // this off reuses the stale Q in the sums, which updates both factors
  // simultaneously and routinely diverges once k exceeds the true rank.
  bool fro_consistent_q = true;

  void validate() const;
};

struct SolveResult {
  Matrix estimate;
  std::vector<double> objective_trace;                 // one entry per recorded iterate
  std::vector<std::array<double, 2>> residual_trace;   // (primal, dual), splitting solver only
  int iterations_used = 0;
  bool converged = false;
  int best_iterate_index = 0;  // argmin of objective_trace, earliest on ties
};

// Subgradient descent on f_cmc + lambda1 ||X||_tr + lambda2 ||Clip(X)||_tr,
// started at (C+1) everywhere; returns the iterate with the lowest objective.
SolveResult solve_dtr_cmc(const ObservedEntries& obs, const SolverConfig& cfg);

// FISTA on (f_cmc or f_mc) + lambda ||X||_tr with singular value thresholding
// and continuation lambda_t = max(continuation^(t-1), lambda1) ||P_Omega(M^c)||_op.
SolveResult solve_tr(const ObservedEntries& obs, const SolverConfig& cfg, bool use_hinge);

// Alternating ridge updates of the factors of X = P Q^T; on clipped entries
// a 0/1 indicator drops terms whose current prediction already exceeds the
// observed value (hinge). use_hinge=false keeps every term.
SolveResult solve_fro(const ObservedEntries& obs, const SolverConfig& cfg, bool use_hinge);

// min ||X||_tr subject to equality on non-clipped observations, X >= C on
// ceiling-clipped ones and X <= floor threshold on floor-clipped ones, by
// ADMM with residual balancing. Desk scale only (n1*n2 <= 65536).
SolveResult solve_exact_tracenorm(const ObservedEntries& obs, const SolverConfig& cfg);

// Dispatch on cfg.variant; the *_mci variants drop clipped entries first.
SolveResult solve(const ObservedEntries& obs, const SolverConfig& cfg);

// iteration,objective,primal_residual,dual_residual per line, with header.
std::string objective_trace_csv(const SolveResult& result);

// Named hyperparameter grids: "dtr", "fro-synthetic", "fro-real", "tr-real".
// The variant of every returned config is left at its default; callers set it.
std::vector<SolverConfig> preset_grid(std::string_view name);

namespace fro_detail {

// One ridge update of Q given P (and the previous Q for the hinge
// indicators). Columns of M^c with no observation keep their previous factor.
Matrix update_q(const ObservedEntries& obs, const Matrix& p, const Matrix& q_prev, double lambda,
                bool use_hinge);

// One ridge update of P. The hinge indicators compare against p_prev^T q_new;
// the ridge sums use q_old as written unless consistent is set.
Matrix update_p(const ObservedEntries& obs, const Matrix& p_prev, const Matrix& q_old,
                const Matrix& q_new, double lambda, bool use_hinge, bool consistent);

}  // namespace fro_detail

}  // namespace cmc
