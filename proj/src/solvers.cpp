#include "cmc/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmc/error.hpp"
#include "cmc/losses.hpp"

namespace cmc {

Variant variant_from_string(std::string_view name) {
  if (name == "DTr-CMC") return Variant::dtr_cmc;
  if (name == "Tr-CMC") return Variant::tr_cmc;
  if (name == "Tr-MC") return Variant::tr_mc;
  if (name == "Tr-MCi") return Variant::tr_mci;
  if (name == "Fro-CMC") return Variant::fro_cmc;
  if (name == "Fro-MC") return Variant::fro_mc;
  if (name == "Fro-MCi") return Variant::fro_mci;
  if (name == "ExactTraceNorm") return Variant::exact_trace_norm;
  fail(Errc::invalid_argument, "unknown solver variant: " + std::string(name));
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::dtr_cmc: return "DTr-CMC";
    case Variant::tr_cmc: return "Tr-CMC";
    case Variant::tr_mc: return "Tr-MC";
    case Variant::tr_mci: return "Tr-MCi";
    case Variant::fro_cmc: return "Fro-CMC";
    case Variant::fro_mc: return "Fro-MC";
    case Variant::fro_mci: return "Fro-MCi";
    case Variant::exact_trace_norm: return "ExactTraceNorm";
  }
  fail(Errc::invalid_argument, "unknown solver variant");
}

void SolverConfig::validate() const {
  if (lambda1 < 0 || lambda2 < 0) fail(Errc::invalid_argument, "SolverConfig: lambda must be >= 0");
  if (rank_k < 1) fail(Errc::invalid_argument, "SolverConfig: rank_k must be >= 1");
  if (max_iter < 1) fail(Errc::invalid_argument, "SolverConfig: max_iter must be >= 1");
  if (eta0 <= 0) fail(Errc::invalid_argument, "SolverConfig: eta0 must be > 0");
  if (!(step_decay > 0 && step_decay <= 1))
    fail(Errc::invalid_argument, "SolverConfig: step_decay must be in (0,1]");
  if (sv_floor < 0) fail(Errc::invalid_argument, "SolverConfig: sv_floor must be >= 0");
  if (admm_rho <= 0) fail(Errc::invalid_argument, "SolverConfig: admm_rho must be > 0");
  if (!(continuation > 0 && continuation <= 1))
    fail(Errc::invalid_argument, "SolverConfig: continuation must be in (0,1]");
}

namespace {

void record(SolveResult& res, const Matrix& x, double obj, Matrix& best, double& best_obj) {
  res.objective_trace.push_back(obj);
  if (obj < best_obj) {
    best_obj = obj;
    best = x;
    res.best_iterate_index = static_cast<int>(res.objective_trace.size()) - 1;
  }
}

int argmin_index(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace

SolveResult solve_dtr_cmc(const ObservedEntries& obs, const SolverConfig& cfg) {
  cfg.validate();
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "solve_dtr_cmc: ceiling required");
  if (obs.spec().has_floor())
    fail(Errc::unsupported, "solve_dtr_cmc: floor thresholds are not supported by this solver");
  const Index n1 = obs.rows(), n2 = obs.cols();
  const ClipSpec& spec = obs.spec();

  Matrix x(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i) x(i, j) = spec.ceiling_at(i, j) + 1.0;

  SolveResult res;
  Matrix best = x;
  double best_obj = std::numeric_limits<double>::infinity();

  LossValue loss = f_cmc(x, obs, true);
  double x_trace_norm = trace_norm(x);

  double eta = cfg.eta0;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    // W(X) odot (X - C) + C equals Clip(X); one SVD serves both the
    // subgradient of the second regularizer and the previous iterate's
    // objective term.
    Matrix clipped(n1, n2);
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i) clipped(i, j) = std::min(x(i, j), spec.ceiling_at(i, j));
    SkinnySvd clip_svd = skinny_svd(clipped);
    record(res, x, loss.value + cfg.lambda1 * x_trace_norm + cfg.lambda2 * clip_svd.sigma.sum(),
           best, best_obj);

    Matrix sub = clip_svd.u * clip_svd.v.transpose();
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i)
        if (!(x(i, j) < spec.ceiling_at(i, j))) sub(i, j) = 0.0;

    Matrix stepped = x - eta * (*loss.gradient + cfg.lambda2 * sub);
    SkinnySvd svd = skinny_svd(stepped);
    Vector shrunk = svd.sigma.array() - eta * cfg.lambda1;
    Index keep = 0;
    while (keep < shrunk.size() && shrunk(keep) > cfg.sv_floor) ++keep;
    if (keep == 0) {
      x.setZero();
      x_trace_norm = 0.0;
    } else {
      x = svd.u.leftCols(keep) * shrunk.head(keep).asDiagonal() * svd.v.leftCols(keep).transpose();
      x_trace_norm = shrunk.head(keep).sum();
    }
    loss = f_cmc(x, obs, true);
    eta *= cfg.step_decay;
  }
  Matrix clipped(n1, n2);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i) clipped(i, j) = std::min(x(i, j), spec.ceiling_at(i, j));
  record(res, x, loss.value + cfg.lambda1 * x_trace_norm + cfg.lambda2 * trace_norm(clipped), best,
         best_obj);

  res.estimate = best;
  res.iterations_used = cfg.max_iter;
  res.converged = true;  // fixed-budget schedule
  return res;
}

SolveResult solve_tr(const ObservedEntries& obs, const SolverConfig& cfg, bool use_hinge) {
  cfg.validate();
  if (obs.size() == 0) fail(Errc::invalid_argument, "solve_tr: empty observation set");
  if (use_hinge && !obs.spec().has_ceiling())
    fail(Errc::invalid_argument, "solve_tr: hinge loss requires a ceiling");
  const Index n1 = obs.rows(), n2 = obs.cols();
  const double observed_opnorm = operator_norm(obs.to_dense());
  auto loss = [&](const Matrix& m, bool g) { return use_hinge ? f_cmc(m, obs, g) : f_mc(m, obs, g); };

  Matrix x = Matrix::Zero(n1, n2);
  Matrix y = x;
  double fx = loss(x, false).value;
  double x_trace_norm = 0.0;
  double momentum = 1.0;
  double lipschitz = 1.0;  // ||P_Omega||_op^2

  SolveResult res;
  double prev_obj = std::numeric_limits<double>::infinity();
  int t = 1;
  for (; t <= cfg.max_iter; ++t) {
    const double lam = std::max(std::pow(cfg.continuation, t - 1), cfg.lambda1) * observed_opnorm;
    LossValue at_y = loss(y, true);

    Matrix x_next;
    Vector sigma;
    double f_next = 0.0;
    if (cfg.tr_linesearch) {
      // Try a larger step first; accept once the local quadratic model holds.
      double trial = std::max(cfg.eta0 * lipschitz, 1e-6);
      for (;;) {
        x_next = svt_prox(y - *at_y.gradient / trial, lam / trial, &sigma);
        f_next = loss(x_next, false).value;
        const Matrix d = x_next - y;
        const double model =
            at_y.value + (at_y.gradient->array() * d.array()).sum() + 0.5 * trial * d.squaredNorm();
        if (f_next <= model + 1e-12 * std::max(1.0, std::abs(model)) || trial >= 1.0) break;
        trial = std::min(trial / cfg.eta0, 1.0);
      }
      lipschitz = trial;
    } else {
      x_next = svt_prox(y - *at_y.gradient / lipschitz, lam / lipschitz, &sigma);
      f_next = loss(x_next, false).value;
    }

    double obj = f_next + lam * sigma.sum();
    if (cfg.tr_monotone) {
      const double prev_at_lam = fx + lam * x_trace_norm;
      if (obj > prev_at_lam) {
        x_next = x;
        f_next = fx;
        sigma = Vector();
        obj = prev_at_lam;
        momentum = 1.0;
      } else {
        x_trace_norm = sigma.sum();
      }
    } else {
      x_trace_norm = sigma.sum();
    }

    const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x);
    momentum = momentum_next;
    x = x_next;
    fx = f_next;
    res.objective_trace.push_back(obj);

    const bool continuation_done = std::pow(cfg.continuation, t - 1) <= cfg.lambda1;
    if (cfg.tol > 0 && continuation_done &&
        std::abs(obj - prev_obj) <= cfg.tol * std::max(1.0, std::abs(obj))) {
      res.converged = true;
      break;
    }
    prev_obj = obj;
  }
  res.estimate = x;
  res.iterations_used = std::min(t, cfg.max_iter);
  res.best_iterate_index = argmin_index(res.objective_trace);
  return res;
}

namespace fro_detail {

namespace {

struct Entry {
  Index other;
  double value;
  bool clipped;
};

std::vector<std::vector<Entry>> group_by_col(const ObservedEntries& obs) {
  std::vector<std::vector<Entry>> by_col(obs.cols());
  const bool has_ceiling = obs.spec().has_ceiling();
  for (const Observation& t : obs.triples()) {
    const bool cl = has_ceiling && at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col));
    by_col[t.col].push_back({t.row, t.value, cl});
  }
  return by_col;
}

std::vector<std::vector<Entry>> group_by_row(const ObservedEntries& obs) {
  std::vector<std::vector<Entry>> by_row(obs.rows());
  const bool has_ceiling = obs.spec().has_ceiling();
  for (const Observation& t : obs.triples()) {
    const bool cl = has_ceiling && at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col));
    by_row[t.row].push_back({t.col, t.value, cl});
  }
  return by_row;
}

// One ridge system per row/column; factors are handled transposed (k x n, one
// contiguous column per vector) and the gram matrix lives in its lower
// triangle only.
Vector solve_ridge(const Matrix& gram_lower, const Vector& rhs, double lambda, const char* side,
                   Index which) {
  if (lambda > 0) {
    Eigen::LLT<Matrix, Eigen::Lower> llt(gram_lower);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  }
  Matrix full = gram_lower.selfadjointView<Eigen::Lower>();
  Eigen::FullPivLU<Matrix> lu(full);
  if (!lu.isInvertible())
    fail(Errc::numeric_failure, std::string("solve_fro: singular ridge system at ") + side + " " +
                                    std::to_string(which) + " with lambda = " +
                                    std::to_string(lambda));
  return lu.solve(rhs);
}

Matrix half_update(const std::vector<std::vector<Entry>>& groups, const Matrix& fixed_t,
                   const Matrix& indicator_own_t, const Matrix& indicator_other_t, double lambda,
                   bool use_hinge, const char* side) {
  const Index k = fixed_t.rows();
  Matrix out_t = indicator_own_t;
  Matrix gram(k, k);
  Vector rhs(k);
  for (Index g = 0; g < static_cast<Index>(groups.size()); ++g) {
    if (groups[g].empty()) continue;  // unobserved: keep the previous factor
    gram.setZero();
    gram.diagonal().setConstant(lambda);
    rhs.setZero();
    for (const Entry& e : groups[g]) {
      if (use_hinge && e.clipped &&
          !(e.value > indicator_other_t.col(e.other).dot(indicator_own_t.col(g))))
        continue;
      gram.selfadjointView<Eigen::Lower>().rankUpdate(fixed_t.col(e.other), 1.0);
      rhs.noalias() += e.value * fixed_t.col(e.other);
    }
    out_t.col(g) = solve_ridge(gram, rhs, lambda, side, g);
  }
  return out_t;
}

}  // namespace

Matrix update_q(const ObservedEntries& obs, const Matrix& p, const Matrix& q_prev, double lambda,
                bool use_hinge) {
  const Matrix pt = p.transpose();
  const Matrix qt_prev = q_prev.transpose();
  // the indicator compares the observed value with p_i . q_j at the previous
  // iterate for both factors
  return half_update(group_by_col(obs), pt, qt_prev, pt, lambda, use_hinge, "column").transpose();
}

Matrix update_p(const ObservedEntries& obs, const Matrix& p_prev, const Matrix& q_old,
                const Matrix& q_new, double lambda, bool use_hinge, bool consistent) {
  const Matrix pt_prev = p_prev.transpose();
  const Matrix qt_new = q_new.transpose();
  if (consistent)
    return half_update(group_by_row(obs), qt_new, pt_prev, qt_new, lambda, use_hinge, "row")
        .transpose();
  // as written: stale factor in the ridge sums, fresh factor in the indicator
  const Matrix qt_old = q_old.transpose();
  return half_update(group_by_row(obs), qt_old, pt_prev, qt_new, lambda, use_hinge, "row")
      .transpose();
}

}  // namespace fro_detail

namespace {

double fro_objective(const ObservedEntries& obs, const Matrix& p, const Matrix& q, double lambda,
                     bool use_hinge) {
  detail::CompensatedSum acc;
  const bool has_ceiling = obs.spec().has_ceiling();
  for (const Observation& t : obs.triples()) {
    const double resid = t.value - p.row(t.row).dot(q.row(t.col));
    if (use_hinge && has_ceiling && at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col))) {
      const double pos = std::max(0.0, resid);
      acc.add(pos * pos);
    } else {
      acc.add(resid * resid);
    }
  }
  return 0.5 * acc.value() + 0.5 * lambda * (p.squaredNorm() + q.squaredNorm());
}

}  // namespace

SolveResult solve_fro(const ObservedEntries& obs, const SolverConfig& cfg, bool use_hinge) {
  cfg.validate();
  if (use_hinge && !obs.spec().has_ceiling())
    fail(Errc::invalid_argument, "solve_fro: hinge loss requires a ceiling");
  const Index k = cfg.rank_k;
  const double lambda = cfg.lambda1;

  // Start strictly above every threshold so clipped entries begin unpenalized.
  double base;
  if (obs.spec().has_ceiling()) {
    base = -std::numeric_limits<double>::infinity();
    for (const Observation& t : obs.triples())
      base = std::max(base, obs.spec().ceiling_at(t.row, t.col));
    if (obs.spec().ceiling) base = std::max(base, *obs.spec().ceiling);
    if (!std::isfinite(base)) base = 0.0;
  } else {
    base = 0.0;
    for (const Observation& t : obs.triples()) base = std::max(base, t.value);
  }
  const double top = base + 1.0;
  const double fill =
      cfg.fro_literal_init ? top / std::sqrt(static_cast<double>(k)) : std::sqrt(top / k);
  Matrix p = Matrix::Constant(obs.rows(), k, fill);
  Matrix q = Matrix::Constant(obs.cols(), k, fill);

  SolveResult res;
  double prev_obj = std::numeric_limits<double>::infinity();
  int t = 1;
  for (; t <= cfg.max_iter; ++t) {
    Matrix q_next = fro_detail::update_q(obs, p, q, lambda, use_hinge);
    Matrix p_next = fro_detail::update_p(obs, p, q, q_next, lambda, use_hinge, cfg.fro_consistent_q);
    p = std::move(p_next);
    q = std::move(q_next);
    const double obj = fro_objective(obs, p, q, lambda, use_hinge);
    res.objective_trace.push_back(obj);
    if (cfg.tol > 0 && std::abs(obj - prev_obj) <= cfg.tol * std::max(1.0, std::abs(obj))) {
      res.converged = true;
      break;
    }
    prev_obj = obj;
  }
  res.estimate = p * q.transpose();
  res.iterations_used = std::min(t, cfg.max_iter);
  res.best_iterate_index = argmin_index(res.objective_trace);
  return res;
}

SolveResult solve_exact_tracenorm(const ObservedEntries& obs, const SolverConfig& cfg) {
  cfg.validate();
  if (obs.rows() * obs.cols() > 65536)
    fail(Errc::unsupported, "solve_exact_tracenorm: desk scale only (n1*n2 <= 65536)");
  if (obs.spec().empty())
    fail(Errc::invalid_argument, "solve_exact_tracenorm: clipping thresholds required");

  enum class Kind { equality, at_ceiling, at_floor };
  struct Constraint {
    Index row, col;
    Kind kind;
    double value;
  };
  std::vector<Constraint> constraints;
  constraints.reserve(obs.size());
  for (const Observation& t : obs.triples()) {
    if (obs.spec().has_ceiling() && at_threshold(t.value, obs.spec().ceiling_at(t.row, t.col)))
      constraints.push_back({t.row, t.col, Kind::at_ceiling, obs.spec().ceiling_at(t.row, t.col)});
    else if (obs.spec().has_floor() && at_threshold(t.value, obs.spec().floor_at(t.row, t.col)))
      constraints.push_back({t.row, t.col, Kind::at_floor, obs.spec().floor_at(t.row, t.col)});
    else
      constraints.push_back({t.row, t.col, Kind::equality, t.value});
  }

  double rho = cfg.admm_rho;
  Matrix z = obs.to_dense();
  Matrix x = z;
  Matrix u = Matrix::Zero(obs.rows(), obs.cols());

  SolveResult res;
  int t = 1;
  for (; t <= cfg.max_iter; ++t) {
    Vector sigma;
    x = svt_prox(z - u, 1.0 / rho, &sigma);

    Matrix z_next = x + u;
    for (const Constraint& c : constraints) {
      double& v = z_next(c.row, c.col);
      switch (c.kind) {
        case Kind::equality: v = c.value; break;
        case Kind::at_ceiling: v = std::max(v, c.value); break;
        case Kind::at_floor: v = std::min(v, c.value); break;
      }
    }

    const double primal = (x - z_next).norm();
    const double dual = rho * (z_next - z).norm();
    u += x - z_next;
    z = z_next;
    res.objective_trace.push_back(sigma.sum());
    res.residual_trace.push_back({primal, dual});

    if (primal <= cfg.tol && dual <= cfg.tol) {
      res.converged = true;
      break;
    }
    if (primal > 10.0 * dual && rho < 1e8) {
      rho *= 2.0;
      u *= 0.5;
    } else if (dual > 10.0 * primal && rho > 1e-8) {
      rho *= 0.5;
      u *= 2.0;
    }
  }
  res.estimate = x;
  res.iterations_used = std::min(t, cfg.max_iter);
  res.best_iterate_index = argmin_index(res.objective_trace);
  return res;
}

SolveResult solve(const ObservedEntries& obs, const SolverConfig& cfg) {
  switch (cfg.variant) {
    case Variant::dtr_cmc: return solve_dtr_cmc(obs, cfg);
    case Variant::tr_cmc: return solve_tr(obs, cfg, true);
    case Variant::tr_mc: return solve_tr(obs, cfg, false);
    case Variant::tr_mci: return solve_tr(drop_clipped(obs), cfg, false);
    case Variant::fro_cmc: return solve_fro(obs, cfg, true);
    case Variant::fro_mc: return solve_fro(obs, cfg, false);
    case Variant::fro_mci: return solve_fro(drop_clipped(obs), cfg, false);
    case Variant::exact_trace_norm: return solve_exact_tracenorm(obs, cfg);
  }
  fail(Errc::invalid_argument, "solve: unknown variant");
}

std::string objective_trace_csv(const SolveResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,objective,primal_residual,dual_residual\n";
  for (std::size_t i = 0; i < result.objective_trace.size(); ++i) {
    out << i << ',' << result.objective_trace[i] << ',';
    if (i < result.residual_trace.size())
      out << result.residual_trace[i][0] << ',' << result.residual_trace[i][1];
    else
      out << ',';
    out << '\n';
  }
  return out.str();
}

std::vector<SolverConfig> preset_grid(std::string_view name) {
  std::vector<SolverConfig> grid;
  if (name == "dtr") {
    const double lambdas[] = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (int iters : {1000, 2000})
      for (double eta : {0.5, 1.0, 1.5})
        for (double l1 : lambdas)
          for (double l2 : lambdas) {
            SolverConfig c;
            c.variant = Variant::dtr_cmc;
            c.lambda1 = l1;
            c.lambda2 = l2;
            c.max_iter = iters;
            c.eta0 = eta;
            c.step_decay = 0.99;
            c.sv_floor = 1e-8;
            grid.push_back(c);
          }
    return grid;
  }
  if (name == "fro-synthetic") {
    for (double lambda : {0.01, 0.1, 0.5, 1.0})
      for (int k = 5; k <= 40; k += 5) {
        SolverConfig c;
        c.variant = Variant::fro_cmc;
        c.lambda1 = lambda;
        c.rank_k = k;
        c.max_iter = 200;
        c.tol = 1e-5;
        grid.push_back(c);
      }
    return grid;
  }
  if (name == "fro-real") {
    for (double lambda : {1e-1, 1e-2, 1e-3})
      for (int k = 24; k <= 40; k += 4)
        for (int iters : {500, 1500}) {
          SolverConfig c;
          c.variant = Variant::fro_cmc;
          c.lambda1 = lambda;
          c.rank_k = k;
          c.max_iter = iters;
          c.tol = 1e-6;
          grid.push_back(c);
        }
    return grid;
  }
  if (name == "tr-real") {
    for (int iters : {100, 500}) {
      SolverConfig c;
      c.variant = Variant::tr_cmc;
      c.lambda1 = 1e-4;
      c.max_iter = iters;
      c.eta0 = 0.8;
      c.continuation = 0.7;
      grid.push_back(c);
    }
    return grid;
  }
  fail(Errc::invalid_argument, "preset_grid: unknown preset " + std::string(name));
}

}  // namespace cmc
