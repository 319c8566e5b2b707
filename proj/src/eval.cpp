#include "cmc/eval.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cmc/error.hpp"
#include "cmc/losses.hpp"

namespace cmc {

namespace {

double clip_value(double v, const ClipSpec& spec, Index i, Index j) {
  if (spec.has_ceiling()) v = std::min(v, spec.ceiling_at(i, j));
  if (spec.has_floor()) v = std::max(v, spec.floor_at(i, j));
  return v;
}

double ratio_or_error(double num_sq, double den_sq) {
  if (den_sq <= 0.0) fail(Errc::invalid_argument, "rel_rmse: zero denominator");
  return std::sqrt(num_sq) / std::sqrt(den_sq);
}

}  // namespace

double rel_rmse(const Matrix& estimate, const ObservedEntries& truth, bool clip_both,
                const ClipSpec& spec) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    fail(Errc::invalid_argument, "rel_rmse: shape mismatch");
  if (truth.size() == 0) fail(Errc::invalid_argument, "rel_rmse: empty index set");
  if (clip_both) spec.validate(truth.rows(), truth.cols());
  detail::CompensatedSum num, den;
  for (const Observation& t : truth.triples()) {
    double e = estimate(t.row, t.col);
    double v = t.value;
    if (clip_both) {
      e = clip_value(e, spec, t.row, t.col);
      v = clip_value(v, spec, t.row, t.col);
    }
    num.add((e - v) * (e - v));
    den.add(v * v);
  }
  return ratio_or_error(num.value(), den.value());
}

double rel_rmse_all(const Matrix& estimate, const Matrix& truth, bool clip_both,
                    const ClipSpec& spec) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    fail(Errc::invalid_argument, "rel_rmse_all: shape mismatch");
  if (clip_both) spec.validate(truth.rows(), truth.cols());
  detail::CompensatedSum num, den;
  for (Index j = 0; j < truth.cols(); ++j)
    for (Index i = 0; i < truth.rows(); ++i) {
      double e = estimate(i, j);
      double v = truth(i, j);
      if (clip_both) {
        e = clip_value(e, spec, i, j);
        v = clip_value(v, spec, i, j);
      }
      num.add((e - v) * (e - v));
      den.add(v * v);
    }
  return ratio_or_error(num.value(), den.value());
}

namespace {

F1Score from_counts(double tp, double fp, double fn) {
  F1Score s;
  s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

bool task_label(double truth, int task, double c) {
  if (task == 1) return truth > c;
  if (task == 2) return at_threshold(truth, c);
  fail(Errc::invalid_argument, "f1_task: task must be 1 or 2");
}

}  // namespace

F1Score f1_task(const Matrix& estimate, const ObservedEntries& test, int task, double c) {
  if (estimate.rows() != test.rows() || estimate.cols() != test.cols())
    fail(Errc::invalid_argument, "f1_task: shape mismatch");
  if (test.size() == 0) fail(Errc::invalid_argument, "f1_task: empty test set");
  const double threshold = task == 1 ? c + 0.5 : c - 0.5;
  double tp = 0, fp = 0, fn = 0;
  for (const Observation& t : test.triples()) {
    const bool label = task_label(t.value, task, c);
    const bool predicted = estimate(t.row, t.col) > threshold;
    if (predicted && label)
      ++tp;
    else if (predicted)
      ++fp;
    else if (label)
      ++fn;
  }
  return from_counts(tp, fp, fn);
}

F1Score baseline_all_positive(const ObservedEntries& test, int task, double c) {
  if (test.size() == 0) fail(Errc::invalid_argument, "baseline_all_positive: empty test set");
  double positives = 0;
  for (const Observation& t : test.triples())
    if (task_label(t.value, task, c)) ++positives;
  const double q = positives / static_cast<double>(test.size());
  F1Score s;
  s.precision = q;
  s.recall = 1.0;
  s.f1 = q > 0 ? 2.0 * q / (1.0 + q) : 0.0;
  return s;
}

ObservedEntries filter_below(const ObservedEntries& obs, double threshold) {
  std::vector<Observation> kept;
  for (const Observation& t : obs.triples())
    if (t.value < threshold) kept.push_back(t);
  return ObservedEntries(obs.rows(), obs.cols(), std::move(kept), obs.spec());
}

GridResult grid_search(const ObservedEntries& train, const std::vector<SolverConfig>& grid,
                       const GridCriteria& criteria, const ObservedEntries& val,
                       std::uint64_t seed) {
  if (grid.empty()) fail(Errc::invalid_argument, "grid_search: empty grid");
  GridResult out;
  out.best_index = -1;
  double best_metric = 0.0;
  const bool minimize = criteria.selection == Selection::val_rel_rmse_clipped;
  std::size_t failures = 0;
  std::string first_error;

  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    GridRow row;
    row.config = grid[idx];
    row.config.seed = seed;
    try {
      SolveResult fit = solve(train, row.config);
      if (minimize)
        row.metric = rel_rmse(fit.estimate, val, true, criteria.clip);
      else
        row.metric = f1_task(fit.estimate, val, criteria.task, criteria.c).f1;
      const bool better =
          out.best_index < 0 || (minimize ? row.metric < best_metric : row.metric > best_metric);
      if (better) {
        best_metric = row.metric;
        out.best_index = static_cast<int>(idx);
        out.best = std::move(fit);
      }
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      if (failures++ == 0) first_error = e.what();
      row.metric = std::numeric_limits<double>::quiet_NaN();
    }
    out.table.push_back(std::move(row));
  }
  if (out.best_index < 0)
    fail(Errc::numeric_failure,
         "grid_search: all " + std::to_string(failures) + " configs failed; first: " + first_error);
  return out;
}

std::string grid_table_csv(const GridResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "config_id,variant,lambda1,lambda2,rank_k,max_iter,eta0,metric,failed\n";
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const GridRow& row = result.table[i];
    out << i << ',' << to_string(row.config.variant) << ',' << row.config.lambda1 << ','
        << row.config.lambda2 << ',' << row.config.rank_k << ',' << row.config.max_iter << ','
        << row.config.eta0 << ',' << row.metric << ',' << (row.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace cmc
