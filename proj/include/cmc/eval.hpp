#pragma once

#include <string>
#include <vector>

#include "cmc/solvers.hpp"

namespace cmc {

// sqrt(sum_S (estimate - truth)^2) / sqrt(sum_S truth^2) over the observed
// index set of `truth`. With clip_both, both sides are clipped by `spec`
// first (the validation metric).
double rel_rmse(const Matrix& estimate, const ObservedEntries& truth, bool clip_both,
                const ClipSpec& spec = {});

// Same, over every entry of a dense truth matrix.
double rel_rmse_all(const Matrix& estimate, const Matrix& truth, bool clip_both = false,
                    const ClipSpec& spec = {});

struct F1Score {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// task 1: label truth > c, predict estimate > c + 0.5 (was the entry
// originally above the threshold). task 2: label truth == c (the scale
// maximum), predict estimate > c - 0.5. f1 is 0 when precision+recall is 0.
F1Score f1_task(const Matrix& estimate, const ObservedEntries& test, int task, double c);

// Predict positive everywhere: recall 1, precision = positive ratio.
F1Score baseline_all_positive(const ObservedEntries& test, int task, double c);

// Entries whose value is strictly below the threshold (non-clipped test set).
ObservedEntries filter_below(const ObservedEntries& obs, double threshold);

enum class Selection { val_rel_rmse_clipped, val_f1 };

struct GridCriteria {
  Selection selection = Selection::val_rel_rmse_clipped;
  ClipSpec clip;    // threshold used by the clipped validation metric
  int task = 2;     // f1 selection only
  double c = 0.0;   // f1 selection only
};

struct GridRow {
  SolverConfig config;
  double metric = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  SolveResult best;
  int best_index = 0;
  std::vector<GridRow> table;
};

// Fits every config on `train`, scores each on `val` by the selection
// criterion (min for rel-RMSE, max for f1; ties keep the earliest), and
// returns the winning fit plus the full table. `seed` overrides every
// config's seed so repeated runs are reproducible from one number.
GridResult grid_search(const ObservedEntries& train, const std::vector<SolverConfig>& grid,
                       const GridCriteria& criteria, const ObservedEntries& val,
                       std::uint64_t seed);

std::string grid_table_csv(const GridResult& result);

}  // namespace cmc
