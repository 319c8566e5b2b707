#pragma once

#include <optional>

#include "cmc/observations.hpp"

namespace cmc {

struct LossValue {
  double value = 0.0;
  std::optional<Matrix> gradient;  // zero outside the observed set
};

// Squared loss on observed entries: 1/2 ||P_Omega(M^c - X)||_F^2.
LossValue f_mc(const Matrix& x, const ObservedEntries& obs, bool with_grad);

// Squared loss on non-clipped observations plus squared hinge on clipped
// ones; over-estimation on clipped entries is free. Requires a ceiling.
LossValue f_cmc(const Matrix& x, const ObservedEntries& obs, bool with_grad);

// sum_{Omega} (M^c_ij - Clip(X_ij))^2, the clipped squared objective. Uses
// the observation clip spec (ceiling required).
double clipped_sq_loss(const Matrix& x, const ObservedEntries& obs);

// Closed form of 2*f_cmc(x) - clipped_sq_loss(x): the sum over non-clipped
// observations with X_ij >= C of (C - X_ij)(2 M^c_ij - C - X_ij), which is
// nonnegative term by term. Ceiling-only specs.
double cmc_dominance_gap(const Matrix& x, const ObservedEntries& obs);

namespace detail {

// Neumaier compensated accumulator; large observation sets are summed without
// drifting past the rel-RMSE tolerances.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

}  // namespace cmc
