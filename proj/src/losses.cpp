#include "cmc/losses.hpp"

#include "cmc/error.hpp"

namespace cmc {

namespace {

void check_shape(const Matrix& x, const ObservedEntries& obs, const char* what) {
  if (x.rows() != obs.rows() || x.cols() != obs.cols())
    fail(Errc::invalid_argument, std::string(what) + ": shape mismatch");
  require_finite(x, what);
}

bool is_clipped(const Observation& t, const ClipSpec& spec) {
  return at_threshold(t.value, spec.ceiling_at(t.row, t.col));
}

}  // namespace

LossValue f_mc(const Matrix& x, const ObservedEntries& obs, bool with_grad) {
  check_shape(x, obs, "f_mc");
  LossValue out;
  detail::CompensatedSum acc;
  if (with_grad) out.gradient = Matrix::Zero(x.rows(), x.cols());
  for (const Observation& t : obs.triples()) {
    const double resid = t.value - x(t.row, t.col);
    acc.add(resid * resid);
    if (with_grad) (*out.gradient)(t.row, t.col) = -resid;
  }
  out.value = 0.5 * acc.value();
  return out;
}

LossValue f_cmc(const Matrix& x, const ObservedEntries& obs, bool with_grad) {
  check_shape(x, obs, "f_cmc");
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "f_cmc: no ceiling defined");
  LossValue out;
  detail::CompensatedSum acc;
  if (with_grad) out.gradient = Matrix::Zero(x.rows(), x.cols());
  for (const Observation& t : obs.triples()) {
    const double resid = t.value - x(t.row, t.col);
    if (is_clipped(t, obs.spec())) {
      // hinge: only under-estimation is penalized; derivative 0 at the kink
      const double pos = std::max(0.0, resid);
      acc.add(pos * pos);
      if (with_grad) (*out.gradient)(t.row, t.col) = -pos;
    } else {
      acc.add(resid * resid);
      if (with_grad) (*out.gradient)(t.row, t.col) = -resid;
    }
  }
  out.value = 0.5 * acc.value();
  return out;
}

double clipped_sq_loss(const Matrix& x, const ObservedEntries& obs) {
  check_shape(x, obs, "clipped_sq_loss");
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "clipped_sq_loss: no ceiling defined");
  detail::CompensatedSum acc;
  for (const Observation& t : obs.triples()) {
    double pred = x(t.row, t.col);
    pred = std::min(pred, obs.spec().ceiling_at(t.row, t.col));
    if (obs.spec().has_floor()) pred = std::max(pred, obs.spec().floor_at(t.row, t.col));
    const double resid = t.value - pred;
    acc.add(resid * resid);
  }
  return acc.value();
}

double cmc_dominance_gap(const Matrix& x, const ObservedEntries& obs) {
  check_shape(x, obs, "cmc_dominance_gap");
  if (!obs.spec().has_ceiling()) fail(Errc::invalid_argument, "cmc_dominance_gap: no ceiling defined");
  if (obs.spec().has_floor())
    fail(Errc::unsupported, "cmc_dominance_gap: ceiling-only specs");
  detail::CompensatedSum acc;
  for (const Observation& t : obs.triples()) {
    if (is_clipped(t, obs.spec())) continue;
    const double c = obs.spec().ceiling_at(t.row, t.col);
    const double pred = x(t.row, t.col);
    if (pred >= c) acc.add((c - pred) * (2.0 * t.value - c - pred));
  }
  return acc.value();
}

}  // namespace cmc
