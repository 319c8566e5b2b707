#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cmc/error.hpp"
#include "cmc/losses.hpp"
#include "cmc/rng.hpp"
#include "helpers.hpp"

using namespace cmc;

namespace {

// Central finite differences of a loss in every observed coordinate.
template <typename Loss>
void check_gradient(const Matrix& x, const ObservedEntries& obs, Loss loss, double h,
                    double rel_tol) {
  LossValue lv = loss(x, true);
  REQUIRE(lv.gradient.has_value());
  Matrix xp = x, xm = x;
  for (const Observation& t : obs.triples()) {
    xp(t.row, t.col) = x(t.row, t.col) + h;
    xm(t.row, t.col) = x(t.row, t.col) - h;
    const double fd = (loss(xp, false).value - loss(xm, false).value) / (2.0 * h);
    const double an = (*lv.gradient)(t.row, t.col);
    CHECK(std::abs(fd - an) <= rel_tol * std::max(1.0, std::abs(an)));
    xp(t.row, t.col) = x(t.row, t.col);
    xm(t.row, t.col) = x(t.row, t.col);
  }
}

}  // namespace

TEST_CASE("f_mc basics") {
  ObservedEntries obs(1, 2, {{0, 0, 4.0}});
  Matrix x(1, 2);
  x << 6.0, 99.0;
  LossValue lv = f_mc(x, obs, true);
  CHECK(lv.value == doctest::Approx(2.0));
  CHECK((*lv.gradient)(0, 0) == doctest::Approx(2.0));
  CHECK((*lv.gradient)(0, 1) == 0.0);  // unobserved

  Matrix exact(1, 2);
  exact << 4.0, -1.0;
  CHECK(f_mc(exact, obs, false).value == 0.0);
}

TEST_CASE("f_cmc hinge activation") {
  ObservedEntries obs(1, 2, {{0, 0, 5.0}, {0, 1, 3.0}}, ClipSpec::with_ceiling(5.0));
  Matrix over(1, 2);
  over << 7.0, 2.0;  // over-estimate on the clipped entry is free
  CHECK(f_cmc(over, obs, false).value == doctest::Approx(0.5));
  Matrix under(1, 2);
  under << 4.0, 2.0;
  CHECK(f_cmc(under, obs, false).value == doctest::Approx(1.0));
}

TEST_CASE("f_cmc requires a ceiling") {
  ObservedEntries obs(1, 1, {{0, 0, 2.0}});
  CHECK_THROWS_AS(f_cmc(Matrix::Zero(1, 1), obs, false), Error);
}

TEST_CASE("loss shape mismatches are rejected") {
  ObservedEntries obs(2, 2, {{0, 0, 1.0}});
  CHECK_THROWS_AS(f_mc(Matrix::Zero(2, 3), obs, false), Error);
  CHECK_THROWS_AS(clipped_sq_loss(Matrix::Zero(3, 2), obs), Error);
}

TEST_CASE("gradients match central finite differences away from the kink") {
  Xoshiro256pp rng(2024);
  const double h = 1e-6, rel = 1e-6, margin = 1e-3;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix truth = test::gaussian_lowrank(6, 7, 2, rng);
    const double ceiling = 0.5;
    ObservedEntries obs = test::observe_all_clipped(truth, ceiling);
    Matrix x = test::gaussian_matrix(6, 7, rng);
    // push evaluation points away from the hinge kink on clipped entries
    for (const Observation& t : obs.triples()) {
      if (!at_threshold(t.value, ceiling)) continue;
      if (std::abs(t.value - x(t.row, t.col)) <= margin)
        x(t.row, t.col) = t.value + 2.0 * margin;
    }
    check_gradient(x, obs, [&](const Matrix& z, bool g) { return f_mc(z, obs, g); }, h, rel);
    check_gradient(x, obs, [&](const Matrix& z, bool g) { return f_cmc(z, obs, g); }, h, rel);
  }
}

TEST_CASE("gradient at the kink uses the zero branch") {
  ObservedEntries obs(1, 1, {{0, 0, 5.0}}, ClipSpec::with_ceiling(5.0));
  Matrix x(1, 1);
  x << 5.0;
  LossValue lv = f_cmc(x, obs, true);
  CHECK((*lv.gradient)(0, 0) == 0.0);
}

TEST_CASE("clipped squared loss saturates on clipped entries") {
  ObservedEntries obs(1, 1, {{0, 0, 5.0}}, ClipSpec::with_ceiling(5.0));
  Matrix x(1, 1);
  x << 9.0;
  CHECK(clipped_sq_loss(x, obs) == 0.0);
}

TEST_CASE("clipped squared loss vanishes on the ground truth") {
  Xoshiro256pp rng(8);
  Matrix truth = test::gaussian_lowrank(5, 6, 2, rng);
  ObservedEntries obs = test::observe_all_clipped(truth, 0.4);
  CHECK(clipped_sq_loss(truth, obs) <= 1e-24);
}

TEST_CASE("dominance: 2 f_cmc >= clipped loss with the closed-form gap") {
  Xoshiro256pp rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix truth = test::gaussian_lowrank(5, 6, 2, rng);
    ObservedEntries obs = test::observe_all_clipped(truth, 0.3);
    Matrix x = test::gaussian_matrix(5, 6, rng) * 1.5;
    const double hinge2 = 2.0 * f_cmc(x, obs, false).value;
    const double clipped = clipped_sq_loss(x, obs);
    const double gap = cmc_dominance_gap(x, obs);
    CHECK(gap >= -1e-12);
    CHECK(hinge2 + 1e-10 >= clipped);
    CHECK(std::abs((hinge2 - clipped) - gap) <= 1e-10);
  }
}

TEST_CASE("hinge never exceeds the squared loss") {
  Xoshiro256pp rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix truth = test::gaussian_lowrank(4, 5, 2, rng);
    ObservedEntries obs = test::observe_all_clipped(truth, 0.2);
    Matrix x = test::gaussian_matrix(4, 5, rng);
    CHECK(f_cmc(x, obs, false).value <= f_mc(x, obs, false).value + 1e-12);
  }
}

TEST_CASE("gradients vanish identically on unobserved entries") {
  Xoshiro256pp rng(55);
  Matrix truth = test::gaussian_matrix(6, 6, rng);
  std::vector<Observation> some = {{0, 0, truth(0, 0)}, {3, 4, truth(3, 4)}};
  ObservedEntries obs(6, 6, std::move(some), {});
  Matrix x = test::gaussian_matrix(6, 6, rng);
  LossValue lv = f_mc(x, obs, true);
  int nonzero = 0;
  for (Index j = 0; j < 6; ++j)
    for (Index i = 0; i < 6; ++i)
      if ((*lv.gradient)(i, j) != 0.0) ++nonzero;
  CHECK(nonzero <= 2);
  CHECK((*lv.gradient)(1, 1) == 0.0);
}
