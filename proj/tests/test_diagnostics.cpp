#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cmc/diagnostics.hpp"
#include "cmc/error.hpp"
#include "cmc/rng.hpp"
#include "helpers.hpp"

using namespace cmc;

namespace {

double matrix_dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

double percentile(const Matrix& m, double q) {
  std::vector<double> values(m.data(), m.data() + m.size());
  std::sort(values.begin(), values.end());
  return values[static_cast<std::size_t>(q * values.size())];
}

}  // namespace

TEST_CASE("the subspace projector fixes the matrix and its singular pairs") {
  Xoshiro256pp rng(3);
  Matrix m = test::gaussian_lowrank(8, 10, 3, rng);
  SubspaceT t = subspace_of(m);
  CHECK((project_t(m, t) - m).norm() <= 1e-10 * m.norm());
  Matrix pair = t.u.col(0) * t.v.col(0).transpose();
  CHECK((project_t(pair, t) - pair).norm() <= 1e-10);
}

TEST_CASE("the subspace projector is idempotent and self-adjoint") {
  Xoshiro256pp rng(5);
  Matrix m = test::gaussian_lowrank(7, 9, 2, rng);
  SubspaceT t = subspace_of(m);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix z = test::gaussian_matrix(7, 9, rng);
    Matrix y = test::gaussian_matrix(7, 9, rng);
    Matrix pz = project_t(z, t);
    CHECK((project_t(pz, t) - pz).norm() <= 1e-10);
    CHECK(std::abs(matrix_dot(pz, y) - matrix_dot(z, project_t(y, t))) <= 1e-10);
    // orthogonal complement
    Matrix perp = project_t(z, t, true);
    CHECK(std::abs(matrix_dot(perp, pz)) <= 1e-9);
    CHECK((pz + perp - z).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(project_t(Matrix::Zero(3, 3), t), Error);
}

TEST_CASE("basis-element projections obey the coherence bound") {
  Xoshiro256pp rng(7);
  const Index n1 = 9, n2 = 11;
  Matrix m = test::gaussian_lowrank(n1, n2, 3, rng);
  SubspaceT t = subspace_of(m);
  CoherenceStats stats = coherence(m);
  const double bound = static_cast<double>(n1 + n2) / (n1 * n2) * stats.mu0 * stats.rank;
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) {
      Matrix basis = Matrix::Zero(n1, n2);
      basis(i, j) = 1.0;
      CHECK(project_t(basis, t).squaredNorm() <= bound + 1e-10);
    }
}

TEST_CASE("coherence of the all-ones matrix is minimal") {
  CoherenceStats stats = coherence(Matrix::Ones(6, 6));
  CHECK(stats.rank == 1);
  CHECK(stats.mu0 == doctest::Approx(1.0));
  CHECK(stats.mu1 == doctest::Approx(1.0));
}

TEST_CASE("coherence of a standard basis matrix is maximal") {
  const Index n = 8;
  Matrix m = Matrix::Zero(n, n);
  m(0, 0) = 1.0;
  CHECK(coherence(m).mu0 == doctest::Approx(static_cast<double>(n)));
}

TEST_CASE("coherence stays within its range on random low-rank matrices") {
  Xoshiro256pp rng(11);
  Matrix m = test::gaussian_lowrank(20, 30, 3, rng);
  CoherenceStats stats = coherence(m);
  CHECK(stats.mu0 >= 1.0 - 1e-12);
  CHECK(stats.mu0 <= 30.0 / 3.0 + 1e-12);
  CHECK(stats.mu_unnorm <= 1.0 + 1e-12);
  CHECK_THROWS_AS(coherence(Matrix::Zero(4, 4)), Error);
}

TEST_CASE("the characteristic entry map follows its case table") {
  Matrix m(1, 4);
  m << 3.0, 5.0, 7.0, 5.0;
  Matrix z(1, 4);
  z << -2.0, -2.0, -2.0, 3.0;
  Matrix out = apply_p_star(z, m, ClipSpec::with_ceiling(5.0));
  CHECK(out(0, 0) == -2.0);  // below the ceiling: pass-through
  CHECK(out(0, 1) == 0.0);   // at the ceiling: negative part dropped
  CHECK(out(0, 2) == 0.0);   // above the ceiling: lost
  CHECK(out(0, 3) == 3.0);   // at the ceiling, positive part kept
}

TEST_CASE("the characteristic entry map handles floors symmetrically") {
  Matrix m(1, 3);
  m << 0.0, -1.0, 2.0;
  ClipSpec spec;
  spec.floor = 0.0;
  spec.ceiling = 10.0;
  Matrix z(1, 3);
  z << 4.0, 4.0, 4.0;
  Matrix out = apply_p_star(z, m, spec);
  CHECK(out(0, 0) == 0.0);  // at the floor: positive part dropped
  CHECK(out(0, 1) == 0.0);  // below the floor: lost
  CHECK(out(0, 2) == 4.0);
  Matrix zn(1, 3);
  zn << -4.0, -4.0, -4.0;
  Matrix outn = apply_p_star(zn, m, spec);
  CHECK(outn(0, 0) == -4.0);  // at the floor: negative part kept
}

TEST_CASE("the characteristic entry map is contractive per entry") {
  Xoshiro256pp rng(13);
  Matrix m = test::gaussian_matrix(6, 7, rng);
  ClipSpec spec;
  spec.floor = -0.4;
  spec.ceiling = 0.6;
  Matrix z = test::gaussian_matrix(6, 7, rng);
  Matrix out = apply_p_star(z, m, spec);
  for (Index j = 0; j < 7; ++j)
    for (Index i = 0; i < 6; ++i) CHECK(std::abs(out(i, j)) <= std::abs(z(i, j)));
}

TEST_CASE("nu_b boundary values") {
  Xoshiro256pp rng(17);
  Matrix m = test::gaussian_lowrank(6, 8, 2, rng);
  // every entry below the ceiling: the lost set is empty
  CHECK(compute_nu_b(m, ClipSpec::with_ceiling(m.maxCoeff() + 1.0)) <= 1e-10);
  // every entry above the ceiling: the whole subspace is lost
  CHECK(compute_nu_b(m, ClipSpec::with_ceiling(m.minCoeff() - 1.0)) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("the assembled operator is self-adjoint and nu_b lands in [0,1]") {
  Xoshiro256pp rng(19);
  Matrix m = test::gaussian_lowrank(8, 10, 2, rng);
  ClipSpec spec = ClipSpec::with_ceiling(percentile(m, 0.75));
  Matrix op = assemble_t_b_operator(m, spec);
  CHECK((op - op.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  const double nu = compute_nu_b(m, spec);
  CHECK(nu >= 0.0);
  CHECK(nu <= 1.0 + 1e-9);
}

TEST_CASE("nu_b enforces the dense-assembly cap") {
  Matrix big = Matrix::Ones(70, 70);
  CHECK_THROWS_AS(compute_nu_b(big, ClipSpec::with_ceiling(2.0)), Error);
}

TEST_CASE("rho estimates vanish when clipping loses nothing") {
  Xoshiro256pp rng(23);
  Matrix m = test::gaussian_lowrank(7, 8, 2, rng);
  ClipSpec spec = ClipSpec::with_ceiling(m.maxCoeff() + 1.0);
  for (RhoNorm which : {RhoNorm::fro, RhoNorm::inf, RhoNorm::op})
    CHECK(estimate_rho(m, spec, which, 20, 10, 0) <= 1e-10);
}

TEST_CASE("rho estimation is seed-deterministic") {
  Xoshiro256pp rng(29);
  Matrix m = test::gaussian_lowrank(6, 9, 2, rng);
  ClipSpec spec = ClipSpec::with_ceiling(percentile(m, 0.8));
  const double a = estimate_rho(m, spec, RhoNorm::fro, 1, 0, 42);
  const double b = estimate_rho(m, spec, RhoNorm::fro, 1, 0, 42);
  CHECK(a == b);
}

TEST_CASE("rho estimates grow with the sample budget and with ascent") {
  Xoshiro256pp rng(31);
  Matrix m = test::gaussian_lowrank(6, 9, 2, rng);
  ClipSpec spec = ClipSpec::with_ceiling(percentile(m, 0.8));
  const double small = estimate_rho(m, spec, RhoNorm::fro, 10, 0, 7);
  const double large = estimate_rho(m, spec, RhoNorm::fro, 1000, 0, 7);
  CHECK(large >= small);  // running maximum over a shared stream prefix
  const double refined = estimate_rho(m, spec, RhoNorm::fro, 10, 200, 7);
  CHECK(refined >= small);
}

TEST_CASE("the sampling bound rejects thresholds on the boundary") {
  CHECK_THROWS_WITH_AS(evaluate_pmin(100, 100, 2, 1.0, 1.0, 0.0, 0.0, 0.25, 0.0, 3.0),
                       doctest::Contains("recovery condition violated"), Error);
  CHECK_THROWS_AS(evaluate_pmin(100, 100, 2, 1.0, 1.0, 0.5, 0.0, 0.0, 0.0, 3.0), Error);
  CHECK_THROWS_AS(evaluate_pmin(100, 100, 2, 1.0, 1.0, 0.0, 0.5, 0.0, 0.0, 3.0), Error);
  CHECK_THROWS_AS(evaluate_pmin(100, 100, 2, 1.0, 1.0, 0.0, 0.0, 0.0, 0.5, 3.0), Error);
  // beta at its floor
  CHECK_THROWS_AS(evaluate_pmin(100, 100, 2, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0), Error);
}

TEST_CASE("the partition count matches the sampling example") {
  PminTerms terms = evaluate_pmin(4, 4, 1, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 3.0);
  CHECK(terms.k0 == 4);
}

TEST_CASE("pmin terms match direct arithmetic on a frozen case") {
  const Index n1 = 100, n2 = 200;
  const int r = 2;
  const double mu0 = 1.5, mu1 = 1.2, beta = 3.0;
  PminTerms terms = evaluate_pmin(n1, n2, r, mu0, mu1, 0.1, 0.2, 0.05, 0.3, beta);
  const double n1n2 = 20000.0;
  const int k0 = static_cast<int>(std::ceil(std::log2(2.0 * std::sqrt(2.0) * std::sqrt(n1n2 * r))));
  CHECK(terms.k0 == k0);
  const double p_fro_expected =
      8.0 * k0 * mu0 * beta * r / std::pow(0.5 - 0.1, 2) * (300.0 * std::log(n1n2) / n1n2);
  CHECK(terms.p_fro == doctest::Approx(p_fro_expected).epsilon(1e-12));
  const double p_op2_expected = 8.0 * k0 * beta * r * mu1 * mu1 / (3.0 * std::pow(0.25 - 0.05, 2)) *
                                (200.0 * std::log(300.0) / n1n2);
  CHECK(terms.p_op2 == doctest::Approx(p_op2_expected).epsilon(1e-12));
  const double p_main_expected =
      8.0 * beta * r * mu0 / (3.0 * std::pow(0.5 - 0.3, 2)) * (300.0 * std::log(n1n2) / n1n2);
  CHECK(terms.p_main == doctest::Approx(p_main_expected).epsilon(1e-12));
  CHECK(terms.p_min == std::min(1.0, std::max({1.0 / n1n2, terms.p_fro, terms.p_op1, terms.p_op2,
                                               terms.p_inf, terms.p_main})));
  const double delta_expected =
      k0 * (std::exp(0.25) * std::pow(n1n2, -beta) + 2.0 * std::pow(n1n2, -2.0) +
            std::pow(300.0, -2.0)) +
      2.0 * std::pow(n1n2, -2.0);
  CHECK(terms.failure_prob == doctest::Approx(delta_expected).epsilon(1e-12));
}

TEST_CASE("pmin follows the stated asymptotic scaling") {
  // with every loss at zero the unsaturated bound (before the min with 1)
  // should track (n1+n2) log^2(n1 n2)/(n1 n2)
  std::vector<double> ratios;
  for (double n : {100.0, 1000.0, 10000.0}) {
    PminTerms terms = evaluate_pmin(static_cast<Index>(n), static_cast<Index>(n), 1, 1.0, 1.0, 0.0,
                                    0.0, 0.0, 0.0, 3.0);
    const double raw = std::max({1.0 / (n * n), terms.p_fro, terms.p_op1, terms.p_op2, terms.p_inf,
                                 terms.p_main});
    const double f = (2.0 * n) * std::pow(std::log(n * n), 2) / (n * n);
    ratios.push_back(raw / f);
    CHECK(terms.p_min == std::min(1.0, raw));
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  CHECK(hi / lo < 1.5);
}

TEST_CASE("error decomposition on a perfect estimate") {
  Xoshiro256pp rng(37);
  Matrix m = test::gaussian_lowrank(6, 8, 2, rng);
  ClipSpec spec = ClipSpec::with_ceiling(percentile(m, 0.8));
  ErrorBoundTerms terms = error_bound_terms(m, m, spec, 1.0, 1.0, 2, 0.8);
  CHECK(terms.lhs == 0.0);
  CHECK(terms.b3 == 0.0);
  CHECK(terms.b2 == doctest::Approx(terms.b1));  // both measure m's own overshoot
}

TEST_CASE("error decomposition when clipping is inactive") {
  Xoshiro256pp rng(41);
  Matrix m = test::gaussian_lowrank(6, 8, 2, rng);
  Matrix m_hat = m + 0.1 * test::gaussian_matrix(6, 8, rng);
  const double high = std::max(m.maxCoeff(), m_hat.maxCoeff()) + 1.0;
  ErrorBoundTerms terms =
      error_bound_terms(m, m_hat, ClipSpec::with_ceiling(high), 1.0, 1.0, 2, 0.8);
  CHECK(terms.b1 == 0.0);
  CHECK(terms.b2 == 0.0);
  CHECK(terms.lhs == doctest::Approx(terms.b3));
}

TEST_CASE("error decomposition triangle inequality and caps") {
  Xoshiro256pp rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n1 = 5 + static_cast<Index>(rng.next_below(5));
    const Index n2 = 5 + static_cast<Index>(rng.next_below(5));
    Matrix m = test::gaussian_lowrank(n1, n2, 2, rng);
    Matrix m_hat = test::gaussian_lowrank(n1, n2, 2, rng);
    ClipSpec spec = ClipSpec::with_ceiling(percentile(m, 0.7));
    const int k = 2;
    const double root_knn = std::sqrt(static_cast<double>(k) * n1 * n2);
    // choose the class parameters so both matrices are members by construction
    const double beta1 = std::pow(std::max(trace_norm(m), trace_norm(m_hat)), 2) / root_knn + 1e-9;
    const double beta2 =
        std::pow(std::max(trace_norm(clip(m, spec)), trace_norm(clip(m_hat, spec))), 2) / root_knn +
        1e-9;
    ErrorBoundTerms terms = error_bound_terms(m, m_hat, spec, beta1, beta2, k, 0.8);
    CHECK(terms.lhs <= terms.b1 + terms.b2 + terms.b3 + 1e-12);
    CHECK(terms.b1 <= terms.b1_cap + 1e-12);
    CHECK(terms.b2 <= terms.b2_cap + 1e-12);
    CHECK(terms.b3_cap >= 0.0);
  }
}

TEST_CASE("hadamard products obey the unnormalized-coherence trace bound") {
  Xoshiro256pp rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n1 = 3 + static_cast<Index>(rng.next_below(8));   // up to 10
    const Index n2 = 3 + static_cast<Index>(rng.next_below(10));  // up to 12
    Matrix x = test::gaussian_matrix(n1, n2, rng);
    Matrix y = test::gaussian_matrix(n1, n2, rng);
    const double mu = coherence(x).mu_unnorm;
    const double lhs = trace_norm(x.cwiseProduct(y));
    CHECK(lhs <= mu * mu * trace_norm(x) * trace_norm(y) + 1e-9);
  }
}
