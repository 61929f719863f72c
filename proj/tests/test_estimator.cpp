#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "causalcov/estimator.hpp"
#include "causalcov/parallel.hpp"

using namespace causalcov;

namespace {

VarSystem scalar_var(double a, double h) {
  return VarSystem({Matrix::Constant(1, 1, a)}, Matrix::Constant(1, 1, h));
}

// Z_0..Z_T for the VAR driven by its own seeded noise.
Matrix trajectory(const VarSystem& sys, Eigen::Index horizon, std::uint64_t seed, std::uint64_t r) {
  const Matrix noise = draw_noise(sys.noise_dim(), horizon + 1, seed, r);
  return var_state_path(sys, noise).topRows(sys.state_dim());
}

}  // namespace

TEST_CASE("regression layout") {
  Matrix z(1, 4);
  z << 1, 2, 3, 4;
  const RegressionData data = var_regression_data(z, 2);
  Matrix cov(2, 3);
  cov << 1, 2, 3, 0, 1, 2;
  CHECK(data.covariates == cov);
  CHECK(data.responses == Matrix(z.rightCols(3)));
  CHECK(oracle::throws_kind([&] { var_regression_data(z, 0); }, ErrorKind::InvalidInput));
  CHECK(oracle::throws_kind([&] { var_regression_data(Matrix::Ones(1, 1), 1); }, ErrorKind::InvalidInput));
}

TEST_CASE("noiseless data are interpolated exactly") {
  std::mt19937_64 rng(31);
  const VarSystem sys = oracle::random_var(rng, 2, 2, 2, 0.9);
  const Matrix truth = sys.stacked_lags();
  // Start from a generic state and propagate without noise.
  Matrix z = Matrix::Zero(2, 30);
  z.col(0) = oracle::gaussian_matrix(rng, 2, 1);
  z.col(1) = oracle::gaussian_matrix(rng, 2, 1);
  for (Eigen::Index t = 2; t < 30; ++t) z.col(t) = sys.lags()[0] * z.col(t - 1) + sys.lags()[1] * z.col(t - 2);
  RegressionData data = var_regression_data(z, 2);
  // Drop the first pair, whose zero-padded lag is not part of this noiseless path.
  data.covariates = data.covariates.rightCols(28).eval();
  data.responses = data.responses.rightCols(28).eval();
  LsFit fit = least_squares(data);
  CHECK_FALSE(fit.rank_deficient);
  CHECK((fit.estimate - truth).norm() <= 1e-8 * truth.norm());
  attach_truth(fit, truth);
  CHECK(*fit.op_error < 1e-8);
}

TEST_CASE("single sample scalar fit") {
  RegressionData data{Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 3.0)};
  const LsFit fit = least_squares(data);
  CHECK(fit.estimate(0, 0) == doctest::Approx(3.0 * 2.0 / 4.0).epsilon(1e-14));
}

TEST_CASE("rank deficient gram uses the pseudo-inverse") {
  Matrix cov(2, 3);
  cov << 1, 2, 3, 0, 0, 0;
  RegressionData data{cov, Matrix(Matrix::Constant(1, 3, 1.0))};
  const LsFit fit = least_squares(data);
  CHECK(fit.rank_deficient);
  CHECK(fit.rank == 1);
  CHECK(fit.estimate(0, 1) == 0.0);
  CHECK(fit.estimate(0, 0) == doctest::Approx(6.0 / 14.0).epsilon(1e-13));
}

TEST_CASE("normal equations and orthogonality") {
  std::mt19937_64 rng(32);
  const VarSystem sys = oracle::random_var(rng, 3, 2, 2, 0.8);
  const RegressionData data = var_regression_data(trajectory(sys, 200, 5, 0), 2);
  const LsFit fit = least_squares(data);
  REQUIRE_FALSE(fit.rank_deficient);
  CHECK((fit.estimate * fit.gram.matrix() - fit.cross).norm() <= 1e-8 * fit.cross.norm());
  const Matrix residual = data.responses - fit.estimate * data.covariates;
  CHECK((residual * data.covariates.transpose()).norm() <= 1e-8 * fit.cross.norm());
}

TEST_CASE("scalar consistency") {
  const VarSystem sys = scalar_var(0.5, 1.0);
  int close = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const LsFit fit = least_squares(var_regression_data(trajectory(sys, 10000, 41, r), 1));
    if (std::abs(fit.estimate(0, 0) - 0.5) <= 0.05) ++close;
  }
  CHECK(close >= 99);
}

TEST_CASE("op_error shrinks with the horizon") {
  const VarSystem sys({Matrix::Constant(1, 1, 0.6)}, Matrix::Constant(1, 1, 1.0));
  auto median_error = [&](Eigen::Index horizon) {
    std::vector<double> errs;
    for (std::uint64_t r = 0; r < 100; ++r) {
      LsFit fit = least_squares(var_regression_data(trajectory(sys, horizon, 42, r), 1));
      attach_truth(fit, sys.stacked_lags());
      errs.push_back(*fit.op_error);
    }
    std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
    return errs[50];
  };
  CHECK(median_error(4096) < median_error(256));
}

TEST_CASE("error decomposition") {
  std::mt19937_64 rng(33);
  const VarSystem sys = oracle::random_var(rng, 2, 2, 2, 0.8);
  const Matrix truth = sys.stacked_lags();
  LsFit fit = least_squares(var_regression_data(trajectory(sys, 300, 6, 0), 2));
  attach_truth(fit, truth);
  const ErrorDecomposition zero_reg = error_decomposition(fit, truth, SymMatrix::zero(4));
  const Matrix diff = fit.estimate - truth;
  CHECK((zero_reg.left_factor * zero_reg.right_factor - diff).norm() <= 1e-8 * diff.norm());
  CHECK(zero_reg.self_norm_term == doctest::Approx(*fit.self_normalized).epsilon(1e-10));
  CHECK(zero_reg.min_eig_term ==
        doctest::Approx(1.0 / std::sqrt(sym_eig_extremes(fit.gram).lambda_min)).epsilon(1e-10));
  CHECK(op_norm(diff) <= zero_reg.self_norm_term * zero_reg.min_eig_term * (1.0 + 1e-10));

  SUBCASE("noiseless responses") {
    LsFit clean = fit;
    clean.cross = truth * fit.gram.matrix();
    CHECK(error_decomposition(clean, truth, SymMatrix::zero(4)).self_norm_term < 1e-10);
  }
  SUBCASE("rank-1 algebra") {
    // One scalar sample x = 1, y = a + v.
    const double a = 0.3;
    const double v = -0.7;
    LsFit one = least_squares(RegressionData{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, a + v)});
    CHECK(error_decomposition(one, Matrix::Constant(1, 1, a), SymMatrix::zero(1)).self_norm_term ==
          doctest::Approx(std::abs(v)).epsilon(1e-14));
  }
  SUBCASE("errors") {
    Matrix bad = Matrix::Identity(4, 4);
    bad(0, 0) = -1.0;
    CHECK(oracle::throws_kind([&] { error_decomposition(fit, truth, SymMatrix(bad)); }, ErrorKind::InvalidInput));
    LsFit singular = least_squares(RegressionData{Matrix::Ones(2, 1), Matrix::Ones(1, 1)});
    CHECK(oracle::throws_kind([&] { error_decomposition(singular, Matrix::Zero(1, 2), SymMatrix::zero(2)); },
                              ErrorKind::SingularGram));
  }
}

TEST_CASE("self-normalized bound") {
  CHECK(self_normalized_bound(1.5, 1, 1, 1.0, SymMatrix::zero(1)) ==
        doctest::Approx(std::sqrt(8.0 * 2.25 * std::log(5.0))).epsilon(1e-14));
  std::mt19937_64 rng(34);
  const SymMatrix m = oracle::random_psd(rng, 4, 3);
  CHECK(self_normalized_bound(2.0, 2, 4, 0.1, m) ==
        doctest::Approx(2.0 * self_normalized_bound(1.0, 2, 4, 0.1, m)).epsilon(1e-13));
  // log det(I + M) <= dim log(1 + lambda_max(M)).
  const double lmax = sym_eig_extremes(m).lambda_max;
  const double s = self_normalized_bound(1.0, 2, 4, 0.1, m);
  const double log_det = (s * s - 16.0 * std::log(5.0) - 8.0 * std::log(10.0)) / 4.0;
  CHECK(log_det == doctest::Approx(std::log((Matrix::Identity(4, 4) + m.matrix()).determinant())).epsilon(1e-10));
  CHECK(log_det <= 4.0 * std::log1p(lmax));

  CHECK(oracle::throws_kind([&] { self_normalized_bound(1.0, 2, 4, 0.0, m); }, ErrorKind::InvalidInput));
  CHECK(oracle::throws_kind([&] { self_normalized_bound(1.0, 2, 3, 0.1, m); }, ErrorKind::InvalidInput));
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK(oracle::throws_kind([&] { self_normalized_bound(1.0, 1, 2, 0.1, SymMatrix(bad)); }, ErrorKind::InvalidInput));
}

TEST_CASE("regularized self-normalized term stays under its bound") {
  // Regularizer (T'/16) Gamma_k with k = 1; determinant argument reg^{-1/2} gram reg^{-1/2}.
  const VarSystem sys = scalar_var(0.5, 1.0);
  const Eigen::Index horizon = 512;
  const double delta = 0.1;
  const SymMatrix reg = gamma_k(sys, 1).scaled(static_cast<double>(horizon) / 16.0);
  const Matrix reg_isqrt = inverse_sqrt(reg);
  std::size_t exceed = 0;
  const std::size_t reps = 1000;
  for (std::uint64_t r = 0; r < reps; ++r) {
    LsFit fit = least_squares(var_regression_data(trajectory(sys, horizon, 43, r), 1));
    const ErrorDecomposition dec = error_decomposition(fit, sys.stacked_lags(), reg);
    const SymMatrix det_arg(reg_isqrt * fit.gram.matrix() * reg_isqrt);
    if (dec.self_norm_term > self_normalized_bound(1.0, 1, 1, delta, det_arg)) ++exceed;
  }
  CHECK(static_cast<double>(exceed) / reps <= delta);
}
