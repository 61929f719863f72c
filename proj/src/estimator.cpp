#include "causalcov/estimator.hpp"

#include <cmath>
#include <string>

namespace causalcov {

RegressionData var_regression_data(const Matrix& trajectory, Eigen::Index lag_order) {
  if (lag_order < 1) fail(ErrorKind::InvalidInput, "lag order must be positive");
  if (trajectory.cols() < 2) fail(ErrorKind::InvalidInput, "trajectory needs at least two samples");
  const Eigen::Index d = trajectory.rows();
  const Eigen::Index count = trajectory.cols() - 1;
  RegressionData out{Matrix::Zero(d * lag_order, count), trajectory.rightCols(count)};
  for (Eigen::Index t = 0; t < count; ++t) {
    for (Eigen::Index l = 0; l < lag_order && l <= t; ++l) {
      out.covariates.block(l * d, t, d, 1) = trajectory.col(t - l);
    }
  }
  return out;
}

LsFit least_squares(const RegressionData& data) {
  if (data.covariates.cols() < 1 || data.covariates.cols() != data.responses.cols()) {
    fail(ErrorKind::InvalidInput, "regression needs matching, nonempty covariates and responses");
  }
  LsFit fit;
  fit.gram = SymMatrix(data.covariates * data.covariates.transpose());
  fit.cross = data.responses * data.covariates.transpose();
  const PseudoInverse pinv = pseudo_inverse(fit.gram, 1e-12);
  fit.estimate = fit.cross * pinv.inverse;
  fit.rank = pinv.rank;
  fit.rank_deficient = pinv.rank < fit.gram.dim();
  return fit;
}

void attach_truth(LsFit& fit, const Matrix& truth) {
  if (truth.rows() != fit.estimate.rows() || truth.cols() != fit.estimate.cols()) {
    fail(ErrorKind::InvalidInput, "true parameter has the wrong shape");
  }
  fit.op_error = op_norm(fit.estimate - truth);
  if (!fit.rank_deficient) {
    const Matrix noise_cross = fit.cross - truth * fit.gram.matrix();
    fit.self_normalized = op_norm(noise_cross * inverse_sqrt(fit.gram));
  }
}

ErrorDecomposition error_decomposition(const LsFit& fit, const Matrix& truth,
                                       const SymMatrix& regularizer) {
  if (regularizer.dim() != fit.gram.dim()) fail(ErrorKind::InvalidInput, "regularizer has wrong size");
  if (!psd_check(regularizer, 1e-10)) {
    fail(ErrorKind::InvalidInput, "regularizer is not positive semidefinite");
  }
  const SymMatrix total(regularizer.matrix() + fit.gram.matrix());
  ErrorDecomposition out;
  out.right_factor = inverse_sqrt(total, 1e-12);
  // sum_t V_t X_t^T with V_t = Y_t - A_* X_t.
  const Matrix noise_cross = fit.cross - truth * fit.gram.matrix();
  out.left_factor = noise_cross * out.right_factor;
  out.self_norm_term = op_norm(out.left_factor);
  out.min_eig_term = 1.0 / std::sqrt(sym_eig_extremes(total).lambda_min);
  return out;
}

double self_normalized_bound(double sigma, Eigen::Index state_dim, Eigen::Index lifted_dim,
                             double delta, const SymMatrix& det_argument) {
  if (!(delta > 0.0 && delta <= 1.0)) fail(ErrorKind::InvalidInput, "delta must lie in (0, 1]");
  if (det_argument.dim() != lifted_dim) {
    fail(ErrorKind::InvalidInput, "determinant argument must be " + std::to_string(lifted_dim) +
                                      "x" + std::to_string(lifted_dim));
  }
  if (!psd_check(det_argument, 1e-10)) {
    fail(ErrorKind::InvalidInput, "determinant argument is not positive semidefinite");
  }
  double log_det = 0.0;
  const Vector ev = det_argument.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) log_det += std::log1p(std::max(ev(i), 0.0));
  const double s2 = sigma * sigma;
  return std::sqrt(4.0 * s2 * log_det + 8.0 * static_cast<double>(state_dim) * s2 * std::log(5.0) +
                   8.0 * s2 * std::log(1.0 / delta));
}

}  // namespace causalcov
