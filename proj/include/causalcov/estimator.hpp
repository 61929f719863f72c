#pragma once

#include <optional>

#include "causalcov/linalg.hpp"
#include "causalcov/process.hpp"

namespace causalcov {

// Regression pairs Y_t = A_* X_t + V_t, stored column-wise: covariates is
// (d L) x T', responses is d x T'.
struct RegressionData {
  Matrix covariates;
  Matrix responses;
};

// Builds X_t = Z_{t:t-L+1} (zero before time 0) and Y_t = Z_{t+1} from a
// trajectory Z_0..Z_{T'} given as d x (T' + 1).
RegressionData var_regression_data(const Matrix& trajectory, Eigen::Index lag_order);

struct LsFit {
  Matrix estimate;  // A_hat, d x (d L)
  SymMatrix gram;   // sum_t X_t X_t^T
  Matrix cross;     // sum_t Y_t X_t^T
  Eigen::Index rank = 0;
  bool rank_deficient = false;
  std::optional<double> op_error;         // ||A_hat - A_*|| when the truth is known
  std::optional<double> self_normalized;  // ||(sum V X^T)(sum X X^T)^{-1/2}||
};

// A_hat = (sum Y X^T)(sum X X^T)^+ with eigendecomposition pseudo-inverse,
// relative cutoff 1e-12.
LsFit least_squares(const RegressionData& data);

// Fills op_error and (when the gram is nonsingular) self_normalized.
void attach_truth(LsFit& fit, const Matrix& truth);

struct ErrorDecomposition {
  double self_norm_term = 0.0;  // ||(sum V X^T)(reg + gram)^{-1/2}||
  double min_eig_term = 0.0;    // lambda_min(reg + gram)^{-1/2}
  Matrix left_factor;           // (sum V X^T)(reg + gram)^{-1/2}
  Matrix right_factor;          // (reg + gram)^{-1/2}
};

// Splits A_hat - A_* into a self-normalized factor and an inverse square root
// of the (regularized) gram. With a zero regularizer
// left_factor * right_factor == A_hat - A_*. Throws SingularGram.
ErrorDecomposition error_decomposition(const LsFit& fit, const Matrix& truth,
                                       const SymMatrix& regularizer);

// sqrt(4 s^2 log det(I + M) + 8 d s^2 log 5 + 8 s^2 log(1/delta)).
double self_normalized_bound(double sigma, Eigen::Index state_dim, Eigen::Index lifted_dim,
                             double delta, const SymMatrix& det_argument);

}  // namespace causalcov
