#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "causalcov/error.hpp"

namespace causalcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense symmetric matrix. The stored entries are exactly symmetric: every
// construction replaces M by (M + M^T) / 2.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }
  static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  // Full spectrum in nondecreasing order.
  Vector eigenvalues() const;
  double trace() const { return m_.trace(); }
  // tr(M^2), computed as the squared Frobenius norm.
  double trace_of_square() const { return m_.squaredNorm(); }

  SymMatrix scaled(double c) const { return SymMatrix(c * m_); }

 private:
  Matrix m_;
};

struct EigExtremes {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

EigExtremes sym_eig_extremes(const SymMatrix& m);

// True iff lambda_min(M) >= -tol * max(1, lambda_max(M)).
bool psd_check(const SymMatrix& m, double tol);

// Operator (spectral) norm of a rectangular matrix, via the smaller Gram.
double op_norm(const Matrix& m);

// Largest eigenvalue of M M^T (equivalently M^T M), via the smaller Gram.
double gram_lambda_max(const Matrix& m);

// M^{-1/2} for a positive definite M; throws SingularGram when
// lambda_min <= rel_cutoff * lambda_max.
Matrix inverse_sqrt(const SymMatrix& m, double rel_cutoff = 1e-12);

// Moore-Penrose pseudo-inverse through the symmetric eigendecomposition,
// discarding eigenvalues below rel_cutoff * lambda_max.
struct PseudoInverse {
  Matrix inverse;
  Eigen::Index rank = 0;
};
PseudoInverse pseudo_inverse(const SymMatrix& m, double rel_cutoff = 1e-12);

// Block lower-triangular factor of a k-causal Gaussian process,
// X_{0:T-1} = L W_{0:T-1}. Block (i, j), j <= i, is (d k) x (p k); blocks
// above the diagonal are structurally zero and not stored.
class CausalOperator {
 public:
  // `blocks` lists the lower triangle row by row: (0,0), (1,0), (1,1), (2,0), ...
  CausalOperator(Eigen::Index d, Eigen::Index p, Eigen::Index k, std::vector<Matrix> blocks);

  // Partitions a dense (d T) x (p T) matrix at block length k. The horizon is
  // truncated to T' = k floor(T / k); entries above the block diagonal of the
  // retained part must be zero.
  static CausalOperator from_dense(const Matrix& full, Eigen::Index d, Eigen::Index p,
                                   Eigen::Index k);

  Eigen::Index d() const { return d_; }
  Eigen::Index p() const { return p_; }
  Eigen::Index k() const { return k_; }
  Eigen::Index block_count() const { return n_; }
  Eigen::Index horizon() const { return n_ * k_; }

  const Matrix& block(Eigen::Index i, Eigen::Index j) const;
  const Matrix& diag_block(Eigen::Index j) const { return block(j, j); }

  // L_jj^T blkdiag(D, ..., D) L_jj for a d x d matrix D.
  SymMatrix diag_gram(Eigen::Index j, const SymMatrix& weight) const;

  // Row t of the assembled matrix: d x (p T').
  Matrix time_row(Eigen::Index t) const;
  // Row t restricted to its own diagonal block (the decoupled process): d x (p k).
  Matrix decoupled_time_row(Eigen::Index t) const;

  // X = L W for a stacked noise vector of length p T'.
  Vector apply(const Vector& w) const;

  // Same operator with every off-diagonal block set to zero.
  CausalOperator decoupled() const;

  bool diagonal_blocks_identical() const;

 private:
  std::size_t index(Eigen::Index i, Eigen::Index j) const {
    return static_cast<std::size_t>(i * (i + 1) / 2 + j);
  }

  Eigen::Index d_;
  Eigen::Index p_;
  Eigen::Index k_;
  Eigen::Index n_;
  std::vector<Matrix> blocks_;
};

Matrix assemble(const CausalOperator& op);

// X_t = W_t on R^d: the identity operator.
CausalOperator iid_operator(Eigen::Index d, Eigen::Index horizon, Eigen::Index k);

}  // namespace causalcov
