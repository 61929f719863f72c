#include "causalcov/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace causalcov {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    fail(ErrorKind::InvalidInput, "symmetric matrix must be square, got " +
                                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  m_ = 0.5 * (m + m.transpose());
}

Vector SymMatrix::eigenvalues() const {
  if (m_.size() == 0) return Vector();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

EigExtremes sym_eig_extremes(const SymMatrix& m) {
  if (m.dim() == 0) fail(ErrorKind::InvalidInput, "empty matrix has no spectrum");
  if (!m.matrix().allFinite()) fail(ErrorKind::InvalidInput, "matrix has non-finite entries");
  const Vector ev = m.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

bool psd_check(const SymMatrix& m, double tol) {
  if (m.dim() == 0) return true;
  if (!m.matrix().allFinite()) return false;
  const auto [lo, hi] = sym_eig_extremes(m);
  return lo >= -tol * std::max(1.0, hi);
}

double gram_lambda_max(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  return std::max(0.0, sym_eig_extremes(SymMatrix(gram)).lambda_max);
}

double op_norm(const Matrix& m) { return std::sqrt(gram_lambda_max(m)); }

Matrix inverse_sqrt(const SymMatrix& m, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  const Vector& ev = solver.eigenvalues();
  const double hi = ev(ev.size() - 1);
  if (!(ev(0) > rel_cutoff * std::max(hi, 0.0)) || ev(0) <= 0.0) {
    fail(ErrorKind::SingularGram, "matrix is singular (lambda_min=" + std::to_string(ev(0)) + ")");
  }
  const Matrix& v = solver.eigenvectors();
  return v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

PseudoInverse pseudo_inverse(const SymMatrix& m, double rel_cutoff) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  const Vector& ev = solver.eigenvalues();
  const double cutoff = rel_cutoff * std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  Vector inv = Vector::Zero(ev.size());
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > cutoff && ev(i) != 0.0) {
      inv(i) = 1.0 / ev(i);
      ++rank;
    }
  }
  const Matrix& v = solver.eigenvectors();
  return {v * inv.asDiagonal() * v.transpose(), rank};
}

CausalOperator::CausalOperator(Eigen::Index d, Eigen::Index p, Eigen::Index k,
                               std::vector<Matrix> blocks)
    : d_(d), p_(p), k_(k), n_(0), blocks_(std::move(blocks)) {
  if (d < 1 || p < 1 || k < 1) fail(ErrorKind::InvalidInput, "d, p and k must be positive");
  // blocks_.size() == n (n + 1) / 2
  while (static_cast<std::size_t>(n_ * (n_ + 1) / 2) < blocks_.size()) ++n_;
  if (n_ == 0 || static_cast<std::size_t>(n_ * (n_ + 1) / 2) != blocks_.size()) {
    fail(ErrorKind::InvalidInput, "block count " + std::to_string(blocks_.size()) +
                                      " is not a triangular number");
  }
  for (const Matrix& b : blocks_) {
    if (b.rows() != d * k || b.cols() != p * k) {
      fail(ErrorKind::InvalidInput, "block has shape " + std::to_string(b.rows()) + "x" +
                                        std::to_string(b.cols()) + ", expected " +
                                        std::to_string(d * k) + "x" + std::to_string(p * k));
    }
  }
}

CausalOperator CausalOperator::from_dense(const Matrix& full, Eigen::Index d, Eigen::Index p,
                                          Eigen::Index k) {
  if (d < 1 || p < 1 || k < 1) fail(ErrorKind::InvalidInput, "d, p and k must be positive");
  if (full.rows() % d != 0 || full.cols() % p != 0 || full.rows() / d != full.cols() / p) {
    fail(ErrorKind::InvalidInput, "dense operator shape does not match (d T) x (p T)");
  }
  const Eigen::Index horizon = full.rows() / d;
  const Eigen::Index n = horizon / k;
  if (n < 1) {
    fail(ErrorKind::HorizonTooShort,
         "horizon " + std::to_string(horizon) + " shorter than block length " + std::to_string(k));
  }
  const Eigen::Index rb = d * k;
  const Eigen::Index cb = p * k;
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      Matrix b = full.block(i * rb, j * cb, rb, cb);
      if (j <= i) {
        blocks.push_back(std::move(b));
      } else if (!b.isZero(0.0)) {
        fail(ErrorKind::InvalidInput, "dense operator is not block lower-triangular at k=" +
                                          std::to_string(k));
      }
    }
  }
  return CausalOperator(d, p, k, std::move(blocks));
}

const Matrix& CausalOperator::block(Eigen::Index i, Eigen::Index j) const {
  if (i < 0 || i >= n_ || j < 0 || j > i) {
    fail(ErrorKind::InvalidInput, "block (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") is outside the lower triangle");
  }
  return blocks_[index(i, j)];
}

SymMatrix CausalOperator::diag_gram(Eigen::Index j, const SymMatrix& weight) const {
  if (weight.dim() != d_) fail(ErrorKind::InvalidInput, "weight must be d x d");
  const Matrix& b = diag_block(j);
  Matrix weighted(b.rows(), b.cols());
  for (Eigen::Index t = 0; t < k_; ++t) {
    weighted.middleRows(t * d_, d_) = weight.matrix() * b.middleRows(t * d_, d_);
  }
  return SymMatrix(b.transpose() * weighted);
}

Matrix CausalOperator::time_row(Eigen::Index t) const {
  if (t < 0 || t >= horizon()) fail(ErrorKind::InvalidInput, "time index out of range");
  const Eigen::Index i = t / k_;
  const Eigen::Index local = t % k_;
  Matrix row = Matrix::Zero(d_, p_ * horizon());
  for (Eigen::Index j = 0; j <= i; ++j) {
    row.middleCols(j * p_ * k_, p_ * k_) = block(i, j).middleRows(local * d_, d_);
  }
  return row;
}

Matrix CausalOperator::decoupled_time_row(Eigen::Index t) const {
  if (t < 0 || t >= horizon()) fail(ErrorKind::InvalidInput, "time index out of range");
  return diag_block(t / k_).middleRows((t % k_) * d_, d_);
}

Vector CausalOperator::apply(const Vector& w) const {
  if (w.size() != p_ * horizon()) fail(ErrorKind::InvalidInput, "noise vector has wrong length");
  const Eigen::Index rb = d_ * k_;
  const Eigen::Index cb = p_ * k_;
  Vector x = Vector::Zero(d_ * horizon());
  for (Eigen::Index i = 0; i < n_; ++i) {
    auto xi = x.segment(i * rb, rb);
    for (Eigen::Index j = 0; j <= i; ++j) {
      xi.noalias() += block(i, j) * w.segment(j * cb, cb);
    }
  }
  return x;
}

CausalOperator CausalOperator::decoupled() const {
  std::vector<Matrix> blocks;
  blocks.reserve(blocks_.size());
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      blocks.push_back(i == j ? block(i, j) : Matrix::Zero(d_ * k_, p_ * k_));
    }
  }
  return CausalOperator(d_, p_, k_, std::move(blocks));
}

bool CausalOperator::diagonal_blocks_identical() const {
  for (Eigen::Index j = 1; j < n_; ++j) {
    if (diag_block(j) != diag_block(0)) return false;
  }
  return true;
}

Matrix assemble(const CausalOperator& op) {
  const Eigen::Index rb = op.d() * op.k();
  const Eigen::Index cb = op.p() * op.k();
  Matrix full = Matrix::Zero(op.d() * op.horizon(), op.p() * op.horizon());
  for (Eigen::Index i = 0; i < op.block_count(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      full.block(i * rb, j * cb, rb, cb) = op.block(i, j);
    }
  }
  return full;
}

CausalOperator iid_operator(Eigen::Index d, Eigen::Index horizon, Eigen::Index k) {
  if (k < 1 || horizon < k) fail(ErrorKind::HorizonTooShort, "horizon shorter than block length");
  const Eigen::Index n = horizon / k;
  std::vector<Matrix> blocks;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      blocks.push_back(i == j ? Matrix(Matrix::Identity(d * k, d * k)) : Matrix::Zero(d * k, d * k));
    }
  }
  return CausalOperator(d, d, k, std::move(blocks));
}

}  // namespace causalcov
