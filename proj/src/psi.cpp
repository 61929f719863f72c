#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "causalcov/bounds.hpp"

namespace causalcov {

namespace {

Vector vec_outer(const Vector& v) {
  const Eigen::Index d = v.size();
  Vector out(d * d);
  for (Eigen::Index b = 0; b < d; ++b) out.segment(b * d, d) = v(b) * v;
  return out;
}

constexpr double kMinStep = 1e-10;

// Projected descent on the unit sphere from one start; returns the end point.
Vector descend(const PsiObjective& f, Vector v) {
  v.normalize();
  double fv = f.value(v);
  double step = 0.5;  // angular step
  for (int iter = 0; iter < 5000; ++iter) {
    Vector g = f.gradient(v);
    g -= g.dot(v) * v;
    const double gnorm = g.norm();
    if (gnorm < 1e-14) break;
    bool accepted = false;
    while (step > kMinStep) {
      Vector candidate = v - (step / gnorm) * g;
      candidate.normalize();
      const double fc = f.value(candidate);
      if (fc < fv) {
        v = candidate;
        fv = fc;
        accepted = true;
        step = std::min(1.0, 2.0 * step);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return v;
}

}  // namespace

PsiObjective::PsiObjective(const CausalOperator& op)
    : horizon_(op.horizon()),
      covariance_(Matrix::Zero(op.d(), op.d())),
      quartic_(Matrix::Zero(op.d() * op.d(), op.d() * op.d())) {
  const Eigen::Index d = op.d();
  const bool identical = op.diagonal_blocks_identical();
  const Eigen::Index distinct = identical ? 1 : op.block_count();
  const double multiplicity = identical ? static_cast<double>(op.block_count()) : 1.0;

  Matrix kvecs(d * d, distinct * op.k() * op.k());
  Eigen::Index column = 0;
  for (Eigen::Index j = 0; j < distinct; ++j) {
    const Matrix& b = op.diag_block(j);
    for (Eigen::Index a = 0; a < op.k(); ++a) {
      const auto ra = b.middleRows(a * d, d);
      covariance_.noalias() += multiplicity * (ra * ra.transpose());
      for (Eigen::Index c = 0; c < op.k(); ++c) {
        const auto rc = b.middleRows(c * d, d);
        Matrix cross = ra * rc.transpose();
        cross = 0.5 * (cross + cross.transpose()).eval();
        kvecs.col(column++) = Eigen::Map<const Vector>(cross.data(), d * d);
      }
    }
  }
  quartic_.noalias() = multiplicity * (kvecs * kvecs.transpose());
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
}

double PsiObjective::second(const Vector& v) const {
  const Vector vv = vec_outer(v);
  return vv.dot(quartic_ * vv);
}

Matrix PsiObjective::quartic_form(const Vector& v) const {
  const Eigen::Index d = v.size();
  const Vector flat = quartic_ * vec_outer(v);
  return Eigen::Map<const Matrix>(flat.data(), d, d);
}

double PsiObjective::value(const Vector& v) const {
  const double s1 = first(v);
  const double s2 = second(v);
  return s1 * s1 / (static_cast<double>(horizon_) * s2);
}

Vector PsiObjective::gradient(const Vector& v) const {
  const double s1 = first(v);
  const double s2 = second(v);
  const Vector grad1 = 2.0 * (covariance_ * v);
  const Vector grad2 = 4.0 * (quartic_form(v) * v);
  return (2.0 * s1 * s2 * grad1 - s1 * s1 * grad2) /
         (static_cast<double>(horizon_) * s2 * s2);
}

PsiResult psi_k(const CausalOperator& op) {
  const PsiObjective f(op);
  const Eigen::Index d = f.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(f.decoupled_covariance());
  const Vector& spectrum = eig.eigenvalues();
  if (!(spectrum(0) > 1e-12 * std::max(spectrum(d - 1), 0.0)) || spectrum(0) <= 0.0) {
    fail(ErrorKind::SingularDecoupledCovariance,
         "lambda_min of the decoupled covariance is " + std::to_string(spectrum(0)));
  }

  std::vector<Vector> starts;
  for (Eigen::Index i = 0; i < d; ++i) {
    starts.push_back(Vector::Unit(d, i));
    starts.push_back(eig.eigenvectors().col(i));
  }
  if (d > 1) {
    std::mt19937_64 rng(0x5eed5eedULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int s = 0; s < 32; ++s) {
      Vector v(d);
      for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(rng);
      if (v.norm() > 0.0) starts.push_back(v);
    }
  }

  PsiResult best;
  best.optimized = std::numeric_limits<double>::infinity();
  for (const Vector& start : starts) {
    const Vector v = d == 1 ? Vector(Vector::Ones(1)) : descend(f, start);
    const double fv = f.value(v);
    if (fv < best.optimized) {
      best.optimized = fv;
      best.direction = v;
    }
  }
  best.identical_blocks = op.diagonal_blocks_identical();
  best.value = best.optimized;
  if (best.identical_blocks) {
    best.value = std::max(best.value, 1.0 / static_cast<double>(op.k()));
  }
  return best;
}

}  // namespace causalcov
