#include "causalcov/bounds.hpp"

#include <cmath>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace causalcov {

namespace {

void require_nonnegative_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorKind::InvalidInput, "lambda must be finite and nonnegative, got " + std::to_string(lambda));
  }
}

// Operators whose dense form exceeds this many entries are not assembled.
constexpr double kMaxDenseEntries = 4e7;

}  // namespace

double mgf_upper_bound(const SymMatrix& q22, double lambda) {
  require_nonnegative_lambda(lambda);
  return std::exp(-lambda * q22.trace() + 0.5 * lambda * lambda * q22.trace_of_square());
}

double mgf_upper_bound_conservative(const SymMatrix& q22, double lambda) {
  require_nonnegative_lambda(lambda);
  return std::exp(-lambda * q22.trace() + lambda * lambda * q22.trace_of_square());
}

double exact_mgf(const SymMatrix& q, const Vector& x, double lambda) {
  require_nonnegative_lambda(lambda);
  const Eigen::Index n = x.size();
  const Eigen::Index m = q.dim() - n;
  if (m < 0) fail(ErrorKind::InvalidInput, "x is longer than Q");
  if (!psd_check(q, 1e-10)) fail(ErrorKind::InvalidInput, "Q is not positive semidefinite");
  if (lambda == 0.0) return 1.0;

  const Matrix& qm = q.matrix();
  const Matrix q11 = qm.topLeftCorner(n, n);
  const Matrix q21 = qm.bottomLeftCorner(m, n);
  const Matrix q22 = qm.bottomRightCorner(m, m);

  const Matrix shifted = Matrix::Identity(m, m) + 2.0 * lambda * q22;
  const Eigen::LLT<Matrix> chol(shifted);
  const double log_det = 2.0 * chol.matrixL().toDenseMatrix().diagonal().array().log().sum();

  double exponent = -lambda * x.dot(q11 * x);
  if (m > 0 && n > 0) {
    const Vector b = q21 * x;
    exponent += 2.0 * lambda * lambda * b.dot(chol.solve(b));
  }
  // The Schur-complement exponent is <= 0 for PSD Q; clip rounding noise.
  exponent = std::min(exponent, 0.0);
  return std::exp(exponent - 0.5 * log_det);
}

DecoupledMoments decoupled_moments(const CausalOperator& op, const SymMatrix& weight) {
  if (weight.dim() != op.d()) fail(ErrorKind::InvalidInput, "weight must be d x d");
  if (!psd_check(weight, 1e-10)) fail(ErrorKind::InvalidInput, "weight is not positive semidefinite");
  DecoupledMoments out;
  for (Eigen::Index j = 0; j < op.block_count(); ++j) {
    const SymMatrix g = op.diag_gram(j, weight);
    out.first += g.trace();
    out.second += g.trace_of_square();
  }
  return out;
}

double causal_exp_inequality(const CausalOperator& op, const SymMatrix& weight, double lambda) {
  require_nonnegative_lambda(lambda);
  const auto s = decoupled_moments(op, weight);
  return std::exp(-lambda * s.first + 0.5 * lambda * lambda * s.second);
}

double causal_exp_inequality_conservative(const CausalOperator& op, const SymMatrix& weight,
                                          double lambda) {
  require_nonnegative_lambda(lambda);
  const auto s = decoupled_moments(op, weight);
  return std::exp(-lambda * s.first + lambda * lambda * s.second);
}

double chernoff_lower_tail(const CausalOperator& op, const SymMatrix& weight) {
  const auto s = decoupled_moments(op, weight);
  if (!(s.first > 0.0)) {
    fail(ErrorKind::DegenerateDirection, "weight annihilates the decoupled process");
  }
  return std::exp(-s.first * s.first / (8.0 * s.second));
}

double chernoff_lower_tail_conservative(const CausalOperator& op, const SymMatrix& weight) {
  const auto s = decoupled_moments(op, weight);
  if (!(s.first > 0.0)) {
    fail(ErrorKind::DegenerateDirection, "weight annihilates the decoupled process");
  }
  return std::exp(-s.first * s.first / (16.0 * s.second));
}

std::optional<double> exact_quadratic_form_cdf(const CausalOperator& op, const SymMatrix& weight,
                                               double threshold) {
  const Eigen::Index cols = op.p() * op.horizon();
  if (cols > 2000) return std::nullopt;
  const Matrix full = assemble(op);
  Matrix weighted(full.rows(), full.cols());
  for (Eigen::Index t = 0; t < op.horizon(); ++t) {
    weighted.middleRows(t * op.d(), op.d()) = weight.matrix() * full.middleRows(t * op.d(), op.d());
  }
  const Vector ev = SymMatrix(full.transpose() * weighted).eigenvalues();
  const double top = ev(ev.size() - 1);
  if (!(top > 0.0)) return threshold >= 0.0 ? std::optional<double>(1.0) : std::nullopt;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-10 * top) {
      if (std::abs(ev(i) - top) > 1e-9 * top) return std::nullopt;
      ++rank;
    } else if (ev(i) < -1e-10 * top) {
      return std::nullopt;
    }
  }
  if (threshold <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * static_cast<double>(rank), 0.5 * threshold / top);
}

BoundReport anticoncentration_bound(const CausalOperator& op) {
  const PsiResult psi = psi_k(op);
  const double horizon = static_cast<double>(op.horizon());
  const double d = static_cast<double>(op.d());

  const auto dec = sym_eig_extremes(decoupled_covariance(op));
  const auto cov = sym_eig_extremes(covariance_sum(op));
  if (static_cast<double>(op.d() * op.horizon()) * static_cast<double>(op.p() * op.horizon()) >
      kMaxDenseEntries) {
    fail(ErrorKind::InvalidInput, "operator too large for the dense lambda_max(L^T L) evaluation");
  }
  const double gram_max = gram_lambda_max(assemble(op));

  double sum_per_time_max = 0.0;
  for (Eigen::Index t = 0; t < op.horizon(); ++t) {
    sum_per_time_max += sym_eig_extremes(per_time_covariance(op, t)).lambda_max;
  }

  const double q = 1.0 + psi.value * horizon * gram_max / cov.lambda_min;
  const double base = 16.0 * std::sqrt(q) * std::sqrt(cov.lambda_max / dec.lambda_min);
  const double log_prob = d * std::log(base) - psi.value * horizon / 8.0;

  BoundReport r;
  r.horizon = op.horizon();
  r.k = op.k();
  r.dim = op.d();
  r.psi_k = psi.value;
  r.psi_direction = psi.direction;
  r.chernoff_exponent = psi.value * horizon / 8.0;
  r.anticonc_probability = std::exp(log_prob);
  r.anticonc_threshold = dec.lambda_min / (8.0 * horizon);
  r.upper_tail_probability =
      std::pow(5.0, d) * std::exp(-(q - 1.0) * cov.lambda_min / (8.0 * gram_max));
  r.intermediates = {
      {"psi_k", psi.value},
      {"psi_k_optimized", psi.optimized},
      {"lambda_min_decoupled", dec.lambda_min},
      {"lambda_max_decoupled", dec.lambda_max},
      {"lambda_min_covariance_sum", cov.lambda_min},
      {"lambda_max_covariance_sum", cov.lambda_max},
      {"lambda_max_gram", gram_max},
      {"q", q},
      {"prefactor_base", base},
      {"log_anticonc_probability", log_prob},
      {"ratio_exact", gram_max / cov.lambda_min},
      {"ratio_footnote_estimate", sum_per_time_max / dec.lambda_min},
      {"sum_lambda_max_per_time", sum_per_time_max},
  };
  return r;
}

double upper_tail_bound(const CausalOperator& op, double q) {
  if (!(q > 1.0)) fail(ErrorKind::InvalidInput, "q must exceed 1");
  const double cov_min = sym_eig_extremes(covariance_sum(op)).lambda_min;
  const double gram_max = gram_lambda_max(assemble(op));
  return std::pow(5.0, static_cast<double>(op.d())) *
         std::exp(-(q - 1.0) * cov_min / (8.0 * gram_max));
}

SubexpMgf mgf_subexp_lemma(const CausalOperator& op, const Vector& v, double lambda) {
  if (v.size() != op.d()) fail(ErrorKind::InvalidInput, "direction must have length d");
  if (v.squaredNorm() > 1.0 + 1e-12) fail(ErrorKind::InvalidInput, "direction norm exceeds 1");
  const Matrix full = assemble(op);
  const double gram_max = gram_lambda_max(full);
  if (!(lambda >= 0.0) || lambda * 4.0 * gram_max > 1.0 + 1e-12) {
    fail(ErrorKind::InvalidInput, "lambda outside [0, 1/(4 lambda_max(L^T L))]");
  }
  Matrix projected(op.horizon(), full.cols());
  for (Eigen::Index t = 0; t < op.horizon(); ++t) {
    projected.row(t) = v.transpose() * full.middleRows(t * op.d(), op.d());
  }
  SubexpMgf out;
  out.bound = std::exp(4.0 * lambda * projected.squaredNorm());
  if (lambda == 0.0) return out;
  const Vector ev = SymMatrix(projected * projected.transpose()).eigenvalues();
  double log_exact = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    log_exact -= 0.5 * std::log1p(-2.0 * lambda * std::max(ev(i), 0.0));
  }
  out.exact = std::exp(log_exact);
  return out;
}

VarBoundTerms var_bound_terms(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k) {
  VarBoundTerms out;
  out.k = k;
  out.horizon = effective_horizon(horizon, k);
  if (out.horizon < k || out.horizon < 1) {
    fail(ErrorKind::HorizonTooShort, "T'=" + std::to_string(out.horizon) + " < k=" + std::to_string(k));
  }
  out.state_dim = sys.state_dim();
  out.lifted_dim = sys.lifted_dim();
  // The reachable subspace saturates after dim(A) steps.
  out.kappa = kappa(sys, std::max(out.lifted_dim, k));
  out.noise_gram_norm = gram_lambda_max(sys.noise());

  const Matrix a = companion(sys);
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  for (Eigen::Index s = 0; s < out.horizon; ++s) {
    out.power_sum += gram_lambda_max(power);
    power = a * power;
  }

  const SymMatrix gamma = gamma_k(sys, k);
  out.gamma_spectrum = gamma.eigenvalues();
  out.gamma_lambda_min = out.gamma_spectrum(0);

  const double t_eff = static_cast<double>(out.horizon);
  out.corollary_base = 32.0 * std::pow(t_eff, 1.5) * out.noise_gram_norm * out.power_sum /
                       (std::sqrt(static_cast<double>(k)) * out.gamma_lambda_min);

  for (const auto& c : var_state_covariances(sys, out.horizon)) {
    out.sum_lambda_max_covariance += std::max(0.0, sym_eig_extremes(c).lambda_max);
  }
  const double window_min = static_cast<double>(k) * out.gamma_lambda_min;
  out.c_sys = 1.0 + 32.0 * out.sum_lambda_max_covariance * out.sum_lambda_max_covariance /
                        (window_min * window_min);
  return out;
}

namespace {

VarBoundTerms excited_terms(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k) {
  VarBoundTerms terms = var_bound_terms(sys, horizon, k);
  if (!terms.kappa) fail(ErrorKind::InsufficientExcitation, "kappa is not reachable");
  if (k < *terms.kappa) {
    fail(ErrorKind::InsufficientExcitation,
         "k=" + std::to_string(k) + " < kappa=" + std::to_string(*terms.kappa));
  }
  return terms;
}

}  // namespace

double arma_corollary_bound(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k) {
  const VarBoundTerms terms = excited_terms(sys, horizon, k);
  const double log_bound = static_cast<double>(terms.lifted_dim) * std::log(terms.corollary_base) -
                           static_cast<double>(terms.horizon) / (8.0 * static_cast<double>(k));
  return std::exp(log_bound);
}

double armastability_bound(const VarSystem& sys, Eigen::Index horizon) {
  if (horizon < 1) fail(ErrorKind::InvalidInput, "horizon must be positive");
  const Matrix a = companion(sys);
  Matrix power = Matrix::Identity(a.rows(), a.cols());
  double power_sum = 0.0;
  for (Eigen::Index s = 0; s < horizon; ++s) {
    power_sum += gram_lambda_max(power);
    power = a * power;
  }
  return static_cast<double>(horizon) * gram_lambda_max(sys.noise()) * power_sum;
}

bool burnin_check(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::InvalidInput, "delta must lie in (0, 1)");
  const VarBoundTerms terms = excited_terms(sys, horizon, k);
  const double lhs = static_cast<double>(terms.horizon) / (8.0 * static_cast<double>(k));
  const double rhs = static_cast<double>(terms.lifted_dim) * std::log(terms.corollary_base) +
                     std::log(1.0 / delta);
  return lhs >= rhs;
}

double ls_error_bound(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k, double delta) {
  if (!burnin_check(sys, horizon, k, delta)) {
    fail(ErrorKind::BurninUnsatisfied, "burn-in condition fails at T=" + std::to_string(horizon) +
                                           ", k=" + std::to_string(k));
  }
  const VarBoundTerms terms = var_bound_terms(sys, horizon, k);
  const double sigma = op_norm(sys.noise());
  const double t_eff = static_cast<double>(terms.horizon);
  const double radicand = static_cast<double>(terms.lifted_dim) * std::log(terms.c_sys) +
                          2.0 * static_cast<double>(terms.state_dim) * std::log(5.0) +
                          2.0 * std::log(1.0 / delta);
  return 32.0 * sigma / std::sqrt(t_eff * terms.gamma_lambda_min) * std::sqrt(radicand);
}

}  // namespace causalcov
