#pragma once

#include <map>
#include <optional>
#include <string>

#include "causalcov/linalg.hpp"
#include "causalcov/process.hpp"

namespace causalcov {

// ---------------------------------------------------------------------------
// Gaussian quadratic forms
// ---------------------------------------------------------------------------

// exp(-lambda tr Q22 + lambda^2 / 2 tr Q22^2).
double mgf_upper_bound(const SymMatrix& q22, double lambda);

// exp(-lambda tr Q22 + lambda^2 tr Q22^2). This is what the second-order
// estimate log(1 + x) >= x - x^2 / 2 yields for det(I + 2 lambda Q22)^{-1/2};
// unlike mgf_upper_bound it dominates the exact value for every lambda >= 0.
double mgf_upper_bound_conservative(const SymMatrix& q22, double lambda);

// E exp(-lambda [x; W]^T Q [x; W]) for W ~ N(0, I_m), where Q is partitioned
// with a leading n x n block. Closed form:
//   det(I + 2 lambda Q22)^{-1/2}
//   * exp(-lambda x^T (Q11 - 2 lambda Q12 (I + 2 lambda Q22)^{-1} Q21) x).
double exact_mgf(const SymMatrix& q, const Vector& x, double lambda);

// ---------------------------------------------------------------------------
// Causal processes
// ---------------------------------------------------------------------------

// first  = sum_j tr[L_jj^T blkdiag(D) L_jj]
// second = sum_j tr[(L_jj^T blkdiag(D) L_jj)^2]
struct DecoupledMoments {
  double first = 0.0;
  double second = 0.0;
};
DecoupledMoments decoupled_moments(const CausalOperator& op, const SymMatrix& weight);

// Upper bound on E exp(-lambda sum_t X_t^T D X_t):
// exp(-lambda first + lambda^2 / 2 second).
double causal_exp_inequality(const CausalOperator& op, const SymMatrix& weight, double lambda);
double causal_exp_inequality_conservative(const CausalOperator& op, const SymMatrix& weight,
                                          double lambda);

// Bound on P(sum_t X_t^T D X_t <= first / 2): exp(-first^2 / (8 second)).
// Throws DegenerateDirection when first == 0.
double chernoff_lower_tail(const CausalOperator& op, const SymMatrix& weight);
// exp(-first^2 / (16 second)), the optimized form of the conservative MGF bound.
double chernoff_lower_tail_conservative(const CausalOperator& op, const SymMatrix& weight);

// P(sum_t X_t^T D X_t <= threshold) when the quadratic form is a scaled
// chi-square (all nonzero eigenvalues of L^T blkdiag(D) L equal); nullopt
// otherwise or when the operator is too large to diagonalize.
std::optional<double> exact_quadratic_form_cdf(const CausalOperator& op, const SymMatrix& weight,
                                               double threshold);

// ---------------------------------------------------------------------------
// Moment equivalence parameter
// ---------------------------------------------------------------------------

// f(v) = S1(v)^2 / (T' S2(v)) with S1, S2 the decoupled moments for
// D = v v^T. Scale invariant in v.
class PsiObjective {
 public:
  explicit PsiObjective(const CausalOperator& op);

  Eigen::Index dim() const { return covariance_.rows(); }
  double value(const Vector& v) const;
  // Euclidean gradient of value().
  Vector gradient(const Vector& v) const;
  double first(const Vector& v) const { return v.dot(covariance_ * v); }
  double second(const Vector& v) const;
  const Matrix& decoupled_covariance() const { return covariance_; }

 private:
  Matrix quartic_form(const Vector& v) const;  // sum (v^T K v) K

  Eigen::Index horizon_;
  Matrix covariance_;  // sum_t E X~_t X~_t^T
  Matrix quartic_;     // sum vec(K) vec(K)^T over diagonal-block cross terms
};

struct PsiResult {
  double value = 0.0;
  Vector direction;
  double optimized = 0.0;  // before the identical-block floor
  bool identical_blocks = false;
};

// inf over unit v of PsiObjective. Multi-start projected gradient descent
// (32 random starts plus coordinate axes and eigenvectors of the decoupled
// covariance). When all diagonal blocks coincide the result is floored at 1/k.
// Throws SingularDecoupledCovariance when the decoupled covariance is singular.
PsiResult psi_k(const CausalOperator& op);

// ---------------------------------------------------------------------------
// Lower and upper tails of the empirical covariance
// ---------------------------------------------------------------------------

struct BoundReport {
  Eigen::Index horizon = 0;
  Eigen::Index k = 0;
  Eigen::Index dim = 0;
  double psi_k = 0.0;
  Vector psi_direction;
  double chernoff_exponent = 0.0;     // psi_k T' / 8
  double anticonc_probability = 0.0;  // unclamped
  double anticonc_threshold = 0.0;    // lambda_min(sum E X~ X~^T) / (8 T')
  double upper_tail_probability = 0.0;
  std::optional<bool> burnin_satisfied;
  std::map<std::string, double> intermediates;
};

BoundReport anticoncentration_bound(const CausalOperator& op);

// 5^d exp(-(q - 1) lambda_min(sum E X_t X_t^T) / (8 lambda_max(L^T L))), a bound
// on P(||sum X_t X_t^T|| >= 2 q ||sum E X_t X_t^T||).
double upper_tail_bound(const CausalOperator& op, double q);

struct SubexpMgf {
  double bound = 1.0;  // exp(4 lambda sum_t v^T E[X_t X_t^T] v)
  double exact = 1.0;  // det(I - 2 lambda L_v^T L_v)^{-1/2}
};
// Requires 0 <= lambda <= 1 / (4 lambda_max(L^T L)) and ||v|| <= 1.
SubexpMgf mgf_subexp_lemma(const CausalOperator& op, const Vector& v, double lambda);

// ---------------------------------------------------------------------------
// Vector autoregressions
// ---------------------------------------------------------------------------

// Shared quantities of the VAR bounds at horizon T' = k floor(T / k).
struct VarBoundTerms {
  Eigen::Index horizon = 0;
  Eigen::Index k = 0;
  Eigen::Index state_dim = 0;
  Eigen::Index lifted_dim = 0;
  std::optional<Eigen::Index> kappa;
  double noise_gram_norm = 0.0;  // ||H H^T||
  double power_sum = 0.0;        // sum_{s < T'} ||A^s (A^s)^T||
  Vector gamma_spectrum;         // eigenvalues of Gamma_k, ascending
  double gamma_lambda_min = 0.0;
  double corollary_base = 0.0;   // 32 T'^{3/2} ||HH^T|| power_sum / (sqrt(k) lambda_min(Gamma_k))
  double sum_lambda_max_covariance = 0.0;  // sum_{t < T'} lambda_max(E X_t X_t^T)
  double c_sys = 0.0;
};
VarBoundTerms var_bound_terms(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k);

double arma_corollary_bound(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k);
double armastability_bound(const VarSystem& sys, Eigen::Index horizon);
bool burnin_check(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k, double delta);
double ls_error_bound(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k, double delta);

}  // namespace causalcov
