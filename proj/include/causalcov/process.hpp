#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "causalcov/linalg.hpp"

namespace causalcov {

// Z_t = sum_{l=1}^{L} A_l Z_{t-l} + H W_t with Z_{-L:-1} = 0.
class VarSystem {
 public:
  VarSystem(std::vector<Matrix> lags, Matrix noise);

  Eigen::Index state_dim() const { return noise_.rows(); }
  Eigen::Index noise_dim() const { return noise_.cols(); }
  Eigen::Index lag_order() const { return static_cast<Eigen::Index>(lags_.size()); }
  Eigen::Index lifted_dim() const { return state_dim() * lag_order(); }

  const std::vector<Matrix>& lags() const { return lags_; }
  const Matrix& noise() const { return noise_; }

  // [A_1 ... A_L], d x (d L).
  Matrix stacked_lags() const;
  // B = [H; 0; ...; 0], (d L) x p.
  Matrix lifted_noise() const;

 private:
  std::vector<Matrix> lags_;
  Matrix noise_;
};

// Companion matrix: top block row [A_1 ... A_L], identity blocks on the first
// block sub-diagonal, zero elsewhere.
Matrix companion(const VarSystem& sys);

// T' = k floor(T / k).
Eigen::Index effective_horizon(Eigen::Index horizon, Eigen::Index k);

// Causal operator of the lifted state X_t = Z_{t:t-L+1}: block (t, s) is
// A^{t-s} B for s <= t. Throws HorizonTooShort when T' < k.
CausalOperator var_to_operator(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k);

struct ProcessSpec {
  std::variant<CausalOperator, VarSystem> source;
  Eigen::Index horizon = 0;
  Eigen::Index k = 1;

  Eigen::Index effective_horizon() const;
  // The operator at block length k and horizon T'.
  CausalOperator build_operator() const;
};

// R replicate trajectories; X[r] is d x T' and W[r] is p x T' (column t is
// time t).
struct PathBatch {
  std::size_t replicates = 0;
  Eigen::Index horizon = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> states;
  std::vector<Matrix> noise;
};

// Standard normal noise for one replicate, p x T, drawn in time order.
Matrix draw_noise(Eigen::Index p, Eigen::Index horizon, std::uint64_t seed, std::uint64_t replicate);

// X = L W reshaped to d x T'.
Matrix apply_operator(const CausalOperator& op, const Matrix& noise);

PathBatch sample(const CausalOperator& op, std::size_t replicates, std::uint64_t seed,
                 unsigned workers);
PathBatch sample(const ProcessSpec& spec, std::size_t replicates, std::uint64_t seed,
                 unsigned workers);

// Lifted-state trajectory from the recursion X_0 = B W_0,
// X_{t+1} = A X_t + B W_{t+1}; noise is p x T, result is (d L) x T.
Matrix var_state_path(const VarSystem& sys, const Matrix& noise);

// E[X_t X_t^T] from row t of the operator.
SymMatrix per_time_covariance(const CausalOperator& op, Eigen::Index t);
// sum_t E[X_t X_t^T].
SymMatrix covariance_sum(const CausalOperator& op);
// sum_t E[X~_t X~_t^T] for the decoupled process.
SymMatrix decoupled_covariance(const CausalOperator& op);

// sum_j tr[L_jj^T blkdiag(D) L_jj] = sum_t E ||Delta X~_t||^2 with D = Delta^T Delta.
double decoupled_covariance_sum(const CausalOperator& op, const SymMatrix& weight);

// Lifted-state covariances E[X_t X_t^T], t = 0..count-1, from the Lyapunov
// recursion P_0 = B B^T, P_{t+1} = A P_t A^T + B B^T.
std::vector<SymMatrix> var_state_covariances(const VarSystem& sys, Eigen::Index count);

SymMatrix empirical_covariance(const Matrix& path);
SymMatrix empirical_covariance(const PathBatch& batch, std::size_t replicate);

// Gamma_k = (1/k) sum_{t<k} E[X_t X_t^T] for the lifted state.
SymMatrix gamma_k(const VarSystem& sys, Eigen::Index k);

// Smallest k <= k_max with lambda_min(k Gamma_k) > tol lambda_max(k Gamma_k);
// nullopt when no such k exists.
std::optional<Eigen::Index> kappa(const VarSystem& sys, Eigen::Index k_max, double tol = 1e-9);

}  // namespace causalcov
