#include "causalcov/process.hpp"

#include <random>
#include <string>

#include "causalcov/parallel.hpp"

namespace causalcov {

VarSystem::VarSystem(std::vector<Matrix> lags, Matrix noise)
    : lags_(std::move(lags)), noise_(std::move(noise)) {
  if (lags_.empty()) fail(ErrorKind::InvalidInput, "VAR lag order must be at least 1");
  const Eigen::Index d = noise_.rows();
  if (d < 1 || noise_.cols() < 1) fail(ErrorKind::InvalidInput, "noise factor H must be nonempty");
  for (std::size_t l = 0; l < lags_.size(); ++l) {
    if (lags_[l].rows() != d || lags_[l].cols() != d) {
      fail(ErrorKind::InvalidInput, "lag matrix A_" + std::to_string(l + 1) + " is " +
                                        std::to_string(lags_[l].rows()) + "x" +
                                        std::to_string(lags_[l].cols()) + ", expected " +
                                        std::to_string(d) + "x" + std::to_string(d));
    }
  }
}

Matrix VarSystem::stacked_lags() const {
  const Eigen::Index d = state_dim();
  Matrix out(d, lifted_dim());
  for (Eigen::Index l = 0; l < lag_order(); ++l) out.middleCols(l * d, d) = lags_[l];
  return out;
}

Matrix VarSystem::lifted_noise() const {
  Matrix b = Matrix::Zero(lifted_dim(), noise_dim());
  b.topRows(state_dim()) = noise_;
  return b;
}

Matrix companion(const VarSystem& sys) {
  const Eigen::Index d = sys.state_dim();
  const Eigen::Index n = sys.lifted_dim();
  Matrix a = Matrix::Zero(n, n);
  a.topRows(d) = sys.stacked_lags();
  if (sys.lag_order() > 1) a.bottomLeftCorner(n - d, n - d).setIdentity();
  return a;
}

Eigen::Index effective_horizon(Eigen::Index horizon, Eigen::Index k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "block length k must be positive");
  return k * (horizon / k);
}

CausalOperator var_to_operator(const VarSystem& sys, Eigen::Index horizon, Eigen::Index k) {
  const Eigen::Index t_eff = effective_horizon(horizon, k);
  if (t_eff < k || t_eff < 1) {
    fail(ErrorKind::HorizonTooShort, "T'=" + std::to_string(t_eff) + " < k=" + std::to_string(k));
  }
  const Matrix a = companion(sys);
  const Eigen::Index dl = sys.lifted_dim();
  const Eigen::Index p = sys.noise_dim();

  // impulse[m] = A^m B
  std::vector<Matrix> impulse;
  impulse.reserve(static_cast<std::size_t>(t_eff));
  impulse.push_back(sys.lifted_noise());
  for (Eigen::Index m = 1; m < t_eff; ++m) impulse.push_back(a * impulse.back());

  const Eigen::Index n = t_eff / k;
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      Matrix b = Matrix::Zero(dl * k, p * k);
      for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
          const Eigen::Index lag = (i - j) * k + r - c;
          if (lag >= 0) b.block(r * dl, c * p, dl, p) = impulse[static_cast<std::size_t>(lag)];
        }
      }
      blocks.push_back(std::move(b));
    }
  }
  return CausalOperator(dl, p, k, std::move(blocks));
}

Eigen::Index ProcessSpec::effective_horizon() const {
  return causalcov::effective_horizon(horizon, k);
}

CausalOperator ProcessSpec::build_operator() const {
  if (const auto* sys = std::get_if<VarSystem>(&source)) return var_to_operator(*sys, horizon, k);
  const auto& op = std::get<CausalOperator>(source);
  if (op.k() == k && op.horizon() == effective_horizon()) return op;
  // Re-block: any prefix of a causal operator is the operator of the prefix.
  const Eigen::Index t_eff = effective_horizon();
  if (t_eff > op.horizon() || t_eff < 1) {
    fail(ErrorKind::HorizonTooShort, "requested horizon exceeds the operator horizon");
  }
  const Matrix full = assemble(op).topLeftCorner(op.d() * t_eff, op.p() * t_eff);
  return CausalOperator::from_dense(full, op.d(), op.p(), k);
}

Matrix draw_noise(Eigen::Index p, Eigen::Index horizon, std::uint64_t seed,
                  std::uint64_t replicate) {
  SplitMix64 rng(replicate_seed(seed, replicate));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(p, horizon);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    for (Eigen::Index i = 0; i < p; ++i) w(i, t) = normal(rng);
  }
  return w;
}

Matrix apply_operator(const CausalOperator& op, const Matrix& noise) {
  const Vector w = Eigen::Map<const Vector>(noise.data(), noise.size());
  const Vector x = op.apply(w);
  return Eigen::Map<const Matrix>(x.data(), op.d(), op.horizon());
}

PathBatch sample(const CausalOperator& op, std::size_t replicates, std::uint64_t seed,
                 unsigned workers) {
  if (replicates < 1) fail(ErrorKind::InvalidInput, "replicate count must be at least 1");
  PathBatch batch;
  batch.replicates = replicates;
  batch.horizon = op.horizon();
  batch.seed = seed;
  batch.states.resize(replicates);
  batch.noise.resize(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    batch.noise[r] = draw_noise(op.p(), op.horizon(), seed, r);
    batch.states[r] = apply_operator(op, batch.noise[r]);
  });
  return batch;
}

PathBatch sample(const ProcessSpec& spec, std::size_t replicates, std::uint64_t seed,
                 unsigned workers) {
  return sample(spec.build_operator(), replicates, seed, workers);
}

Matrix var_state_path(const VarSystem& sys, const Matrix& noise) {
  if (noise.rows() != sys.noise_dim()) fail(ErrorKind::InvalidInput, "noise has wrong dimension");
  const Matrix a = companion(sys);
  const Matrix b = sys.lifted_noise();
  Matrix x(sys.lifted_dim(), noise.cols());
  for (Eigen::Index t = 0; t < noise.cols(); ++t) {
    if (t == 0) {
      x.col(0).noalias() = b * noise.col(0);
    } else {
      x.col(t).noalias() = a * x.col(t - 1);
      x.col(t).noalias() += b * noise.col(t);
    }
  }
  return x;
}

SymMatrix per_time_covariance(const CausalOperator& op, Eigen::Index t) {
  if (t < 0 || t >= op.horizon()) {
    fail(ErrorKind::InvalidInput, "time " + std::to_string(t) + " outside [0, " +
                                      std::to_string(op.horizon()) + ")");
  }
  const Eigen::Index i = t / op.k();
  const Eigen::Index local = t % op.k();
  Matrix acc = Matrix::Zero(op.d(), op.d());
  for (Eigen::Index j = 0; j <= i; ++j) {
    const auto rows = op.block(i, j).middleRows(local * op.d(), op.d());
    acc.noalias() += rows * rows.transpose();
  }
  return SymMatrix(acc);
}

SymMatrix covariance_sum(const CausalOperator& op) {
  Matrix acc = Matrix::Zero(op.d(), op.d());
  for (Eigen::Index t = 0; t < op.horizon(); ++t) acc += per_time_covariance(op, t).matrix();
  return SymMatrix(acc);
}

SymMatrix decoupled_covariance(const CausalOperator& op) {
  Matrix acc = Matrix::Zero(op.d(), op.d());
  for (Eigen::Index j = 0; j < op.block_count(); ++j) {
    const Matrix& b = op.diag_block(j);
    for (Eigen::Index t = 0; t < op.k(); ++t) {
      const auto rows = b.middleRows(t * op.d(), op.d());
      acc.noalias() += rows * rows.transpose();
    }
  }
  return SymMatrix(acc);
}

double decoupled_covariance_sum(const CausalOperator& op, const SymMatrix& weight) {
  if (weight.dim() != op.d()) fail(ErrorKind::InvalidInput, "weight must be d x d");
  if (!psd_check(weight, 1e-10)) fail(ErrorKind::InvalidInput, "weight is not positive semidefinite");
  double total = 0.0;
  for (Eigen::Index j = 0; j < op.block_count(); ++j) total += op.diag_gram(j, weight).trace();
  return total;
}

std::vector<SymMatrix> var_state_covariances(const VarSystem& sys, Eigen::Index count) {
  const Matrix a = companion(sys);
  const Matrix b = sys.lifted_noise();
  const Matrix bbt = b * b.transpose();
  std::vector<SymMatrix> out;
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(count, 0)));
  Matrix p = bbt;
  for (Eigen::Index t = 0; t < count; ++t) {
    out.emplace_back(p);
    p = a * out.back().matrix() * a.transpose() + bbt;
  }
  return out;
}

SymMatrix empirical_covariance(const Matrix& path) {
  if (path.cols() == 0) fail(ErrorKind::InvalidInput, "empty path");
  return SymMatrix(path * path.transpose() / static_cast<double>(path.cols()));
}

SymMatrix empirical_covariance(const PathBatch& batch, std::size_t replicate) {
  if (replicate >= batch.replicates) fail(ErrorKind::InvalidInput, "replicate index out of range");
  return empirical_covariance(batch.states[replicate]);
}

SymMatrix gamma_k(const VarSystem& sys, Eigen::Index k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "window k must be positive");
  Matrix acc = Matrix::Zero(sys.lifted_dim(), sys.lifted_dim());
  for (const auto& c : var_state_covariances(sys, k)) acc += c.matrix();
  return SymMatrix(acc / static_cast<double>(k));
}

std::optional<Eigen::Index> kappa(const VarSystem& sys, Eigen::Index k_max, double tol) {
  if (k_max < 1) fail(ErrorKind::InvalidInput, "k_max must be positive");
  const auto covs = var_state_covariances(sys, k_max);
  Matrix acc = Matrix::Zero(sys.lifted_dim(), sys.lifted_dim());
  for (Eigen::Index k = 1; k <= k_max; ++k) {
    acc += covs[static_cast<std::size_t>(k - 1)].matrix();
    const auto [lo, hi] = sym_eig_extremes(SymMatrix(acc));
    if (hi > 0.0 && lo > tol * hi) return k;
  }
  return std::nullopt;
}

}  // namespace causalcov
