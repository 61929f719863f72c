#include "causalcov/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "causalcov/estimator.hpp"
#include "causalcov/parallel.hpp"

namespace causalcov {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::LowerTailEigenvalue: return "lower-tail-eigenvalue";
    case EventKind::ChernoffDirection: return "chernoff-direction";
    case EventKind::UpperTailOpnorm: return "upper-tail-opnorm";
    case EventKind::LsErrorExceedsBound: return "ls-error-exceeds-bound";
    case EventKind::MgfEstimate: return "mgf-estimate";
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (EventKind kind : {EventKind::LowerTailEigenvalue, EventKind::ChernoffDirection,
                         EventKind::UpperTailOpnorm, EventKind::LsErrorExceedsBound,
                         EventKind::MgfEstimate}) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorKind::InvalidInput, "unknown event kind '" + std::string(name) + "'");
}

ConfidenceInterval wilson_interval(std::size_t hits, std::size_t trials, double z) {
  if (trials == 0) fail(ErrorKind::InvalidInput, "Wilson interval needs at least one trial");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  ConfidenceInterval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (hits == 0) ci.lo = 0.0;
  if (hits == trials) ci.hi = 1.0;
  ci.lo = std::min(ci.lo, p);
  ci.hi = std::max(ci.hi, p);
  return ci;
}

bool certify(const ConfidenceInterval& ci, double bound) { return bound >= 1.0 || ci.hi <= bound; }

namespace {

// Dense causal sampler: block row i only touches the first (i + 1) noise blocks.
class DenseSampler {
 public:
  explicit DenseSampler(const CausalOperator& op)
      : op_(op), full_(assemble(op)) {}

  // d x T' trajectory for replicate r.
  Matrix draw(std::uint64_t seed, std::uint64_t replicate) const {
    const Matrix w = draw_noise(op_.p(), op_.horizon(), seed, replicate);
    const Eigen::Map<const Vector> wv(w.data(), w.size());
    const Eigen::Index rb = op_.d() * op_.k();
    const Eigen::Index cb = op_.p() * op_.k();
    Matrix x(op_.d(), op_.horizon());
    Eigen::Map<Vector> xv(x.data(), x.size());
    for (Eigen::Index i = 0; i < op_.block_count(); ++i) {
      xv.segment(i * rb, rb).noalias() =
          full_.block(i * rb, 0, rb, (i + 1) * cb) * wv.head((i + 1) * cb);
    }
    return x;
  }

 private:
  const CausalOperator& op_;
  Matrix full_;
};

void finish_tail(TailExperiment& e, double raw_bound, double bound_scale) {
  e.frequency = static_cast<double>(e.hits) / static_cast<double>(e.replicates);
  e.ci = wilson_interval(e.hits, e.replicates);
  e.bound = raw_bound * bound_scale;
  if (bound_scale != 1.0) e.details["bound_scale"] = bound_scale;
  e.vacuous = e.bound >= 1.0;
  if (e.vacuous) e.flags.emplace_back("vacuous");
  e.certified = certify(e.ci, e.bound);
  e.refuted = e.ci.lo > e.bound || (e.exact && *e.exact > e.bound * (1.0 + 1e-12));
}

void finish_mean(TailExperiment& e, const std::vector<double>& values, double bound) {
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  e.frequency = mean;
  e.std_error = se;
  e.ci = {mean - 5.0 * se, mean + 5.0 * se};
  e.bound = bound;
  e.vacuous = bound >= 1.0;
  if (e.vacuous) e.flags.emplace_back("vacuous");
  e.certified = e.vacuous || e.ci.lo <= bound;
  e.refuted = !e.certified || (e.exact && *e.exact > bound * (1.0 + 1e-12));
}

// sum_t X_t^T D X_t for a d x T' trajectory.
double weighted_energy(const Matrix& x, const SymMatrix& weight) {
  return (x.transpose() * weight.matrix()).cwiseProduct(x.transpose()).sum();
}

}  // namespace

TailExperiment run_tail_experiment(const ProcessSpec& spec, EventKind event,
                                   const EventParams& params, std::size_t replicates,
                                   std::uint64_t seed, unsigned workers) {
  if (replicates < 100) fail(ErrorKind::InvalidInput, "tail experiments need R >= 100");

  if (event == EventKind::LsErrorExceedsBound) {
    const auto* sys = std::get_if<VarSystem>(&spec.source);
    if (!sys) fail(ErrorKind::InvalidInput, "ls-error-exceeds-bound needs a VAR system");
    return run_identification_experiment(*sys, spec.horizon, spec.k, params.delta, replicates,
                                         seed, workers)
        .summary;
  }

  const CausalOperator op = spec.build_operator();
  const SymMatrix weight = params.weight ? *params.weight : SymMatrix::identity(op.d());
  const DenseSampler sampler(op);
  TailExperiment e;
  e.event = event;
  e.replicates = replicates;
  e.details["horizon"] = static_cast<double>(op.horizon());
  e.details["k"] = static_cast<double>(op.k());

  switch (event) {
    case EventKind::LowerTailEigenvalue: {
      const BoundReport report = anticoncentration_bound(op);
      const double threshold = report.anticonc_threshold;
      std::vector<char> hit(replicates, 0);
      parallel_for(replicates, workers, [&](std::size_t r) {
        const SymMatrix cov = empirical_covariance(sampler.draw(seed, r));
        hit[r] = sym_eig_extremes(cov).lambda_min <= threshold ? 1 : 0;
      });
      e.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
      e.details["threshold"] = threshold;
      e.details["psi_k"] = report.psi_k;
      finish_tail(e, report.anticonc_probability, params.bound_scale);
      return e;
    }
    case EventKind::ChernoffDirection: {
      const DecoupledMoments s = decoupled_moments(op, weight);
      const double threshold = 0.5 * s.first;
      std::vector<char> hit(replicates, 0);
      parallel_for(replicates, workers, [&](std::size_t r) {
        hit[r] = weighted_energy(sampler.draw(seed, r), weight) <= threshold ? 1 : 0;
      });
      e.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
      e.exact = exact_quadratic_form_cdf(op, weight, threshold);
      e.details["threshold"] = threshold;
      e.details["conservative_bound"] = chernoff_lower_tail_conservative(op, weight);
      finish_tail(e, chernoff_lower_tail(op, weight), params.bound_scale);
      return e;
    }
    case EventKind::UpperTailOpnorm: {
      const double threshold = 2.0 * params.q * sym_eig_extremes(covariance_sum(op)).lambda_max;
      std::vector<char> hit(replicates, 0);
      parallel_for(replicates, workers, [&](std::size_t r) {
        const Matrix x = sampler.draw(seed, r);
        hit[r] = sym_eig_extremes(SymMatrix(x * x.transpose())).lambda_max >= threshold ? 1 : 0;
      });
      e.hits = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
      e.details["threshold"] = threshold;
      e.details["q"] = params.q;
      finish_tail(e, upper_tail_bound(op, params.q), params.bound_scale);
      return e;
    }
    case EventKind::MgfEstimate: {
      std::vector<double> values(replicates, 0.0);
      parallel_for(replicates, workers, [&](std::size_t r) {
        values[r] = std::exp(-params.lambda * weighted_energy(sampler.draw(seed, r), weight));
      });
      if (op.p() * op.horizon() <= 2000) {
        const Matrix full = assemble(op);
        Matrix weighted(full.rows(), full.cols());
        for (Eigen::Index t = 0; t < op.horizon(); ++t) {
          weighted.middleRows(t * op.d(), op.d()) =
              weight.matrix() * full.middleRows(t * op.d(), op.d());
        }
        e.exact = exact_mgf(SymMatrix(full.transpose() * weighted), Vector(), params.lambda);
      }
      e.details["lambda"] = params.lambda;
      e.details["conservative_bound"] =
          causal_exp_inequality_conservative(op, weight, params.lambda);
      finish_mean(e, values, causal_exp_inequality(op, weight, params.lambda) * params.bound_scale);
      e.hits = 0;
      return e;
    }
    case EventKind::LsErrorExceedsBound:
      break;
  }
  fail(ErrorKind::InvalidInput, "unsupported event kind");
}

TailExperiment run_mgf_experiment(const SymMatrix& q, const Vector& x, double lambda,
                                  std::size_t replicates, std::uint64_t seed, unsigned workers) {
  if (replicates < 1000) fail(ErrorKind::InvalidInput, "MGF experiments need R >= 1000");
  const Eigen::Index n = x.size();
  const Eigen::Index m = q.dim() - n;
  if (m < 0) fail(ErrorKind::InvalidInput, "x is longer than Q");
  const SymMatrix q22(q.matrix().bottomRightCorner(m, m));

  TailExperiment e;
  e.event = EventKind::MgfEstimate;
  e.replicates = replicates;
  e.exact = exact_mgf(q, x, lambda);
  e.details["lambda"] = lambda;
  e.details["conservative_bound"] = mgf_upper_bound_conservative(q22, lambda);

  std::vector<double> values(replicates, 0.0);
  parallel_for(replicates, workers, [&](std::size_t r) {
    Vector z(q.dim());
    z.head(n) = x;
    if (m > 0) z.tail(m) = draw_noise(m, 1, seed, r).col(0);
    values[r] = std::exp(-lambda * z.dot(q.matrix() * z));
  });
  finish_mean(e, values, mgf_upper_bound(q22, lambda));
  return e;
}

IdentificationExperiment run_identification_experiment(const VarSystem& sys,
                                                       Eigen::Index horizon, Eigen::Index k,
                                                       double delta, std::size_t replicates,
                                                       std::uint64_t seed, unsigned workers) {
  if (replicates < 1) fail(ErrorKind::InvalidInput, "replicate count must be at least 1");
  IdentificationExperiment out;
  out.horizon = effective_horizon(horizon, k);
  if (out.horizon < k || out.horizon < 1) {
    fail(ErrorKind::HorizonTooShort, "T'=" + std::to_string(out.horizon) + " < k=" + std::to_string(k));
  }
  TailExperiment& e = out.summary;
  e.event = EventKind::LsErrorExceedsBound;
  e.replicates = replicates;
  e.details["horizon"] = static_cast<double>(out.horizon);
  e.details["k"] = static_cast<double>(k);
  e.details["delta"] = delta;

  try {
    out.burnin_satisfied = burnin_check(sys, horizon, k, delta);
    if (out.burnin_satisfied) {
      out.error_bound = ls_error_bound(sys, horizon, k, delta);
    } else {
      e.flags.emplace_back("burnin-unsatisfied");
    }
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::InsufficientExcitation) throw;
    e.flags.emplace_back("InsufficientExcitation");
  }

  const Matrix truth = sys.stacked_lags();
  const Eigen::Index d = sys.state_dim();
  out.op_errors.assign(replicates, 0.0);
  parallel_for(replicates, workers, [&](std::size_t r) {
    const Matrix noise = draw_noise(sys.noise_dim(), out.horizon + 1, seed, r);
    const Matrix path = var_state_path(sys, noise).topRows(d);
    LsFit fit = least_squares(var_regression_data(path, sys.lag_order()));
    attach_truth(fit, truth);
    out.op_errors[r] = *fit.op_error;
  });

  if (out.error_bound) {
    e.hits = static_cast<std::size_t>(std::count_if(
        out.op_errors.begin(), out.op_errors.end(), [&](double v) { return v > *out.error_bound; }));
    e.details["error_bound"] = *out.error_bound;
  }
  std::vector<double> sorted = out.op_errors;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  e.details["median_op_error"] =
      sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);

  e.frequency = static_cast<double>(e.hits) / static_cast<double>(replicates);
  e.ci = wilson_interval(e.hits, replicates);
  e.bound = 2.0 * delta;
  e.vacuous = e.bound >= 1.0;
  if (out.error_bound) {
    e.certified = certify(e.ci, e.bound);
    e.refuted = e.ci.lo > e.bound;
  } else {
    e.flags.emplace_back("uncertified-by-theorem");
  }
  return out;
}

}  // namespace causalcov
