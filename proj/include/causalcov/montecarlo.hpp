#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causalcov/bounds.hpp"
#include "causalcov/process.hpp"

namespace causalcov {

enum class EventKind {
  LowerTailEigenvalue,  // lambda_min(Sigma_hat) <= anticoncentration threshold
  ChernoffDirection,    // sum_t X_t^T D X_t <= (1/2) sum_t E X~_t^T D X~_t
  UpperTailOpnorm,      // ||sum X_t X_t^T|| >= 2 q ||sum E X_t X_t^T||
  LsErrorExceedsBound,  // ||A_hat - A_*|| > least-squares error bound
  MgfEstimate,          // sample mean of exp(-lambda sum_t X_t^T D X_t)
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view name);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// Two-sided normal quantile for 99.9% coverage.
inline constexpr double kWilsonZ999 = 3.2905267314919255;

ConfidenceInterval wilson_interval(std::size_t hits, std::size_t trials, double z = kWilsonZ999);

struct TailExperiment {
  EventKind event = EventKind::ChernoffDirection;
  std::size_t replicates = 0;
  std::size_t hits = 0;
  double frequency = 0.0;  // hits / R, or the sample mean for MgfEstimate
  ConfidenceInterval ci;   // Wilson 99.9%, or mean +- 5 standard errors for MgfEstimate
  double bound = 0.0;
  std::optional<double> exact;
  std::optional<double> std_error;
  bool vacuous = false;
  bool certified = false;  // bound >= 1, or the upper CI edge is <= bound
  bool refuted = false;    // lower CI edge, or the exact value, lies above the bound
  std::vector<std::string> flags;
  std::map<std::string, double> details;
};

// Tail rule: certified iff vacuous or ci.hi <= bound.
bool certify(const ConfidenceInterval& ci, double bound);

struct EventParams {
  std::optional<SymMatrix> weight;  // D for ChernoffDirection / MgfEstimate; identity if unset
  double q = 2.0;
  double lambda = 0.0;
  double delta = 0.1;
  // Multiplies the attached bound. Only for negative controls.
  double bound_scale = 1.0;
};

TailExperiment run_tail_experiment(const ProcessSpec& spec, EventKind event,
                                   const EventParams& params, std::size_t replicates,
                                   std::uint64_t seed, unsigned workers);

// Monte-Carlo estimate of E exp(-lambda [x; W]^T Q [x; W]) against exact_mgf
// and mgf_upper_bound (the attached bound).
TailExperiment run_mgf_experiment(const SymMatrix& q, const Vector& x, double lambda,
                                  std::size_t replicates, std::uint64_t seed, unsigned workers);

struct IdentificationExperiment {
  TailExperiment summary;  // event: op_error > error_bound; bound attached is 2 delta
  std::vector<double> op_errors;
  std::optional<double> error_bound;
  bool burnin_satisfied = false;
  Eigen::Index horizon = 0;  // T'
};

IdentificationExperiment run_identification_experiment(const VarSystem& sys,
                                                       Eigen::Index horizon, Eigen::Index k,
                                                       double delta, std::size_t replicates,
                                                       std::uint64_t seed, unsigned workers);

}  // namespace causalcov
