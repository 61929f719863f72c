// Acceptance suite: one PASS/FAIL line per criterion, informational lines
// indented below it. Exit status is nonzero when any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "causalcov/bounds.hpp"
#include "causalcov/cli.hpp"
#include "causalcov/montecarlo.hpp"
#include "causalcov/parallel.hpp"

using namespace causalcov;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> info;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

unsigned workers() { return default_worker_count(); }

ProcessSpec iid_spec(Eigen::Index d, Eigen::Index horizon) {
  return ProcessSpec{iid_operator(d, horizon, 1), horizon, 1};
}

// 1. Exact MGF against the stated closed-form bound, plus Monte Carlo.
Outcome mgf_domination() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::vector<double> lambdas;
  for (int i = 0; i <= 40; ++i) lambdas.push_back(0.05 * i);

  std::size_t checks = 0;
  std::size_t violations = 0;
  std::size_t conservative_violations = 0;
  double worst_ratio = 0.0;
  std::size_t mc_outside = 0;
  double worst_z = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index rank = 1 + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n + m));
    const SymMatrix q = oracle::random_psd(rng, n + m, rank);
    const SymMatrix q22(q.matrix().bottomRightCorner(m, m));
    const Vector x = Vector::Zero(n);
    for (double lambda : lambdas) {
      const double exact = exact_mgf(q, x, lambda);
      const double stated = mgf_upper_bound(q22, lambda);
      ++checks;
      if (exact > stated) {
        ++violations;
        worst_ratio = std::max(worst_ratio, exact / stated);
      }
      if (exact > mgf_upper_bound_conservative(q22, lambda)) ++conservative_violations;
    }
    // One grid value per Q for the Monte-Carlo check, cycling through the grid.
    const double lambda = lambdas[static_cast<std::size_t>(trial) % lambdas.size()];
    const TailExperiment e = run_mgf_experiment(q, x, lambda, 100000, 5000 + trial, workers());
    const double se = *e.std_error;
    const double gap = std::abs(e.frequency - *e.exact);
    if (gap > 5.0 * se) ++mc_outside;
    if (se > 0.0) worst_z = std::max(worst_z, gap / se);
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.pass = violations == 0 && mc_outside == 0 && secs <= 120.0;
  o.summary = fmt("stated-bound violations %zu/%zu (max exact/bound %.6f); MC outside 5 SE %zu/1000 (max |z| %.2f); %.1fs",
                  violations, checks, worst_ratio, mc_outside, worst_z, secs);
  o.info.push_back(fmt("conservative form exp(-l tr Q22 + l^2 tr Q22^2): %zu/%zu violations", conservative_violations,
                       checks));
  return o;
}

// 2. Chernoff direction bound on the iid scalar chi-square.
Outcome chernoff_certification() {
  const auto start = Clock::now();
  bool dominated = true;
  bool certified = true;
  Outcome o;
  for (Eigen::Index t : {8, 16, 32, 64, 128}) {
    const double truth = oracle::chi_square_cdf_even(static_cast<double>(t) / 2.0, static_cast<int>(t));
    const TailExperiment e =
        run_tail_experiment(iid_spec(1, t), EventKind::ChernoffDirection, {}, 100000, 2000 + t, workers());
    const double conservative = e.details.at("conservative_bound");
    dominated = dominated && e.bound >= truth;
    certified = certified && e.certified;
    o.info.push_back(fmt("T=%3ld bound %.6g oracle %.6g freq %.6g ci [%.6g, %.6g] %s%s; conservative %.6g %s",
                         static_cast<long>(t), e.bound, truth, e.frequency, e.ci.lo, e.ci.hi,
                         e.certified ? "certified" : "not certified", e.bound >= truth ? "" : " (bound < oracle)",
                         conservative, conservative >= truth ? "dominates" : "below oracle"));
  }
  const double secs = seconds_since(start);
  o.pass = dominated && certified && secs <= 60.0;
  o.summary = fmt("bound >= oracle at every T: %s; Wilson certification at every T: %s; %.1fs",
                  dominated ? "yes" : "no", certified ? "yes" : "no", secs);
  return o;
}

// 3. Anticoncentration bound at the smallest horizon where it drops below 1/2.
Outcome anticoncentration_certification() {
  const auto start = Clock::now();
  struct Case {
    std::string name;
    std::function<ProcessSpec(Eigen::Index)> spec;
  };
  auto var2 = [](double rho) {
    Matrix a(2, 2);
    a << rho, 0.2, 0.0, 0.5 * rho;
    return VarSystem({a}, Matrix::Identity(2, 2));
  };
  const VarSystem v05 = var2(0.5);
  const VarSystem v09 = var2(0.9);
  const VarSystem walk({Matrix::Constant(1, 1, 1.0)}, Matrix::Identity(1, 1));
  const std::vector<Case> cases = {
      {"iid d=1", [](Eigen::Index t) { return iid_spec(1, t); }},
      {"iid d=2", [](Eigen::Index t) { return iid_spec(2, t); }},
      {"VAR(1) d=2 rho=0.5", [&](Eigen::Index t) { return ProcessSpec{v05, t, 1}; }},
      {"VAR(1) d=2 rho=0.9", [&](Eigen::Index t) { return ProcessSpec{v09, t, 1}; }},
      {"scalar A=1", [&](Eigen::Index t) { return ProcessSpec{walk, t, 1}; }},
  };
  Outcome o;
  bool all = true;
  for (const Case& c : cases) {
    auto bound_at = [&](Eigen::Index t) {
      return anticoncentration_bound(c.spec(t).build_operator()).anticonc_probability;
    };
    // Doubling, bisection, then step down while the bound stays below 1/2.
    Eigen::Index hi = 2;
    while (bound_at(hi) >= 0.5) hi *= 2;
    Eigen::Index lo = hi / 2;
    while (hi - lo > 1) {
      const Eigen::Index mid = (lo + hi) / 2;
      (bound_at(mid) < 0.5 ? hi : lo) = mid;
    }
    while (hi > 2 && bound_at(hi - 1) < 0.5) --hi;
    const TailExperiment e =
        run_tail_experiment(c.spec(hi), EventKind::LowerTailEigenvalue, {}, 10000, 3000 + hi, workers());
    const bool ok = e.certified && !e.vacuous;
    all = all && ok;
    o.info.push_back(fmt("%s: T=%ld bound %.4f threshold %.4g freq %.4g ci [%.4g, %.4g] %s", c.name.c_str(),
                         static_cast<long>(hi), e.bound, e.details.at("threshold"), e.frequency, e.ci.lo, e.ci.hi,
                         ok ? "certified" : "not certified"));
  }
  const double secs = seconds_since(start);
  o.pass = all && secs <= 600.0;
  o.summary = fmt("5 systems certified: %s; %.1fs", all ? "yes" : "no", secs);
  return o;
}

// 4. Causal exponential inequality against Monte Carlo on random operators.
Outcome exp_inequality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1004);
  std::size_t violations = 0;
  std::size_t conservative_violations = 0;
  double worst_z = -1e300;
  std::size_t exact_above = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 3);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 2);
    const Eigen::Index blocks = 2 + static_cast<Eigen::Index>(rng() % 3);
    const CausalOperator op = oracle::random_operator(rng, d, d, k, blocks);
    const Matrix delta = oracle::gaussian_matrix(rng, d, d);
    const double lambda = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    EventParams params;
    params.weight = SymMatrix(delta.transpose() * delta);
    params.lambda = lambda;
    const TailExperiment e = run_tail_experiment(ProcessSpec{op, op.horizon(), k}, EventKind::MgfEstimate, params,
                                                 10000, 4000 + trial, workers());
    const double se = *e.std_error;
    if (e.frequency > e.bound + 5.0 * se) ++violations;
    if (e.frequency > e.details.at("conservative_bound") + 5.0 * se) ++conservative_violations;
    if (se > 0.0) worst_z = std::max(worst_z, (e.frequency - e.bound) / se);
    // Exact value det(I + 2 lambda L^T blkdiag(D) L)^{-1/2}.
    const Matrix l = assemble(op);
    Matrix blk = Matrix::Zero(l.rows(), l.rows());
    for (Eigen::Index t = 0; t < op.horizon(); ++t) blk.block(t * d, t * d, d, d) = params.weight->matrix();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(l.transpose() * blk * l);
    double log_exact = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
      log_exact -= 0.5 * std::log1p(2.0 * lambda * std::max(0.0, eig.eigenvalues()(i)));
    if (std::exp(log_exact) > e.bound) ++exact_above;
  }
  Outcome o;
  o.pass = violations == 0;
  o.summary = fmt("violations of bound + 5 SE: %zu/50 (max (mean - bound)/SE %.2f); %.1fs", violations, worst_z,
                  seconds_since(start));
  o.info.push_back(fmt("exact value (determinant formula) above the bound: %zu/50", exact_above));
  o.info.push_back(fmt("conservative form exp(-l S1 + l^2 S2): %zu/50 violations", conservative_violations));
  return o;
}

// 5. psi_k: iid value, identical-block floor, sphere grid.
Outcome psi_correctness() {
  std::mt19937_64 rng(1005);
  const double iid = psi_k(iid_operator(1, 64, 1)).value;
  const bool iid_ok = std::abs(iid - 1.0) <= 1e-8;

  bool floor_ok = true;
  for (Eigen::Index k : {1, 2, 4, 8}) {
    for (int trial = 0; trial < 5; ++trial) {
      const VarSystem sys = oracle::random_var(rng, 2, 1, 2, 0.95);
      const CausalOperator op = var_to_operator(sys, 64, k);
      floor_ok = floor_ok && op.diagonal_blocks_identical() && psi_k(op).value >= 1.0 / static_cast<double>(k);
    }
  }

  double worst_grid = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const CausalOperator op = oracle::random_operator(rng, 2, 1 + trial % 3, 1 + trial % 2, 3);
    worst_grid = std::max(worst_grid, std::abs(psi_k(op).value - oracle::psi_grid_2d(op, 10000)));
  }
  Outcome o;
  o.pass = iid_ok && floor_ok && worst_grid <= 1e-4;
  o.summary = fmt("iid |psi - 1| %.2e; identical blocks >= 1/k: %s; max |psi - grid| over 20 operators %.2e",
                  std::abs(iid - 1.0), floor_ok ? "yes" : "no", worst_grid);
  return o;
}

std::vector<VarSystem> random_systems(std::vector<Eigen::Index>& horizons) {
  std::mt19937_64 rng(1006);
  std::vector<VarSystem> out;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 3);
    const Eigen::Index lags = 1 + static_cast<Eigen::Index>(rng() % 3);
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng() % 3);
    const double radius = std::uniform_real_distribution<double>(0.1, 0.99)(rng);
    out.push_back(oracle::random_var(rng, d, lags, p, radius));
    horizons.push_back(2 + static_cast<Eigen::Index>(rng() % 255));
  }
  return out;
}

// 6. Operator and state recursion trajectories.
Outcome operator_recursion() {
  std::vector<Eigen::Index> horizons;
  const std::vector<VarSystem> systems = random_systems(horizons);
  double worst = 0.0;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const CausalOperator op = var_to_operator(systems[i], horizons[i], 1);
    const Matrix noise = draw_noise(systems[i].noise_dim(), horizons[i], 6000, i);
    const Matrix rec = var_state_path(systems[i], noise);
    worst = std::max(worst, (apply_operator(op, noise) - rec).norm() / rec.norm());
  }
  Outcome o;
  o.pass = worst <= 1e-10;
  o.summary = fmt("max relative difference over 100 systems %.2e", worst);
  return o;
}

// 7. Stability bound against the exact lambda_max of the covariance sum.
Outcome armastability() {
  std::vector<Eigen::Index> horizons;
  const std::vector<VarSystem> systems = random_systems(horizons);
  std::size_t violations = 0;
  double tightest = 1e300;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    double exact = 0.0;
    SymMatrix sum = SymMatrix::zero(systems[i].lifted_dim());
    for (const SymMatrix& p : var_state_covariances(systems[i], horizons[i])) sum = SymMatrix(sum.matrix() + p.matrix());
    exact = sym_eig_extremes(sum).lambda_max;
    const double bound = armastability_bound(systems[i], horizons[i]);
    if (bound < exact) ++violations;
    tightest = std::min(tightest, bound / exact);
  }
  Outcome o;
  o.pass = violations == 0;
  o.summary = fmt("violations %zu/100; min bound/exact %.4f", violations, tightest);
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 8. Least-squares identification end to end.
Outcome identification() {
  const auto start = Clock::now();
  Matrix a1(2, 2);
  Matrix a2(2, 2);
  a1 << 0.5, 0.1, 0.0, 0.3;
  a2 << 0.1, 0.0, 0.05, 0.1;
  const std::vector<std::pair<std::string, VarSystem>> systems = {
      {"scalar A=0.5", VarSystem({Matrix::Constant(1, 1, 0.5)}, Matrix::Identity(1, 1))},
      {"d=2 L=2", VarSystem({a1, a2}, Matrix::Identity(2, 2))},
  };
  Outcome o;
  bool all = true;
  for (const auto& [name, sys] : systems) {
    const Eigen::Index k = *kappa(sys, 16);
    const auto id = run_identification_experiment(sys, 2048, k, 0.1, 1000, 7000, workers());
    const bool cert = id.burnin_satisfied && id.summary.certified;
    const double m256 = median(run_identification_experiment(sys, 256, k, 0.1, 1000, 7100, workers()).op_errors);
    const double m4096 = median(run_identification_experiment(sys, 4096, k, 0.1, 1000, 7200, workers()).op_errors);
    const bool shrink = m256 >= 3.0 * m4096;
    all = all && cert && shrink;
    o.info.push_back(fmt("%s: T=2048 k=%ld burn-in %s bound %.4g exceedance %.4g ci [%.4g, %.4g] %s; median %.4g -> %.4g (x%.2f)",
                         name.c_str(), static_cast<long>(k), id.burnin_satisfied ? "ok" : "unsatisfied",
                         id.error_bound.value_or(NAN), id.summary.frequency, id.summary.ci.lo, id.summary.ci.hi,
                         cert ? "certified" : "not certified", m256, m4096, m256 / m4096));
  }
  const double secs = seconds_since(start);
  o.pass = all && secs <= 900.0;
  o.summary = fmt("exceedance <= 2 delta certified and median shrink >= 3x for both systems: %s; %.1fs",
                  all ? "yes" : "no", secs);
  return o;
}

// 9. Upper tail at q with bound 0.01.
Outcome upper_tail() {
  const Eigen::Index t = 64;
  // 5 exp(-(q - 1) T / 8) = 0.01 for the iid scalar.
  const double q = 1.0 + 8.0 * std::log(500.0) / static_cast<double>(t);
  EventParams params;
  params.q = q;
  const TailExperiment e = run_tail_experiment(iid_spec(1, t), EventKind::UpperTailOpnorm, params, 100000, 9000, workers());
  Outcome o;
  o.pass = std::abs(e.bound - 0.01) <= 1e-12 && e.certified;
  o.summary = fmt("T=%ld q=%.6f bound %.6g freq %.3g ci [%.3g, %.3g] %s", static_cast<long>(t), q, e.bound, e.frequency,
                  e.ci.lo, e.ci.hi, e.certified ? "certified" : "not certified");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 10. verify twice under different thread caps.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("causalcov_accept_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  cli::ExperimentConfig c;
  c.system.type = "var";
  Matrix a(2, 2);
  a << 0.6, 0.2, 0.0, 0.4;
  c.system.lags = {a};
  c.system.noise = Matrix::Identity(2, 2);
  c.horizon = 16;
  c.k = std::nullopt;
  c.replicates = 5000;
  c.seed = 10;
  c.events = {cli::EventConfig{EventKind::ChernoffDirection}, cli::EventConfig{EventKind::LowerTailEigenvalue},
              cli::EventConfig{EventKind::UpperTailOpnorm}};
  std::ofstream(dir / "config.json") << cli::to_json(c).dump(2);

  auto run = [&](const std::string& threads, const std::string& out) {
    const std::string cmd = "CAUSALCOV_THREADS=" + threads + " " + CAUSALCOV_CLI_PATH + " verify --config " +
                            (dir / "config.json").string() + " --out " + (dir / out).string() + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const int c1 = run("1", "t1");
  const int c4 = run("4", "t4");
  const std::string csv1 = slurp(dir / "t1" / "verify.csv");
  const std::string json1 = slurp(dir / "t1" / "verify.json");
  const bool same_csv = !csv1.empty() && csv1 == slurp(dir / "t4" / "verify.csv");
  const bool same_json = !json1.empty() && json1 == slurp(dir / "t4" / "verify.json");
  fs::remove_all(dir);
  Outcome o;
  o.pass = c1 == 0 && c4 == 0 && same_csv && same_json;
  o.summary = fmt("exit codes %d/%d; CSV identical: %s; JSON identical: %s", c1, c4, same_csv ? "yes" : "no",
                  same_json ? "yes" : "no");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, mgf_domination},   {2, chernoff_certification}, {3, anticoncentration_certification},
      {4, exp_inequality},   {5, psi_correctness},        {6, operator_recursion},
      {7, armastability},    {8, identification},         {9, upper_tail},
      {10, determinism},
  };
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary << "\n";
    for (const auto& line : o.info) std::cout << "    " << line << "\n";
    std::cout.flush();
  }
  std::cout << (10 - failures) << "/10 criteria passed\n";
  return failures == 0 ? 0 : 1;
}
