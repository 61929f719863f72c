#include "causalcov/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "causalcov/bounds.hpp"
#include "causalcov/estimator.hpp"
#include "causalcov/parallel.hpp"

namespace causalcov::cli {

const char* const kVerifyCsvHeader =
    "event,T,T_eff,k,delta,replicates,seed,hits,frequency,ci_lo,ci_hi,bound,exact,certified,status,"
    "refuted,flags";
const char* const kSweepCsvHeader =
    "event,T,T_eff,k,delta,replicates,seed,hits,frequency,ci_lo,ci_hi,bound,exact,certified,status,"
    "refuted,flags,psi_k,anticonc_probability,anticonc_threshold,upper_tail_probability";
const char* const kIdentifyCsvHeader = "replicate,op_error,exceeds_bound";
const char* const kSimulateCsvHeader = "replicate,t,coord,value";

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_matrix(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_matrix(*a, *b);
}

}  // namespace

bool operator==(const SystemConfig& a, const SystemConfig& b) {
  if (a.type != b.type || a.dim != b.dim || a.d != b.d || a.p != b.p || a.file != b.file) return false;
  if (a.lags.size() != b.lags.size() || !same_matrix(a.noise, b.noise)) return false;
  for (std::size_t i = 0; i < a.lags.size(); ++i)
    if (!same_matrix(a.lags[i], b.lags[i])) return false;
  return same_matrix(a.matrix, b.matrix);
}

bool operator==(const EventConfig& a, const EventConfig& b) {
  return a.kind == b.kind && same_matrix(a.weight, b.weight) && a.q == b.q && a.lambda == b.lambda &&
         a.bound_scale == b.bound_scale;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Config serialization
// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorKind::InvalidInput, "config: " + what); }

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) schema_error(field + " must be a nonempty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) schema_error(field + " rows must be nonempty arrays");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) schema_error(field + " is not rectangular");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) schema_error(field + " entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) schema_error(where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) schema_error("unknown key '" + item.key() + "' in " + where);
  }
}

Eigen::Index index_from(const Json& j, const std::string& field, Eigen::Index min_value) {
  if (!j.is_number_integer()) schema_error(field + " must be an integer");
  const auto v = j.get<std::int64_t>();
  if (v < min_value) schema_error(field + " must be >= " + std::to_string(min_value));
  return static_cast<Eigen::Index>(v);
}

double real_from(const Json& j, const std::string& field) {
  if (!j.is_number()) schema_error(field + " must be a number");
  return j.get<double>();
}

Json k_json(const KSetting& k) { return k ? Json(static_cast<std::int64_t>(*k)) : Json("auto"); }

KSetting k_from(const Json& j, const std::string& field) {
  if (j.is_string()) {
    if (j.get<std::string>() != "auto") schema_error(field + " must be a positive integer or \"auto\"");
    return std::nullopt;
  }
  return index_from(j, field, 1);
}

Json system_json(const SystemConfig& s) {
  Json j = Json::object();
  j["type"] = s.type;
  if (s.type == "iid") {
    j["dim"] = static_cast<std::int64_t>(s.dim);
  } else if (s.type == "var") {
    Json lags = Json::array();
    for (const auto& a : s.lags) lags.push_back(matrix_json(a));
    j["lags"] = std::move(lags);
    j["noise"] = matrix_json(s.noise);
  } else {
    j["d"] = static_cast<std::int64_t>(s.d);
    j["p"] = static_cast<std::int64_t>(s.p);
    if (s.matrix) j["matrix"] = matrix_json(*s.matrix);
    if (s.file) j["file"] = *s.file;
  }
  return j;
}

SystemConfig system_from(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) schema_error("system.type is required");
  SystemConfig s;
  s.type = j["type"].get<std::string>();
  if (s.type == "iid") {
    check_keys(j, {"type", "dim"}, "system");
    if (j.contains("dim")) s.dim = index_from(j["dim"], "system.dim", 1);
  } else if (s.type == "var") {
    check_keys(j, {"type", "lags", "noise"}, "system");
    if (!j.contains("lags") || !j["lags"].is_array() || j["lags"].empty()) {
      schema_error("system.lags must be a nonempty list of matrices");
    }
    for (std::size_t i = 0; i < j["lags"].size(); ++i) {
      s.lags.push_back(matrix_from(j["lags"][i], "system.lags[" + std::to_string(i) + "]"));
    }
    if (!j.contains("noise")) schema_error("system.noise is required");
    s.noise = matrix_from(j["noise"], "system.noise");
    // Validates shapes.
    VarSystem check(s.lags, s.noise);
  } else if (s.type == "operator") {
    check_keys(j, {"type", "d", "p", "matrix", "file"}, "system");
    if (!j.contains("d") || !j.contains("p")) schema_error("system.d and system.p are required");
    s.d = index_from(j["d"], "system.d", 1);
    s.p = index_from(j["p"], "system.p", 1);
    if (j.contains("matrix")) s.matrix = matrix_from(j["matrix"], "system.matrix");
    if (j.contains("file")) {
      if (!j["file"].is_string()) schema_error("system.file must be a string");
      s.file = j["file"].get<std::string>();
    }
    if (s.matrix.has_value() == s.file.has_value()) schema_error("operator needs exactly one of matrix or file");
  } else {
    schema_error("unknown system type '" + s.type + "'");
  }
  return s;
}

Json event_json(const EventConfig& e) {
  Json j = Json::object();
  j["kind"] = std::string(to_string(e.kind));
  if (e.weight) j["weight"] = matrix_json(*e.weight);
  j["q"] = e.q;
  j["lambda"] = e.lambda;
  j["bound_scale"] = e.bound_scale;
  return j;
}

EventConfig event_from(const Json& j, std::size_t i) {
  const std::string where = "events[" + std::to_string(i) + "]";
  check_keys(j, {"kind", "weight", "q", "lambda", "bound_scale"}, where);
  if (!j.contains("kind") || !j["kind"].is_string()) schema_error(where + ".kind is required");
  EventConfig e;
  e.kind = parse_event_kind(j["kind"].get<std::string>());
  if (j.contains("weight")) e.weight = matrix_from(j["weight"], where + ".weight");
  if (j.contains("q")) e.q = real_from(j["q"], where + ".q");
  if (j.contains("lambda")) e.lambda = real_from(j["lambda"], where + ".lambda");
  if (j.contains("bound_scale")) e.bound_scale = real_from(j["bound_scale"], where + ".bound_scale");
  if (!(e.bound_scale > 0.0)) schema_error(where + ".bound_scale must be positive");
  return e;
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
  Json j = Json::object();
  j["system"] = system_json(c.system);
  j["T"] = static_cast<std::int64_t>(c.horizon);
  j["k"] = k_json(c.k);
  j["delta"] = c.delta;
  j["replicates"] = static_cast<std::uint64_t>(c.replicates);
  j["seed"] = c.seed;
  Json events = Json::array();
  for (const auto& e : c.events) events.push_back(event_json(e));
  j["events"] = std::move(events);
  Json grid = Json::object();
  if (!c.grid.horizon.empty()) {
    Json t = Json::array();
    for (auto v : c.grid.horizon) t.push_back(static_cast<std::int64_t>(v));
    grid["T"] = std::move(t);
  }
  if (!c.grid.k.empty()) {
    Json k = Json::array();
    for (const auto& v : c.grid.k) k.push_back(k_json(v));
    grid["k"] = std::move(k);
  }
  if (!c.grid.delta.empty()) grid["delta"] = c.grid.delta;
  j["grid"] = std::move(grid);
  j["output"] = Json{{"dir", c.output_dir}};
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  check_keys(j, {"system", "T", "k", "delta", "replicates", "seed", "events", "grid", "output"}, "config");
  ExperimentConfig c;
  if (!j.contains("system")) schema_error("system is required");
  c.system = system_from(j["system"]);
  if (!j.contains("T")) schema_error("T is required");
  c.horizon = index_from(j["T"], "T", 1);
  if (j.contains("k")) c.k = k_from(j["k"], "k");
  if (j.contains("delta")) c.delta = real_from(j["delta"], "delta");
  if (!(c.delta > 0.0 && c.delta < 1.0)) schema_error("delta must lie in (0, 1)");
  if (j.contains("replicates")) c.replicates = static_cast<std::size_t>(index_from(j["replicates"], "replicates", 1));
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
      schema_error("seed must be a nonnegative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("events")) {
    if (!j["events"].is_array()) schema_error("events must be a list");
    for (std::size_t i = 0; i < j["events"].size(); ++i) c.events.push_back(event_from(j["events"][i], i));
  }
  if (j.contains("grid")) {
    const Json& g = j["grid"];
    check_keys(g, {"T", "k", "delta"}, "grid");
    auto list = [&](const char* key) -> const Json& {
      if (!g[key].is_array() || g[key].empty()) schema_error(std::string("grid.") + key + " must be a nonempty list");
      return g[key];
    };
    if (g.contains("T"))
      for (const auto& v : list("T")) c.grid.horizon.push_back(index_from(v, "grid.T", 1));
    if (g.contains("k"))
      for (const auto& v : list("k")) c.grid.k.push_back(k_from(v, "grid.k"));
    if (g.contains("delta")) {
      for (const auto& v : list("delta")) {
        const double d = real_from(v, "grid.delta");
        if (!(d > 0.0 && d < 1.0)) schema_error("grid.delta entries must lie in (0, 1)");
        c.grid.delta.push_back(d);
      }
    }
  }
  if (j.contains("output")) {
    check_keys(j["output"], {"dir"}, "output");
    if (j["output"].contains("dir")) {
      if (!j["output"]["dir"].is_string()) schema_error("output.dir must be a string");
      c.output_dir = j["output"]["dir"].get<std::string>();
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::InvalidInput, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Process resolution
// ---------------------------------------------------------------------------

namespace {

struct OperatorSource {
  Matrix full;
  Eigen::Index d;
  Eigen::Index p;
};

OperatorSource operator_source(const SystemConfig& s, const std::filesystem::path& base_dir) {
  OperatorSource src{Matrix(), s.d, s.p};
  if (s.matrix) {
    src.full = *s.matrix;
  } else {
    const std::filesystem::path path = base_dir / *s.file;
    std::ifstream in(path);
    if (!in) fail(ErrorKind::InvalidInput, "cannot open operator file " + path.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::InvalidInput, "operator file is not valid JSON: " + std::string(e.what()));
    }
    check_keys(j, {"d", "p", "matrix"}, "operator file");
    if (j.contains("d") && index_from(j["d"], "d", 1) != s.d) schema_error("operator file d disagrees with config");
    if (j.contains("p") && index_from(j["p"], "p", 1) != s.p) schema_error("operator file p disagrees with config");
    if (!j.contains("matrix")) schema_error("operator file needs a matrix");
    src.full = matrix_from(j["matrix"], "operator file matrix");
  }
  if (src.full.rows() % src.d != 0 || src.full.cols() % src.p != 0 ||
      src.full.rows() / src.d != src.full.cols() / src.p) {
    schema_error("operator matrix must be (d T) x (p T)");
  }
  return src;
}

}  // namespace

ResolvedProcess resolve_process(const ExperimentConfig& config, Eigen::Index horizon, KSetting k,
                                const std::filesystem::path& base_dir) {
  std::optional<ProcessSpec> spec;
  std::optional<Eigen::Index> kappa_value;
  const SystemConfig& s = config.system;
  const Eigen::Index k_limit = std::max<Eigen::Index>(1, horizon / 2);

  if (s.type == "var") {
    const VarSystem sys(s.lags, s.noise);
    kappa_value = kappa(sys, k_limit);
    Eigen::Index chosen = 0;
    if (k) {
      chosen = *k;
    } else {
      if (!kappa_value) {
        fail(ErrorKind::InsufficientExcitation, "auto-k: kappa is not reachable with floor(T/k) >= 2");
      }
      chosen = *kappa_value;
    }
    if (effective_horizon(horizon, chosen) < chosen) {
      fail(ErrorKind::HorizonTooShort, "T=" + std::to_string(horizon) + " < k=" + std::to_string(chosen));
    }
    spec = ProcessSpec{sys, horizon, chosen};
  } else if (s.type == "iid") {
    kappa_value = 1;
    const Eigen::Index chosen = k ? *k : 1;
    if (!k && horizon < 2) fail(ErrorKind::HorizonTooShort, "auto-k needs T >= 2");
    const Eigen::Index t_eff = effective_horizon(horizon, chosen);
    if (t_eff < chosen || t_eff < 1) {
      fail(ErrorKind::HorizonTooShort, "T'=" + std::to_string(t_eff) + " < k=" + std::to_string(chosen));
    }
    spec = ProcessSpec{iid_operator(s.dim, t_eff, chosen), horizon, chosen};
  } else {
    const OperatorSource src = operator_source(s, base_dir);
    if (horizon > src.full.rows() / src.d) {
      fail(ErrorKind::InvalidInput, "T exceeds the operator horizon " + std::to_string(src.full.rows() / src.d));
    }
    const Matrix prefix = src.full.topLeftCorner(src.d * horizon, src.p * horizon);
    auto build = [&](Eigen::Index kk) {
      const Eigen::Index t_eff = effective_horizon(horizon, kk);
      if (t_eff < kk || t_eff < 1) {
        fail(ErrorKind::HorizonTooShort, "T'=" + std::to_string(t_eff) + " < k=" + std::to_string(kk));
      }
      return CausalOperator::from_dense(prefix, src.d, src.p, kk);
    };
    if (k) {
      spec = ProcessSpec{build(*k), horizon, *k};
    } else {
      for (Eigen::Index kk = 1; kk <= k_limit && !spec; ++kk) {
        if (horizon / kk < 2) break;
        try {
          CausalOperator op = build(kk);
          const EigExtremes ex = sym_eig_extremes(decoupled_covariance(op));
          if (ex.lambda_max > 0.0 && ex.lambda_min > 1e-9 * ex.lambda_max) {
            spec = ProcessSpec{std::move(op), horizon, kk};
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::InvalidInput) throw;
        }
      }
      if (!spec) fail(ErrorKind::InsufficientExcitation, "auto-k: no k with a nonsingular decoupled covariance");
    }
  }
  return ResolvedProcess{std::move(*spec), horizon, !k.has_value(), kappa_value};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

Json num(double v) {
  if (std::isfinite(v)) return Json(v);
  return Json(format_number(v));
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Json process_json(const ResolvedProcess& r, const SystemConfig& s) {
  const Eigen::Index t_eff = r.spec.effective_horizon();
  Json j = Json::object();
  j["type"] = s.type;
  j["T"] = static_cast<std::int64_t>(r.requested_horizon);
  j["T_eff"] = static_cast<std::int64_t>(t_eff);
  j["k"] = static_cast<std::int64_t>(r.spec.k);
  j["k_mode"] = r.auto_k ? "auto" : "fixed";
  if (r.kappa) j["kappa"] = static_cast<std::int64_t>(*r.kappa);
  else if (s.type == "var") j["kappa"] = "not-reachable";
  j["truncated"] = t_eff != r.requested_horizon;
  if (t_eff != r.requested_horizon) {
    j["notice"] = "horizon truncated from T=" + std::to_string(r.requested_horizon) + " to T'=" +
                  std::to_string(t_eff) + " (k=" + std::to_string(r.spec.k) + " does not divide T)";
  }
  if (r.auto_k) {
    j["auto_k"] = "smallest k >= kappa with floor(T/k) >= 2 resolved to k=" + std::to_string(r.spec.k);
  }
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_metadata(const CommandOptions& options, const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  Json meta = Json::object();
  meta["command"] = command;
  meta["config_path"] = options.config_path;
  meta["created_utc"] = stamp;
  meta["out_dir"] = options.out_dir.string();
  meta["workers"] = options.workers;
  write_json(options.out_dir / (command + ".meta.json"), meta);
}

std::string status_of(const TailExperiment& e) {
  for (const auto& f : e.flags)
    if (f == "uncertified-by-theorem") return "no-claim";
  if (e.vacuous) return "vacuous";
  return e.certified ? "certified" : "failed";
}

std::string join_flags(const std::vector<std::string>& flags) {
  std::string out;
  for (const auto& f : flags) {
    if (!out.empty()) out += ';';
    out += f;
  }
  return out;
}

struct Cell {
  ResolvedProcess process;
  double delta = 0.1;
};

std::string csv_row(const EventConfig& ev, const Cell& cell, const ExperimentConfig& config,
                    const TailExperiment& e) {
  std::ostringstream row;
  row << to_string(ev.kind) << ',' << cell.process.requested_horizon << ','
      << cell.process.spec.effective_horizon() << ',' << cell.process.spec.k << ','
      << format_number(cell.delta) << ',' << e.replicates << ',' << config.seed << ',' << e.hits << ','
      << format_number(e.frequency) << ',' << format_number(e.ci.lo) << ',' << format_number(e.ci.hi) << ','
      << format_number(e.bound) << ',' << (e.exact ? format_number(*e.exact) : "") << ','
      << (e.certified ? "true" : "false") << ',' << status_of(e) << ',' << (e.refuted ? "true" : "false")
      << ',' << join_flags(e.flags);
  return row.str();
}

Json experiment_json(const EventConfig& ev, const Cell& cell, const TailExperiment& e) {
  Json j = Json::object();
  j["event"] = std::string(to_string(ev.kind));
  j["T"] = static_cast<std::int64_t>(cell.process.requested_horizon);
  j["T_eff"] = static_cast<std::int64_t>(cell.process.spec.effective_horizon());
  j["k"] = static_cast<std::int64_t>(cell.process.spec.k);
  j["delta"] = cell.delta;
  j["replicates"] = static_cast<std::uint64_t>(e.replicates);
  j["hits"] = static_cast<std::uint64_t>(e.hits);
  j["frequency"] = num(e.frequency);
  j["ci"] = Json{{"lo", num(e.ci.lo)}, {"hi", num(e.ci.hi)}};
  if (e.std_error) j["std_error"] = num(*e.std_error);
  j["bound"] = num(e.bound);
  j["bound_clamped"] = num(std::min(1.0, std::max(0.0, e.bound)));  // presentation clamp to [0, 1]
  if (e.exact) j["exact"] = num(*e.exact);
  j["vacuous"] = e.vacuous;
  j["certified"] = e.certified;
  j["status"] = status_of(e);
  j["refuted"] = e.refuted;
  j["flags"] = e.flags;
  Json details = Json::object();
  for (const auto& [key, value] : e.details) details[key] = num(value);
  j["details"] = std::move(details);
  return j;
}

TailExperiment run_event(const EventConfig& ev, const Cell& cell, const ExperimentConfig& config,
                         unsigned workers) {
  EventParams params;
  if (ev.weight) params.weight = SymMatrix(*ev.weight);
  params.q = ev.q;
  params.lambda = ev.lambda;
  params.delta = cell.delta;
  params.bound_scale = ev.bound_scale;
  return run_tail_experiment(cell.process.spec, ev.kind, params, config.replicates, config.seed, workers);
}

std::vector<EventConfig> events_or_default(const ExperimentConfig& config) {
  if (!config.events.empty()) return config.events;
  return {EventConfig{}};
}

// Every bound for one process, with failures recorded per section.
Json bounds_json(const ResolvedProcess& r, const ExperimentConfig& config, double delta,
                 std::map<std::string, std::string>& errors) {
  Json j = Json::object();
  std::optional<CausalOperator> op;
  try {
    op = r.spec.build_operator();
  } catch (const Error& e) {
    errors["operator"] = e.what();
  }
  if (op) {
    Json b = Json::object();
    try {
      const BoundReport rep = anticoncentration_bound(*op);
      const PsiResult psi = psi_k(*op);
      b["psi_k"] = num(rep.psi_k);
      b["psi_direction"] = vector_json(rep.psi_direction);
      b["psi_identical_blocks"] = psi.identical_blocks;
      b["chernoff_exponent"] = num(rep.chernoff_exponent);
      b["anticonc_probability"] = num(rep.anticonc_probability);
      b["anticonc_probability_clamped"] = num(std::min(1.0, rep.anticonc_probability));  // presentation clamp
      b["anticonc_threshold"] = num(rep.anticonc_threshold);
      b["upper_tail_probability"] = num(rep.upper_tail_probability);
      Json inter = Json::object();
      for (const auto& [key, value] : rep.intermediates) inter[key] = num(value);
      b["intermediates"] = std::move(inter);
    } catch (const Error& e) {
      errors["anticoncentration"] = e.what();
    }
    try {
      const SymMatrix id = SymMatrix::identity(op->d());
      const DecoupledMoments m = decoupled_moments(*op, id);
      b["chernoff_identity_weight"] = Json{{"first_moment", num(m.first)},
                                           {"second_moment", num(m.second)},
                                           {"bound", num(chernoff_lower_tail(*op, id))},
                                           {"bound_conservative", num(chernoff_lower_tail_conservative(*op, id))}};
    } catch (const Error& e) {
      errors["chernoff"] = e.what();
    }
    Json upper = Json::array();
    for (const auto& ev : config.events) {
      if (ev.kind != EventKind::UpperTailOpnorm) continue;
      try {
        upper.push_back(Json{{"q", num(ev.q)}, {"bound", num(upper_tail_bound(*op, ev.q))}});
      } catch (const Error& e) {
        errors["upper_tail"] = e.what();
      }
    }
    if (!upper.empty()) b["upper_tail_events"] = std::move(upper);
    j["bounds"] = std::move(b);
  }

  if (const auto* sys = std::get_if<VarSystem>(&r.spec.source)) {
    Json v = Json::object();
    v["delta"] = delta;
    try {
      const VarBoundTerms t = var_bound_terms(*sys, r.requested_horizon, r.spec.k);
      v["kappa"] = t.kappa ? Json(static_cast<std::int64_t>(*t.kappa)) : Json("not-reachable");
      v["lifted_dim"] = static_cast<std::int64_t>(t.lifted_dim);
      v["noise_gram_norm"] = num(t.noise_gram_norm);
      v["power_sum"] = num(t.power_sum);
      v["gamma_spectrum"] = vector_json(t.gamma_spectrum);
      v["gamma_lambda_min"] = num(t.gamma_lambda_min);
      v["corollary_base"] = num(t.corollary_base);
      v["sum_lambda_max_covariance"] = num(t.sum_lambda_max_covariance);
      v["c_sys"] = num(t.c_sys);
      v["armastability_bound"] = num(armastability_bound(*sys, t.horizon));
      v["arma_corollary_bound"] = num(arma_corollary_bound(*sys, r.requested_horizon, r.spec.k));
      const bool burnin = burnin_check(*sys, r.requested_horizon, r.spec.k, delta);
      v["burnin_satisfied"] = burnin;
      if (burnin) v["ls_error_bound"] = num(ls_error_bound(*sys, r.requested_horizon, r.spec.k, delta));
    } catch (const Error& e) {
      errors["var"] = e.what();
    }
    j["var"] = std::move(v);
  }
  return j;
}

std::vector<Cell> grid_cells(const ExperimentConfig& config, const std::filesystem::path& base_dir) {
  const std::vector<Eigen::Index> ts = config.grid.horizon.empty() ? std::vector<Eigen::Index>{config.horizon}
                                                                   : config.grid.horizon;
  const std::vector<KSetting> ks = config.grid.k.empty() ? std::vector<KSetting>{config.k} : config.grid.k;
  const std::vector<double> ds = config.grid.delta.empty() ? std::vector<double>{config.delta} : config.grid.delta;
  std::vector<Cell> cells;
  for (auto t : ts)
    for (const auto& k : ks)
      for (double d : ds) cells.push_back(Cell{resolve_process(config, t, k, base_dir), d});
  return cells;
}

// Config echo for reports; the output location goes to the sidecar.
Json config_echo(const ExperimentConfig& config) {
  Json j = to_json(config);
  j.erase("output");
  return j;
}

void prepare_out(const CommandOptions& options) { std::filesystem::create_directories(options.out_dir); }

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_bounds(const ExperimentConfig& config, const CommandOptions& options) {
  prepare_out(options);
  const ResolvedProcess r = resolve_process(config, config.horizon, config.k, options.base_dir);
  std::map<std::string, std::string> errors;
  Json report = Json::object();
  report["command"] = "bounds";
  report["config"] = config_echo(config);
  report["process"] = process_json(r, config.system);
  const Json sections = bounds_json(r, config, config.delta, errors);
  for (const auto& [key, value] : sections.items()) report[key] = value;
  Json err = Json::object();
  for (const auto& [key, value] : errors) err[key] = value;
  report["errors"] = std::move(err);
  write_json(options.out_dir / "bounds.json", report);
  write_metadata(options, "bounds");
  for (const auto& [key, value] : errors) std::cerr << "bounds: " << key << ": " << value << "\n";
  return errors.empty() ? kExitOk : kExitConfigError;
}

int cmd_verify(const ExperimentConfig& config, const CommandOptions& options) {
  prepare_out(options);
  const Cell cell{resolve_process(config, config.horizon, config.k, options.base_dir), config.delta};
  std::string csv = std::string(kVerifyCsvHeader) + "\n";
  Json rows = Json::array();
  std::size_t failures = 0;
  for (const auto& ev : events_or_default(config)) {
    const TailExperiment e = run_event(ev, cell, config, options.workers);
    csv += csv_row(ev, cell, config, e) + "\n";
    rows.push_back(experiment_json(ev, cell, e));
    if (status_of(e) == "failed") ++failures;
  }
  Json summary = Json::object();
  summary["command"] = "verify";
  summary["config"] = config_echo(config);
  summary["process"] = process_json(cell.process, config.system);
  summary["rows"] = std::move(rows);
  summary["failures"] = static_cast<std::uint64_t>(failures);
  summary["overall"] = failures == 0 ? "pass" : "fail";
  write_text(options.out_dir / "verify.csv", csv);
  write_json(options.out_dir / "verify.json", summary);
  write_metadata(options, "verify");
  return failures == 0 ? kExitOk : kExitCertificationFailure;
}

int cmd_identify(const ExperimentConfig& config, const CommandOptions& options) {
  if (config.system.type != "var") fail(ErrorKind::InvalidInput, "identify needs a var system");
  prepare_out(options);
  const ResolvedProcess r = resolve_process(config, config.horizon, config.k, options.base_dir);
  const VarSystem& sys = std::get<VarSystem>(r.spec.source);
  const IdentificationExperiment id = run_identification_experiment(
      sys, config.horizon, r.spec.k, config.delta, config.replicates, config.seed, options.workers);

  std::string csv = std::string(kIdentifyCsvHeader) + "\n";
  for (std::size_t i = 0; i < id.op_errors.size(); ++i) {
    csv += std::to_string(i) + ',' + format_number(id.op_errors[i]) + ',';
    if (id.error_bound) csv += id.op_errors[i] > *id.error_bound ? "true" : "false";
    csv += '\n';
  }

  Json report = Json::object();
  report["command"] = "identify";
  report["config"] = config_echo(config);
  report["process"] = process_json(r, config.system);
  report["burnin_satisfied"] = id.burnin_satisfied;
  if (id.error_bound) report["error_bound"] = num(*id.error_bound);
  Json errs = Json::array();
  for (double v : id.op_errors) errs.push_back(num(v));
  report["op_errors"] = std::move(errs);
  report["median_op_error"] = num(id.summary.details.at("median_op_error"));
  report["flags"] = id.summary.flags;
  if (id.error_bound) {
    const TailExperiment& e = id.summary;
    report["certification"] = Json{{"event", "op_error > error_bound"},
                                   {"hits", static_cast<std::uint64_t>(e.hits)},
                                   {"frequency", num(e.frequency)},
                                   {"ci", Json{{"lo", num(e.ci.lo)}, {"hi", num(e.ci.hi)}}},
                                   {"bound", num(e.bound)},
                                   {"certified", e.certified},
                                   {"status", status_of(e)}};
  }
  write_text(options.out_dir / "identify.csv", csv);
  write_json(options.out_dir / "identify.json", report);
  write_metadata(options, "identify");

  for (const auto& f : id.summary.flags) {
    if (f == "InsufficientExcitation") {
      std::cerr << "identify: InsufficientExcitation: k is below kappa or kappa is not reachable\n";
      return kExitConfigError;
    }
  }
  if (id.error_bound && !id.summary.certified) return kExitCertificationFailure;
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options) {
  prepare_out(options);
  const std::vector<Cell> cells = grid_cells(config, options.base_dir);
  std::string csv = std::string(kSweepCsvHeader) + "\n";
  Json out_cells = Json::array();
  std::size_t failures = 0;
  for (const Cell& cell : cells) {
    std::map<std::string, std::string> errors;
    const Json b = bounds_json(cell.process, config, cell.delta, errors);
    std::string bound_cols = ",,,";
    if (b.contains("bounds") && b["bounds"].contains("psi_k")) {
      const Json& bb = b["bounds"];
      auto field = [&](const char* key) {
        return bb[key].is_number() ? format_number(bb[key].get<double>()) : bb[key].get<std::string>();
      };
      bound_cols = field("psi_k") + ',' + field("anticonc_probability") + ',' + field("anticonc_threshold") + ',' +
                   field("upper_tail_probability");
    }
    Json rows = Json::array();
    for (const auto& ev : events_or_default(config)) {
      const TailExperiment e = run_event(ev, cell, config, options.workers);
      csv += csv_row(ev, cell, config, e) + ',' + bound_cols + "\n";
      rows.push_back(experiment_json(ev, cell, e));
      if (status_of(e) == "failed") ++failures;
    }
    Json c = Json::object();
    c["process"] = process_json(cell.process, config.system);
    for (const auto& [key, value] : b.items()) c[key] = value;
    Json err = Json::object();
    for (const auto& [key, value] : errors) err[key] = value;
    c["errors"] = std::move(err);
    c["rows"] = std::move(rows);
    out_cells.push_back(std::move(c));
  }
  Json report = Json::object();
  report["command"] = "sweep";
  report["config"] = config_echo(config);
  report["cells"] = std::move(out_cells);
  report["failures"] = static_cast<std::uint64_t>(failures);
  report["overall"] = failures == 0 ? "pass" : "fail";
  write_text(options.out_dir / "sweep.csv", csv);
  write_json(options.out_dir / "sweep.json", report);
  write_metadata(options, "sweep");
  return failures == 0 ? kExitOk : kExitCertificationFailure;
}

int cmd_simulate(const ExperimentConfig& config, const CommandOptions& options) {
  prepare_out(options);
  const ResolvedProcess r = resolve_process(config, config.horizon, config.k, options.base_dir);
  const PathBatch batch = sample(r.spec, config.replicates, config.seed, options.workers);
  std::string csv = std::string(kSimulateCsvHeader) + "\n";
  Json spectra = Json::array();
  for (std::size_t rep = 0; rep < batch.replicates; ++rep) {
    const Matrix& x = batch.states[rep];
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      for (Eigen::Index c = 0; c < x.rows(); ++c) {
        csv += std::to_string(rep) + ',' + std::to_string(t) + ',' + std::to_string(c) + ',' +
               format_number(x(c, t)) + '\n';
      }
    }
    const auto ex = sym_eig_extremes(empirical_covariance(batch, rep));
    spectra.push_back(Json{{"replicate", static_cast<std::uint64_t>(rep)},
                           {"lambda_min", num(ex.lambda_min)},
                           {"lambda_max", num(ex.lambda_max)}});
  }
  Json report = Json::object();
  report["command"] = "simulate";
  report["config"] = config_echo(config);
  report["process"] = process_json(r, config.system);
  report["empirical_covariance"] = std::move(spectra);
  write_text(options.out_dir / "simulate.csv", csv);
  write_json(options.out_dir / "simulate.json", report);
  write_metadata(options, "simulate");
  return kExitOk;
}

}  // namespace causalcov::cli
