#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "causalcov/montecarlo.hpp"
#include "causalcov/process.hpp"

namespace causalcov::cli {

using Json = nlohmann::ordered_json;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCertificationFailure = 1;
inline constexpr int kExitConfigError = 2;

struct SystemConfig {
  std::string type = "iid";  // "iid", "var" or "operator"
  // iid
  Eigen::Index dim = 1;
  // var
  std::vector<Matrix> lags;
  Matrix noise;
  // operator: per-time block lower-triangular (d T) x (p T) matrix, inline or
  // from a JSON file holding {"d", "p", "matrix"} (relative to the config).
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  std::optional<Matrix> matrix;
  std::optional<std::string> file;
};
bool operator==(const SystemConfig& a, const SystemConfig& b);

struct EventConfig {
  EventKind kind = EventKind::ChernoffDirection;
  std::optional<Matrix> weight;
  double q = 2.0;
  double lambda = 0.05;
  // Multiplies the attached bound. Negative controls only.
  double bound_scale = 1.0;
};
bool operator==(const EventConfig& a, const EventConfig& b);

// nullopt means "auto".
using KSetting = std::optional<Eigen::Index>;

struct GridConfig {
  std::vector<Eigen::Index> horizon;
  std::vector<KSetting> k;
  std::vector<double> delta;

  bool operator==(const GridConfig&) const = default;
};

struct ExperimentConfig {
  SystemConfig system;
  Eigen::Index horizon = 64;
  KSetting k = 1;
  double delta = 0.1;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::vector<EventConfig> events;
  GridConfig grid;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

Json to_json(const ExperimentConfig& config);
// Throws Error(InvalidInput) on schema violations.
ExperimentConfig config_from_json(const Json& j);
// base_dir resolves relative operator files.
ExperimentConfig load_config(const std::filesystem::path& path);

// Resolved process for one (T, k) cell.
struct ResolvedProcess {
  ProcessSpec spec;
  Eigen::Index requested_horizon = 0;
  bool auto_k = false;
  std::optional<Eigen::Index> kappa;  // VAR and iid systems
};

// auto-k: smallest k >= kappa (VAR, iid) or with a nonsingular decoupled
// covariance (raw operators) such that floor(T / k) >= 2, scanning up to T / 2.
ResolvedProcess resolve_process(const ExperimentConfig& config, Eigen::Index horizon, KSetting k,
                                const std::filesystem::path& base_dir = {});

struct CommandOptions {
  std::filesystem::path out_dir;
  std::filesystem::path base_dir;      // directory of the config file
  std::string config_path;             // recorded in the metadata sidecar only
  unsigned workers = 1;
};

// Each command writes its files into options.out_dir and returns an exit code.
int cmd_bounds(const ExperimentConfig& config, const CommandOptions& options);
int cmd_verify(const ExperimentConfig& config, const CommandOptions& options);
int cmd_identify(const ExperimentConfig& config, const CommandOptions& options);
int cmd_sweep(const ExperimentConfig& config, const CommandOptions& options);
int cmd_simulate(const ExperimentConfig& config, const CommandOptions& options);

// Fixed CSV headers.
extern const char* const kVerifyCsvHeader;
extern const char* const kSweepCsvHeader;
extern const char* const kIdentifyCsvHeader;
extern const char* const kSimulateCsvHeader;

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace causalcov::cli
