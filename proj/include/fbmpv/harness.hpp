#pragma once

// Configuration-driven runs behind the command-line front end. Every command
// returns a RunRecord whose config snapshot is enough to re-run it; the
// numbers do not depend on the thread count.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbmpv/path_sampler.hpp"
#include "fbmpv/pv_functional.hpp"

namespace fbmpv {

struct LadderSpec {
  double eps0 = 0.0;          // 0: T^H / 4
  std::size_t rungs = 8;
  double floor_factor = 0.0;  // 0: 1 for H >= 1/2, 0.1 below
};

struct GridSpec {
  double h = 0.0;       // 0: 2 T^H n^{-1/3}
  double radius = 0.0;  // 0: 5 T^H
};

// Test function g(x) = exp(-((x - center) / width)^2) of the occupation-type identity.
struct BumpSpec {
  double center = 0.0;
  double width = 1.0;
};

struct ExperimentConfig {
  double hurst = 0.7;
  double horizon = 1.0;
  std::size_t steps = 1024;
  std::size_t paths = 100;
  std::uint64_t master_seed = 1;
  std::vector<double> levels{0.5};
  LadderSpec ladder;
  GridSpec grid;
  std::vector<Route> routes{Route::TimeIntegral, Route::HilbertOfLocalTime};
  SamplerMethod sampler = SamplerMethod::Circulant;
  LocalTimeKind field_kind = LocalTimeKind::Weighted;
  std::size_t qcov_lag = 4;  // lag in time steps
  BumpSpec bump;
  double budget_seconds = 0.0;  // 0: unlimited
  std::string out_dir = "out";
};

nlohmann::json to_json(const ExperimentConfig& c);
// Strict: unknown keys and ill-typed values are Validation errors naming the
// field. Missing keys keep their defaults. Calls validate().
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& c);

// Effective values of the "auto" (zero) settings.
double effective_floor_factor(const ExperimentConfig& c);
SpatialGrid effective_grid(const ExperimentConfig& c);
std::vector<double> effective_ladder(const ExperimentConfig& c);

enum class CheckKind { Assertion, Diagnostic };

struct Check {
  std::string name;
  CheckKind kind = CheckKind::Assertion;
  bool passed = false;
  std::string detail;
  nlohmann::json values = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const Check& c);

struct RunRecord {
  std::string command;
  std::string suite;  // verify only
  ExperimentConfig config;
  nlohmann::json per_path = nlohmann::json::array();
  nlohmann::json ensemble = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<std::string> files;  // relative to config.out_dir
  double wall_clock = 0.0;

  // No assertion-class check failed.
  bool passed() const noexcept;
};

nlohmann::json to_json(const RunRecord& r);

struct RunContext {
  unsigned threads = 1;
  bool write_files = true;
};

enum class Suite { Bounds, Identities, All };
Suite suite_from_string(const std::string& s);
const char* to_string(Suite s) noexcept;

RunRecord cmd_sample(const ExperimentConfig& c, const RunContext& ctx = {});
RunRecord cmd_pv(const ExperimentConfig& c, const RunContext& ctx = {});
RunRecord cmd_localtime(const ExperimentConfig& c, const RunContext& ctx = {});
RunRecord cmd_hilbert(const ExperimentConfig& c, const RunContext& ctx = {});
RunRecord cmd_qcov(const ExperimentConfig& c, const RunContext& ctx = {});
RunRecord cmd_verify(Suite suite, const ExperimentConfig& c, const RunContext& ctx = {});

// Dispatch by name; suite is ignored unless command == "verify".
RunRecord run_command(const std::string& command, const std::string& suite, const ExperimentConfig& c,
                      const RunContext& ctx = {});

// Re-run a serialised record from its own snapshot.
RunRecord replay(const nlohmann::json& record, const RunContext& ctx = {});

// Equal as JSON after dropping wall_clock.
bool same_numbers(const nlohmann::json& a, const nlohmann::json& b);

// Writes <out_dir>/<command>[_<suite>]_record.json and returns the path.
std::string write_record(const RunRecord& r);

// 0 all assertions passed, 3 otherwise.
int exit_code(const RunRecord& r) noexcept;

// Lemma-level checks on the covariance, drawn from mt19937_64(seed).
inline constexpr std::uint64_t kCovarianceSampleSeed = 2024;
std::vector<Check> covariance_checks(std::size_t triples = 10000, std::uint64_t seed = kCovarianceSampleSeed);
// Mollifier family: normalisation, envelopes, F_eps junction.
std::vector<Check> mollifier_checks();
// Density-suite reports and slopes as checks.
std::vector<Check> density_checks(unsigned threads = 1);

// Per-path pieces of int C_t(x) g(x) dx = -2 H pi int_0^t (Hg)(B_s) s^{2H-1} ds.
struct IdentitySides {
  double space_side = 0.0;  // int C_t g from pi H(L) on the field grid
  double time_side = 0.0;   // -pi sum_i (Hg)(B_i) w_i
  double opposite_sign = 0.0;  // +pi sum_i (Hg)(B_i) w_i
  double relative() const noexcept;
  double relative_opposite_sign() const noexcept;
};

IdentitySides occupation_identity(const SamplePath& path, const SpatialGrid& grid, const BumpSpec& bump);

}  // namespace fbmpv
