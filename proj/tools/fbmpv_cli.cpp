// Command-line front end. Exit status: 0 success, 1 I/O or internal error,
// 2 validation error, 3 verification failure, 4 budget exceeded.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbmpv/error.hpp"
#include "fbmpv/harness.hpp"

using namespace fbmpv;

namespace {

int code_for(Errc e) {
  switch (e) {
    case Errc::BudgetExceeded: return 4;
    case Errc::Io:
    case Errc::InternalConsistency:
    case Errc::EmbeddingFailure:
    case Errc::NotPositiveDefinite:
    case Errc::QuadratureNonConvergence: return 1;
    default: return 2;
  }
}

void print_summary(const RunRecord& r, const std::string& where) {
  std::printf("%s%s%s: %zu paths, %.2f s\n", r.command.c_str(), r.suite.empty() ? "" : " ", r.suite.c_str(),
              r.config.paths, r.wall_clock);
  for (const auto& c : r.checks) {
    const char* tag = c.kind == CheckKind::Diagnostic ? "INFO" : (c.passed ? "PASS" : "FAIL");
    std::printf("  %s %s  %s\n", tag, c.name.c_str(), c.detail.c_str());
  }
  if (r.checks.empty()) std::printf("%s\n", r.ensemble.dump(2).c_str());
  if (!where.empty()) std::printf("record: %s\n", where.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fBm principal-value functionals: sampling, estimators and verification suites"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned threads = 1;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override master_seed");
  app.add_option("--out", out_dir, "override out_dir");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 1024u));

  std::string suite = "all";
  std::string record_path;
  for (const char* name : {"sample", "pv", "localtime", "hilbert", "qcov"}) app.add_subcommand(name);
  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "bounds, identities or all")->check(CLI::IsMember({"bounds", "identities", "all"}));
  auto* rerun = app.add_subcommand("replay", "re-run a record from its config snapshot and compare");
  rerun->add_option("record", record_path, "record JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunContext ctx;
    ctx.threads = threads;
    if (rerun->parsed()) {
      std::ifstream is(record_path);
      const auto stored = nlohmann::json::parse(is);
      ctx.write_files = false;
      const auto again = replay(stored, ctx);
      const bool same = same_numbers(stored, to_json(again));
      std::printf("%s: %s\n", record_path.c_str(), same ? "reproduced bit-for-bit" : "DIFFERS from the stored record");
      return same ? 0 : 3;
    }
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    validate(cfg);
    const std::string command = app.get_subcommands().front()->get_name();
    const auto rec = run_command(command, suite, cfg, ctx);
    const auto where = write_record(rec);
    print_summary(rec, where);
    return exit_code(rec);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
