#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "smcmix/oracle.hpp"

namespace smcmix::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kDegenerate = 3 };

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> out_dir;
};

struct VerifyOptions {
  std::vector<std::string> suites;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> chain_file;
  std::optional<std::filesystem::path> out_dir;
};

/// Each command reports on `out`, diagnostics on `err`, and returns an exit code.
int cmd_run(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
            std::ostream& err);
int cmd_bounds(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
               std::ostream& err);
int cmd_sweep(const std::filesystem::path& config_path, const CommonOptions& opts, std::ostream& out,
              std::ostream& err);
int cmd_verify(const VerifyOptions& opts, std::ostream& out, std::ostream& err);

/// JSON payloads; exposed for tests.
Json bound_report_json(const BoundReport& report, double feasibility_cap);
Json verify_report_json(const oracle::VerifyReport& report);
/// Chain-file checks: load invariants, then semigroup and Poincare checks.
std::vector<oracle::CheckReport> chain_file_checks(const std::filesystem::path& file, std::uint64_t seed);

}  // namespace smcmix::cli
