#pragma once

// Subcommands of the sflab front end. Each reads a JSON run configuration,
// writes its CSV/JSON outputs into a directory and returns an exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace sflab::cli {

enum ExitCode : int { pass = 0, check_failure = 1, config_error = 2, regime_error = 3 };

using Config = nlohmann::ordered_json;

/// FNV-1a 64 of the canonical (key-sorted, compact) config, with
/// "threads" and "out" removed.
std::uint64_t config_hash(const Config& config);
std::string config_hash_hex(const Config& config);

Config load_config(const std::filesystem::path& path);

int cmd_spectral(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_apx(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_besicovitch(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_verify(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_zeta(const Config& config, const std::filesystem::path& out, std::ostream& log);

/// Dispatches by name, applies "threads" from the config and maps library
/// errors onto exit codes (config/domain 2; cutoff, regime, resolution,
/// conjugate, capacity and non-finite 3).
int run_command(const std::string& name, const Config& config, const std::filesystem::path& out,
                std::ostream& log);

}  // namespace sflab::cli
