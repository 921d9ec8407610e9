#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xaiaug::cli {

/// Environment lookup; injectable so tests do not touch the process env.
using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the real process environment.
EnvLookup process_env();

/// Prefix of every environment override, e.g. XAIAUG_SEED.
inline constexpr const char* kEnvPrefix = "XAIAUG_";

/// Runs one CLI invocation (`args` excludes the program name) and returns
/// the process exit code: 0 success, 2 usage/config, 3 data/consistency,
/// 4 numeric failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// Reads `<dir>/manifest.json`.
nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace xaiaug::cli
