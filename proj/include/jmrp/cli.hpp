#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jmrp::cli {

enum ExitCode : int { kOk = 0, kGenericError = 1, kConfigError = 2, kIoError = 3, kInfeasible = 4, kNotConverged = 5 };

inline constexpr const char* kVersion = "0.1.0";

/// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);
/// Throws IoError when the file cannot be read.
std::string file_sha256(const std::string& path);

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::uint64_t seed = 0;
  std::string config_sha256;  // empty without a config file
  std::map<std::string, std::string> inputs;   // path -> digest
  std::map<std::string, std::string> outputs;  // path -> digest
  std::string started_at, finished_at;         // UTC, ISO 8601

  nlohmann::json to_json() const;
};

/// Entry point shared by the executable and the tests. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jmrp::cli
