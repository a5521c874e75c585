#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace reentry::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Incompatible or out-of-range flags; exits with kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Environment {
  std::istream* in = nullptr;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  // Environment lookup; REENTRY_SEED overrides --seed when set.
  std::function<std::optional<std::string>(const std::string&)> getenv;
};

Environment process_environment();

// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, const Environment& env);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in);

// Version string baked in at configure time.
std::string version();

struct OutputRecord {
  std::string flag;      // output flag that named the location
  std::string relative;  // path below a directory flag; empty for file flags
  std::string hash;      // FNV-1a of the file bytes
};

// Everything needed to re-run a command and check its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string corpus_hash;
  std::string split_hash;
  std::string version;
  nlohmann::json timings = nlohmann::json::object();
  std::vector<OutputRecord> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

}  // namespace reentry::cli
