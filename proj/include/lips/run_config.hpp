#ifndef LIPS_RUN_CONFIG_HPP
#define LIPS_RUN_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace lips {

inline constexpr const char* kVersion = "0.1.0";

// Environment variable holding the default seed.
inline constexpr const char* kSeedEnv = "LIPS_SEED";

// Validated config of one command: the command's defaults overlaid with the
// user's values.
struct RunConfig {
  std::string command;
  nlohmann::json values;
  std::string hash;  // 16 hex chars
  std::uint64_t seed = 0;

  // "lips <version> config=<hash> seed=<seed>"
  std::string provenance() const;
  template <class T>
  T get(const std::string& key) const {
    return values.at(key).get<T>();
  }
  bool has(const std::string& key) const { return values.contains(key) && !values.at(key).is_null(); }
};

// Default values for a command; null marks an optional key.
nlohmann::json command_defaults(const std::string& command);

// Rejects unknown keys and type mismatches. Seed precedence: flag, JSON
// "seed", environment, 0. Keys that do not change results (out, threads,
// resume) are left out of the hash.
RunConfig make_run_config(const std::string& command, const nlohmann::json& user,
                          std::optional<std::uint64_t> seed_flag = std::nullopt);
RunConfig load_run_config(const std::string& command, const std::string& file,
                          std::optional<std::uint64_t> seed_flag = std::nullopt);

std::string sha256_hex(const std::string& bytes);

}  // namespace lips

#endif
