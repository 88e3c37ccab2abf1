#include "lips/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/sha.h>

#include "lips/error.hpp"

namespace lips {

using nlohmann::json;

namespace {

json train_defaults() {
  return {{"global_iters", 25},  {"updates", 25},       {"batch_sleep", 16},    {"batch_wake", 16},
          {"particles", 10},     {"dt", {0.05}},        {"mc_loss", true},      {"mc_steps", 1},
          {"reuse", 25},         {"sleep_loss", "kl"},  {"dre_times", 4},       {"lr_psi", 3e-4},
          {"lr_theta", 5e-3},    {"ess_threshold", 1.0}, {"pretrain_steps", 2500}, {"plateau_window", 100},
          {"plateau_tol", 1e-3}, {"width", 64},         {"max_skip_rate", 0.1}};
}

}  // namespace

json command_defaults(const std::string& command) {
  json common = {{"seed", nullptr}, {"out", "out"}, {"threads", 1}};
  json d;
  if (command == "generate") {
    d = {{"d", 32},        {"expected_degree", 5.0}, {"F", 16},           {"T", 10.0},
         {"K", 10},        {"p_mask", 0.5},          {"delta", 0.01},     {"n_train", 50},
         {"n_test", 50},   {"p0_infected", 0.1},     {"theta", {0.1, 1.0, 0.4, 0.05}}};
  } else if (command == "oracle") {
    // spec.json + one observation file; p0 from p0_infected unless a d x V table is given
    d = {{"spec", nullptr}, {"obs", nullptr},   {"theta", {0.1, 1.0, 0.4, 0.05}},
         {"T", 10.0},       {"p0_infected", 0.1}, {"p0", nullptr}, {"dt", 0.1}};
  } else if (command == "train-twist" || command == "train") {
    d = train_defaults();
    d["dataset"] = nullptr;
    d["theta"] = command == "train" ? json{0.2, 0.2, 0.2, 0.2} : json(nullptr);
    d["resume"] = nullptr;
    // twist-only training targets inference, which tolerates a faster rate
    if (command == "train-twist") d["lr_psi"] = 1e-3;
  } else if (command == "infer") {
    d = {{"dataset", nullptr}, {"split", "test"},  {"method", "tsmc-kl"}, {"checkpoint", nullptr},
         {"theta", nullptr},   {"particles", nullptr}, {"dt", 0.1},       {"ess_threshold", 1.0},
         {"eps", 1e-3},        {"first", 0},       {"count", nullptr},    {"save_paths", true},
         {"width", nullptr}};
  } else if (command == "evaluate") {
    d = {{"inputs", json::array()}};
  } else {
    throw ConfigError("unknown command: " + command);
  }
  d.update(common);
  return d;
}

namespace {

bool same_kind(const json& def, const json& v) {
  if (def.is_null() || v.is_null()) return true;
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
  std::string out;
  for (unsigned char c : md) out += fmt::format("{:02x}", c);
  return out;
}

RunConfig make_run_config(const std::string& command, const json& user, std::optional<std::uint64_t> seed_flag) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig rc;
  rc.command = command;
  rc.values = command_defaults(command);
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!rc.values.contains(it.key())) throw ConfigError(fmt::format("unknown config key '{}' for {}", it.key(), command));
    if (!same_kind(rc.values[it.key()], it.value()))
      throw ConfigError(fmt::format("config key '{}' has the wrong type", it.key()));
    rc.values[it.key()] = it.value();
  }
  if (seed_flag) {
    rc.seed = *seed_flag;
  } else if (!rc.values["seed"].is_null()) {
    const json& sj = rc.values["seed"];
    if (!sj.is_number_integer() || (!sj.is_number_unsigned() && sj.get<std::int64_t>() < 0))
      throw ConfigError("seed must be a non-negative integer");
    rc.seed = rc.values["seed"].get<std::uint64_t>();
  } else if (const char* env = std::getenv(kSeedEnv)) {
    char* end = nullptr;
    rc.seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError(fmt::format("{} is not an integer: {}", kSeedEnv, env));
  }
  rc.values["seed"] = rc.seed;
  json hashed = rc.values;
  hashed.erase("out");
  hashed.erase("threads");
  hashed.erase("resume");
  hashed["command"] = command;
  // object keys are sorted, so the dump does not depend on the user's key order
  rc.hash = sha256_hex(hashed.dump()).substr(0, 16);
  return rc;
}

RunConfig load_run_config(const std::string& command, const std::string& file,
                          std::optional<std::uint64_t> seed_flag) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read config " + file);
  std::stringstream ss;
  ss << is.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("malformed config {}: {}", file, e.what()));
  }
  return make_run_config(command, j, seed_flag);
}

std::string RunConfig::provenance() const {
  return fmt::format("lips {} config={} seed={}", kVersion, hash, seed);
}

}  // namespace lips
