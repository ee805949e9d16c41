#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "tmscm/error.hpp"

namespace tmscm::cli {

using Json = nlohmann::ordered_json;

struct Common {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
};

/// Defaults overlaid with the user's file; keys absent from the defaults
/// are rejected so typos do not pass silently.
Json resolve_config(const Json& defaults, const std::optional<std::filesystem::path>& file);

Json gen_defaults();
Json train_defaults();
Json infer_defaults();
Json eval_defaults();
Json report_defaults();
Json validate_defaults();

/// --out, else $TMSCM_OUT, else tmscm_out/<command>.
std::filesystem::path output_dir(const Common& c, const std::string& command);
/// --seed, else the config's "seed".
std::uint64_t resolve_seed(const Common& c, Json& config);
/// --threads, else $TMSCM_THREADS; 0 or unset keeps the runtime default.
int resolve_threads(const Common& c);

/// {"command", "version", "seed", "config"} plus `extra` keys.
Json run_manifest(const std::string& command, std::uint64_t seed, const Json& config, const Json& extra = Json::object());

/// j[key] as T; type errors become InvalidConfig.
template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace tmscm::cli
