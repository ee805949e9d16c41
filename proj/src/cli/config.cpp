#include "config.hpp"

#include <cstdlib>

#include "tmscm/error.hpp"
#include "tmscm/io.hpp"

#ifndef TMSCM_VERSION
#define TMSCM_VERSION "unknown"
#endif

namespace tmscm::cli {

namespace {

void check_keys(const Json& defaults, const nlohmann::json& user, const std::string& where) {
  require(user.is_object(), ErrorCode::InvalidConfig, where + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    require(defaults.contains(key), ErrorCode::InvalidConfig, "unknown config key '" + path + "'");
    if (defaults.at(key).is_object()) check_keys(defaults.at(key), value, path);
  }
}

void overlay(Json& base, const nlohmann::json& user) {
  for (const auto& [key, value] : user.items()) {
    if (base[key].is_object())
      overlay(base[key], value);
    else
      base[key] = value;
  }
}

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

Json resolve_config(const Json& defaults, const std::optional<std::filesystem::path>& file) {
  Json out = defaults;
  if (!file) return out;
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(io::read_file(*file));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, "config is not valid JSON: " + std::string(e.what()));
  }
  check_keys(defaults, user, "");
  overlay(out, user);
  return out;
}

Json gen_defaults() {
  return {{"seed", 0},
          {"preset", nullptr},
          {"generator",
           {{"nodes", 5},
            {"edge_prob", 0.5},
            {"dims", Json::array()},
            {"dim_min", 1},
            {"dim_max", 3},
            {"mechanism", "tril-affine"},
            {"embed_width", 8},
            {"noise", "standard-normal"}}},
          {"n_train", 1000},
          {"n_test", 1000},
          {"n_cf", 200}};
}

Json train_defaults() {
  return {{"seed", 0},
          {"dataset", nullptr},
          {"model",
           {{"family", "dnme"},
            {"hidden", {64, 64}},
            {"layers", 0},
            {"ode_steps", 32},
            {"tnme_epsilon", 1e-6},
            {"order_only", false},
            {"exogenous", {{"kind", "standard-normal"}, {"components", 3}, {"flow_layers", 2}, {"flow_hidden", {32, 32}}}}}},
          {"train", {{"epochs", 50}, {"batch_size", 256}, {"lr", 1e-3}, {"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}}};
}

Json infer_defaults() {
  return {{"seed", 0}, {"checkpoint", nullptr}, {"ground_truth", nullptr}, {"queries", nullptr}};
}

Json eval_defaults() {
  return {{"seed", 0},       {"dataset", nullptr}, {"checkpoint", nullptr}, {"ground_truth", false},
          {"blur", 0.05},    {"n_obs", 1000},      {"max_ctf", 1000}};
}

Json report_defaults() { return {{"seed", 0}, {"runs", Json::array()}}; }

Json validate_defaults() { return {{"seed", 0}, {"dataset", nullptr}, {"tolerance", 1e-12}}; }

std::filesystem::path output_dir(const Common& c, const std::string& command) {
  if (c.out) return *c.out;
  if (auto e = env("TMSCM_OUT")) return *e;
  return std::filesystem::path("tmscm_out") / command;
}

std::uint64_t resolve_seed(const Common& c, Json& config) {
  if (c.seed) config["seed"] = *c.seed;
  return get<std::uint64_t>(config, "seed");
}

int resolve_threads(const Common& c) {
  if (c.threads) return *c.threads;
  if (auto e = env("TMSCM_THREADS")) {
    try {
      return std::stoi(*e);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidConfig, "TMSCM_THREADS must be an integer");
    }
  }
  return 0;
}

Json run_manifest(const std::string& command, std::uint64_t seed, const Json& config, const Json& extra) {
  Json m = {{"command", command}, {"version", TMSCM_VERSION}, {"seed", seed}, {"config", config}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  return m;
}

}  // namespace tmscm::cli
