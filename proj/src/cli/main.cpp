#include <omp.h>

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "tmscm/error.hpp"

using namespace tmscm;

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return 4;
    case ErrorCode::InvalidConfig:
    case ErrorCode::ConfigError:
    case ErrorCode::UnknownNode:
    case ErrorCode::PartialIntervention:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::DimMismatch:
    case ErrorCode::CycleDetected:
    case ErrorCode::OrderMismatch:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangular monotonic SCM toolkit"};
  app.require_subcommand(1);
  cli::Common common;
  std::string config, out;
  std::uint64_t seed = 0;
  int threads = 0;

  using Handler = int (*)(const cli::Common&);
  const std::pair<const char*, std::pair<const char*, Handler>> commands[] = {
      {"gen", {"generate a ground-truth SCM and its dataset", cli::cmd_gen}},
      {"train", {"fit a model by maximum likelihood", cli::cmd_train}},
      {"infer", {"answer counterfactual queries from a JSONL file", cli::cmd_infer}},
      {"eval", {"compute Obs_WD, Ctf_RMSE and Ctf_WD", cli::cmd_eval}},
      {"report", {"collect eval runs into one table", cli::cmd_report}},
      {"validate", {"re-solve a dataset against its ground truth", cli::cmd_validate}},
  };
  std::map<CLI::App*, Handler> handlers;
  for (const auto& [name, info] : commands) {
    CLI::App* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides TMSCM_OUT)");
    sub->add_option("--threads", threads, "worker threads (overrides TMSCM_THREADS)")->check(CLI::NonNegativeNumber);
    handlers[sub] = info.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) common.config = config;
  if (sub->count("--seed")) common.seed = seed;
  if (sub->count("--out")) common.out = out;
  if (sub->count("--threads")) common.threads = threads;

  try {
    if (const int t = cli::resolve_threads(common); t > 0) omp_set_num_threads(t);
    return handlers.at(sub)(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
