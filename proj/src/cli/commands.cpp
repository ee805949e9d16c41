#include "commands.hpp"

#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "tmscm/error.hpp"
#include "tmscm/evaluate.hpp"
#include "tmscm/inference.hpp"
#include "tmscm/io.hpp"
#include "tmscm/models/checkpoint.hpp"
#include "tmscm/models/train.hpp"
#include "tmscm/synthesis.hpp"

namespace tmscm::cli {

namespace fs = std::filesystem;

namespace {

fs::path required_path(const Json& config, const char* key) {
  require(config.contains(key) && config.at(key).is_string(), ErrorCode::InvalidConfig,
          std::string("config needs a path in '") + key + "'");
  return get<std::string>(config, key);
}

void prepare(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_manifest(const fs::path& dir, const Json& manifest) {
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

models::ModelConfig model_config(const Json& j) {
  models::ModelConfig c;
  c.family = models::family_from_string(get<std::string>(j, "family"));
  c.hidden = get<std::vector<std::size_t>>(j, "hidden");
  c.layers = get<std::size_t>(j, "layers");
  c.ode_steps = get<std::size_t>(j, "ode_steps");
  c.tnme_epsilon = get<double>(j, "tnme_epsilon");
  c.order_only = get<bool>(j, "order_only");
  const Json& e = j.at("exogenous");
  c.exogenous.kind = models::exogenous_kind_from_string(get<std::string>(e, "kind"));
  c.exogenous.components = get<std::size_t>(e, "components");
  c.exogenous.flow_layers = get<std::size_t>(e, "flow_layers");
  c.exogenous.flow_hidden = get<std::vector<std::size_t>>(e, "flow_hidden");
  return c;
}

// The thing queried: a trained checkpoint or the dataset's ground truth.
struct Subject {
  std::unique_ptr<models::TmScmModel> model;
  std::optional<ScmSolutionMap> truth;
  std::string family;

  const FlatSolutionMap& map() const {
    if (model) return *model;
    return *truth;
  }
};

Subject load_subject(const std::optional<fs::path>& checkpoint, const std::optional<synth::CounterfactualDataset>& truth_ds) {
  Subject s;
  if (checkpoint) {
    s.model = models::load_checkpoint(*checkpoint).model;
    s.family = models::to_string(s.model->family());
  } else {
    require(truth_ds.has_value(), ErrorCode::InvalidConfig, "either a checkpoint or the ground truth is required");
    s.truth.emplace(synth::gen_ground_truth(truth_ds->config), truth_ds->vec.order());
    s.family = "ground-truth";
  }
  return s;
}

std::string csv_key(const std::string& dataset, const std::string& family, std::uint64_t seed) {
  std::ostringstream os;
  os << '"' << dataset << "\"," << family << ',' << seed << ',';
  return os.str();
}

}  // namespace

int cmd_gen(const Common& common) {
  Json config = resolve_config(gen_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  synth::GeneratorConfig g;
  if (!config.at("preset").is_null()) {
    g = synth::preset(get<std::string>(config, "preset"));
    config["generator"] = synth::generator_to_json(g);
    config["generator"].erase("seed");
  } else {
    g = synth::generator_from_json(config.at("generator"));
  }
  g.seed = seed;
  try {
    g.validate();
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, e.what());
  }
  synth::DatasetSizes sizes{get<std::size_t>(config, "n_train"), get<std::size_t>(config, "n_test"),
                            get<std::size_t>(config, "n_cf")};
  require(sizes.train > 0, ErrorCode::InvalidConfig, "n_train must be positive");
  require(sizes.test > 0, ErrorCode::InvalidConfig, "n_test must be positive");

  const fs::path out = output_dir(common, "gen");
  prepare(out);
  auto ds = synth::gen_dataset(synth::gen_ground_truth(g), sizes, derive_seed(seed, 1));
  ds.config = g;
  synth::write_dataset(ds, out, run_manifest("gen", seed, config));
  std::cout << "dataset written to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& common) {
  Json config = resolve_config(train_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  const fs::path dataset = required_path(config, "dataset");
  const models::ModelConfig mc = model_config(config.at("model"));
  models::TrainConfig tc;
  const Json& t = config.at("train");
  tc.epochs = get<std::size_t>(t, "epochs");
  tc.batch_size = get<std::size_t>(t, "batch_size");
  tc.adam.lr = get<double>(t, "lr");
  tc.adam.beta1 = get<double>(t, "beta1");
  tc.adam.beta2 = get<double>(t, "beta2");
  tc.adam.eps = get<double>(t, "eps");
  tc.seed = derive_seed(seed, 7);
  require(tc.batch_size > 0, ErrorCode::InvalidConfig, "batch_size must be positive");

  const auto ds = synth::read_dataset(dataset);
  std::unique_ptr<models::TmScmModel> model;
  try {
    model = models::TmScmModel::create(ds.graph, mc);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) fail(ErrorCode::InvalidConfig, e.what());
    throw;
  }
  model->fit_standardization(ds.train);
  model->initialize(seed);

  const fs::path out = output_dir(common, "train");
  prepare(out);
  const auto result = models::train(*model, ds.train, tc, [](const models::EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " nll " << std::setprecision(6) << r.nll << "\n";
  });
  models::save_checkpoint(*model, seed, out / "checkpoint.bin");
  io::write_file(out / "train_log.csv", models::train_log_csv(result));
  Json extra = {{"dataset_checksum", io::fnv1a64(io::read_file(dataset / "manifest.json"))},
                {"family", models::to_string(model->family())},
                {"parameter_count", model->parameter_count()},
                {"initial_nll", result.initial_nll},
                {"final_nll", result.final_nll},
                {"epochs_run", result.log.size()},
                {"aborted", result.aborted},
                {"abort_reason", result.abort_reason},
                {"checkpoint", "checkpoint.bin"},
                {"log", "train_log.csv"}};
  write_manifest(out, run_manifest("train", seed, config, extra));
  if (result.aborted) {
    std::cerr << "training aborted: " << result.abort_reason << " (last good parameters saved)\n";
    return 3;
  }
  std::cout << "final nll " << std::setprecision(10) << result.final_nll << "\n";
  return 0;
}

int cmd_infer(const Common& common) {
  Json config = resolve_config(infer_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  const fs::path queries = required_path(config, "queries");
  std::optional<fs::path> checkpoint;
  std::optional<synth::CounterfactualDataset> truth;
  if (config.at("checkpoint").is_string()) checkpoint = required_path(config, "checkpoint");
  else if (config.at("ground_truth").is_string()) truth = synth::read_dataset(required_path(config, "ground_truth"));
  const Subject subject = load_subject(checkpoint, truth);
  const Vectorization& vec = subject.map().vectorization();

  std::vector<Vec> factual;
  std::vector<Intervention> xs;
  std::vector<nlohmann::json> raw;
  std::istringstream in(io::read_file(queries));
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      factual.push_back(j.at("factual").get<Vec>());
      xs.push_back(synth::intervention_from_json(j.value("intervention", nlohmann::json::object())));
      raw.push_back(std::move(j));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, "query line " + std::to_string(n) + ": " + e.what());
    }
    require(factual.back().size() == vec.total_dim(), ErrorCode::InvalidConfig,
            "query line " + std::to_string(n) + ": factual has the wrong length");
  }
  ad::Matrix v(factual.size(), vec.total_dim());
  for (std::size_t i = 0; i < factual.size(); ++i) std::copy(factual[i].begin(), factual[i].end(), v.row_span(i).begin());
  const ad::Matrix pred = factual.empty() ? ad::Matrix() : inference::counterfactual_outcome(subject.map(), v, xs);

  const fs::path out = output_dir(common, "infer");
  prepare(out);
  std::string lines;
  for (std::size_t i = 0; i < factual.size(); ++i) {
    Json j;
    j["factual"] = factual[i];
    j["intervention"] = synth::intervention_to_json(xs[i]);
    j["counterfactual"] = Vec(pred.row_span(i).begin(), pred.row_span(i).end());
    lines += j.dump() + "\n";
  }
  io::write_file(out / "predictions.jsonl", lines);
  write_manifest(out, run_manifest("infer", seed, config,
                                   {{"model", subject.family}, {"queries", factual.size()}, {"predictions", "predictions.jsonl"}}));
  std::cout << factual.size() << " predictions written to " << (out / "predictions.jsonl").string() << "\n";
  return 0;
}

int cmd_eval(const Common& common) {
  Json config = resolve_config(eval_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  const fs::path dataset = required_path(config, "dataset");
  const auto ds = synth::read_dataset(dataset);
  const bool ground_truth = get<bool>(config, "ground_truth");
  std::optional<fs::path> checkpoint;
  if (!ground_truth) checkpoint = required_path(config, "checkpoint");
  const Subject subject = load_subject(checkpoint, ds);

  eval::EvalOptions opts;
  opts.blur = get<double>(config, "blur");
  opts.n_obs = get<std::size_t>(config, "n_obs");
  opts.max_ctf = get<std::size_t>(config, "max_ctf");
  opts.seed = derive_seed(seed, 11);
  require(opts.blur > 0, ErrorCode::InvalidConfig, "blur must be positive");
  const ad::Matrix samples = subject.model ? subject.model->sample(opts.n_obs, opts.seed)
                                           : synth::sample_observational(subject.truth->scm(), ds.vec, opts.n_obs, opts.seed);
  const auto e = eval::evaluate(subject.map(), samples, ds, opts);

  metrics::MetricsReport report = e.report;
  const std::string dataset_id = io::fnv1a64(io::read_file(dataset / "manifest.json"));
  report.config = {{"dataset", dataset_id}, {"family", subject.family}, {"seed", std::to_string(seed)}};

  const fs::path out = output_dir(common, "eval");
  prepare(out);
  io::write_file(out / "metrics.json", metrics::to_json(report));
  io::write_file(out / "metrics.csv", "dataset,family,seed," + metrics::csv_header() +
                                          csv_key(dataset_id, subject.family, seed) + metrics::to_csv_row(report));
  io::write_file(out / "convergence.csv", eval::convergence_csv(e));
  Json sinkhorn;
  for (const auto& [name, r] : {std::pair{"obs_wd", &e.obs}, std::pair{"ctf_wd", &e.ctf}})
    sinkhorn[name] = {{"xy_iterations", r->xy.iterations}, {"xy_marginal_error", r->xy.marginal_error},
                      {"xx_iterations", r->xx.iterations}, {"yy_iterations", r->yy.iterations},
                      {"converged", r->xy.converged && r->xx.converged && r->yy.converged}};
  write_manifest(out, run_manifest("eval", seed, config,
                                   {{"model", subject.family}, {"dataset_checksum", dataset_id}, {"sinkhorn", sinkhorn},
                                    {"epsilon", opts.blur * opts.blur}}));
  std::cout << std::setprecision(8) << "obs_wd " << report.obs_wd << "\nctf_rmse " << report.ctf_rmse << "\nctf_wd "
            << report.ctf_wd << "\n";
  return 0;
}

int cmd_report(const Common& common) {
  Json config = resolve_config(report_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  const auto runs = get<std::vector<std::string>>(config, "runs");
  require(!runs.empty(), ErrorCode::InvalidConfig, "report needs at least one eval run directory in 'runs'");
  std::string csv = "dataset,family,seed," + metrics::csv_header();
  Json all = Json::array();
  for (const auto& run : runs) {
    const auto r = metrics::report_from_json(io::read_file(fs::path(run) / "metrics.json"));
    auto key = [&](const char* k) { return r.config.count(k) ? r.config.at(k) : std::string(); };
    csv += "\"" + key("dataset") + "\"," + key("family") + "," + key("seed") + "," + metrics::to_csv_row(r);
    all.push_back(Json::parse(metrics::to_json(r)));
  }
  const fs::path out = output_dir(common, "report");
  prepare(out);
  io::write_file(out / "report.csv", csv);
  io::write_file(out / "report.json", all.dump(2) + "\n");
  write_manifest(out, run_manifest("report", seed, config, {{"rows", runs.size()}}));
  std::cout << csv;
  return 0;
}

int cmd_validate(const Common& common) {
  Json config = resolve_config(validate_defaults(), common.config);
  const std::uint64_t seed = resolve_seed(common, config);
  const fs::path dataset = required_path(config, "dataset");
  const double tolerance = get<double>(config, "tolerance");
  const auto ds = synth::read_dataset(dataset);
  const double err = synth::replay_error(ds, synth::gen_ground_truth(ds.config));
  const bool ok = err <= tolerance;
  const fs::path out = output_dir(common, "validate");
  prepare(out);
  Json result = {{"replay_error", err}, {"tolerance", tolerance}, {"ok", ok}};
  io::write_file(out / "validation.json", result.dump(2) + "\n");
  write_manifest(out, run_manifest("validate", seed, config, result));
  std::cout << "replay error " << std::setprecision(3) << err << (ok ? " ok\n" : " exceeds tolerance\n");
  return ok ? 0 : 3;
}

}  // namespace tmscm::cli
