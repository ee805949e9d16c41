#include "tmscm/models/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "tmscm/error.hpp"
#include "tmscm/io.hpp"

namespace tmscm::models {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'S', 'C', 'M', 'C', 'K', '1'};

nlohmann::ordered_json header_json(const TmScmModel& model, std::uint64_t seed) {
  const ModelConfig& c = model.config();
  nlohmann::ordered_json h;
  h["format"] = 1;
  h["family"] = to_string(c.family);
  h["hidden"] = c.hidden;
  h["layers"] = c.layers;
  h["ode_steps"] = c.ode_steps;
  h["tnme_epsilon"] = c.tnme_epsilon;
  h["order_only"] = c.order_only;
  h["exogenous"] = {{"kind", to_string(c.exogenous.kind)},
                    {"components", c.exogenous.components},
                    {"flow_layers", c.exogenous.flow_layers},
                    {"flow_hidden", c.exogenous.flow_hidden}};
  h["graph"] = io::graph_to_json(model.graph());
  h["mean"] = model.mean();
  h["scale"] = model.scale();
  h["seed"] = seed;
  h["parameter_count"] = model.parameter_count();
  return h;
}

}  // namespace

std::string checkpoint_header(const TmScmModel& model, std::uint64_t seed) { return header_json(model, seed).dump(); }

void save_checkpoint(const TmScmModel& model, std::uint64_t seed, const std::filesystem::path& path) {
  const std::string header = checkpoint_header(model, seed);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write checkpoint " + path.string());
  const std::uint64_t len = header.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const Vec& theta = model.parameters();
  out.write(reinterpret_cast<const char*>(theta.data()), static_cast<std::streamsize>(theta.size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  require(in && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorCode::Io, "not a checkpoint: " + path.string());
  require(len < (1u << 26), ErrorCode::Io, "checkpoint header is implausibly large");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  require(static_cast<bool>(in), ErrorCode::Io, "truncated checkpoint header");

  LoadedCheckpoint out;
  std::size_t count = 0;
  Vec mean, scale;
  ModelConfig c;
  CausalGraph graph;
  try {
    const auto h = nlohmann::json::parse(header);
    c.family = family_from_string(h.at("family").get<std::string>());
    c.hidden = h.at("hidden").get<std::vector<std::size_t>>();
    c.layers = h.at("layers").get<std::size_t>();
    c.ode_steps = h.at("ode_steps").get<std::size_t>();
    c.tnme_epsilon = h.at("tnme_epsilon").get<double>();
    c.order_only = h.at("order_only").get<bool>();
    const auto& e = h.at("exogenous");
    c.exogenous.kind = exogenous_kind_from_string(e.at("kind").get<std::string>());
    c.exogenous.components = e.at("components").get<std::size_t>();
    c.exogenous.flow_layers = e.at("flow_layers").get<std::size_t>();
    c.exogenous.flow_hidden = e.at("flow_hidden").get<std::vector<std::size_t>>();
    graph = io::graph_from_json(h.at("graph"));
    mean = h.at("mean").get<Vec>();
    scale = h.at("scale").get<Vec>();
    out.seed = h.at("seed").get<std::uint64_t>();
    count = h.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, std::string("corrupt checkpoint header: ") + e.what());
  }
  out.model = TmScmModel::create(graph, c);
  require(out.model->parameter_count() == count, ErrorCode::Io, "checkpoint parameter count does not match its model");
  Vec theta(count);
  in.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(count * sizeof(double)));
  require(static_cast<bool>(in), ErrorCode::Io, "truncated checkpoint parameters");
  out.model->set_parameters(std::move(theta));
  out.model->set_standardization(std::move(mean), std::move(scale));
  return out;
}

}  // namespace tmscm::models
