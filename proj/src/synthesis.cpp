#include "tmscm/synthesis.hpp"

#include <cmath>
#include <memory>

#include "tmscm/error.hpp"
#include "tmscm/io.hpp"
#include "tmscm/parallel.hpp"

namespace tmscm::synth {

std::string to_string(MechanismKind kind) { return kind == MechanismKind::DiagAffine ? "diag-affine" : "tril-affine"; }

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::StandardNormal ? "standard-normal" : "gaussian-mixture";
}

void GeneratorConfig::validate() const {
  require(nodes >= 1, ErrorCode::ConfigError, "generator needs at least one node");
  require(edge_prob >= 0 && edge_prob <= 1, ErrorCode::ConfigError, "edge probability must lie in [0, 1]");
  require(dims.empty() || dims.size() == nodes, ErrorCode::ConfigError, "one dimension per node is required");
  for (std::size_t d : dims) require(d >= 1, ErrorCode::ConfigError, "node dimensions must be positive");
  require(dim_min >= 1 && dim_min <= dim_max, ErrorCode::ConfigError, "invalid node dimension range");
  require(embed_width >= 1, ErrorCode::ConfigError, "embedding width must be positive");
}

GeneratorConfig preset(const std::string& name) {
  GeneratorConfig c;
  if (name == "er-diag" || name == "er-tril") {
    c.nodes = 10;
    c.edge_prob = 0.3;
    c.dim_min = 1;
    c.dim_max = 3;
    c.mechanism = name == "er-diag" ? MechanismKind::DiagAffine : MechanismKind::TrilAffine;
  } else if (name == "tm-scm-sym") {
    c.nodes = 4;
    c.edge_prob = 0.6;
    c.dim_min = 1;
    c.dim_max = 2;
    c.mechanism = MechanismKind::TrilAffine;
  } else {
    fail(ErrorCode::ConfigError, "unknown generator preset '" + name + "'");
  }
  return c;
}

namespace {

struct NodeParams {
  std::size_t dim = 1, pdim = 0, width = 0;
  Vec w1, c1, wb, cb, ws, ls, wl, cl;
};

Vec uniform_vec(Rng& rng, std::size_t n, double scale) {
  Vec v(n);
  for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return v;
}

NodeParams draw_params(Rng& rng, std::size_t d, std::size_t pdim, std::size_t width, bool tril) {
  NodeParams p;
  p.dim = d;
  p.pdim = pdim;
  p.width = pdim == 0 ? 0 : width;
  // Read-out weights are scaled by 1/√width so b and the scale jitter stay O(1).
  const double out_scale = p.width == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(p.width));
  p.w1 = uniform_vec(rng, p.width * pdim, 1.0);
  p.c1 = uniform_vec(rng, p.width, 1.0);
  p.wb = uniform_vec(rng, d * p.width, out_scale);
  p.cb = uniform_vec(rng, d, 1.0);
  p.ws = uniform_vec(rng, d * p.width, out_scale);
  p.ls.resize(d);
  for (double& x : p.ls) x = rng.uniform(std::log(0.5), std::log(2.0));
  if (tril) {
    const std::size_t off = d * (d - 1) / 2;
    p.wl = uniform_vec(rng, off * p.width, out_scale);
    p.cl = uniform_vec(rng, off, 0.5);
  }
  return p;
}

// (b, lower-triangular L row-major) at parent values.
std::pair<Vec, Vec> affine_at(const NodeParams& p, std::span<const double> pa, bool tril) {
  Vec h(p.width);
  for (std::size_t k = 0; k < p.width; ++k) {
    double s = p.c1[k];
    for (std::size_t q = 0; q < p.pdim; ++q) s += p.w1[k * p.pdim + q] * pa[q];
    h[k] = std::tanh(s);
  }
  auto read = [&](const Vec& w, std::size_t row) {
    double s = 0;
    for (std::size_t k = 0; k < p.width; ++k) s += w[row * p.width + k] * h[k];
    return s;
  };
  const std::size_t d = p.dim;
  Vec b(d), l(d * d, 0.0);
  std::size_t off = 0;
  for (std::size_t j = 0; j < d; ++j) {
    b[j] = p.cb[j] + read(p.wb, j);
    l[j * d + j] = std::exp(p.ls[j] + 0.5 * std::tanh(read(p.ws, j)));
    if (tril)
      for (std::size_t k = 0; k < j; ++k, ++off) l[j * d + k] = p.cl[off] + read(p.wl, off);
  }
  return {b, l};
}

Mechanism make_mechanism(NodeId id, const std::vector<NodeId>& parents, NodeParams params, bool tril) {
  auto p = std::make_shared<const NodeParams>(std::move(params));
  Mechanism m;
  m.node = id;
  m.dim = p->dim;
  m.parents = parents;
  m.signature = tri::Signature::increasing(p->dim);
  m.invertible_in_noise = true;
  m.family = tril ? "tril-affine" : "diag-affine";
  m.eval = [p, tril](std::span<const double> pa, std::span<const double> u) {
    const auto [b, l] = affine_at(*p, pa, tril);
    const std::size_t d = p->dim;
    Vec v(d);
    for (std::size_t j = 0; j < d; ++j) {
      double s = b[j];
      for (std::size_t k = 0; k <= j; ++k) s += l[j * d + k] * u[k];
      v[j] = s;
    }
    return v;
  };
  m.inverse = [p, tril](std::span<const double> pa, std::span<const double> v) {
    const auto [b, l] = affine_at(*p, pa, tril);
    const std::size_t d = p->dim;
    Vec u(d);
    for (std::size_t j = 0; j < d; ++j) {
      double s = v[j] - b[j];
      for (std::size_t k = 0; k < j; ++k) s -= l[j * d + k] * u[k];
      u[j] = s / l[j * d + j];
    }
    return u;
  };
  return m;
}

}  // namespace

Scm gen_ground_truth(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::vector<CausalGraph::NodeSpec> specs;
  for (std::size_t i = 0; i < config.nodes; ++i) {
    CausalGraph::NodeSpec s;
    s.id = NodeId{static_cast<int>(i + 1)};
    s.dim = config.dims.empty() ? config.dim_min + rng.index(config.dim_max - config.dim_min + 1) : config.dims[i];
    for (std::size_t k = 0; k < i; ++k)
      if (rng.bernoulli(config.edge_prob)) s.parents.push_back(NodeId{static_cast<int>(k + 1)});
    specs.push_back(std::move(s));
  }
  CausalGraph graph(specs);
  const bool tril = config.mechanism == MechanismKind::TrilAffine;
  std::map<NodeId, Mechanism> mechanisms;
  ExogenousSpec exo;
  for (const auto& s : specs) {
    NodeParams p = draw_params(rng, s.dim, graph.parent_dim(s.id), config.embed_width, tril);
    mechanisms.emplace(s.id, make_mechanism(s.id, graph.parents(s.id), std::move(p), tril));
    if (config.noise == NoiseKind::StandardNormal) {
      exo.nodes.emplace(s.id, NodeNoise::standard_normal(s.dim));
    } else {
      exo.nodes.emplace(s.id, NodeNoise::mixture({0.5, 0.5}, {Vec(s.dim, -1.0), Vec(s.dim, 1.0)},
                                                 {Vec(s.dim, 0.5), Vec(s.dim, 0.5)}));
    }
  }
  return Scm(std::move(graph), std::move(mechanisms), std::move(exo));
}

Matrix sample_observational(const Scm& scm, const Vectorization& vec, std::size_t n, std::uint64_t seed) {
  Matrix out(n, vec.total_dim());
  parallel_for(n, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const Vec v = vec.flatten(solve(scm, scm.sample_exogenous(rng)));
    std::copy(v.begin(), v.end(), out.row_span(i).begin());
  });
  return out;
}

CounterfactualDataset gen_dataset(const Scm& scm, const DatasetSizes& sizes, std::uint64_t seed) {
  CounterfactualDataset ds;
  ds.seed = seed;
  ds.graph = scm.graph();
  ds.vec = Vectorization(ds.graph);
  ds.train = sample_observational(scm, ds.vec, sizes.train, derive_seed(seed, 0));
  ds.test = sample_observational(scm, ds.vec, sizes.test, derive_seed(seed, 1));
  ds.records.resize(sizes.counterfactual);
  const auto& nodes = ds.graph.nodes();
  const std::uint64_t cf_seed = derive_seed(seed, 2);
  parallel_for(sizes.counterfactual, [&](std::size_t k) {
    Rng rng = Rng::stream(cf_seed, k);
    const NodeValues u = scm.sample_exogenous(rng);
    const NodeId target = nodes[rng.index(nodes.size())];
    const NodeValues other = solve(scm, scm.sample_exogenous(rng));
    CounterfactualRecord& r = ds.records[k];
    r.u = ds.vec.flatten(u);
    r.factual = ds.vec.flatten(solve(scm, u));
    r.x.targets[target] = other.at(target);
    r.counterfactual = ds.vec.flatten(potential_response(scm, r.x, u));
  });
  return ds;
}

double replay_error(const CounterfactualDataset& ds, const Scm& scm) {
  for (NodeId id : ds.graph.nodes())
    require(scm.graph().contains(id) && scm.graph().dim(id) == ds.graph.dim(id), ErrorCode::DimMismatch,
            "SCM does not match the dataset graph at node " + to_string(id));
  require(scm.graph().size() == ds.graph.size(), ErrorCode::DimMismatch, "SCM does not match the dataset graph");
  double worst = 0;
  auto track = [&](const Vec& a, std::span<const double> b) {
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  };
  const Matrix train = sample_observational(scm, ds.vec, ds.train.rows(), derive_seed(ds.seed, 0));
  const Matrix test = sample_observational(scm, ds.vec, ds.test.rows(), derive_seed(ds.seed, 1));
  track(train.storage(), ds.train.data());
  track(test.storage(), ds.test.data());
  for (const auto& r : ds.records) {
    const NodeValues u = ds.vec.unflatten(r.u);
    track(ds.vec.flatten(solve(scm, u)), r.factual);
    track(ds.vec.flatten(potential_response(scm, r.x, u)), r.counterfactual);
  }
  return worst;
}

nlohmann::ordered_json intervention_to_json(const Intervention& x) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, value] : x.targets) j[std::to_string(id.value)] = value;
  return j;
}

Intervention intervention_from_json(const nlohmann::json& j) {
  Intervention x;
  try {
    require(j.is_object(), ErrorCode::InvalidConfig, "intervention must be an object of node id -> values");
    for (const auto& [key, value] : j.items()) x.targets[NodeId{std::stoi(key)}] = value.get<Vec>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("intervention: ") + e.what());
  } catch (const std::logic_error&) {
    fail(ErrorCode::InvalidConfig, "intervention keys must be node ids");
  }
  return x;
}

nlohmann::ordered_json generator_to_json(const GeneratorConfig& c) {
  return {{"nodes", c.nodes},         {"edge_prob", c.edge_prob},         {"dims", c.dims},
          {"dim_min", c.dim_min},     {"dim_max", c.dim_max},             {"mechanism", to_string(c.mechanism)},
          {"embed_width", c.embed_width}, {"noise", to_string(c.noise)}, {"seed", c.seed}};
}

GeneratorConfig generator_from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
  c.nodes = j.at("nodes").get<std::size_t>();
  c.edge_prob = j.at("edge_prob").get<double>();
  c.dims = j.at("dims").get<std::vector<std::size_t>>();
  c.dim_min = j.at("dim_min").get<std::size_t>();
  c.dim_max = j.at("dim_max").get<std::size_t>();
  const auto mech = j.at("mechanism").get<std::string>();
  require(mech == "diag-affine" || mech == "tril-affine", ErrorCode::InvalidConfig, "unknown mechanism " + mech);
  c.mechanism = mech == "diag-affine" ? MechanismKind::DiagAffine : MechanismKind::TrilAffine;
  c.embed_width = j.at("embed_width").get<std::size_t>();
  const auto noise = j.at("noise").get<std::string>();
  require(noise == "standard-normal" || noise == "gaussian-mixture", ErrorCode::InvalidConfig,
          "unknown noise " + noise);
  c.noise = noise == "standard-normal" ? NoiseKind::StandardNormal : NoiseKind::GaussianMixture;
  c.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("generator config: ") + e.what());
  }
  return c;
}


void write_dataset(const CounterfactualDataset& ds, const std::filesystem::path& dir, const nlohmann::ordered_json& run) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  const std::string train = io::matrix_bytes(ds.train);
  const std::string test = io::matrix_bytes(ds.test);
  std::string cf;
  for (const auto& r : ds.records) {
    nlohmann::ordered_json j;
    j["factual"] = r.factual;
    j["intervention"] = intervention_to_json(r.x);
    j["counterfactual"] = r.counterfactual;
    j["u"] = r.u;
    cf += j.dump() + "\n";
  }
  io::write_file(dir / "train.f64", train);
  io::write_file(dir / "test.f64", test);
  io::write_file(dir / "cf.jsonl", cf);

  nlohmann::ordered_json m;
  m["format"] = 1;
  m["seed"] = ds.seed;
  m["generator"] = generator_to_json(ds.config);
  m["graph"] = io::graph_to_json(ds.graph);
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (NodeId id : ds.vec.order())
    blocks.push_back({{"node", id.value}, {"offset", ds.vec.offset(id)}, {"dim", ds.vec.dim(id)}});
  m["vectorization"] = {{"total_dim", ds.vec.total_dim()}, {"blocks", blocks}};
  m["splits"] = {
      {"train", {{"file", "train.f64"}, {"rows", ds.train.rows()}, {"cols", ds.train.cols()}, {"checksum", io::fnv1a64(train)}}},
      {"test", {{"file", "test.f64"}, {"rows", ds.test.rows()}, {"cols", ds.test.cols()}, {"checksum", io::fnv1a64(test)}}},
      {"counterfactual", {{"file", "cf.jsonl"}, {"records", ds.records.size()}, {"checksum", io::fnv1a64(cf)}}}};
  if (!run.is_null()) m["run"] = run;
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

CounterfactualDataset read_dataset(const std::filesystem::path& dir) {
  CounterfactualDataset ds;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, std::string("corrupt manifest: ") + e.what());
  }
  auto load = [&](const char* split) {
    const auto& s = m.at("splits").at(split);
    const std::string bytes = io::read_file(dir / s.at("file").get<std::string>());
    require(io::fnv1a64(bytes) == s.at("checksum").get<std::string>(), ErrorCode::Io,
            std::string("checksum mismatch in split ") + split);
    return bytes;
  };
  try {
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.config = generator_from_json(m.at("generator"));
    ds.graph = io::graph_from_json(m.at("graph"));
    ds.vec = Vectorization(ds.graph);
    const auto& tr = m.at("splits").at("train");
    ds.train = io::matrix_from_bytes(load("train"), tr.at("rows").get<std::size_t>(), tr.at("cols").get<std::size_t>());
    const auto& te = m.at("splits").at("test");
    ds.test = io::matrix_from_bytes(load("test"), te.at("rows").get<std::size_t>(), te.at("cols").get<std::size_t>());
    const std::string cf = load("counterfactual");
    std::size_t start = 0;
    while (start < cf.size()) {
      const std::size_t end = cf.find('\n', start);
      const auto j = nlohmann::json::parse(cf.substr(start, end - start));
      CounterfactualRecord r;
      r.factual = j.at("factual").get<Vec>();
      r.x = intervention_from_json(j.at("intervention"));
      r.counterfactual = j.at("counterfactual").get<Vec>();
      r.u = j.at("u").get<Vec>();
      ds.records.push_back(std::move(r));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    require(ds.records.size() == m.at("splits").at("counterfactual").at("records").get<std::size_t>(), ErrorCode::Io,
            "counterfactual record count differs from the manifest");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, std::string("corrupt dataset: ") + e.what());
  }
  return ds;
}

}  // namespace tmscm::synth
